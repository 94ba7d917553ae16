"""Central finite-difference checks for the quaternion head gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bboxpose.qhead import HeadParams, dot_loss, head_backward, head_loss, qnorm_backward, qnorm_forward
from bboxpose.rotation import random_rotation

REL_TOL = 1e-6
ABS_TOL = 1e-8


def numerical_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x`` (any shape)."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + eps
        fp = f(x)
        x[idx] = orig - eps
        fm = f(x)
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * eps)
    return g


def grad_error(analytic, numeric) -> float:
    """Largest violation ratio; ``<= 1`` means within REL_TOL relative or ABS_TOL absolute."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    diff = np.abs(a - n)
    allowed = np.maximum(REL_TOL * np.maximum(np.abs(a), np.abs(n)), ABS_TOL)
    return float(np.max(diff / allowed))


def max_relative_error(analytic, numeric) -> float:
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), ABS_TOL / REL_TOL)
    return float(np.max(np.abs(a - n) / scale))


@dataclass
class GradCheckReport:
    trials: int
    qnorm_failures: int
    head_failures: int
    qnorm_max_rel: float
    head_max_rel: float

    @property
    def passed(self) -> bool:
        return self.qnorm_failures == 0 and self.head_failures == 0

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "passed": self.passed,
            "qnorm_failures": self.qnorm_failures,
            "head_failures": self.head_failures,
            "qnorm_max_rel_error": self.qnorm_max_rel,
            "head_max_rel_error": self.head_max_rel,
        }


def check_qnorm(rng: np.random.Generator, eps: float = 1e-5) -> tuple[float, float]:
    Q = rng.standard_normal(4)
    q_gt = random_rotation(int(rng.integers(0, 2**63 - 1)))
    analytic = qnorm_backward(Q, q_gt)
    numeric = numerical_grad(lambda v: float(dot_loss(qnorm_forward(v), q_gt)), Q, eps)
    return grad_error(analytic, numeric), max_relative_error(analytic, numeric)


def check_head(rng: np.random.Generator, eps: float = 1e-5, dim: int = 8, batch: int = 3) -> tuple[float, float]:
    normalize = bool(rng.integers(0, 2))
    p = HeadParams(rng.standard_normal((4, dim)) * 0.5, rng.standard_normal(4) * 0.5)
    x = rng.standard_normal((batch, dim))
    q_gt = np.array([random_rotation(int(s)) for s in rng.integers(0, 2**63 - 1, size=batch)])
    grads = head_backward(p, x, q_gt, normalize)
    num_W = numerical_grad(lambda W: head_loss(HeadParams(W, p.b), x, q_gt, normalize), p.W, eps)
    num_b = numerical_grad(lambda b: head_loss(HeadParams(p.W, b), x, q_gt, normalize), p.b, eps)
    analytic = np.concatenate([grads.W.ravel(), grads.b])
    numeric = np.concatenate([num_W.ravel(), num_b])
    return grad_error(analytic, numeric), max_relative_error(analytic, numeric)


def run_gradcheck(trials: int = 1000, eps: float = 1e-5, seed: int = 0) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    qf = hf = 0
    qmax = hmax = 0.0
    for _ in range(trials):
        ratio, rel = check_qnorm(rng, eps)
        qf += ratio > 1.0
        qmax = max(qmax, rel)
        ratio, rel = check_head(rng, eps)
        hf += ratio > 1.0
        hmax = max(hmax, rel)
    return GradCheckReport(trials, qf, hf, qmax, hmax)
