"""
Quaternion regression head: linear layer, q-normalization and dot-product loss.

The normalization layer maps a raw 4-vector ``Q`` to ``q = Q / |Q|``; the
loss is ``L = (1 - q . q_gt) / 2``. Since ``dL/dq = -q_gt / 2`` and
``dq/dQ = (I - q q^T) / |Q|``, the gradient reaching the linear layer is the
component of ``-q_gt / 2`` orthogonal to ``q``, scaled by ``1 / |Q|``.

Training uses SGD with momentum, L2 weight decay and a step learning-rate
schedule on a synthetic task (see ``ToyTask``) standing in for the
convolutional trunk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from bboxpose.errors import DegenerateInput, InvalidInput
from bboxpose.rotation import random_rotation

_MIN_NORM = 1e-12
_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 4e-3
    step_size: int = 10_000
    gamma: float = 0.8
    batch_size: int = 24
    iterations: int = 2000
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if not self.base_lr > 0:
            raise InvalidInput(f"base_lr must be positive, got {self.base_lr}")
        if not 0 <= self.momentum < 1:
            raise InvalidInput(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0 < self.gamma <= 1:
            raise InvalidInput(f"gamma must be in (0, 1], got {self.gamma}")
        if self.step_size < 1 or self.batch_size < 1 or self.iterations < 0:
            raise InvalidInput("step_size and batch_size must be >= 1, iterations >= 0")

    def lr_at(self, iteration: int) -> float:
        """Step policy: ``base_lr * gamma ** (iteration // step_size)``."""
        return self.base_lr * self.gamma ** (iteration // self.step_size)


@dataclass
class HeadParams:
    W: np.ndarray  # (4, d)
    b: np.ndarray  # (4,)

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "HeadParams":
        return HeadParams(self.W.copy(), self.b.copy())

    @classmethod
    def xavier(cls, dim: int, rng: np.random.Generator) -> "HeadParams":
        # Caffe-style Xavier: U(-a, a) with a = sqrt(3 / fan_in); zero bias
        a = np.sqrt(3.0 / dim)
        return cls(rng.uniform(-a, a, size=(4, dim)), np.zeros(4))


@dataclass
class HeadGrads:
    W: np.ndarray
    b: np.ndarray


def _as_raw(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape[-1] != 4:
        raise InvalidInput(f"expected a trailing dimension of 4, got shape {Q.shape}")
    return Q


def _check_unit(q, name):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=-1)
    if q.shape[-1] != 4 or np.any(np.abs(n - 1.0) > _UNIT_TOL):
        raise InvalidInput(f"{name} must be unit 4-vectors (norm {n})")
    return q


def qnorm_forward(Q) -> np.ndarray:
    """Divide by the Euclidean norm (last axis). Not canonicalized."""
    Q = _as_raw(Q)
    A = np.linalg.norm(Q, axis=-1, keepdims=True)
    if np.any(A <= _MIN_NORM):
        raise DegenerateInput("cannot normalize a (near) zero quaternion output")
    return Q / A


def dot_loss(q_hat, q_gt) -> np.ndarray:
    """``(1 - q_hat . q_gt) / 2`` for unit inputs; lies in [0, 1]."""
    q_hat = _check_unit(q_hat, "q_hat")
    q_gt = _check_unit(q_gt, "q_gt")
    return 0.5 * (1.0 - np.sum(q_hat * q_gt, axis=-1))


def dot_loss_grad(q_hat, q_gt) -> np.ndarray:
    """Gradient of ``dot_loss`` w.r.t. ``q_hat``; independent of ``q_hat``."""
    _check_unit(q_hat, "q_hat")
    q_gt = _check_unit(q_gt, "q_gt")
    return -0.5 * q_gt


def qnorm_jacobian(Q) -> np.ndarray:
    """``dq_j / dQ_i = (delta_ij - q_i q_j) / |Q|``, symmetric 4x4."""
    Q = _as_raw(Q).reshape(4)
    q = qnorm_forward(Q)
    return (np.eye(4) - np.outer(q, q)) / np.linalg.norm(Q)


def qnorm_backward(Q, q_gt) -> np.ndarray:
    """Gradient of ``dot_loss(qnorm_forward(Q), q_gt)`` with respect to ``Q``.

    Works row-wise on ``(n, 4)`` batches.
    """
    Q = _as_raw(Q)
    q_gt = _check_unit(q_gt, "q_gt")
    A = np.linalg.norm(Q, axis=-1, keepdims=True)
    if np.any(A <= _MIN_NORM):
        raise DegenerateInput("cannot normalize a (near) zero quaternion output")
    q = Q / A
    g = -0.5 * q_gt
    return (g - np.sum(g * q, axis=-1, keepdims=True) * q) / A


def raw_dot_loss(Q, q_gt) -> np.ndarray:
    """Dot-product loss applied to an unnormalized output (baseline head)."""
    return 0.5 * (1.0 - np.sum(_as_raw(Q) * np.asarray(q_gt, dtype=np.float64), axis=-1))


def head_forward(p: HeadParams, x, normalize: bool = True) -> np.ndarray:
    """``Q = W x + b``, optionally normalized. ``x`` may be ``(d,)`` or ``(n, d)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.dim:
        raise InvalidInput(f"feature dimension {x.shape[-1]} does not match head dimension {p.dim}")
    Q = x @ p.W.T + p.b
    return qnorm_forward(Q) if normalize else Q


def head_loss(p: HeadParams, x, q_gt, normalize: bool = True) -> float:
    """Mean per-sample loss over a batch."""
    out = head_forward(p, x, normalize)
    loss = dot_loss(out, q_gt) if normalize else raw_dot_loss(out, q_gt)
    return float(np.mean(loss))


def head_backward(p: HeadParams, x, q_gt, normalize: bool = True) -> HeadGrads:
    """Exact gradients of ``head_loss`` (batch mean) w.r.t. ``W`` and ``b``."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    X = np.atleast_2d(x)
    G = np.atleast_2d(np.asarray(q_gt, dtype=np.float64))
    Q = head_forward(p, X, normalize=False)
    if normalize:
        gQ = qnorm_backward(Q, G)
    else:
        gQ = -0.5 * np.broadcast_to(G, Q.shape)
    n = len(X) if batched else 1
    return HeadGrads(gQ.T @ X / n, gQ.sum(axis=0) / n)


def sgd_step(p: HeadParams, grads: HeadGrads, velocity: HeadGrads, cfg: TrainConfig, iteration: int):
    """One momentum step with L2 weight decay; returns ``(params, velocity)``.

    ``v <- momentum * v - lr * (grad + weight_decay * param)``, ``param <- param + v``.
    """
    lr = cfg.lr_at(iteration)
    vW = cfg.momentum * velocity.W - lr * (grads.W + cfg.weight_decay * p.W)
    vb = cfg.momentum * velocity.b - lr * (grads.b + cfg.weight_decay * p.b)
    return HeadParams(p.W + vW, p.b + vb), HeadGrads(vW, vb)


TASK_KINDS = ("embedded", "random")


@dataclass
class ToyTask:
    """Fixed unit feature vectors, each paired with a canonical random rotation.

    ``kind="embedded"`` (default) derives each feature from its target through
    a fixed random ``d x 4`` projection plus Gaussian noise, then normalizes
    it, so the features carry the pose the way a trunk's activations would.
    ``kind="random"`` draws features independently of the targets; a linear
    head can then only memorize, and with the default schedule the loss
    falls by roughly a third in 2000 iterations.
    """

    features: np.ndarray  # (n, d)
    targets: np.ndarray  # (n, 4)

    @classmethod
    def make(
        cls, seed: int, n_samples: int = 256, dim: int = 32, kind: str = "embedded", noise: float = 0.1
    ) -> "ToyTask":
        if kind not in TASK_KINDS:
            raise InvalidInput(f"unknown toy task kind {kind!r}; expected one of {TASK_KINDS}")
        rng = np.random.default_rng(seed)
        targets = np.array([random_rotation(s) for s in rng.integers(0, 2**63 - 1, size=n_samples)])
        if kind == "embedded":
            proj = rng.standard_normal((dim, 4))
            f = targets @ proj.T + noise * rng.standard_normal((n_samples, dim))
        else:
            f = rng.standard_normal((n_samples, dim))
        f /= np.linalg.norm(f, axis=1, keepdims=True)
        return cls(f, targets)


@dataclass
class TrainResult:
    params: HeadParams
    loss: np.ndarray  # training loss per iteration
    eval_loss: np.ndarray  # dot loss of the normalized predictions per iteration
    lr: np.ndarray
    max_norm_error: float  # max | |prediction| - 1 |, only meaningful with normalize=True
    config: TrainConfig = field(default_factory=TrainConfig)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "lr", "loss", "eval_loss"])
            for i, (lr, loss, ev) in enumerate(zip(self.lr, self.loss, self.eval_loss)):
                w.writerow([i, repr(float(lr)), repr(float(loss)), repr(float(ev))])


def train_toy(
    task_seed: int, cfg: TrainConfig | None = None, task: ToyTask | None = None, kind: str = "embedded"
) -> TrainResult:
    """Train a fresh head on the toy task and record the loss at every iteration.

    ``task_seed`` fixes the task; ``cfg.seed`` fixes initialization and batch
    sampling. Two runs that differ only in ``normalize`` therefore share
    task, initial weights and the batch sequence.
    """
    cfg = cfg or TrainConfig()
    task = task or ToyTask.make(task_seed, kind=kind)
    rng = np.random.default_rng(cfg.seed)
    params = HeadParams.xavier(task.features.shape[1], rng)
    velocity = HeadGrads(np.zeros_like(params.W), np.zeros_like(params.b))
    losses = np.empty(cfg.iterations)
    eval_losses = np.empty(cfg.iterations)
    lrs = np.empty(cfg.iterations)
    max_norm_error = 0.0
    for it in range(cfg.iterations):
        idx = rng.integers(0, len(task.features), size=cfg.batch_size)
        x, q_gt = task.features[idx], task.targets[idx]
        raw = head_forward(params, x, normalize=False)
        q_hat = qnorm_forward(raw)
        if cfg.normalize:
            max_norm_error = max(max_norm_error, float(np.max(np.abs(np.linalg.norm(q_hat, axis=1) - 1.0))))
            losses[it] = np.mean(dot_loss(q_hat, q_gt))
        else:
            losses[it] = np.mean(raw_dot_loss(raw, q_gt))
        eval_losses[it] = np.mean(0.5 * (1.0 - np.sum(q_hat * q_gt, axis=1)))
        lrs[it] = cfg.lr_at(it)
        grads = head_backward(params, x, q_gt, cfg.normalize)
        params, velocity = sgd_step(params, grads, velocity, cfg, it)
    return TrainResult(params, losses, eval_losses, lrs, max_norm_error, cfg)


def paired_runs(
    task_seed: int, cfg: TrainConfig | None = None, kind: str = "embedded"
) -> tuple[TrainResult, TrainResult]:
    """Normalized and unnormalized runs sharing task, initialization and batches."""
    cfg = cfg or TrainConfig()
    task = ToyTask.make(task_seed, kind=kind)
    return (
        train_toy(task_seed, replace(cfg, normalize=True), task),
        train_toy(task_seed, replace(cfg, normalize=False), task),
    )
