"""
Pose error metrics.

* translational error: Euclidean distance between translations (meters)
* rotational error: angle of ``R_est @ R_gt^T`` from its trace (degrees)
* average Euler error: mean over roll, pitch and yaw of the wrapped absolute
  angle difference (degrees)
* 5cm 5deg: a pose is correct when both errors are strictly below threshold
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from bboxpose.errors import InvalidInput
from bboxpose.rotation import canonicalize, quat_to_euler, quat_to_matrix

TE_THRESHOLD = 0.05  # meters
RE_THRESHOLD = 5.0  # degrees


@dataclass(frozen=True)
class Pose:
    """Rotation (canonical quaternion) and object translation in the camera frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", canonicalize(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise InvalidInput(f"translation must be finite, got {t}")
        object.__setattr__(self, "translation", t)

    @property
    def R(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def to_json(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "Pose":
        try:
            return cls(np.asarray(data["rotation"], dtype=float), np.asarray(data["translation"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"bad pose record {data!r}: {exc}") from exc


def translational_error(t_est, t_gt) -> float:
    return float(np.linalg.norm(np.asarray(t_gt, dtype=float) - np.asarray(t_est, dtype=float)))


def rotational_error(R_est, R_gt) -> float:
    """Angle in degrees of the relative rotation ``R_est R_gt^T``, in [0, 180].

    The cosine comes from the trace as usual. The sine is taken from the
    skew part so the angle stays accurate near 0 and 180 degrees, where
    ``arccos`` of the trace alone loses about 1e-6 degrees.
    """
    M = np.asarray(R_est, dtype=float) @ np.asarray(R_gt, dtype=float).T
    cos_angle = 0.5 * (np.trace(M) - 1.0)
    # rounding can push the trace slightly outside [-1, 3]
    cos_angle = min(1.0, max(-1.0, cos_angle))
    axis = np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    sin_angle = 0.5 * float(np.linalg.norm(axis))
    return float(np.degrees(np.arctan2(sin_angle, cos_angle)))


def rotational_error_quat(q_est, q_gt) -> float:
    """Same angle as ``rotational_error``, from quaternions: ``2 acos |q_est . q_gt|``.

    Evaluated as ``2 atan2(|v|, |w|)`` on the relative quaternion ``(w, v)``
    for accuracy near zero.
    """
    a = canonicalize(q_est)
    b = canonicalize(q_gt)
    w = abs(float(np.dot(a, b)))
    v = a[0] * b[1:] - b[0] * a[1:] - np.cross(a[1:], b[1:])
    return float(np.degrees(2.0 * np.arctan2(np.linalg.norm(v), w)))


def wrapped_angle_diff(a, b) -> np.ndarray:
    """Absolute difference of angles in degrees, wrapped into [0, 180]."""
    d = np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 360.0)
    return np.minimum(d, 360.0 - d)


def avg_euler_error(q_est, q_gt) -> float:
    e_est = quat_to_euler(q_est)
    e_gt = quat_to_euler(q_gt)
    return float(np.mean(wrapped_angle_diff(e_est, e_gt)))


def pose_correct_5cm5deg(est: Pose, gt: Pose) -> bool:
    return (
        translational_error(est.translation, gt.translation) < TE_THRESHOLD
        and rotational_error(est.R, gt.R) < RE_THRESHOLD
    )


@dataclass(frozen=True)
class MetricReport:
    label: str
    count: int
    mean_euler_error: float
    accuracy_5cm5deg: float  # percent
    mean_te: float
    mean_re: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AggregateReport:
    per_label: dict[str, MetricReport]
    overall: MetricReport

    def to_json(self) -> dict:
        return {
            "objects": {k: v.to_json() for k, v in self.per_label.items()},
            "overall": self.overall.to_json(),
        }

    def table(self) -> str:
        rows = list(self.per_label.values()) + [self.overall]
        width = max(len("object"), *(len(r.label) for r in rows))
        header = f"{'object':<{width}}  {'n':>5}  {'euler':>8}  {'5cm5deg%':>8}  {'e_TE(m)':>9}  {'e_RE(deg)':>9}"
        lines = [header, "-" * len(header)]
        for r in rows:
            lines.append(
                f"{r.label:<{width}}  {r.count:>5d}  {r.mean_euler_error:>8.2f}  "
                f"{r.accuracy_5cm5deg:>8.2f}  {r.mean_te:>9.4f}  {r.mean_re:>9.2f}"
            )
        return "\n".join(lines)


def _report(label: str, pairs: Sequence[tuple[Pose, Pose]]) -> MetricReport:
    euler = [avg_euler_error(e.rotation, g.rotation) for e, g in pairs]
    te = [translational_error(e.translation, g.translation) for e, g in pairs]
    re = [rotational_error(e.R, g.R) for e, g in pairs]
    correct = [t < TE_THRESHOLD and r < RE_THRESHOLD for t, r in zip(te, re)]
    # fsum keeps the means independent of input order
    n = len(pairs)
    return MetricReport(
        label=label,
        count=n,
        mean_euler_error=math.fsum(euler) / n,
        accuracy_5cm5deg=100.0 * sum(correct) / n,
        mean_te=math.fsum(te) / n,
        mean_re=math.fsum(re) / n,
    )


def aggregate(pairs: Iterable[tuple[Pose, Pose, str]]) -> AggregateReport:
    """Per-label and overall reports from ``(estimate, ground_truth, label)`` triples."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidInput("cannot aggregate an empty list of poses")
    groups: dict[str, list[tuple[Pose, Pose]]] = defaultdict(list)
    for est, gt, label in pairs:
        groups[str(label)].append((est, gt))
    per_label = {label: _report(label, groups[label]) for label in sorted(groups)}
    overall = _report("overall", [(e, g) for e, g, _ in pairs])
    return AggregateReport(per_label, overall)
