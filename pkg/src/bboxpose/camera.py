"""
Pinhole projection.

Throughout this package ``camera_center`` denotes the camera position in the
object frame, so a point ``X`` (object frame) projects as::

    depth * [u, v, 1]^T = K @ R @ (X - camera_center)

The object translation in the camera frame is ``-R @ camera_center``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from bboxpose.errors import BehindCamera, InvalidInput

_MIN_DEPTH = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    """Skew-free pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidInput(f"intrinsics must be finite, got {vals}")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInput(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def principal_point(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def to_json(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_json(cls, data: dict) -> "CameraIntrinsics":
        try:
            return cls(float(data["fx"]), float(data["fy"]), float(data["cx"]), float(data["cy"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"bad intrinsics record {data!r}: {exc}") from exc


class PixelPoint(NamedTuple):
    u: float
    v: float
    depth: float


def project_points(K: CameraIntrinsics, R, camera_center, points) -> np.ndarray:
    """Project an ``(n, 3)`` array of object points.

    Returns an ``(n, 3)`` array of ``(u, v, depth)`` rows. No visibility check
    is made; callers decide what to do with non-positive depths.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    cam = (pts - np.asarray(camera_center, dtype=np.float64)) @ np.asarray(R).T
    depth = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.fx * cam[:, 0] / depth + K.cx
        v = K.fy * cam[:, 1] / depth + K.cy
    return np.column_stack([u, v, depth])


def project(K: CameraIntrinsics, R, camera_center, X) -> PixelPoint:
    """Project a single object-frame point.

    Raises
    ------
    BehindCamera
        If the point's camera-frame depth is not positive.
    """
    u, v, depth = project_points(K, R, camera_center, X)[0]
    if not depth > _MIN_DEPTH:
        raise BehindCamera(f"point {np.asarray(X).tolist()} has depth {depth:.6g}")
    return PixelPoint(float(u), float(v), float(depth))


def backproject(K: CameraIntrinsics, pixel, depth: float) -> np.ndarray:
    """Camera-frame point at the given depth on the ray through ``pixel``."""
    u, v = pixel
    return depth * np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])


def estimate_T0(K: CameraIntrinsics, R, center, z_guess: float = 100.0) -> np.ndarray:
    """Provisional camera center placing the object origin on the ray through ``center``.

    ``T0 = -z_guess * (K R)^-1 [u0, v0, 1]^T``. It is only used to rank the
    projected cloud points, not as a pose estimate.
    """
    if not z_guess > 0:
        raise InvalidInput(f"z_guess must be positive, got {z_guess}")
    # (K R)^-1 = R^T K^-1 for a rotation
    return -np.asarray(R, dtype=np.float64).T @ backproject(K, center, z_guess)
