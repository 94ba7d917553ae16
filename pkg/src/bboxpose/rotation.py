"""
Quaternion, rotation matrix and Euler angle conversions.

Conventions
-----------
Quaternions are scalar-first, ``q = [q0, q1, q2, q3] = [w, x, y, z]``, with
Hamilton multiplication. A rotation matrix ``R`` maps object-frame vectors
into the camera frame.

Euler angles are intrinsic Z-Y-X (yaw, then pitch, then roll) in degrees::

    R = Rz(yaw) @ Ry(pitch) @ Rx(roll)

with roll, yaw in (-180, 180] and pitch in [-90, 90].

Canonical quaternions live on one hemisphere: ``q0 > 0``, or ``q0 == 0`` and
the first nonzero of ``(q1, q2, q3)`` positive. Every rotation therefore has
exactly one canonical quaternion.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from bboxpose.errors import DegenerateInput, InvalidRotation

_ORTHO_TOL = 1e-6
_GIMBAL_TOL = 1e-9


class EulerAngles(NamedTuple):
    """Intrinsic Z-Y-X angles in degrees."""

    roll: float
    pitch: float
    yaw: float

    def to_json(self) -> dict:
        return {"roll": float(self.roll), "pitch": float(self.pitch), "yaw": float(self.yaw)}

    @classmethod
    def from_json(cls, data: dict) -> "EulerAngles":
        return cls(float(data["roll"]), float(data["pitch"]), float(data["yaw"]))


def canonicalize(q) -> np.ndarray:
    """Normalize ``q`` and flip it onto the canonical hemisphere.

    Raises
    ------
    DegenerateInput
        If ``q`` has zero (or non-finite) norm.
    """
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise DegenerateInput(f"cannot canonicalize quaternion with norm {n}")
    q = q / n
    if q[0] > 0.0:
        return q
    if q[0] < 0.0:
        return -q
    # q0 == 0: q and -q are both on the boundary, break the tie on the vector part
    for c in q[1:]:
        if c > 0.0:
            return q
        if c < 0.0:
            return -q
    return q  # unreachable for nonzero input


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (Hamilton, scalar-first).

    Every entry is a quadratic form in ``q``, so ``q`` and ``-q`` give
    bit-identical matrices. The input is not renormalized; pass raw
    network outputs through ``canonicalize`` first.
    """
    w, x, y, z = np.asarray(q, dtype=np.float64).reshape(4)
    return np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )


def check_rotation(R, tol: float = _ORTHO_TOL) -> np.ndarray:
    """Return ``R`` as a float array, raising InvalidRotation if it is not in SO(3)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidRotation(f"expected a finite 3x3 matrix, got shape {R.shape}")
    ortho_err = np.max(np.abs(R.T @ R - np.eye(3)))
    if ortho_err > tol:
        raise InvalidRotation(f"matrix is not orthonormal (max |R^T R - I| = {ortho_err:.3g})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise InvalidRotation(f"matrix has determinant {det:.6g}, expected 1")
    return R


def matrix_to_quat(R) -> np.ndarray:
    """Canonical quaternion of a rotation matrix (Shepperd's method).

    The largest of the four diagonal combinations is used as the pivot, which
    keeps the division well conditioned for every rotation angle.
    """
    R = check_rotation(R)
    tr = np.trace(R)
    pivots = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    k = int(np.argmax(pivots))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return canonicalize(q)


def _wrap_half_open(deg: float) -> float:
    # atan2 can return exactly -180; the range is (-180, 180]
    return 180.0 if deg <= -180.0 else deg


def quat_to_euler(q) -> EulerAngles:
    """Z-Y-X Euler angles (degrees) of a unit quaternion.

    At gimbal lock (|pitch| = 90) only ``yaw - roll`` (or ``yaw + roll``) is
    observable; roll is set to zero and the whole rotation is folded into yaw.
    """
    R = quat_to_matrix(q)
    cos_pitch = np.hypot(R[0, 0], R[1, 0])
    pitch = np.degrees(np.arctan2(-R[2, 0], cos_pitch))
    if cos_pitch < _GIMBAL_TOL:
        roll = 0.0
        yaw = np.degrees(np.arctan2(-R[0, 1], R[1, 1]))
    else:
        roll = np.degrees(np.arctan2(R[2, 1], R[2, 2]))
        yaw = np.degrees(np.arctan2(R[1, 0], R[0, 0]))
    return EulerAngles(_wrap_half_open(float(roll)), float(pitch), _wrap_half_open(float(yaw)))


def euler_to_quat(e) -> np.ndarray:
    """Canonical quaternion for Z-Y-X Euler angles given in degrees."""
    roll, pitch, yaw = (np.radians(float(a)) for a in e)
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    # qz(yaw) * qy(pitch) * qx(roll)
    q = [
        cy * cp * cr + sy * sp * sr,
        cy * cp * sr - sy * sp * cr,
        cy * sp * cr + sy * cp * sr,
        sy * cp * cr - cy * sp * sr,
    ]
    return canonicalize(q)


def euler_to_matrix(e) -> np.ndarray:
    """``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` built from elementary rotations."""
    roll, pitch, yaw = (np.radians(float(a)) for a in e)
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def random_rotation(seed) -> np.ndarray:
    """Uniformly distributed canonical rotation, deterministic in ``seed``.

    A normalized 4D standard Gaussian is uniform on the 3-sphere, hence
    uniform (Haar) on SO(3).
    """
    rng = np.random.default_rng(seed)
    while True:
        g = rng.standard_normal(4)
        if np.linalg.norm(g) > 1e-8:
            return canonicalize(g)


def rotation_angle(q) -> float:
    """Rotation angle in degrees, in [0, 180]."""
    q = np.asarray(q, dtype=np.float64)
    w = min(1.0, abs(float(q[0])) / np.linalg.norm(q))
    return float(np.degrees(2.0 * np.arccos(w)))
