"""
Translation from a known rotation and a tight 2D bounding box.

Each side of a tight box is touched by one object point. With the rotation
known, the collinearity condition for that point and that side is linear in
the camera center ``t`` (object frame)::

    (u_K r3 - r1) . t = (u_K r3 - r1) . X      left / right sides
    (v_K r3 - r2) . t = (v_K r3 - r2) . X      top / bottom sides

where ``r1, r2, r3`` are the rows of ``R`` and ``u_K, v_K`` are normalized
image coordinates of the box sides. Stacking the four sides gives the 4x3
system ``A t = X_box``, solved in the least-squares sense. The translation of
the object in the camera frame is then ``-R t``.

Finding which point touches which side is the only nonlinear step. Two
strategies are provided:

``indirect``
    Place the object origin on the ray through the box center at a large
    provisional depth ``z_guess`` and project the cloud. Keeps the oblique
    viewing direction of off-center objects.
``direct``
    Rank points by the x and y components of ``R X``. Equivalent to the
    indirect strategy when the box is centered on the principal point and
    ``z_guess`` tends to infinity.

Both strategies ignore perspective foreshortening across the object, so for
objects that are large relative to their distance they can pick the wrong
touching point. By default the correspondences are therefore re-ranked by
exact projection from the solved camera center and the system re-solved until
the four indices stop changing (one or two rounds in practice). With exact
boxes this fixed point reproduces the true translation to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from bboxpose.camera import CameraIntrinsics, estimate_T0, project_points
from bboxpose.errors import DegenerateGeometry, InvalidInput

COND_LIMIT = 1e12
SIDES = ("left", "right", "top", "bottom")
METHODS = ("indirect", "direct")


@dataclass(frozen=True)
class BBox2D:
    """Axis-aligned pixel box. ``y`` grows downwards, so top < bottom."""

    x_L: float
    y_T: float
    x_R: float
    y_B: float

    def __post_init__(self):
        vals = (self.x_L, self.y_T, self.x_R, self.y_B)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidInput(f"bounding box must be finite, got {vals}")
        if not (self.x_L < self.x_R and self.y_T < self.y_B):
            raise InvalidInput(f"bounding box needs x_L < x_R and y_T < y_B, got {vals}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_L + self.x_R), 0.5 * (self.y_T + self.y_B))

    def as_array(self) -> np.ndarray:
        return np.array([self.x_L, self.y_T, self.x_R, self.y_B])

    @classmethod
    def from_pixels(cls, uv) -> "BBox2D":
        """Tight box around an ``(n, 2)`` array of pixel coordinates."""
        uv = np.asarray(uv, dtype=np.float64)
        return cls(float(uv[:, 0].min()), float(uv[:, 1].min()), float(uv[:, 0].max()), float(uv[:, 1].max()))

    def to_json(self) -> dict:
        return {"xl": self.x_L, "yt": self.y_T, "xr": self.x_R, "yb": self.y_B}

    @classmethod
    def from_json(cls, data: dict) -> "BBox2D":
        try:
            return cls(float(data["xl"]), float(data["yt"]), float(data["xr"]), float(data["yb"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"bad bbox record {data!r}: {exc}") from exc


class CorrespondenceSet(NamedTuple):
    """Cloud indices of the points touching the left, right, top and bottom sides."""

    iL: int
    iR: int
    iT: int
    iB: int


@dataclass
class BBoxSystem:
    """The 4x3 bounding box matrix ``A`` (rows left, right, top, bottom) and ``X_box``."""

    A: np.ndarray
    X_box: np.ndarray
    u_KiL: float
    u_KiR: float
    v_KiT: float
    v_KiB: float

    @property
    def normalized_coords(self) -> np.ndarray:
        return np.array([self.u_KiL, self.u_KiR, self.v_KiT, self.v_KiB])


@dataclass
class TranslationEstimate:
    translation: np.ndarray
    camera_center: np.ndarray
    correspondences: CorrespondenceSet
    system: BBoxSystem
    residual: float
    method: str = "indirect"
    iterations: int = 0
    side_norms: np.ndarray = field(init=False)

    def __post_init__(self):
        self.side_norms = side_vector_norms(self.system)


def _as_cloud(cloud) -> np.ndarray:
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise InvalidInput(f"point cloud must be a non-empty (n, 3) array, got shape {pts.shape}")
    return pts


def _extremes(x, y) -> CorrespondenceSet:
    # argmin/argmax return the first occurrence, i.e. the lowest index on ties
    return CorrespondenceSet(int(np.argmin(x)), int(np.argmax(x)), int(np.argmin(y)), int(np.argmax(y)))


def correspondences_at(K: CameraIntrinsics, R, camera_center, cloud) -> CorrespondenceSet:
    """Extreme points of the exact projection from a given camera center."""
    proj = project_points(K, R, camera_center, _as_cloud(cloud))
    if np.any(proj[:, 2] <= 0):
        raise DegenerateGeometry("part of the cloud lies behind the camera")
    return _extremes(proj[:, 0], proj[:, 1])


def correspondences_indirect(K: CameraIntrinsics, R, box: BBox2D, cloud, z_guess: float = 100.0) -> CorrespondenceSet:
    T0 = estimate_T0(K, R, box.center, z_guess)
    try:
        return correspondences_at(K, R, T0, cloud)
    except DegenerateGeometry as exc:
        raise DegenerateGeometry(
            f"z_guess={z_guess} is smaller than the cloud extent; points fall behind the provisional camera"
        ) from exc


def correspondences_direct(R, cloud) -> CorrespondenceSet:
    rotated = _as_cloud(cloud) @ np.asarray(R, dtype=np.float64).T
    return _extremes(rotated[:, 0], rotated[:, 1])


def find_correspondences(K, R, box, cloud, method: str = "indirect", z_guess: float = 100.0) -> CorrespondenceSet:
    if method == "indirect":
        return correspondences_indirect(K, R, box, cloud, z_guess)
    if method == "direct":
        return correspondences_direct(R, cloud)
    raise InvalidInput(f"unknown correspondence method {method!r}; expected one of {METHODS}")


def normalized_sides(K: CameraIntrinsics, box: BBox2D) -> tuple[float, float, float, float]:
    """Box sides in normalized image coordinates: u with fx, v with fy."""
    return (
        (box.x_L - K.cx) / K.fx,
        (box.x_R - K.cx) / K.fx,
        (box.y_T - K.cy) / K.fy,
        (box.y_B - K.cy) / K.fy,
    )


def assemble_system(R, sides, points) -> BBoxSystem:
    """Build ``A`` and ``X_box`` from normalized side coordinates.

    ``points`` holds the four touching points in left, right, top, bottom order.
    """
    R = np.asarray(R, dtype=np.float64)
    u_L, u_R, v_T, v_B = (float(s) for s in sides)
    r1, r2, r3 = R
    A = np.array([u_L * r3 - r1, u_R * r3 - r1, v_T * r3 - r2, v_B * r3 - r2])
    X_box = np.einsum("ij,ij->i", A, np.asarray(points, dtype=np.float64))
    return BBoxSystem(A, X_box, u_L, u_R, v_T, v_B)


def build_equation(K: CameraIntrinsics, R, box: BBox2D, cloud, corr: CorrespondenceSet) -> BBoxSystem:
    pts = _as_cloud(cloud)
    idx = np.asarray(corr, dtype=np.intp)
    if np.any(idx < 0) or np.any(idx >= len(pts)):
        raise InvalidInput(f"correspondence indices {tuple(corr)} out of range for {len(pts)} points")
    return assemble_system(R, normalized_sides(K, box), pts[idx])


def side_vector_norms(sys: BBoxSystem) -> np.ndarray:
    """Squared norms of the four rows of ``A``."""
    return np.einsum("ij,ij->i", sys.A, sys.A)


def solve_equation(sys: BBoxSystem) -> np.ndarray:
    """Least-squares camera center ``argmin |A t - X_box|`` via QR.

    Raises
    ------
    DegenerateGeometry
        If a pair of opposite sides coincides (zero-width or zero-height box)
        or ``cond(A)`` exceeds ``COND_LIMIT``.
    """
    if sys.u_KiL == sys.u_KiR or sys.v_KiT == sys.v_KiB:
        raise DegenerateGeometry("opposite box sides coincide; depth is unobservable")
    A = np.asarray(sys.A, dtype=np.float64)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(sys.X_box))):
        raise DegenerateGeometry("non-finite bounding box system")
    cond = np.linalg.cond(A)
    if not cond < COND_LIMIT:
        raise DegenerateGeometry(f"bounding box matrix is rank deficient (cond={cond:.3g})")
    Q, Rq = np.linalg.qr(A)
    return np.linalg.solve(Rq, Q.T @ sys.X_box)


def residual_norm(sys: BBoxSystem, camera_center) -> float:
    return float(np.linalg.norm(sys.A @ np.asarray(camera_center) - sys.X_box))


def camera_center_to_translation(R, camera_center) -> np.ndarray:
    """Object origin in the camera frame, ``-R t``."""
    return -np.asarray(R, dtype=np.float64) @ np.asarray(camera_center, dtype=np.float64)


def translation_to_camera_center(R, translation) -> np.ndarray:
    return -np.asarray(R, dtype=np.float64).T @ np.asarray(translation, dtype=np.float64)


def estimate_translation(
    K: CameraIntrinsics,
    R,
    box: BBox2D,
    cloud,
    method: str = "indirect",
    z_guess: float = 100.0,
    refine: bool = True,
    max_refine: int = 10,
) -> TranslationEstimate:
    """Full pipeline with diagnostics: correspondences, system, solve.

    With ``refine=False`` the initial correspondences are used as is. With
    ``refine=True`` they are recomputed from the solved camera center until
    they are stable; ``DegenerateGeometry`` is raised if that does not happen
    within ``max_refine`` rounds or the solution puts the cloud behind the
    camera.
    """
    pts = _as_cloud(cloud)
    R = np.asarray(R, dtype=np.float64)
    corr = find_correspondences(K, R, box, pts, method, z_guess)
    system = build_equation(K, R, box, pts, corr)
    center = solve_equation(system)
    rounds = 0
    if refine:
        while True:
            try:
                new = correspondences_at(K, R, center, pts)
            except DegenerateGeometry as exc:
                raise DegenerateGeometry("solved camera center leaves the cloud behind the camera") from exc
            if new == corr:
                break
            if rounds >= max_refine:
                raise DegenerateGeometry(f"correspondences did not settle within {max_refine} rounds")
            corr = new
            system = build_equation(K, R, box, pts, corr)
            center = solve_equation(system)
            rounds += 1
    return TranslationEstimate(
        translation=camera_center_to_translation(R, center),
        camera_center=center,
        correspondences=corr,
        system=system,
        residual=residual_norm(system, center),
        method=method,
        iterations=rounds,
    )


def recover_translation(
    K, R, box, cloud, method: str = "indirect", z_guess: float = 100.0, refine: bool = True
) -> np.ndarray:
    """Object translation in the camera frame from rotation ``R`` and a tight box."""
    return estimate_translation(K, R, box, cloud, method, z_guess, refine).translation
