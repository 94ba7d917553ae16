"""
Synthetic scenes with exact ground truth, and box-corner projection.

A scene is a point cloud placed in front of the camera with a random
rotation; its bounding box is the exact tight box of the projected cloud.
Running the translation solver on such a scene with the true rotation must
reproduce the true translation, which makes the generator the oracle for the
solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from bboxpose.bbox_equation import BBox2D, translation_to_camera_center
from bboxpose.camera import CameraIntrinsics, project, project_points
from bboxpose.errors import InvalidInput
from bboxpose.metrics import Pose
from bboxpose.rotation import quat_to_matrix, random_rotation

# 640x480 camera with common benchmark intrinsics
DEFAULT_INTRINSICS = CameraIntrinsics(572.4114, 573.57043, 325.2611, 242.04899)
CLOUD_KINDS = ("corners", "sphere")


def _box_corners(extents) -> np.ndarray:
    ex, ey, ez = (float(e) for e in extents)
    # x varies fastest, then y, then z; minus before plus
    return np.array([[sx * ex, sy * ey, sz * ez] for sz in (-1, 1) for sy in (-1, 1) for sx in (-1, 1)])


def cube_corners(extents) -> np.ndarray:
    """The 8 corners ``(+-ex, +-ey, +-ez)`` of a box given its half-sizes.

    Corner ``k`` has x sign from bit 0 of ``k``, y from bit 1, z from bit 2
    (0 = negative), i.e. x varies fastest.
    """
    ext = np.asarray(extents, dtype=np.float64).reshape(3)
    if not np.all(ext > 0):
        raise InvalidInput(f"box half-sizes must be positive, got {ext.tolist()}")
    return _box_corners(ext)


def sphere_cloud(radius: float, n_points: int = 200, seed=0) -> np.ndarray:
    """``n_points`` uniformly distributed on a sphere surface."""
    if not radius > 0 or n_points < 1:
        raise InvalidInput("sphere cloud needs radius > 0 and at least one point")
    g = np.random.default_rng(seed).standard_normal((n_points, 3))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def subsample(points, max_points: int) -> np.ndarray:
    """Every k-th point so that at most ``max_points`` remain; order is kept."""
    pts = np.asarray(points)
    if max_points < 1:
        raise InvalidInput(f"subsample size must be >= 1, got {max_points}")
    stride = -(-len(pts) // max_points)
    return pts[::stride]


@dataclass(frozen=True)
class SynthConfig:
    """Sampling ranges for synthetic scenes (meters, pixels).

    ``center_offset_px``, when set, replaces the lateral range: the object
    origin is placed on the ray through a pixel at that distance from the
    principal point, in a uniformly random direction.
    """

    depth_range: tuple[float, float] = (0.5, 2.0)
    lateral_range: float = 0.3
    cloud: str = "corners"
    size_range: tuple[float, float] = (0.03, 0.07)
    n_points: int = 200
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    center_offset_px: tuple[float, float] | None = None

    def __post_init__(self):
        if self.cloud not in CLOUD_KINDS:
            raise InvalidInput(f"unknown cloud kind {self.cloud!r}; expected one of {CLOUD_KINDS}")
        lo, hi = self.depth_range
        slo, shi = self.size_range
        if not (0 < lo <= hi and 0 < slo <= shi):
            raise InvalidInput("depth and size ranges must be positive and ordered")
        # the farthest point of a box is sqrt(3) half-sizes away
        radius = shi * (np.sqrt(3.0) if self.cloud == "corners" else 1.0)
        if lo < 4.0 * radius:
            raise InvalidInput(f"minimum depth {lo} is below 4x the cloud radius {radius:.4g}")


@dataclass
class SyntheticCase:
    seed: int
    intrinsics: CameraIntrinsics
    cloud: np.ndarray
    gt_rotation: np.ndarray
    gt_translation: np.ndarray
    bbox: BBox2D
    label: str = "synthetic"
    extents: np.ndarray | None = field(default=None)

    @property
    def R(self) -> np.ndarray:
        return quat_to_matrix(self.gt_rotation)

    @property
    def pose(self) -> Pose:
        return Pose(self.gt_rotation, self.gt_translation)

    @property
    def camera_center(self) -> np.ndarray:
        return translation_to_camera_center(self.R, self.gt_translation)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "label": self.label,
            "intrinsics": self.intrinsics.to_json(),
            "rotation": self.gt_rotation.tolist(),
            "translation": self.gt_translation.tolist(),
            "bbox": self.bbox.to_json(),
            "extents": None if self.extents is None else self.extents.tolist(),
            "cloud": self.cloud.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SyntheticCase":
        try:
            return cls(
                seed=int(data["seed"]),
                intrinsics=CameraIntrinsics.from_json(data["intrinsics"]),
                cloud=np.asarray(data["cloud"], dtype=np.float64),
                gt_rotation=np.asarray(data["rotation"], dtype=np.float64),
                gt_translation=np.asarray(data["translation"], dtype=np.float64),
                bbox=BBox2D.from_json(data["bbox"]),
                label=str(data.get("label", "synthetic")),
                extents=None if data.get("extents") is None else np.asarray(data["extents"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"bad synthetic case record: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "SyntheticCase":
        return cls.from_json(json.loads(Path(path).read_text()))


def tight_box(K: CameraIntrinsics, R, camera_center, cloud) -> BBox2D:
    proj = project_points(K, R, camera_center, cloud)
    if np.any(proj[:, 2] <= 0):
        raise InvalidInput("cloud is not entirely in front of the camera")
    return BBox2D.from_pixels(proj[:, :2])


def synth_scene(seed: int, config: SynthConfig | None = None) -> SyntheticCase:
    """Random scene, deterministic in ``seed``."""
    cfg = config or SynthConfig()
    K = cfg.intrinsics
    rng = np.random.default_rng(seed)
    q = random_rotation(int(rng.integers(0, 2**63 - 1)))
    depth = rng.uniform(*cfg.depth_range)
    if cfg.center_offset_px is None:
        lateral = rng.uniform(-cfg.lateral_range, cfg.lateral_range, size=2)
        t = np.array([lateral[0], lateral[1], depth])
    else:
        angle = rng.uniform(0.0, 2.0 * np.pi)
        radius_px = rng.uniform(*cfg.center_offset_px)
        u = K.cx + radius_px * np.cos(angle)
        v = K.cy + radius_px * np.sin(angle)
        t = depth * np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])
    if cfg.cloud == "corners":
        extents = rng.uniform(*cfg.size_range, size=3)
        cloud = cube_corners(extents)
    else:
        extents = None
        cloud = sphere_cloud(rng.uniform(*cfg.size_range), cfg.n_points, rng)
    R = quat_to_matrix(q)
    box = tight_box(K, R, translation_to_camera_center(R, t), cloud)
    return SyntheticCase(seed, K, cloud, q, t, box, label=cfg.cloud, extents=extents)


def project_box_corners(K: CameraIntrinsics, pose: Pose, extents) -> np.ndarray:
    """Pixel positions ``(8, 2)`` of the 3D box corners, in ``cube_corners`` order.

    Zero extents are allowed and collapse all corners onto the projected
    object origin.
    """
    ext = np.asarray(extents, dtype=np.float64).reshape(3)
    if np.any(ext < 0):
        raise InvalidInput(f"box half-sizes must be non-negative, got {ext.tolist()}")
    R = pose.R
    center = translation_to_camera_center(R, pose.translation)
    return np.array([project(K, R, center, c)[:2] for c in _box_corners(ext)])
