"""Monocular 6D object pose from a rotation and a tight 2D bounding box.

The translation is recovered by the bounding box equation: four
point-to-side correspondences give a 4x3 linear system whose least-squares
solution is the camera center in the object frame.
"""

from bboxpose.errors import (
    BBoxPoseError,
    BehindCamera,
    DegenerateGeometry,
    DegenerateInput,
    InvalidInput,
    InvalidRotation,
    ParseError,
    UnsupportedFormat,
)
from bboxpose.rotation import (
    EulerAngles,
    canonicalize,
    euler_to_quat,
    matrix_to_quat,
    quat_to_euler,
    quat_to_matrix,
    random_rotation,
)
from bboxpose.camera import CameraIntrinsics, PixelPoint, estimate_T0, project
from bboxpose.bbox_equation import (
    BBox2D,
    BBoxSystem,
    CorrespondenceSet,
    build_equation,
    correspondences_direct,
    correspondences_indirect,
    recover_translation,
    side_vector_norms,
    solve_equation,
)

__version__ = "0.1.0"

__all__ = [
    "BBoxPoseError",
    "BehindCamera",
    "DegenerateGeometry",
    "DegenerateInput",
    "InvalidInput",
    "InvalidRotation",
    "ParseError",
    "UnsupportedFormat",
    "EulerAngles",
    "canonicalize",
    "euler_to_quat",
    "matrix_to_quat",
    "quat_to_euler",
    "quat_to_matrix",
    "random_rotation",
    "CameraIntrinsics",
    "PixelPoint",
    "estimate_T0",
    "project",
    "BBox2D",
    "BBoxSystem",
    "CorrespondenceSet",
    "build_equation",
    "correspondences_direct",
    "correspondences_indirect",
    "recover_translation",
    "side_vector_norms",
    "solve_equation",
]
