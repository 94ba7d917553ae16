import numpy as np
import pytest

from bboxpose.bbox_equation import recover_translation
from bboxpose.camera import CameraIntrinsics, project, project_points
from bboxpose.errors import InvalidInput
from bboxpose.metrics import Pose
from bboxpose.synth import (
    SynthConfig,
    SyntheticCase,
    cube_corners,
    project_box_corners,
    sphere_cloud,
    subsample,
    synth_scene,
)


class TestCubeCorners:
    def test_unit(self):
        c = cube_corners((1, 1, 1))
        assert c.shape == (8, 3)
        assert {tuple(r) for r in c} == {(x, y, z) for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)}

    def test_box_size(self):
        c = cube_corners((1, 2, 3))
        np.testing.assert_array_equal(c.max(axis=0) - c.min(axis=0), [2, 4, 6])

    def test_order(self):
        c = cube_corners((1, 2, 3))
        for k, row in enumerate(c):
            signs = [1 if (k >> bit) & 1 else -1 for bit in range(3)]
            np.testing.assert_array_equal(row, np.multiply(signs, [1, 2, 3]))
        np.testing.assert_array_equal(c, cube_corners((1, 2, 3)))

    @pytest.mark.parametrize("bad", [(0, 1, 1), (1, -1, 1)])
    def test_non_positive(self, bad):
        with pytest.raises(InvalidInput):
            cube_corners(bad)


def test_sphere_and_subsample():
    pts = sphere_cloud(0.2, 100, seed=1)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 0.2)
    sub = subsample(pts, 30)
    assert len(sub) <= 30
    np.testing.assert_array_equal(sub[1], pts[4])


class TestSynthScene:
    @pytest.mark.parametrize("cloud", ["corners", "sphere"])
    def test_deterministic(self, cloud):
        cfg = SynthConfig(cloud=cloud)
        a, b = synth_scene(11, cfg), synth_scene(11, cfg)
        assert a.to_json() == b.to_json()

    @pytest.mark.parametrize("cloud", ["corners", "sphere"])
    def test_bbox_tight(self, cloud):
        for seed in range(50):
            case = synth_scene(seed, SynthConfig(cloud=cloud))
            proj = project_points(case.intrinsics, case.R, case.camera_center, case.cloud)
            assert np.all(proj[:, 2] > 0)
            np.testing.assert_allclose(
                case.bbox.as_array(),
                [proj[:, 0].min(), proj[:, 1].min(), proj[:, 0].max(), proj[:, 1].max()],
                atol=1e-9,
            )

    def test_recovers_ground_truth(self):
        for seed in range(50):
            case = synth_scene(seed)
            t = recover_translation(case.intrinsics, case.R, case.bbox, case.cloud)
            np.testing.assert_allclose(t, case.gt_translation, atol=1e-9)

    def test_center_offset(self):
        case = synth_scene(3, SynthConfig(center_offset_px=(300, 300)))
        u, v, _ = project(case.intrinsics, case.R, case.camera_center, [0, 0, 0])
        K = case.intrinsics
        assert np.hypot(u - K.cx, v - K.cy) == pytest.approx(300)

    @pytest.mark.parametrize(
        "kw",
        [dict(depth_range=(0.1, 2.0)), dict(cloud="mesh"), dict(depth_range=(2.0, 1.0)), dict(size_range=(0, 0.1))],
    )
    def test_bad_config(self, kw):
        with pytest.raises(InvalidInput):
            SynthConfig(**kw)

    def test_save_load(self, tmp_path):
        case = synth_scene(4, SynthConfig(cloud="sphere"))
        case.save(tmp_path / "c.json")
        back = SyntheticCase.load(tmp_path / "c.json")
        assert back.to_json() == case.to_json()
        np.testing.assert_array_equal(back.cloud, case.cloud)


class TestProjectBoxCorners:
    K = CameraIntrinsics(500, 500, 320, 240)
    pose = Pose([1, 0, 0, 0], [0, 0, 10])

    def test_near_face(self):
        px = project_box_corners(self.K, self.pose, (1, 1, 1))
        d = 500 / 9
        # corners 0..3 have z = -1, so depth 9
        np.testing.assert_allclose(px[:4], [[320 - d, 240 - d], [320 + d, 240 - d], [320 - d, 240 + d], [320 + d, 240 + d]])
        f = 500 / 11
        np.testing.assert_allclose(px[4:], [[320 - f, 240 - f], [320 + f, 240 - f], [320 - f, 240 + f], [320 + f, 240 + f]])

    def test_zero_extents(self):
        np.testing.assert_allclose(project_box_corners(self.K, self.pose, (0, 0, 0)), np.tile([320, 240], (8, 1)))

    def test_order_matches_cube_corners(self):
        pose = Pose([0.9, 0.1, -0.3, 0.2], [0.1, 0.05, 3])
        ext = (0.2, 0.3, 0.4)
        px = project_box_corners(self.K, pose, ext)
        from bboxpose.bbox_equation import translation_to_camera_center

        c = translation_to_camera_center(pose.R, pose.translation)
        for row, X in zip(px, cube_corners(ext)):
            np.testing.assert_allclose(row, project(self.K, pose.R, c, X)[:2])
