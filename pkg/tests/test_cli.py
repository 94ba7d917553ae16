import csv
import json

import numpy as np
import pytest

from bboxpose.cli import main
from bboxpose.synth import SyntheticCase, cube_corners, tight_box
from bboxpose.camera import CameraIntrinsics
from bboxpose.bbox_equation import translation_to_camera_center
from bboxpose.plyio import save_ply
from bboxpose.rotation import quat_to_matrix, random_rotation


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def json_prefix(text):
    """First JSON document of a stream that may continue with a table."""
    return json.JSONDecoder().raw_decode(text)[0]


@pytest.fixture
def cases(tmp_path, capsys):
    d = tmp_path / "cases"
    code, _, _ = run(["synth", "--seed", 5, "--count", 6, "--out", d], capsys)
    assert code == 0
    return d


def bbox_arg(box):
    return ",".join(repr(float(v)) for v in box.as_array())


def test_estimate_round_trip(cases, capsys):
    case = SyntheticCase.load(cases / "case_0002.json")
    argv = [
        "estimate", "--intrinsics", cases / "intrinsics.json", "--cloud", cases / "case_0002.ply",
        "--bbox", bbox_arg(case.bbox), "--quat", ",".join(repr(float(v)) for v in case.gt_rotation),
    ]
    code, out, _ = run(argv, capsys)
    assert code == 0
    rec = json.loads(out)
    np.testing.assert_allclose(rec["translation"], case.gt_translation, atol=1e-9)
    assert rec["diagnostics"]["residual"] >= 0
    assert set(rec["diagnostics"]["correspondences"]) == {"iL", "iR", "iT", "iB"}
    assert len(rec["diagnostics"]["side_norms"]) == 4
    assert set(rec["euler"]) == {"roll", "pitch", "yaw"}


def test_estimate_deterministic(cases, capsys):
    case = SyntheticCase.load(cases / "case_0000.json")
    argv = [
        "estimate", "--intrinsics", cases / "intrinsics.json", "--cloud", cases / "case_0000.ply",
        "--bbox", bbox_arg(case.bbox), "--quat", ",".join(repr(float(v)) for v in case.gt_rotation),
    ]
    assert run(argv, capsys)[1] == run(argv, capsys)[1]


@pytest.mark.parametrize("bbox", ["340,200,300,280", "1,2,3", "a,b,c,d"])
def test_malformed_bbox_exit_2(cases, capsys, bbox):
    code, _, err = run(
        ["estimate", "--intrinsics", cases / "intrinsics.json", "--extents", "1,1,1", "--bbox", bbox, "--quat", "1,0,0,0"],
        capsys,
    )
    assert code == 2
    assert json.loads(err)["error"] == "invalid_input"


def test_degenerate_exit_3(tmp_path, capsys):
    K = tmp_path / "K.json"
    K.write_text(json.dumps({"fx": 500, "fy": 500, "cx": 320, "cy": 240}))
    ply = tmp_path / "one.ply"
    save_ply(ply, [[0.0, 0.0, 0.0]])
    code, _, err = run(["estimate", "--intrinsics", K, "--cloud", ply, "--bbox", "300,200,340,280", "--quat", "1,0,0,0"], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "degenerate_geometry"


def test_parse_error_exit_4(tmp_path, capsys):
    K = tmp_path / "K.json"
    K.write_text(json.dumps({"fx": 500, "fy": 500, "cx": 320, "cy": 240}))
    ply = tmp_path / "bad.ply"
    ply.write_text("ply\nformat ascii 1.0\nelement vertex one\nend_header\n")
    code, _, err = run(["estimate", "--intrinsics", K, "--cloud", ply, "--bbox", "300,200,340,280", "--quat", "1,0,0,0"], capsys)
    assert code == 4
    assert "line 3" in json.loads(err)["message"]


def test_indirect_vs_direct_far_fixture(tmp_path, capsys):
    K = CameraIntrinsics(500, 500, 320, 240)
    (tmp_path / "K.json").write_text(json.dumps(K.to_json()))
    ext = (0.3, 0.2, 0.1)
    q = random_rotation(12)
    R = quat_to_matrix(q)
    t = np.array([0.0, 0.0, 200.0])
    box = tight_box(K, R, translation_to_camera_center(R, t), cube_corners(ext))
    out = {}
    for method in ("indirect", "direct"):
        code, text, _ = run(
            ["estimate", "--intrinsics", tmp_path / "K.json", "--extents", ",".join(map(str, ext)),
             "--bbox", bbox_arg(box), "--quat", ",".join(repr(float(v)) for v in q), "--method", method, "--zguess", 1e6],
            capsys,
        )
        assert code == 0
        out[method] = np.array(json.loads(text)["translation"])
    np.testing.assert_allclose(out["indirect"], out["direct"], atol=1e-6)
    np.testing.assert_allclose(out["direct"], t, atol=1e-6)


@pytest.mark.parametrize("workers", [1, 2])
def test_solve_cases_then_eval(cases, tmp_path, capsys, workers):
    pred = tmp_path / f"pred{workers}.jsonl"
    code, _, _ = run(["solve-cases", "--cases", cases, "--workers", workers, "--out", pred], capsys)
    assert code == 0
    ids = [json.loads(line)["id"] for line in pred.read_text().splitlines()]
    assert ids == [f"case_{k:04d}" for k in range(6)]
    code, out, _ = run(["eval", "--pred", pred, "--gt", cases / "gt.jsonl"], capsys)
    assert code == 0
    report = json_prefix(out)
    assert report["overall"]["accuracy_5cm5deg"] == 100
    assert report["overall"]["count"] == 6
    assert "overall" in out.splitlines()[-1]


def test_eval_by_line_order(tmp_path, capsys):
    gt = tmp_path / "gt.jsonl"
    pred = tmp_path / "pred.jsonl"
    gt.write_text('{"rotation": [1,0,0,0], "translation": [0,0,1]}\n{"rotation": [1,0,0,0], "translation": [0,0,1]}\n')
    pred.write_text('{"rotation": [1,0,0,0], "translation": [0,0,1]}\n{"rotation": [1,0,0,0], "translation": [0,0,2]}\n')
    code, out, _ = run(["eval", "--pred", pred, "--gt", gt, "--no-table"], capsys)
    assert code == 0
    assert json.loads(out)["overall"]["accuracy_5cm5deg"] == 50


def test_eval_empty_exit_2(tmp_path, capsys):
    (tmp_path / "e.jsonl").write_text("")
    code, _, _ = run(["eval", "--pred", tmp_path / "e.jsonl", "--gt", tmp_path / "e.jsonl"], capsys)
    assert code == 2


def test_gradcheck(capsys):
    code, out, _ = run(["gradcheck", "--trials", 20], capsys)
    assert code == 0
    assert out.strip().endswith("PASS")


def test_train_head_csv(tmp_path, capsys):
    path = tmp_path / "hist.csv"
    code, out, _ = run(["train-head", "--iters", 30, "--normalize", "false", "--out", path], capsys)
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 30
    assert list(rows[0]) == ["iteration", "lr", "loss", "eval_loss"]
    assert json.loads(out)["normalize"] is False


def test_project_box(tmp_path, capsys):
    (tmp_path / "K.json").write_text(json.dumps({"fx": 500, "fy": 500, "cx": 320, "cy": 240}))
    (tmp_path / "pose.json").write_text(json.dumps({"rotation": [1, 0, 0, 0], "translation": [0, 0, 10]}))
    code, out, _ = run(
        ["project-box", "--intrinsics", tmp_path / "K.json", "--pose", tmp_path / "pose.json", "--extents", "1,1,1"],
        capsys,
    )
    assert code == 0
    corners = np.array(json.loads(out)["corners"])
    np.testing.assert_allclose(corners[0], [320 - 500 / 9, 240 - 500 / 9])


def test_missing_file_exit_2(tmp_path, capsys):
    code, _, _ = run(
        ["estimate", "--intrinsics", tmp_path / "nope.json", "--extents", "1,1,1", "--bbox", "1,2,3,4", "--quat", "1,0,0,0"],
        capsys,
    )
    assert code in (2, 4)
