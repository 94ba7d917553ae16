"""Command line interface: ``bboxpose <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 degenerate geometry, 4 parse error.
Euler angles, where reported, are intrinsic Z-Y-X (yaw, pitch, roll) in degrees.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path


from bboxpose.bbox_equation import METHODS, BBox2D, estimate_translation
from bboxpose.camera import CameraIntrinsics
from bboxpose.errors import BBoxPoseError, InvalidInput, ParseError
from bboxpose.gradcheck import run_gradcheck
from bboxpose.metrics import Pose, aggregate
from bboxpose.plyio import load_ply, save_ply
from bboxpose.qhead import TASK_KINDS, TrainConfig, train_toy
from bboxpose.rotation import canonicalize, quat_to_euler, quat_to_matrix
from bboxpose.synth import CLOUD_KINDS, SynthConfig, SyntheticCase, cube_corners, project_box_corners, subsample, synth_scene


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InvalidInput(f"--{what} expects {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise InvalidInput(f"--{what} expects {n} comma-separated numbers, got {len(vals)}")
    return vals


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None


def _read_jsonl(path) -> list[dict]:
    records = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg}", line=lineno) from None
    return records


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def estimate_record(K, q, box, cloud, method="indirect", z_guess=100.0, label="object") -> dict:
    """Run the translation solver and package the pose with its diagnostics."""
    q = canonicalize(q)
    est = estimate_translation(K, quat_to_matrix(q), box, cloud, method=method, z_guess=z_guess)
    return {
        "label": label,
        "rotation": q.tolist(),
        "translation": est.translation.tolist(),
        "bbox": box.to_json(),
        "euler": quat_to_euler(q).to_json(),
        "diagnostics": {
            "method": method,
            "camera_center": est.camera_center.tolist(),
            "correspondences": est.correspondences._asdict(),
            "residual": est.residual,
            "side_norms": est.side_norms.tolist(),
            "refine_rounds": est.iterations,
        },
    }


def cmd_estimate(args) -> int:
    K = CameraIntrinsics.from_json(_read_json(args.intrinsics))
    if args.cloud:
        cloud = load_ply(args.cloud)
    else:
        cloud = cube_corners(_floats(args.extents, 3, "extents"))
    if args.subsample:
        cloud = subsample(cloud, args.subsample)
    xl, yt, xr, yb = _floats(args.bbox, 4, "bbox")
    box = BBox2D(xl, yt, xr, yb)
    q = _floats(args.quat, 4, "quat")
    _emit(estimate_record(K, q, box, cloud, args.method, args.zguess, args.label))
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = SynthConfig(cloud=args.cloud, n_points=args.points)
    (out / "intrinsics.json").write_text(json.dumps(cfg.intrinsics.to_json()))
    gt_lines = []
    for k in range(args.count):
        case = synth_scene(args.seed + k, cfg)
        name = f"case_{k:04d}"
        case.save(out / f"{name}.json")
        save_ply(out / f"{name}.ply", case.cloud, comment=f"synthetic {case.label} seed {case.seed}")
        gt_lines.append(json.dumps({"id": name, "label": case.label, **case.pose.to_json()}))
    (out / "gt.jsonl").write_text("\n".join(gt_lines) + "\n")
    _emit({"cases": args.count, "out": str(out)})
    return 0


def _solve_case(job) -> dict:
    path, method, z_guess = job
    case = SyntheticCase.load(path)
    try:
        rec = estimate_record(case.intrinsics, case.gt_rotation, case.bbox, case.cloud, method, z_guess, case.label)
    except BBoxPoseError as exc:
        return {"id": Path(path).stem, "label": case.label, "error": exc.code, "message": str(exc)}
    return {"id": Path(path).stem, **rec}


def cmd_solve_cases(args) -> int:
    paths = sorted(Path(args.cases).glob("case_*.json"))
    if not paths:
        raise InvalidInput(f"no case_*.json files in {args.cases}")
    jobs = [(str(p), args.method, args.zguess) for p in paths]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_solve_case, jobs, chunksize=16))
    else:
        results = [_solve_case(j) for j in jobs]
    lines = "\n".join(json.dumps(r) for r in results) + "\n"
    if args.out:
        Path(args.out).write_text(lines)
    else:
        sys.stdout.write(lines)
    return 0


def cmd_eval(args) -> int:
    preds = _read_jsonl(args.pred)
    gts = _read_jsonl(args.gt)
    if all("id" in r for r in preds + gts):
        by_id = {r["id"]: r for r in gts}
        missing = [r["id"] for r in preds if r["id"] not in by_id]
        if missing:
            raise InvalidInput(f"predictions without ground truth: {missing[:5]}")
        matched = [(p, by_id[p["id"]]) for p in preds]
    else:
        if len(preds) != len(gts):
            raise InvalidInput(f"{len(preds)} predictions vs {len(gts)} ground-truth poses")
        matched = list(zip(preds, gts))
    triples = []
    for p, g in matched:
        if "error" in p:
            raise InvalidInput(f"prediction {p.get('id')} is an error record ({p['error']})")
        triples.append((Pose.from_json(p), Pose.from_json(g), g.get("label", p.get("label", "object"))))
    report = aggregate(triples)
    _emit(report.to_json())
    if not args.no_table:
        print(report.table())
    return 0


def cmd_gradcheck(args) -> int:
    report = run_gradcheck(args.trials, args.eps, args.seed)
    _emit(report.to_json())
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def cmd_train_head(args) -> int:
    cfg = TrainConfig(
        base_lr=args.base_lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        step_size=args.step_size,
        gamma=args.gamma,
        batch_size=args.batch_size,
        iterations=args.iters,
        seed=args.seed,
        normalize=args.normalize,
    )
    result = train_toy(args.task_seed, cfg, kind=args.task)
    result.write_csv(args.out)
    n = min(100, len(result.loss))
    summary = {"iterations": cfg.iterations, "normalize": cfg.normalize, "out": str(args.out)}
    if n:
        summary.update(first_mean_loss=float(result.loss[:n].mean()), last_mean_loss=float(result.loss[-n:].mean()))
    _emit(summary)
    return 0


def cmd_project_box(args) -> int:
    K = CameraIntrinsics.from_json(_read_json(args.intrinsics))
    pose = Pose.from_json(_read_json(args.pose))
    corners = project_box_corners(K, pose, _floats(args.extents, 3, "extents"))
    _emit({"corners": corners.tolist()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bboxpose",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="translation from intrinsics, cloud, box and rotation")
    p.add_argument("--intrinsics", required=True, help='JSON file {"fx","fy","cx","cy"}')
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cloud", help="ASCII PLY point cloud (meters)")
    src.add_argument("--extents", help="box half-sizes ex,ey,ez; uses the 8 corners as the cloud")
    p.add_argument("--bbox", required=True, help="xl,yt,xr,yb in pixels")
    p.add_argument("--quat", required=True, help="rotation q0,q1,q2,q3 (scalar first)")
    p.add_argument("--method", choices=METHODS, default="indirect")
    p.add_argument("--zguess", type=float, default=100.0, help="provisional depth for the indirect method")
    p.add_argument("--subsample", type=int, default=0, help="keep at most N cloud points (every k-th)")
    p.add_argument("--label", default="object")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="write synthetic cases with exact ground truth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--cloud", choices=CLOUD_KINDS, default="corners")
    p.add_argument("--points", type=int, default=200, help="points per sphere cloud")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve-cases", help="run estimate on every case in a synth directory")
    p.add_argument("--cases", required=True)
    p.add_argument("--method", choices=METHODS, default="indirect")
    p.add_argument("--zguess", type=float, default=100.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="predictions JSONL (default: stdout)")
    p.set_defaults(func=cmd_solve_cases)

    p = sub.add_parser("eval", help="metric report from predictions and ground truth")
    p.add_argument("--pred", required=True, help="JSONL with rotation/translation (and optional id, label)")
    p.add_argument("--gt", required=True)
    p.add_argument("--no-table", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the head gradients")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    d = TrainConfig()
    p = sub.add_parser("train-head", help="train the quaternion head on the toy task")
    p.add_argument("--iters", type=int, default=d.iterations)
    p.add_argument("--normalize", type=_bool, default=True)
    p.add_argument("--seed", type=int, default=0, help="initialization and batch sampling seed")
    p.add_argument("--task-seed", type=int, default=0)
    p.add_argument("--task", choices=TASK_KINDS, default="embedded")
    p.add_argument("--base-lr", type=float, default=d.base_lr)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--step-size", type=int, default=d.step_size)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--out", required=True, help="CSV history: iteration,lr,loss,eval_loss")
    p.set_defaults(func=cmd_train_head)

    p = sub.add_parser("project-box", help="pixel positions of the 8 corners of a 3D box")
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--pose", required=True, help='JSON {"rotation":[q0..q3],"translation":[x,y,z]}')
    p.add_argument("--extents", required=True, help="half-sizes ex,ey,ez")
    p.set_defaults(func=cmd_project_box)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BBoxPoseError as exc:
        json.dump({"error": exc.code, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
