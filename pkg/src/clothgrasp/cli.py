"""Command-line front end.

One binary, five subcommands: gen writes synthetic scene bundles, select
runs grasp selection on a region map, detect runs a classical baseline,
bench runs the benchmark matrix, overlay renders a mask/grasp picture.

Exit codes: 0 success, 2 usage, 3 no candidates, 4 unreadable input.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .detectors import BASELINE_METHODS, DetectorParams, baseline_grasp
from .errors import (
    ClothGraspError,
    FormatError,
    InsufficientPointsError,
    NoCandidatesError,
    ParameterError,
)
from .geometry import (
    DEFAULT_POST_OFFSET,
    DEFAULT_PRE_OFFSET,
    DEFAULT_TILT_DEG,
    DEFAULT_Z_OFFSET,
    plan_grasp,
    quat_wxyz,
)
from .graspsel import DEFAULT_NEIGHBORHOOD, GraspConfig2D, GraspMode, select_grasp
from .imaging import load_depth_png, load_rgb_png, normalize_field, depth_to_field
from .regions import load_probmap, threshold_probs
from .synthcloth import (
    DEFAULT_NOISE_SIGMA,
    DEFAULT_RES,
    DEFAULT_SIDE,
    _scene_seed,
    benchmark,
    canonical_method,
    load_camera_meta,
    random_scene,
    save_bundle,
)

BENCH_COLUMNS = ("method", "scenes", "successes", "rate", "misdetection",
                 "direction_error", "no_candidates")


def _parse_folds(text: str):
    if ":" in text:
        lo, hi = text.split(":", 1)
        return (int(lo), int(hi))
    n = int(text)
    return (n, n)


def _emit(args, payload: dict, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


def _grasp_record(grasp: GraspConfig2D, method: str) -> dict:
    return {
        "method": method,
        "mode": grasp.mode.value,
        "point": [int(grasp.point[0]), int(grasp.point[1])],
        "angle_rad": grasp.angle_rad,
        "uncertainty": grasp.uncertainty,
    }


def _attach_world(record: dict, grasp: GraspConfig2D, args) -> None:
    cam = load_camera_meta(args.camera)
    depth = load_depth_png(args.depth)
    plan = plan_grasp(grasp.point, grasp.angle_rad, depth, cam,
                      tilt_deg=args.tilt_deg, z_offset=args.z_offset,
                      pre_offset=args.pre_offset, post_offset=args.post_offset)
    record["world"] = {
        "point": [float(v) for v in plan.point_w],
        "yaw": plan.yaw,
        "pregrasp": {
            "position": [float(v) for v in plan.pregrasp.position],
            "quaternion_wxyz": [float(v) for v in quat_wxyz(plan.pregrasp.orientation)],
        },
        "grasp": {
            "position": [float(v) for v in plan.grasp.position],
            "quaternion_wxyz": [float(v) for v in quat_wxyz(plan.grasp.orientation)],
        },
        "preslide": {
            "position": [float(v) for v in plan.slide.pre_slide.position],
            "quaternion_wxyz": [float(v) for v in quat_wxyz(plan.slide.pre_slide.orientation)],
        },
        "postslide": {
            "position": [float(v) for v in plan.slide.post_slide.position],
            "quaternion_wxyz": [float(v) for v in quat_wxyz(plan.slide.post_slide.orientation)],
        },
        "pinch_point": [float(v) for v in plan.slide.pinch_point],
    }


def _write_record(record: dict, out_path) -> None:
    Path(out_path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def cmd_gen(args) -> int:
    out = Path(args.out)
    stems = []
    for i in range(args.scenes):
        scene = random_scene(_scene_seed(args.seed, i), n_folds=args.folds,
                             side=args.side, res=args.res,
                             noise_sigma=args.noise_sigma,
                             width=args.width, height=args.height)
        stem = f"scene_{i:04d}"
        save_bundle(scene, out, stem)
        stems.append(stem)
    _emit(args, {"out": str(out), "scenes": stems},
          f"wrote {len(stems)} scene bundles under {out}")
    return 0


def _masks_from_args(args):
    probs = load_probmap(args.regions)
    return threshold_probs(probs, tau=args.tau, tau_corner=args.tau_corner,
                           tau_outer=args.tau_outer, tau_inner=args.tau_inner)


def cmd_select(args) -> int:
    masks = _masks_from_args(args)
    mode = GraspMode(args.mode)
    start = time.perf_counter()
    grasp = select_grasp(masks, mode=mode, k=args.k)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    record = _grasp_record(grasp, "ours")
    if args.time:
        record["elapsed_ms"] = elapsed_ms
    if args.camera:
        _attach_world(record, grasp, args)
    _write_record(record, args.out)
    human = (f"grasp {grasp.point} angle {math.degrees(grasp.angle_rad):.1f} deg "
             f"uncertainty {grasp.uncertainty:.4f} ({mode.value})")
    if args.time:
        human += f" in {elapsed_ms:.1f} ms"
    _emit(args, record, human)
    return 0


def cmd_detect(args) -> int:
    method = canonical_method(args.method)
    if method not in BASELINE_METHODS:
        raise ParameterError(f"detect runs baselines only, not {method!r}")
    depth = load_depth_png(args.depth) if args.depth else None
    rgb = load_rgb_png(args.rgb) if args.rgb else None
    cam = load_camera_meta(args.camera) if args.camera else None
    params = DetectorParams(blur_sigma=args.blur_sigma, canny_low=args.canny_low,
                            canny_high=args.canny_high,
                            intensity_percentile=args.intensity_percentile,
                            harris_k=args.harris_k,
                            harris_window_sigma=args.harris_window_sigma,
                            ransac_iters=args.ransac_iters,
                            ransac_inlier_dist=args.ransac_inlier_dist)
    grasp = baseline_grasp(method, depth=depth, rgb=rgb, cam=cam, params=params,
                           seed=args.seed)
    record = _grasp_record(grasp, method)
    if args.camera and args.depth:
        _attach_world(record, grasp, args)
    _write_record(record, args.out)
    _emit(args, record,
          f"{method} grasp {grasp.point} angle {math.degrees(grasp.angle_rad):.1f} deg")
    return 0


def cmd_bench(args) -> int:
    methods = [canonical_method(m) for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ParameterError("--methods must name at least one method")
    rows = benchmark(methods, n_scenes=args.scenes, seed=args.seed,
                     mode=GraspMode(args.mode), dir_tol_deg=args.dir_tol,
                     k=args.k, n_folds=args.folds, noise_sigma=args.noise_sigma,
                     side=args.side, res=args.res)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for r in rows:
            writer.writerow([r.method, r.scenes, r.successes, f"{r.rate:.6f}",
                             r.misdetection, r.direction_error, r.no_candidates])
    payload = {"rows": [{c: getattr(r, c) for c in BENCH_COLUMNS} for r in rows]}
    lines = ["method                        rate   succ  misd  dir   none"]
    for r in rows:
        lines.append(f"{r.method:28s}  {r.rate:5.3f}  {r.successes:4d}  "
                     f"{r.misdetection:4d}  {r.direction_error:4d}  {r.no_candidates:4d}")
    _emit(args, payload, "\n".join(lines))
    return 0


_OUTER_COLOR = (255, 255, 0)
_INNER_COLOR = (0, 255, 0)
_CORNER_COLOR = (0, 0, 255)
_OVERLAP_COLOR = (255, 165, 0)
_ARROW_COLOR = (255, 0, 255)


def cmd_overlay(args) -> int:
    masks = _masks_from_args(args)
    h, w = masks.outer.shape
    if args.depth:
        depth = load_depth_png(args.depth)
        if depth.data.shape != (h, w):
            raise ParameterError("depth and regions dimensions differ")
        gray = np.round(normalize_field(depth_to_field(depth)).data * 255.0).astype(np.uint8)
        base = np.stack([gray] * 3, axis=-1)
    else:
        base = np.zeros((h, w, 3), dtype=np.uint8)
    for plane, color in ((masks.outer, _OUTER_COLOR), (masks.inner, _INNER_COLOR),
                         (masks.corner, _CORNER_COLOR),
                         (masks.outer & masks.inner, _OVERLAP_COLOR)):
        base[plane] = color

    img = Image.fromarray(base, mode="RGB")
    if args.grasp:
        record = json.loads(Path(args.grasp).read_text())
        x, y = record["point"]
        angle = record["angle_rad"]
        length = max(min(h, w) // 12, 20)
        tip = (x + length * math.cos(angle), y + length * math.sin(angle))
        draw = ImageDraw.Draw(img)
        draw.line([(x, y), tip], fill=_ARROW_COLOR, width=2)
        for side in (math.pi * 5 / 6, -math.pi * 5 / 6):
            hx = tip[0] + 8 * math.cos(angle + side)
            hy = tip[1] + 8 * math.sin(angle + side)
            draw.line([tip, (hx, hy)], fill=_ARROW_COLOR, width=2)
    img.save(args.out, format="PNG")
    _emit(args, {"out": str(args.out)}, f"wrote {args.out}")
    return 0


def _add_tau_flags(p) -> None:
    p.add_argument("--tau", type=float, default=0.5,
                   help="probability threshold for all classes (default 0.5)")
    p.add_argument("--tau-corner", type=float, default=None)
    p.add_argument("--tau-outer", type=float, default=None)
    p.add_argument("--tau-inner", type=float, default=None)


def _add_world_flags(p) -> None:
    p.add_argument("--camera", default=None, help="scene meta.json with camera model")
    p.add_argument("--tilt-deg", type=float, default=DEFAULT_TILT_DEG)
    p.add_argument("--z-offset", type=float, default=DEFAULT_Z_OFFSET)
    p.add_argument("--pre-offset", type=float, default=DEFAULT_PRE_OFFSET)
    p.add_argument("--post-offset", type=float, default=DEFAULT_POST_OFFSET)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clothgrasp",
        description="Cloth edge/corner grasp selection from depth and region maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write synthetic scene bundles")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=_parse_folds, default=(1, 3),
                   help="fold count N or inclusive range LO:HI (default 1:3)")
    p.add_argument("--noise-sigma", type=float, default=DEFAULT_NOISE_SIGMA)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=576)
    p.add_argument("--res", type=int, default=DEFAULT_RES)
    p.add_argument("--side", type=float, default=DEFAULT_SIDE)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("select", help="select a grasp from a region map")
    p.add_argument("--depth", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=[m.value for m in GraspMode], default="edge")
    p.add_argument("--k", type=int, default=DEFAULT_NEIGHBORHOOD)
    _add_tau_flags(p)
    _add_world_flags(p)
    p.add_argument("--time", action="store_true", help="report selection latency")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("detect", help="run a classical baseline detector")
    p.add_argument("--method", required=True,
                   help="one of: " + ", ".join(BASELINE_METHODS))
    p.add_argument("--depth", default=None)
    p.add_argument("--rgb", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blur-sigma", type=float, default=1.4)
    p.add_argument("--canny-low", type=float, default=0.04)
    p.add_argument("--canny-high", type=float, default=0.10)
    p.add_argument("--intensity-percentile", type=float, default=90.0)
    p.add_argument("--harris-k", type=float, default=0.04)
    p.add_argument("--harris-window-sigma", type=float, default=1.5)
    p.add_argument("--ransac-iters", type=int, default=500)
    p.add_argument("--ransac-inlier-dist", type=float, default=0.005)
    _add_world_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="run methods over seeded random scenes")
    p.add_argument("--methods", required=True,
                   help="comma-separated method names (ours, nodP, nodU, baselines)")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=[m.value for m in GraspMode], default="edge")
    p.add_argument("--dir-tol", type=float, default=45.0)
    p.add_argument("--k", type=int, default=DEFAULT_NEIGHBORHOOD)
    p.add_argument("--folds", type=_parse_folds, default=(1, 3))
    p.add_argument("--noise-sigma", type=float, default=DEFAULT_NOISE_SIGMA)
    p.add_argument("--side", type=float, default=DEFAULT_SIDE)
    p.add_argument("--res", type=int, default=DEFAULT_RES)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("overlay", help="render masks and a grasp arrow to a PNG")
    p.add_argument("--regions", required=True)
    p.add_argument("--depth", default=None)
    p.add_argument("--grasp", default=None, help="grasp record JSON from select/detect")
    p.add_argument("--out", required=True)
    _add_tau_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (NoCandidatesError, InsufficientPointsError) as exc:
        print(json.dumps({"error": "no_candidates", "detail": str(exc)}))
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ClothGraspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
