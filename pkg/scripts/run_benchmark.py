#!/usr/bin/env python3
"""Run the full method comparison and print one table per grasp mode.

Edge mode compares our selector against both ablations and the edge
baselines; corner mode compares against the corner detectors. Scenes are
regenerated from the seed, so two runs with the same arguments agree.
"""
import argparse
import sys
import time

from clothgrasp.graspsel import GraspMode
from clothgrasp.synthcloth import (
    ABLATION_NO_DIRECTION,
    ABLATION_NO_UNCERTAINTY,
    OURS,
    benchmark,
)

EDGE_METHODS = (OURS, ABLATION_NO_DIRECTION, ABLATION_NO_UNCERTAINTY,
                "canny-depth", "canny-color", "segment-edge")
CORNER_METHODS = (OURS, "harris-depth", "harris-color")


def print_table(title, rows):
    print(f"\n== {title} ==")
    print(f"{'method':28s} {'rate':>6s} {'succ':>5s} {'misd':>5s} {'dir':>5s} {'none':>5s}")
    for r in rows:
        print(f"{r.method:28s} {r.rate:6.3f} {r.successes:5d} "
              f"{r.misdetection:5d} {r.direction_error:5d} {r.no_candidates:5d}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dir-tol", type=float, default=45.0)
    ap.add_argument("--res", type=int, default=33)
    args = ap.parse_args()

    t0 = time.perf_counter()
    edge = benchmark(EDGE_METHODS, n_scenes=args.scenes, seed=args.seed,
                     mode=GraspMode.EDGE, dir_tol_deg=args.dir_tol, res=args.res)
    print_table("edge grasping", edge)
    corner = benchmark(CORNER_METHODS, n_scenes=args.scenes, seed=args.seed,
                       mode=GraspMode.CORNER, dir_tol_deg=args.dir_tol, res=args.res)
    print_table("corner grasping", corner)
    print(f"\ntotal {time.perf_counter() - t0:.1f} s over {args.scenes} scenes per mode")
    return 0


if __name__ == "__main__":
    sys.exit(main())
