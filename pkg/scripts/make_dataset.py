#!/usr/bin/env python3
"""Generate a directory of rendered scene bundles for training or eval.

Thin wrapper over the gen subcommand with a progress line; kept as a
script so long runs can be resumed per-chunk with different seed bases.
"""
import argparse
import sys
from pathlib import Path

from clothgrasp.synthcloth import _scene_seed, random_scene, save_bundle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--scenes", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--res", type=int, default=33)
    ap.add_argument("--width", type=int, default=640)
    ap.add_argument("--height", type=int, default=576)
    ap.add_argument("--noise-sigma", type=float, default=0.002)
    ap.add_argument("--start", type=int, default=0,
                    help="first scene index (for resuming a partial run)")
    args = ap.parse_args()

    out = Path(args.out)
    for i in range(args.start, args.scenes):
        scene = random_scene(_scene_seed(args.seed, i), res=args.res,
                             width=args.width, height=args.height,
                             noise_sigma=args.noise_sigma)
        save_bundle(scene, out, f"scene_{i:04d}")
        if (i + 1) % 10 == 0 or i + 1 == args.scenes:
            print(f"{i + 1}/{args.scenes}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
