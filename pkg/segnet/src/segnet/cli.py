"""Command-line entry: `segnet train` and `segnet infer`."""

import argparse
import sys

from .errors import SegnetError
from .loss import DEFAULT_POSITIVE_WEIGHT, LossConfig
from .model import DEFAULT_BASE_CHANNELS
from .train import DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_LR, infer, train

EXIT_USAGE = 2
EXIT_ERROR = 1


def _cmd_train(args) -> int:
    cfg = LossConfig(weights=(args.positive_weight,) * 3)
    result = train(args.data, epochs=args.epochs, seed=args.seed,
                   out_dir=args.out, lr=args.lr, batch_size=args.batch_size,
                   base_channels=args.width, loss_cfg=cfg,
                   use_augment=not args.no_augment)
    print(f"checkpoint {result.checkpoint}  "
          f"final train loss {result.train_loss[-1]:.4f}")
    return 0


def _cmd_infer(args) -> int:
    out = infer(args.checkpoint, args.depth, args.out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segnet",
                                     description="depth-to-regions U-Net tool")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the network on a bundle directory")
    p.add_argument("--data", required=True, help="directory of scene bundles")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH)
    p.add_argument("--width", type=int, default=DEFAULT_BASE_CHANNELS,
                   help="channels at the first level")
    p.add_argument("--positive-weight", type=float,
                   default=DEFAULT_POSITIVE_WEIGHT)
    p.add_argument("--no-augment", action="store_true")
    p.set_defaults(run=_cmd_train)

    p = sub.add_parser("infer", help="write a regions file for a depth file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(run=_cmd_infer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.run(args)
    except SegnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
