"""Command line entry point: train a model and export its weights."""

from __future__ import annotations

import argparse
import sys

from .config import TrainConfig
from .export import export_weights
from .train import TrainingDiverged, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnsi-train",
        description="Train a small GCN/GIN graph classifier on synthetic "
                    "data and export the weights in the engine's JSON "
                    "weight format.")
    parser.add_argument("--config", help="JSON training configuration; "
                        "defaults are used when omitted")
    parser.add_argument("--out", required=True, help="output weight file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--epochs", type=int, help="override epoch count")
    parser.add_argument("--architecture", choices=("gcn", "gin"),
                        help="override the architecture")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = (TrainConfig.from_json(args.config) if args.config
               else TrainConfig())
        if args.seed is not None:
            cfg.seed = args.seed
        if args.epochs is not None:
            cfg.epochs = args.epochs
        if args.architecture is not None:
            cfg.architecture = args.architecture
    except (OSError, TypeError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = train(cfg)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    export_weights(result.model, args.out, result.train_accuracy)
    print(f"train accuracy {result.train_accuracy:.3f}  "
          f"eval accuracy {result.eval_accuracy:.3f}  "
          f"final loss {result.final_loss:.4f}")
    print(f"weights written to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
