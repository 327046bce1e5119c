"""Command-line entry point: generate phantoms, train, export weights."""

from __future__ import annotations

import argparse
import sys

from .phantoms import synth_particles
from .train import TrainSpec, TrainingDiverged, train


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scoretrain",
        description="Train the compact denoising score network on synthetic "
        "phantoms and export a CSSM weight file.",
    )
    parser.add_argument("--side", type=int, default=16)
    parser.add_argument("--count", type=int, default=2048,
                        help="number of training phantoms")
    parser.add_argument("--data-seed", type=int, default=123)
    parser.add_argument("--hidden", type=int, nargs="+", default=[512, 512])
    parser.add_argument("--embed-dim", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", default="score_weights.cssm")
    args = parser.parse_args(argv)

    spec = TrainSpec(
        side=args.side,
        hidden=args.hidden,
        embed_dim=args.embed_dim,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        output_path=args.output,
    )
    dataset = synth_particles(args.count, args.side, seed=args.data_seed)
    try:
        path = train(spec, dataset)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
