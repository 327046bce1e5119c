"""Command-line interface.

Verbs: mask, acquire, reconstruct, sweep, metrics, fsc, report.
Exit codes: 0 ok, 1 usage error, 2 parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import mrc, phantoms
from .diffusion import linear_schedule, load_score_weights
from .forward import (
    MeasurementPlan,
    add_noise,
    apply,
    lipschitz_bound,
    measurement_from_bytes,
    measurement_to_bytes,
)
from .masks import (
    FourierStrategy,
    make_fourier_mask,
    make_pixel_masks,
    mask_from_bytes,
    mask_to_bytes,
)
from .metrics import psnr, resolution_angstrom, shell_correlation, ssim
from .mrc import MrcParseError
from .sampler import GuidanceSchedule, sample_posterior
from .sparse import NumericalFailure, Prior, SparseConfig, solve_sparse
from .sweep import load_config, render_report, run_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_plan(path) -> MeasurementPlan:
    with open(path, "rb") as fh:
        return MeasurementPlan(mask_from_bytes(fh.read()))


def _load_image(args) -> np.ndarray:
    if args.synthetic:
        return phantoms.synth_particles(args.index + 1, args.side, args.seed)[args.index]
    stack = mrc.read_mrc(args.image)
    return stack[args.index]


def cmd_mask(args) -> int:
    if args.variant == "pixel":
        mask = make_pixel_masks(args.side, args.masks, args.kernel, args.seed)
    else:
        mask = make_fourier_mask(
            args.side, FourierStrategy(args.strategy), args.compression, args.seed
        )
    with open(args.out, "wb") as fh:
        fh.write(mask_to_bytes(mask))
    print(f"wrote {args.out} (C = {mask.compression:g})")
    return EXIT_OK


def cmd_acquire(args) -> int:
    plan = _load_plan(args.mask)
    x = _load_image(args)
    y = apply(plan, x)
    if args.noise_var > 0:
        y = add_noise(y, args.noise_var, args.noise_seed)
    with open(args.out, "wb") as fh:
        fh.write(measurement_to_bytes(y))
    print(f"wrote {args.out} (m = {plan.output_dim})")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    plan = _load_plan(args.mask)
    with open(args.measurement, "rb") as fh:
        y = measurement_from_bytes(fh.read(), plan)
    if args.prior == "ddpm":
        schedule = linear_schedule(args.timesteps)
        model = load_score_weights(args.score_weights, schedule=schedule)
        guidance = GuidanceSchedule(zeta_max=args.zeta_max)
        recon, _ = sample_posterior(y, model, schedule, guidance, seed=args.seed)
    else:
        step = args.step_size
        if step is None:
            step = 0.45 / lipschitz_bound(plan)
        cfg = SparseConfig(
            prior=Prior(args.prior), lam=args.lam, step_size=step, epochs=args.epochs
        )
        recon, _ = solve_sparse(y, cfg)
    mrc.write_mrc(args.out, recon)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg.directory = args.out
    path = run_sweep(cfg)
    print(f"sweep results in {path}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    a = mrc.read_mrc(args.ref)[args.index]
    b = mrc.read_mrc(args.test)[args.index]
    peak = float(a.max() - a.min()) or 1.0
    print(f"ssim,{ssim(a, b):.6f}")
    print(f"psnr_db,{psnr(a, b, peak=peak):.4f}")
    return EXIT_OK


def cmd_fsc(args) -> int:
    a = mrc.read_mrc(args.a)
    b = mrc.read_mrc(args.b)
    va = np.asarray(a._data, dtype=float)
    vb = np.asarray(b._data, dtype=float)
    if va.shape[0] == 1:
        va, vb = va[0], vb[0]
    sc = shell_correlation(va, vb)
    print("radius,correlation")
    for r, c in zip(sc.shell_radii, sc.correlation):
        print(f"{r:.3f},{c:.6f}")
    if sc.threshold_crossing is not None:
        res = resolution_angstrom(sc.threshold_crossing, va.shape[0], args.pixel_size)
        print(f"# crossing at r = {sc.threshold_crossing:.3f} -> {res:.2f} A")
    else:
        print("# no crossing below threshold")
    return EXIT_OK


def cmd_report(args) -> int:
    written = render_report(args.csv, args.out)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="csrecon", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("mask", help="generate a mask file")
    p.add_argument("--variant", choices=["pixel", "fourier"], required=True)
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--kernel", type=int, default=4, help="pixel pooling K")
    p.add_argument("--masks", type=int, default=1, help="pixel mask count b")
    p.add_argument("--strategy", choices=["uniform", "annular", "radial"],
                   default="uniform")
    p.add_argument("--compression", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("acquire", help="image -> measurement file")
    p.add_argument("--image", help="MRC stack path")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--side", type=int, default=32)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask", required=True)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("reconstruct", help="measurement -> image (MRC)")
    p.add_argument("--measurement", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--prior", choices=["dct", "wavelet", "tv", "ddpm"], required=True)
    p.add_argument("--lam", type=float, default=0.001)
    p.add_argument("--step-size", type=float, default=None)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--score-weights")
    p.add_argument("--timesteps", type=int, default=1000)
    p.add_argument("--zeta-max", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep", help="run the experiment grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="pairwise SSIM / PSNR of two MRC images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--index", type=int, default=0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fsc", help="shell correlation of two images/volumes")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--pixel-size", type=float, default=1.0)
    p.set_defaults(func=cmd_fsc)

    p = sub.add_parser("report", help="render figures from a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MrcParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
