"""Experiment sweep driver: grid of (prior x masking x K x C x noise).

Configuration is a flat INI file (sections below, every key optional
unless stated). Results append to a versioned CSV, keyed so finished
cells are skipped on resume, and the report path renders summary
figures next to the CSV.

    [input]
    source = synthetic          ; synthetic | mrc
    mrc_path =                  ; required when source = mrc
    side = 32
    count = 16                  ; images evaluated per cell
    seed = 0                    ; phantom / selection seed

    [plan]
    variants = pixel fourier
    kernels = 4 16              ; pixel K values
    compressions = 10 2.5 1.4 1
    strategies = uniform        ; uniform annular radial

    [reconstruct]
    priors = dct                ; dct wavelet tv ddpm
    lam = 0.001
    step_size =                 ; blank -> 0.45 / ||A||^2
    epochs = 200
    score_weights =             ; CSSM file, needed for prior ddpm
    timesteps = 1000

    [noise]
    variances = 0.0
    seeds = 0

    [output]
    directory = out
    workers = 1
"""

from __future__ import annotations

import configparser
import csv
import os
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mrc, phantoms
from .diffusion import linear_schedule, load_score_weights
from .forward import MeasurementPlan, add_noise, apply, lipschitz_bound
from .masks import FourierStrategy, make_fourier_mask, make_pixel_masks
from .metrics import psnr, ssim
from .sampler import GuidanceSchedule, sample_posterior
from .sparse import NumericalFailure, Prior, SparseConfig, solve_sparse

CSV_SCHEMA = "# csrecon sweep schema v1"
CSV_COLUMNS = [
    "prior", "variant", "strategy", "kernel", "masks", "compression",
    "noise_var", "seed", "ssim", "psnr_db", "residual", "runtime_ms", "error",
]


@dataclass
class ExperimentConfig:
    source: str = "synthetic"
    mrc_path: str = ""
    side: int = 32
    count: int = 16
    seed: int = 0
    variants: list[str] = field(default_factory=lambda: ["fourier"])
    kernels: list[int] = field(default_factory=lambda: [4])
    compressions: list[float] = field(default_factory=lambda: [10.0, 2.5, 1.4, 1.0])
    strategies: list[str] = field(default_factory=lambda: ["uniform"])
    priors: list[str] = field(default_factory=lambda: ["dct"])
    lam: float = 0.001
    step_size: float | None = None
    epochs: int = 200
    score_weights: str = ""
    timesteps: int = 1000
    variances: list[float] = field(default_factory=lambda: [0.0])
    seeds: list[int] = field(default_factory=lambda: [0])
    directory: str = "out"
    workers: int = 1


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    cfg = ExperimentConfig()

    def get(section, key, default=None):
        if parser.has_option(section, key) and parser.get(section, key).strip():
            return parser.get(section, key).strip()
        return default

    cfg.source = get("input", "source", cfg.source)
    cfg.mrc_path = get("input", "mrc_path", cfg.mrc_path)
    cfg.side = int(get("input", "side", cfg.side))
    cfg.count = int(get("input", "count", cfg.count))
    cfg.seed = int(get("input", "seed", cfg.seed))
    if get("plan", "variants"):
        cfg.variants = get("plan", "variants").split()
    if get("plan", "kernels"):
        cfg.kernels = [int(v) for v in get("plan", "kernels").split()]
    if get("plan", "compressions"):
        cfg.compressions = [float(v) for v in get("plan", "compressions").split()]
    if get("plan", "strategies"):
        cfg.strategies = get("plan", "strategies").split()
    if get("reconstruct", "priors"):
        cfg.priors = get("reconstruct", "priors").split()
    cfg.lam = float(get("reconstruct", "lam", cfg.lam))
    step = get("reconstruct", "step_size")
    cfg.step_size = float(step) if step else None
    cfg.epochs = int(get("reconstruct", "epochs", cfg.epochs))
    cfg.score_weights = get("reconstruct", "score_weights", cfg.score_weights)
    cfg.timesteps = int(get("reconstruct", "timesteps", cfg.timesteps))
    if get("noise", "variances"):
        cfg.variances = [float(v) for v in get("noise", "variances").split()]
    if get("noise", "seeds"):
        cfg.seeds = [int(v) for v in get("noise", "seeds").split()]
    cfg.directory = get("output", "directory", cfg.directory)
    cfg.workers = int(get("output", "workers", cfg.workers))

    # Validate the plan grid early: every pixel (K, C) must give b >= 1.
    for k in cfg.kernels:
        if "pixel" in cfg.variants and cfg.side % k != 0:
            raise ValueError(f"kernel {k} does not divide side {cfg.side}")
    return cfg


def load_images(cfg: ExperimentConfig) -> list[np.ndarray]:
    """Evaluation images, each affinely normalized to [-1, 1]."""
    if cfg.source == "synthetic":
        return phantoms.synth_particles(cfg.count, cfg.side, cfg.seed)
    stack = mrc.read_mrc(cfg.mrc_path)
    imgs = []
    for i in range(min(cfg.count, len(stack))):
        img = stack[i]
        lo, hi = img.min(), img.max()
        imgs.append(2.0 * (img - lo) / (hi - lo) - 1.0 if hi > lo else img * 0.0)
    return imgs


@dataclass(frozen=True)
class SweepCell:
    prior: str
    variant: str
    strategy: str  # empty for pixel
    kernel: int  # 0 for fourier
    compression: float
    noise_var: float
    seed: int

    def key(self) -> tuple:
        return (
            self.prior, self.variant, self.strategy, str(self.kernel),
            f"{self.compression:g}", f"{self.noise_var:g}", str(self.seed),
        )


def enumerate_cells(cfg: ExperimentConfig) -> list[SweepCell]:
    cells = []
    for prior in cfg.priors:
        for var in cfg.variants:
            for nv in cfg.variances:
                for seed in cfg.seeds:
                    if var == "pixel":
                        for k in cfg.kernels:
                            for c in cfg.compressions:
                                cells.append(SweepCell(prior, var, "", k, c, nv, seed))
                    else:
                        for strat in cfg.strategies:
                            for c in cfg.compressions:
                                cells.append(SweepCell(prior, var, strat, 0, c, nv, seed))
    return cells


def _cell_seed(cell: SweepCell, base: int, salt: str) -> int:
    key = f"{salt}|{cell.variant}|{cell.strategy}|{cell.kernel}|{cell.compression:g}|{cell.seed}"
    return (base * 1000003 + zlib.crc32(key.encode())) & 0x7FFFFFFF


def build_plan(cell: SweepCell, side: int, base_seed: int) -> MeasurementPlan:
    mask_seed = _cell_seed(cell, base_seed, "mask")
    if cell.variant == "pixel":
        b = max(1, int(round(cell.kernel ** 2 / cell.compression)))
        return MeasurementPlan(make_pixel_masks(side, b, cell.kernel, mask_seed))
    strat = FourierStrategy(cell.strategy)
    return MeasurementPlan(make_fourier_mask(side, strat, cell.compression, mask_seed))


def _reconstruct(cell: SweepCell, cfg: ExperimentConfig, plan, y):
    if cell.prior in ("dct", "wavelet", "tv"):
        step = cfg.step_size
        if step is None:
            step = 0.45 / lipschitz_bound(plan)
        scfg = SparseConfig(
            prior=Prior(cell.prior), lam=cfg.lam, step_size=step, epochs=cfg.epochs
        )
        recon, trace = solve_sparse(y, scfg)
        return recon, trace.final_residual
    if cell.prior == "ddpm":
        schedule = linear_schedule(cfg.timesteps)
        model = load_score_weights(cfg.score_weights, schedule=schedule)
        zeta_max = 10.0 if (cell.variant == "pixel" and cell.kernel == 32) else 1.0
        guidance = GuidanceSchedule(zeta_max=zeta_max)
        recon, trace = sample_posterior(
            y, model, schedule, guidance, seed=_cell_seed(cell, cfg.seed, "chain")
        )
        return recon, float(np.mean(trace.residuals[-1]))
    raise ValueError(f"unknown prior {cell.prior!r}")


def run_cell(cell: SweepCell, cfg: ExperimentConfig, images) -> dict:
    row = dict.fromkeys(CSV_COLUMNS, "")
    row.update(
        prior=cell.prior, variant=cell.variant, strategy=cell.strategy,
        kernel=cell.kernel or "", noise_var=f"{cell.noise_var:g}", seed=cell.seed,
        compression=f"{cell.compression:g}",
    )
    start = time.perf_counter()
    try:
        plan = build_plan(cell, cfg.side, cfg.seed)
        row["masks"] = plan.mask.count if cell.variant == "pixel" else ""
        ssims, psnrs, residuals = [], [], []
        for i, img in enumerate(images):
            y = apply(plan, img)
            if cell.noise_var > 0:
                y = add_noise(y, cell.noise_var, _cell_seed(cell, cfg.seed, f"noise{i}"))
            recon, residual = _reconstruct(cell, cfg, plan, y)
            ssims.append(ssim(img, recon))
            psnrs.append(psnr(img, recon, peak=float(img.max() - img.min())))
            residuals.append(residual)
        row["ssim"] = f"{np.mean(ssims):.6f}"
        row["psnr_db"] = f"{np.mean(psnrs):.4f}"
        row["residual"] = f"{np.mean(residuals):.6g}"
    except (NumericalFailure, ValueError) as exc:
        row["error"] = str(exc).replace("\n", " ")
    row["runtime_ms"] = f"{(time.perf_counter() - start) * 1000:.1f}"
    return row


def _read_done_keys(csv_path) -> set:
    done = set()
    if not os.path.exists(csv_path):
        return done
    with open(csv_path, newline="") as fh:
        for rec in csv.DictReader(line for line in fh if not line.startswith("#")):
            done.add(
                (
                    rec["prior"], rec["variant"], rec["strategy"], rec["kernel"] or "0",
                    rec["compression"], rec["noise_var"], rec["seed"],
                )
            )
    return done


def run_sweep(cfg: ExperimentConfig, csv_path=None) -> str:
    """Execute every grid cell not already present in the CSV; returns its path."""
    os.makedirs(cfg.directory, exist_ok=True)
    if csv_path is None:
        csv_path = os.path.join(cfg.directory, "sweep.csv")
    images = load_images(cfg)
    cells = enumerate_cells(cfg)
    done = _read_done_keys(csv_path)
    todo = [c for c in cells if _norm_key(c.key()) not in done]

    fresh = not os.path.exists(csv_path)
    with open(csv_path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if fresh:
            fh.write(CSV_SCHEMA + "\n")
            writer.writeheader()
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(run_cell, c, cfg, images) for c in todo]
                for fut in futures:  # submission order keeps the CSV deterministic
                    writer.writerow(fut.result())
                    fh.flush()
        else:
            for cell in todo:
                writer.writerow(run_cell(cell, cfg, images))
                fh.flush()
    return csv_path


def _norm_key(key: tuple) -> tuple:
    prior, variant, strategy, kernel, comp, nv, seed = key
    return (prior, variant, strategy, kernel or "0", comp, nv, seed)


# ---------------------------------------------------------------------------
# Report figures rendered next to the delimited output.

def render_report(csv_path, out_dir=None) -> list[str]:
    """Render SSIM / PSNR vs compression curves from a sweep CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(csv_path))
    os.makedirs(out_dir, exist_ok=True)
    with open(csv_path, newline="") as fh:
        rows = [
            rec
            for rec in csv.DictReader(line for line in fh if not line.startswith("#"))
            if not rec["error"]
        ]
    if not rows:
        return []

    written = []
    for metric, label in (("ssim", "SSIM"), ("psnr_db", "PSNR (dB)")):
        fig, ax = plt.subplots(figsize=(6, 4))
        series: dict[str, list[tuple[float, float]]] = {}
        for rec in rows:
            tag = rec["strategy"] or f"K={rec['kernel']}"
            name = f"{rec['prior']} / {rec['variant']} {tag}"
            series.setdefault(name, []).append(
                (float(rec["compression"]), float(rec[metric]))
            )
        for name, pts in sorted(series.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
        ax.set_xlabel("compression factor C")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = os.path.join(out_dir, f"sweep_{metric}.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
