"""Proximal gradient descent (ISTA) with DCT, wavelet, and TV priors.

The composite objective is ||A(x) - y||_2^2 + lam * Psi(x) where Psi is
the L1 norm of the DCT or Haar wavelet coefficients, or the anisotropic
total variation. Each epoch does a gradient step of size alpha on the
data term followed by the prox of lam * Psi; composing the two scales
the effective soft threshold to lam * alpha.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import transforms
from .forward import Measurement, adjoint, apply, lipschitz_bound
from .transforms import ParameterError

GRID_LAMBDA = (0.1, 0.01, 0.001, 0.0001)
GRID_ALPHA = (0.001, 0.01, 0.1, 0.5, 1.0)

DIVERGENCE_LIMIT = 1e12


class Prior(Enum):
    DCT = "dct"
    WAVELET = "wavelet"
    TV = "tv"


class NumericalFailure(RuntimeError):
    """Raised when an iteration diverges (objective above the limit)."""


@dataclass(frozen=True)
class SparseConfig:
    prior: Prior
    lam: float
    step_size: float
    epochs: int = 200
    tolerance: float = 0.0  # early stop on max|x_{t+1} - x_t|; 0 disables

    def __post_init__(self):
        if self.lam < 0 or self.step_size <= 0 or self.epochs < 1:
            raise ParameterError("lam must be >= 0, step_size > 0, epochs >= 1")


@dataclass
class SolveTrace:
    objective_per_epoch: list[float] = field(default_factory=list)
    final_residual: float = 0.0
    epochs_run: int = 0
    tv_prox_warnings: int = 0


def trace_to_csv(trace: SolveTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "objective"])
        for i, obj in enumerate(trace.objective_per_epoch):
            writer.writerow([i, f"{obj:.12g}"])


def _tv_grad_op(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.diff(x, axis=0), np.diff(x, axis=1)


def _tv_div_op(pv: np.ndarray, ph: np.ndarray, side: int) -> np.ndarray:
    out = np.zeros((side, side))
    out[1:, :] += pv
    out[:-1, :] -= pv
    out[:, 1:] += ph
    out[:, :-1] -= ph
    return out


def tv_prox(
    z: np.ndarray,
    weight: float,
    tol: float = 1e-6,
    max_iter: int = 200,
    full_output: bool = False,
):
    """argmin_x weight*TV(x) + 0.5*||x - z||^2 (anisotropic TV).

    Solved by accelerated projected dual ascent: the dual variable per
    finite-difference edge lives in the box [-weight, weight]. Returns the
    best iterate if the fixed-point tolerance is not met within the cap;
    ``full_output=True`` additionally returns the converged flag.
    """
    if weight <= 0:
        raise ParameterError("tv_prox weight must be > 0")
    z = np.asarray(z, dtype=float)
    side = z.shape[-1]
    pv = np.zeros((side - 1, side))
    ph = np.zeros((side, side - 1))
    qv, qh = pv.copy(), ph.copy()
    tau = 1.0 / 8.0  # ||D||^2 <= 8 for the 2D difference operator
    t_acc = 1.0
    x = None
    converged = False
    for _ in range(max_iter):
        x_new = z - _tv_div_op(qv, qh, side)
        gv, gh = _tv_grad_op(x_new)
        pv_new = np.clip(qv + tau * gv, -weight, weight)
        ph_new = np.clip(qh + tau * gh, -weight, weight)
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t_acc ** 2)) / 2.0
        beta = (t_acc - 1.0) / t_new
        qv = pv_new + beta * (pv_new - pv)
        qh = ph_new + beta * (ph_new - ph)
        pv, ph, t_acc = pv_new, ph_new, t_new
        change = np.inf if x is None else float(np.max(np.abs(x_new - x)))
        x = x_new
        if change <= tol:
            converged = True
            break
    x = z - _tv_div_op(pv, ph, side)
    if full_output:
        return x, converged
    return x


def _prox(x: np.ndarray, cfg: SparseConfig, trace: SolveTrace) -> np.ndarray:
    thresh = cfg.lam * cfg.step_size
    if thresh == 0.0:
        return x
    if cfg.prior is Prior.DCT:
        return transforms.dct2_inverse(
            transforms.soft_threshold(transforms.dct2_forward(x), thresh)
        )
    if cfg.prior is Prior.WAVELET:
        return transforms.wavelet_inverse(
            transforms.soft_threshold(transforms.wavelet_forward(x), thresh)
        )
    out, ok = tv_prox(x, thresh, full_output=True)
    if not ok:
        trace.tv_prox_warnings += 1
    return out


def regularizer_value(x: np.ndarray, prior: Prior) -> float:
    if prior is Prior.DCT:
        return float(np.abs(transforms.dct2_forward(x)).sum())
    if prior is Prior.WAVELET:
        return float(np.abs(transforms.wavelet_forward(x)).sum())
    return transforms.tv_anisotropic(x)


def objective_value(x: np.ndarray, y: Measurement, cfg: SparseConfig) -> float:
    r = apply(y.plan, x).data - y.data
    return float(np.sum(np.abs(r) ** 2)) + cfg.lam * regularizer_value(x, cfg.prior)


def _initial_iterate(y: Measurement) -> np.ndarray:
    # Zero-fill back-projection, rescaled so the first residual is bounded.
    x0 = adjoint(y.plan, y)
    norm_ax = float(np.linalg.norm(apply(y.plan, x0).data))
    norm_y = float(np.linalg.norm(y.data))
    if norm_ax > 0 and norm_y > 0:
        x0 *= norm_y / norm_ax
    return x0


def solve_sparse(
    y: Measurement, cfg: SparseConfig, safe_step: bool = False
) -> tuple[np.ndarray, SolveTrace]:
    """Run ISTA / proximal gradient descent for the configured prior."""
    if safe_step and cfg.step_size * lipschitz_bound(y.plan) > 2.0:
        raise ParameterError(
            f"step size {cfg.step_size} exceeds 2 / ||A||^2 for this plan"
        )
    trace = SolveTrace()
    x = _initial_iterate(y)
    prev = x
    for epoch in range(cfg.epochs):
        r = apply(y.plan, x).data - y.data
        grad = 2.0 * adjoint(y.plan, r)
        z = x - cfg.step_size * grad
        x = _prox(z, cfg, trace)
        obj = objective_value(x, y, cfg)
        trace.objective_per_epoch.append(obj)
        trace.epochs_run = epoch + 1
        if not np.isfinite(obj) or obj > DIVERGENCE_LIMIT:
            raise NumericalFailure(
                f"diverged at epoch {epoch} with objective {obj:.3e} "
                f"(prior={cfg.prior.value}, lam={cfg.lam}, step={cfg.step_size})"
            )
        if cfg.tolerance > 0 and np.max(np.abs(x - prev)) <= cfg.tolerance:
            break
        prev = x
    trace.final_residual = float(np.linalg.norm(apply(y.plan, x).data - y.data))
    return x, trace


def grid_search(
    train_images: list[np.ndarray],
    plan,
    prior: Prior,
    epochs: int = 200,
    noise_var: float = 0.0,
    noise_seed: int = 0,
) -> SparseConfig:
    """Exhaustive search over the 4x5 (lam, alpha) grid, scored by mean SSIM.

    Ties break toward larger lam, then smaller alpha. Configurations that
    diverge score -inf; if everything diverges that is a configuration error.
    """
    from .forward import add_noise
    from .metrics import ssim

    if not train_images:
        raise ParameterError("grid search needs at least one training image")
    best: tuple[float, float, float] | None = None  # (score, lam, -alpha)
    best_cfg: SparseConfig | None = None
    for lam in GRID_LAMBDA:
        for alpha in GRID_ALPHA:
            cfg = SparseConfig(prior=prior, lam=lam, step_size=alpha, epochs=epochs)
            scores = []
            try:
                for img in train_images:
                    y = apply(plan, img)
                    if noise_var > 0:
                        y = add_noise(y, noise_var, noise_seed)
                    recon, _ = solve_sparse(y, cfg)
                    scores.append(ssim(img, recon))
            except NumericalFailure:
                continue
            key = (float(np.mean(scores)), lam, -alpha)
            if best is None or key > best:
                best, best_cfg = key, cfg
    if best_cfg is None:
        raise ParameterError("every (lam, alpha) configuration diverged")
    return best_cfg
