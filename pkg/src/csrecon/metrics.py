"""Fidelity metrics: SSIM, PSNR, and Fourier ring/shell correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.ndimage

from .transforms import DimensionError, ParameterError

FSC_THRESHOLD = 0.143

_SSIM_SIGMA = 1.5
_SSIM_TRUNCATE = 3.5  # 11-tap window at sigma 1.5
_SSIM_PAD = 5


@dataclass(frozen=True)
class MetricReport:
    name_a: str
    name_b: str
    ssim: float
    psnr_db: float


def ssim(a: np.ndarray, b: np.ndarray, data_range: float | None = None) -> float:
    """Structural similarity with an 11-wide Gaussian window (sigma 1.5).

    The dynamic range defaults to the value range of the reference
    image ``a``; pass the joint range explicitly for a symmetric score.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionError(f"need equal 2D shapes, got {a.shape} vs {b.shape}")
    if data_range is None:
        data_range = float(a.max() - a.min())
    if data_range <= 0:
        data_range = 1.0
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def blur(img):
        return scipy.ndimage.gaussian_filter(img, _SSIM_SIGMA, truncate=_SSIM_TRUNCATE)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    smap = num / den
    # trim the filter's edge effects, but keep a non-empty core for images
    # smaller than the 11-wide window
    p = min(_SSIM_PAD, (min(a.shape) - 1) // 2)
    core = smap[p:-p, p:-p] if p > 0 else smap
    return float(core.mean())


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 * log10(peak^2 / MSE); identical images report +inf."""
    if peak <= 0:
        raise ParameterError("peak must be > 0")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(peak ** 2 / mse)


@dataclass(frozen=True)
class ShellCorrelation:
    shell_radii: np.ndarray
    correlation: np.ndarray
    threshold: float
    threshold_crossing: float | None  # first radius below threshold, or None


def shell_correlation(
    a: np.ndarray,
    b: np.ndarray,
    bins: int | None = None,
    threshold: float = FSC_THRESHOLD,
) -> ShellCorrelation:
    """Per-shell normalized cross-correlation of Fourier coefficients.

    Works for 2D (ring) and 3D (shell) arrays. Shells partition the
    frequency radius range [0, D/2] into ``bins`` equal-width bands (shell
    0 holds DC alone at the default binning). Zero-energy shells get
    correlation 0, and the threshold crossing is located by linear
    interpolation between shell radii.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim not in (2, 3):
        raise DimensionError(f"need equal 2D or 3D shapes, got {a.shape} vs {b.shape}")
    side = a.shape[0]
    if bins is None:
        bins = side // 2

    fa = scipy.fft.fftn(a)
    fb = scipy.fft.fftn(b)
    grids = np.meshgrid(
        *[scipy.fft.fftfreq(s) * s for s in a.shape], indexing="ij"
    )
    r = np.sqrt(sum(g ** 2 for g in grids))
    width = (side / 2.0) / bins
    shell = np.minimum((r / width).astype(int), bins - 1)

    num = np.bincount(shell.ravel(), (fa * np.conj(fb)).real.ravel(), minlength=bins)
    pow_a = np.bincount(shell.ravel(), (np.abs(fa) ** 2).ravel(), minlength=bins)
    pow_b = np.bincount(shell.ravel(), (np.abs(fb) ** 2).ravel(), minlength=bins)
    denom = np.sqrt(pow_a * pow_b)
    corr = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    radii = (np.arange(bins) + 0.5) * width

    # the DC shell holds a single coefficient whose normalized correlation is
    # always +-1, so the crossing search starts at the first real shell
    crossing = None
    for i in range(1, bins):
        if corr[i] < threshold:
            if i == 1:
                crossing = float(radii[1])
            else:
                c0, c1 = corr[i - 1], corr[i]
                frac = (c0 - threshold) / (c0 - c1)
                crossing = float(radii[i - 1] + frac * (radii[i] - radii[i - 1]))
            break
    return ShellCorrelation(
        shell_radii=radii, correlation=corr, threshold=threshold,
        threshold_crossing=crossing,
    )


def resolution_angstrom(crossing_radius: float, side: int, pixel_size: float) -> float:
    """Convert a crossing radius (frequency-index units) to Angstroms.

    At the Nyquist radius D/2 this returns 2 * pixel_size.
    """
    if crossing_radius <= 0:
        raise ParameterError("crossing radius must be > 0")
    return 2.0 * pixel_size * (side / 2.0) / crossing_radius
