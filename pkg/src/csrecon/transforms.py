"""Orthogonal 2D transforms and elementwise kernels.

All transforms here are orthonormal, so Parseval holds exactly
(up to float rounding) and each inverse is the adjoint of its forward.
Every function accepts arrays of shape (..., D, D) and operates over
the trailing two axes, so batches of images go through unchanged.
"""

from __future__ import annotations

import numpy as np
import scipy.fft


class DimensionError(ValueError):
    """Raised when an array shape is incompatible with an operation."""


class ParameterError(ValueError):
    """Raised when a numeric parameter is out of its valid range."""


def _check_square(x: np.ndarray) -> int:
    x = np.asarray(x)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2] or x.shape[-1] < 2:
        raise DimensionError(f"expected square image of side >= 2, got shape {x.shape}")
    return x.shape[-1]


# ---------------------------------------------------------------------------
# FFT (unitary normalization: 1/sqrt(n) both ways, so masking in the
# frequency domain is an orthogonal projection).

def fft2_unitary(x: np.ndarray) -> np.ndarray:
    _check_square(x)
    return scipy.fft.fft2(x, norm="ortho")


def ifft2_unitary(c: np.ndarray) -> np.ndarray:
    _check_square(c)
    return scipy.fft.ifft2(c, norm="ortho")


# ---------------------------------------------------------------------------
# DCT (type-II, orthonormal scaling; self-adjoint pair with type-III).

def dct2_forward(x: np.ndarray) -> np.ndarray:
    """Orthonormal 2D type-II DCT coefficients of a square image."""
    _check_square(x)
    return scipy.fft.dctn(x, type=2, norm="ortho", axes=(-2, -1))


def dct2_inverse(c: np.ndarray) -> np.ndarray:
    """Exact inverse (= adjoint) of :func:`dct2_forward`."""
    _check_square(c)
    return scipy.fft.idctn(c, type=2, norm="ortho", axes=(-2, -1))


# ---------------------------------------------------------------------------
# Multilevel orthonormal Haar wavelet with periodic boundary handling.
# Layout is the standard nested one: after each level the approximation
# band occupies the top-left quadrant of the previous band.

_ISQRT2 = 1.0 / np.sqrt(2.0)


def default_wavelet_levels(side: int) -> int:
    """Max levels such that the coarsest band is at least 4x4."""
    levels = 0
    while side % 2 == 0 and side // 2 >= 4:
        side //= 2
        levels += 1
    return max(levels, 1)


def _check_levels(side: int, levels: int) -> None:
    if levels < 1:
        raise ParameterError("levels must be >= 1")
    if side % (1 << levels) != 0:
        raise DimensionError(f"side {side} not divisible by 2^{levels}")


def _haar_analysis_1d(a: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.moveaxis(a, axis, -1)
    even, odd = a[..., 0::2], a[..., 1::2]
    lo = (even + odd) * _ISQRT2
    hi = (even - odd) * _ISQRT2
    return np.moveaxis(lo, -1, axis), np.moveaxis(hi, -1, axis)


def _haar_synthesis_1d(lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    lo = np.moveaxis(lo, axis, -1)
    hi = np.moveaxis(hi, axis, -1)
    out = np.empty(lo.shape[:-1] + (2 * lo.shape[-1],), dtype=np.result_type(lo, hi))
    out[..., 0::2] = (lo + hi) * _ISQRT2
    out[..., 1::2] = (lo - hi) * _ISQRT2
    return np.moveaxis(out, -1, axis)


def wavelet_forward(x: np.ndarray, levels: int | None = None) -> np.ndarray:
    """Orthonormal multilevel 2D Haar decomposition (nested layout)."""
    side = _check_square(x)
    if levels is None:
        levels = default_wavelet_levels(side)
    _check_levels(side, levels)
    out = np.array(x, dtype=float, copy=True)
    s = side
    for _ in range(levels):
        band = out[..., :s, :s]
        lo, hi = _haar_analysis_1d(band, -1)
        ll, lh = _haar_analysis_1d(lo, -2)
        hl, hh = _haar_analysis_1d(hi, -2)
        h = s // 2
        out[..., :h, :h] = ll
        out[..., h:s, :h] = lh
        out[..., :h, h:s] = hl
        out[..., h:s, h:s] = hh
        s = h
    return out


def wavelet_inverse(c: np.ndarray, levels: int | None = None) -> np.ndarray:
    """Perfect-reconstruction inverse of :func:`wavelet_forward`."""
    side = _check_square(c)
    if levels is None:
        levels = default_wavelet_levels(side)
    _check_levels(side, levels)
    out = np.array(c, dtype=float, copy=True)
    for lev in reversed(range(levels)):
        s = side >> lev
        h = s // 2
        ll = out[..., :h, :h]
        lh = out[..., h:s, :h]
        hl = out[..., :h, h:s]
        hh = out[..., h:s, h:s]
        lo = _haar_synthesis_1d(ll, lh, -2)
        hi = _haar_synthesis_1d(hl, hh, -2)
        out[..., :s, :s] = _haar_synthesis_1d(lo, hi, -1)
    return out


# ---------------------------------------------------------------------------
# Total variation and soft thresholding.

def tv_anisotropic(x: np.ndarray) -> float:
    """Anisotropic TV: sum of |horizontal| + |vertical| first differences.

    Out-of-range neighbors are skipped (no wraparound).
    """
    _check_square(x)
    x = np.asarray(x, dtype=float)
    dv = np.abs(np.diff(x, axis=-2)).sum(axis=(-2, -1))
    dh = np.abs(np.diff(x, axis=-1)).sum(axis=(-2, -1))
    total = dv + dh
    return float(total) if np.ndim(total) == 0 else total


def soft_threshold(c: np.ndarray, lam: float) -> np.ndarray:
    """Elementwise sign(c) * max(|c| - lam, 0); the L1 prox."""
    if lam < 0:
        raise ParameterError("threshold must be nonnegative")
    c = np.asarray(c, dtype=float)
    return np.sign(c) * np.maximum(np.abs(c) - lam, 0.0)
