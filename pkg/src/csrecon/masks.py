"""Mask generation for both acquisition families.

Pixel-space masking draws ``b`` independent Bernoulli(0.5) binary masks
that are later combined with KxK summation pooling (compression K^2/b).
Fourier-space masking keeps a subset of coefficients on the fftshifted
frequency grid (DC at the center), via one of three strategies:
uniform, annular rings with a low-frequency bias, or radial spokes.

The ring weighting width is interpreted as side/8 pixels: a width of
n/8 = D^2/8 pixels would make the weights essentially flat and kill the
intended low-frequency bias.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .transforms import DimensionError, ParameterError

RING_COUNT = 100
SPOKE_COUNT = 100

MASK_MAGIC = b"CSMK"
MASK_VERSION = 1


class FourierStrategy(Enum):
    UNIFORM = "uniform"
    ANNULAR = "annular"
    RADIAL = "radial"


@dataclass(frozen=True)
class PixelMaskSet:
    """b binary masks over a DxD grid, pooled with a KxK kernel."""

    side: int
    count: int
    kernel: int
    masks: np.ndarray  # (b, D, D) uint8
    seed: int | None = None

    @property
    def compression(self) -> float:
        return self.kernel ** 2 / self.count


@dataclass(frozen=True)
class FourierMask:
    """Binary keep-mask over the fftshifted DxD frequency grid."""

    side: int
    strategy: FourierStrategy
    keep: np.ndarray  # (D, D) bool
    seed: int | None = None

    @property
    def kept_count(self) -> int:
        return int(self.keep.sum())

    @property
    def compression(self) -> float:
        return self.side ** 2 / self.kept_count


@dataclass(frozen=True)
class RingWeighting:
    """Mid-radii and sampling weights for the equal-area ring partition."""

    side: int
    ring_count: int = RING_COUNT
    mid_radii: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        edges = ring_edges(self.side, self.ring_count)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nu = self.side / 8.0
        w = np.exp(-mid / (2.0 * nu ** 2))
        object.__setattr__(self, "mid_radii", mid)
        object.__setattr__(self, "weights", w)


def ring_edges(side: int, ring_count: int = RING_COUNT) -> np.ndarray:
    """Radial boundaries of equal-area rings on a disc of radius side/2."""
    j = np.arange(ring_count + 1)
    return (side / 2.0) * np.sqrt(j / ring_count)


def _radius_grid(side: int) -> np.ndarray:
    # Center pixel matches the fftshifted DC location (index side//2).
    coords = np.arange(side) - side // 2
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    return np.hypot(yy, xx)


def ring_index(side: int, ring_count: int = RING_COUNT) -> np.ndarray:
    """Ring assignment per pixel; corners beyond side/2 land in the last ring."""
    r = _radius_grid(side)
    edges = ring_edges(side, ring_count)
    idx = np.searchsorted(edges, r, side="right") - 1
    return np.clip(idx, 0, ring_count - 1)


def spoke_index(side: int, spoke_count: int = SPOKE_COUNT) -> np.ndarray:
    """Equal-angle spoke assignment per pixel on the shifted grid."""
    coords = np.arange(side) - side // 2
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    theta = np.mod(np.arctan2(yy, xx), 2.0 * np.pi)
    idx = np.floor(theta / (2.0 * np.pi / spoke_count)).astype(int)
    return np.clip(idx, 0, spoke_count - 1)


def make_pixel_masks(side: int, b: int, kernel: int, seed: int) -> PixelMaskSet:
    """Draw b i.i.d. Bernoulli(0.5) masks; deterministic given the seed."""
    if b < 1:
        raise ParameterError("mask count b must be >= 1")
    if kernel < 1 or side % kernel != 0:
        raise DimensionError(f"kernel {kernel} must divide side {side}")
    rng = np.random.default_rng(seed)
    masks = (rng.random((b, side, side)) < 0.5).astype(np.uint8)
    return PixelMaskSet(side=side, count=b, kernel=kernel, masks=masks, seed=seed)


def _weighted_sample_without_replacement(rng, weights: np.ndarray, k: int) -> np.ndarray:
    # Sequential draws proportional to weight among remaining items.
    weights = np.array(weights, dtype=float, copy=True)
    chosen = []
    for _ in range(k):
        p = weights / weights.sum()
        i = rng.choice(len(weights), p=p)
        chosen.append(i)
        weights[i] = 0.0
    return np.array(chosen)


def make_fourier_mask(
    side: int, strategy: FourierStrategy, compression: float, seed: int
) -> FourierMask:
    """Build a keep-mask targeting m = n / compression kept coefficients."""
    if compression < 1:
        raise ParameterError("compression factor must be >= 1")
    n = side * side
    rng = np.random.default_rng(seed)
    keep = np.zeros((side, side), dtype=bool)

    if strategy is FourierStrategy.UNIFORM:
        m = int(round(n / compression))
        flat_idx = rng.choice(n, size=m, replace=False)
        keep.flat[flat_idx] = True
    elif strategy is FourierStrategy.ANNULAR:
        k = max(1, int(round(RING_COUNT / compression)))
        rings = _weighted_sample_without_replacement(
            rng, RingWeighting(side).weights, k
        )
        keep = np.isin(ring_index(side), rings)
    elif strategy is FourierStrategy.RADIAL:
        k = max(1, int(round(SPOKE_COUNT / compression)))
        spokes = rng.choice(SPOKE_COUNT, size=k, replace=False)
        keep = np.isin(spoke_index(side), spokes)
    else:  # pragma: no cover
        raise ParameterError(f"unknown strategy {strategy!r}")

    return FourierMask(side=side, strategy=strategy, keep=keep, seed=seed)


def compression_of(mask: PixelMaskSet | FourierMask) -> float:
    """n/m for Fourier masks; K^2/b for pixel mask sets."""
    return mask.compression


# ---------------------------------------------------------------------------
# Portable binary blob: magic "CSMK", version byte, kind byte, D, payload.
# kind 0 = pixel (then b, K, bitset of b*n bits); kinds 1-3 = Fourier
# uniform/annular/radial (then m, bitset of n bits, row-major shifted grid).

_FOURIER_KIND = {
    FourierStrategy.UNIFORM: 1,
    FourierStrategy.ANNULAR: 2,
    FourierStrategy.RADIAL: 3,
}
_KIND_FOURIER = {v: k for k, v in _FOURIER_KIND.items()}


def mask_to_bytes(mask: PixelMaskSet | FourierMask) -> bytes:
    if isinstance(mask, PixelMaskSet):
        head = struct.pack(
            "<4sBBIII", MASK_MAGIC, MASK_VERSION, 0, mask.side, mask.count, mask.kernel
        )
        bits = np.packbits(mask.masks.astype(np.uint8).ravel())
        return head + bits.tobytes()
    head = struct.pack(
        "<4sBBII",
        MASK_MAGIC,
        MASK_VERSION,
        _FOURIER_KIND[mask.strategy],
        mask.side,
        mask.kept_count,
    )
    bits = np.packbits(mask.keep.astype(np.uint8).ravel())
    return head + bits.tobytes()


def mask_from_bytes(blob: bytes) -> PixelMaskSet | FourierMask:
    if len(blob) < 10:
        raise ValueError("mask blob shorter than fixed header")
    magic, version, kind, side = struct.unpack_from("<4sBBI", blob, 0)
    if magic != MASK_MAGIC:
        raise ValueError(f"bad mask magic {magic!r}")
    if version != MASK_VERSION:
        raise ValueError(f"unsupported mask version {version}")
    n = side * side
    if kind == 0:
        b, kernel = struct.unpack_from("<II", blob, 10)
        expect = 18 + (b * n + 7) // 8
        if len(blob) != expect:
            raise ValueError(f"mask blob length {len(blob)}, expected {expect}")
        payload = np.frombuffer(blob, dtype=np.uint8, offset=18)
        masks = np.unpackbits(payload, count=b * n).reshape(b, side, side)
        return PixelMaskSet(side=side, count=b, kernel=kernel, masks=masks)
    if kind in _KIND_FOURIER:
        (m,) = struct.unpack_from("<I", blob, 10)
        expect = 14 + (n + 7) // 8
        if len(blob) != expect:
            raise ValueError(f"mask blob length {len(blob)}, expected {expect}")
        payload = np.frombuffer(blob, dtype=np.uint8, offset=14)
        keep = np.unpackbits(payload, count=n).reshape(side, side).astype(bool)
        if int(keep.sum()) != m:
            raise ValueError("mask bitset popcount disagrees with header m")
        return FourierMask(side=side, strategy=_KIND_FOURIER[kind], keep=keep)
    raise ValueError(f"unknown mask kind byte {kind}")
