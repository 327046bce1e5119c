"""Measurement operator A, its exact adjoint, and Gaussian noise.

Two acquisition families share one interface:

* PIXEL: each Bernoulli mask is applied elementwise, then non-overlapping
  KxK block sums pool the masked image; outputs concatenate over masks.
* FOURIER: the unitary FFT of the image is taken, shifted so DC sits at
  the center, and the kept complex coefficients are read out in row-major
  order over the shifted grid. Keeping only those coefficients is
  information-equivalent to the zero-filled inverse-FFT image; the
  ``zero_filled_inverse`` view reproduces that image exactly.

All operations broadcast over leading batch axes: images are
(..., D, D) and measurement data is (..., m).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from .masks import FourierMask, PixelMaskSet
from .transforms import DimensionError, ParameterError, fft2_unitary, ifft2_unitary


@dataclass(frozen=True)
class MeasurementPlan:
    """A concrete instantiation of the operator A with its mask."""

    mask: PixelMaskSet | FourierMask

    @property
    def side(self) -> int:
        return self.mask.side

    @property
    def is_fourier(self) -> bool:
        return isinstance(self.mask, FourierMask)

    @property
    def output_dim(self) -> int:
        if self.is_fourier:
            return self.mask.kept_count
        m = self.mask
        return m.count * (m.side // m.kernel) ** 2

    @property
    def compression(self) -> float:
        return self.mask.compression


@dataclass(frozen=True)
class Measurement:
    plan: MeasurementPlan
    data: np.ndarray  # (..., m); real for PIXEL, complex for FOURIER
    noise_var: float = 0.0

    def __post_init__(self):
        if self.data.shape[-1] != self.plan.output_dim:
            raise DimensionError(
                f"measurement length {self.data.shape[-1]} != plan output "
                f"dimension {self.plan.output_dim}"
            )


def _pool_sum(x: np.ndarray, kernel: int) -> np.ndarray:
    side = x.shape[-1]
    blocks = side // kernel
    shaped = x.reshape(x.shape[:-2] + (blocks, kernel, blocks, kernel))
    return shaped.sum(axis=(-3, -1))


def _unpool(y: np.ndarray, kernel: int) -> np.ndarray:
    # Broadcast each pooled value back over its KxK block.
    return np.repeat(np.repeat(y, kernel, axis=-2), kernel, axis=-1)


def apply(plan: MeasurementPlan, x: np.ndarray) -> Measurement:
    """Forward measurement y = A(x)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != plan.side or x.shape[-2] != plan.side:
        raise DimensionError(f"image shape {x.shape} != plan side {plan.side}")
    if plan.is_fourier:
        spec = scipy.fft.fftshift(fft2_unitary(x), axes=(-2, -1))
        data = spec[..., plan.mask.keep]
    else:
        m = plan.mask
        masked = m.masks * x[..., None, :, :]
        pooled = _pool_sum(masked, m.kernel)  # (..., b, D/K, D/K)
        data = pooled.reshape(pooled.shape[:-3] + (-1,))
    return Measurement(plan=plan, data=data)


def adjoint(plan: MeasurementPlan, y: Measurement | np.ndarray) -> np.ndarray:
    """Exact adjoint A* under the standard inner products; returns a real image."""
    data = y.data if isinstance(y, Measurement) else np.asarray(y)
    if data.shape[-1] != plan.output_dim:
        raise DimensionError(
            f"measurement length {data.shape[-1]} != plan output dim {plan.output_dim}"
        )
    if plan.is_fourier:
        side = plan.side
        spec = np.zeros(data.shape[:-1] + (side, side), dtype=complex)
        spec[..., plan.mask.keep] = data
        return ifft2_unitary(scipy.fft.ifftshift(spec, axes=(-2, -1))).real
    m = plan.mask
    blocks = m.side // m.kernel
    pooled = data.reshape(data.shape[:-1] + (m.count, blocks, blocks))
    spread = _unpool(pooled, m.kernel) * m.masks
    return spread.sum(axis=-3)


def zero_filled_inverse(y: Measurement) -> np.ndarray:
    """The zero-filled inverse-FFT image form of a Fourier measurement."""
    if not y.plan.is_fourier:
        raise ParameterError("zero-filled inverse is defined for Fourier plans only")
    return adjoint(y.plan, y)


def add_noise(y: Measurement, noise_var: float, seed: int) -> Measurement:
    """Add N(0, noise_var) i.i.d. to every real component of the data."""
    if noise_var < 0:
        raise ParameterError("noise variance must be nonnegative")
    if noise_var == 0:
        return y
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(noise_var)
    if np.iscomplexobj(y.data):
        noise = rng.normal(scale=sigma, size=y.data.shape) + 1j * rng.normal(
            scale=sigma, size=y.data.shape
        )
    else:
        noise = rng.normal(scale=sigma, size=y.data.shape)
    return replace(y, data=y.data + noise, noise_var=noise_var)


def lipschitz_bound(plan: MeasurementPlan, iterations: int = 50) -> float:
    """Upper bound on ||A||_2^2 via power iteration on A* A.

    Fourier plans are orthogonal projections under the unitary FFT, so the
    bound is exactly 1.
    """
    if plan.is_fourier:
        return 1.0
    rng = np.random.default_rng(0)
    v = rng.standard_normal((plan.side, plan.side))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = adjoint(plan, apply(plan, v))
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    # Small safety factor absorbs not-quite-converged iterates.
    return lam * 1.01


# ---------------------------------------------------------------------------
# Serialization: magic "CSMS", variant byte (0 pixel / 1 fourier), D, m,
# noise variance as f64, then little-endian f64 payload (complex data is
# stored as interleaved re, im pairs).

MEAS_MAGIC = b"CSMS"


def measurement_to_bytes(y: Measurement) -> bytes:
    if y.data.ndim != 1:
        raise ParameterError("only single (unbatched) measurements are serializable")
    variant = 1 if y.plan.is_fourier else 0
    head = struct.pack(
        "<4sBIId", MEAS_MAGIC, variant, y.plan.side, y.data.shape[0], y.noise_var
    )
    if variant:
        payload = np.empty(2 * y.data.shape[0], dtype="<f8")
        payload[0::2] = y.data.real
        payload[1::2] = y.data.imag
    else:
        payload = np.asarray(y.data, dtype="<f8")
    return head + payload.tobytes()


def measurement_from_bytes(blob: bytes, plan: MeasurementPlan) -> Measurement:
    magic, variant, side, m, noise_var = struct.unpack_from("<4sBIId", blob, 0)
    if magic != MEAS_MAGIC:
        raise ValueError(f"bad measurement magic {magic!r}")
    if side != plan.side or m != plan.output_dim or variant != int(plan.is_fourier):
        raise DimensionError("measurement header disagrees with the given plan")
    offset = struct.calcsize("<4sBIId")
    raw = np.frombuffer(blob, dtype="<f8", offset=offset)
    if variant:
        # reinterpret the interleaved real/imag pairs in place; arithmetic
        # like re + 1j*im would flip the sign bit of negative zeros
        data = raw.view("<c16").copy()
    else:
        data = raw.copy()
    return Measurement(plan=plan, data=data, noise_var=noise_var)
