"""DDPM machinery: noise schedules, score models, Tweedie denoising.

The schedule follows the standard discrete DDPM parameterization with
the convention alpha_bar(0) = 1, which makes the reverse variance zero
at the final step. Score models are pluggable through a tiny interface;
``GaussianScore`` gives the exact marginal score of a diffused isotropic
Gaussian prior (used for exact testing), and ``MlpScore`` is a small
fully connected network loaded from the portable "CSSM" weight file.

Images entering the diffusion pipeline are assumed normalized to [-1, 1];
the predicted clean image is clipped to that interval.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .transforms import ParameterError

WEIGHT_MAGIC = b"CSSM"
# Version encodes the model output convention: 1 = score s(x, t),
# 2 = noise prediction eps(x, t) converted to a score on evaluation.
WEIGHT_VERSION_SCORE = 1
WEIGHT_VERSION_EPS = 2

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """beta_t, alpha_t, alpha_bar_t and the reverse variance over t = 1..T.

    Arrays are indexed t-1; ``alpha_bar_at(0)`` returns 1 by convention,
    so ``sigma_tilde_sq[0]`` is exactly 0.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)
    sigma_tilde_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (self.T,) or np.any(beta <= 0) or np.any(beta >= 1):
            raise ParameterError("beta must have length T with entries in (0, 1)")
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        prev = np.concatenate(([1.0], alpha_bar[:-1]))
        sigma_tilde_sq = (1.0 - prev) / (1.0 - alpha_bar) * beta
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_bar", alpha_bar)
        object.__setattr__(self, "sigma_tilde_sq", sigma_tilde_sq)

    def alpha_bar_at(self, t: int) -> float:
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])


def linear_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linear beta schedule, endpoints inclusive."""
    if not (0.0 < beta_start < beta_end < 1.0):
        raise ParameterError("need 0 < beta_start < beta_end < 1")
    return NoiseSchedule(T=T, beta=np.linspace(beta_start, beta_end, T))


class ScoreModel(Protocol):
    def evaluate(self, x_t: np.ndarray, t: int) -> np.ndarray:
        """Approximate grad_x log p(x_t) at diffusion time t."""
        ...


@dataclass(frozen=True)
class GaussianScore:
    """Exact marginal score of a diffused isotropic Gaussian prior N(mu, v*I)."""

    mean: np.ndarray
    variance: float
    schedule: NoiseSchedule

    def evaluate(self, x_t: np.ndarray, t: int) -> np.ndarray:
        ab = self.schedule.alpha_bar_at(t)
        return -(x_t - np.sqrt(ab) * self.mean) / (ab * self.variance + 1.0 - ab)


def tweedie_denoise(
    x_t: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    score: ScoreModel,
    clip: bool = True,
) -> np.ndarray:
    """Posterior-mean estimate x0_hat = (x_t + (1 - ab_t) * s) / sqrt(ab_t)."""
    if not 1 <= t <= schedule.T:
        raise ParameterError(f"t={t} outside 1..{schedule.T}")
    ab = schedule.alpha_bar_at(t)
    x0 = (x_t + (1.0 - ab) * score.evaluate(x_t, t)) / np.sqrt(ab)
    if clip:
        x0 = np.clip(x0, -1.0, 1.0)
    return x0


# ---------------------------------------------------------------------------
# Time embedding and the MLP score network.

def time_embedding(t: float, dim: int) -> np.ndarray:
    """Sinusoidal embedding; wavelengths geometric from 1 to 1e4 over dim."""
    half = dim // 2
    k = np.arange(half)
    freqs = np.exp(-np.log(1e4) * k / max(half - 1, 1))
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])


def _silu(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class MlpScore:
    """Flatten -> fully connected layers with SiLU, sinusoidal time embedding
    concatenated to the input. Output shape matches input shape."""

    side: int
    embed_dim: int
    weights: tuple[np.ndarray, ...]  # per layer, shape (rows, cols)
    biases: tuple[np.ndarray, ...]  # per layer, shape (rows,)
    convention: int = WEIGHT_VERSION_SCORE
    schedule: NoiseSchedule | None = None

    def __post_init__(self):
        n = self.side * self.side
        cols = n + self.embed_dim
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != cols or b.shape != (w.shape[0],):
                raise ParameterError("inconsistent layer dimension chain")
            cols = w.shape[0]
        if cols != n:
            raise ParameterError("final layer must map back to image dimension")
        if self.convention == WEIGHT_VERSION_EPS and self.schedule is None:
            raise ParameterError("eps-convention weights need a noise schedule")

    def evaluate(self, x_t: np.ndarray, t: int) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=float)
        shape = x_t.shape
        h = x_t.reshape(shape[:-2] + (-1,))
        emb = np.broadcast_to(
            time_embedding(float(t), self.embed_dim), shape[:-2] + (self.embed_dim,)
        )
        h = np.concatenate([h, emb], axis=-1)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i != last:
                h = _silu(h)
        out = h.reshape(shape)
        if self.convention == WEIGHT_VERSION_EPS:
            ab = self.schedule.alpha_bar_at(t)
            out = -out / np.sqrt(1.0 - ab)
        return out


# ---------------------------------------------------------------------------
# Weight file: magic "CSSM", u32 version, u32 D, u32 embed_dim,
# u32 layer_count, per-layer (u32 rows, u32 cols, row-major f32 weights,
# f32 biases), trailing CRC32 of everything before it. Little-endian.

def score_weights_to_bytes(model: MlpScore) -> bytes:
    parts = [
        struct.pack(
            "<4sIIII",
            WEIGHT_MAGIC,
            model.convention,
            model.side,
            model.embed_dim,
            len(model.weights),
        )
    ]
    for w, b in zip(model.weights, model.biases):
        parts.append(struct.pack("<II", w.shape[0], w.shape[1]))
        parts.append(np.asarray(w, dtype="<f4").tobytes())
        parts.append(np.asarray(b, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def score_weights_from_bytes(
    blob: bytes, schedule: NoiseSchedule | None = None
) -> MlpScore:
    if len(blob) < 24:
        raise ValueError("weight blob truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ValueError("weight file checksum mismatch")
    magic, version, side, embed_dim, layer_count = struct.unpack_from("<4sIIII", body, 0)
    if magic != WEIGHT_MAGIC:
        raise ValueError(f"bad weight magic {magic!r}")
    if version not in (WEIGHT_VERSION_SCORE, WEIGHT_VERSION_EPS):
        raise ValueError(f"unknown weight version {version}")
    offset = struct.calcsize("<4sIIII")
    weights, biases = [], []
    for _ in range(layer_count):
        rows, cols = struct.unpack_from("<II", body, offset)
        offset += 8
        w = np.frombuffer(body, dtype="<f4", count=rows * cols, offset=offset)
        offset += 4 * rows * cols
        b = np.frombuffer(body, dtype="<f4", count=rows, offset=offset)
        offset += 4 * rows
        weights.append(w.reshape(rows, cols).astype(float))
        biases.append(b.astype(float))
    if offset != len(body):
        raise ValueError("trailing bytes after last layer")
    return MlpScore(
        side=side,
        embed_dim=embed_dim,
        weights=tuple(weights),
        biases=tuple(biases),
        convention=version,
        schedule=schedule,
    )


def save_score_weights(model: MlpScore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(score_weights_to_bytes(model))


def load_score_weights(path, schedule: NoiseSchedule | None = None) -> MlpScore:
    with open(path, "rb") as fh:
        return score_weights_from_bytes(fh.read(), schedule=schedule)
