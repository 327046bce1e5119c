"""Noise-prediction MLP and the portable weight container.

The network takes a flattened image concatenated with a sinusoidal time
embedding and predicts the noise that was mixed into the image. The
embedding and layer layout mirror what the reconstruction library's
loader reconstructs from the weight file, so the file is self-contained.

Weight container ("CSSM"): magic, u32 version (2 = noise-prediction
convention), u32 image side, u32 embedding dim, u32 layer count, then per
layer u32 rows, u32 cols, row-major f32 weights, f32 biases, and a
trailing CRC32 of everything before it. Little-endian throughout.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
import torch

WEIGHT_MAGIC = b"CSSM"
VERSION_EPS = 2


def time_embedding_table(t_max: int, dim: int) -> np.ndarray:
    """Rows 0..t_max of the sinusoidal embedding; wavelengths geometric
    from 1 to 1e4 across the dimension."""
    half = dim // 2
    k = np.arange(half)
    freqs = np.exp(-np.log(1e4) * k / max(half - 1, 1))
    angles = np.arange(t_max + 1)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


class EpsilonMlp(torch.nn.Module):
    def __init__(self, side: int, embed_dim: int, hidden: list[int]):
        super().__init__()
        if side < 1 or embed_dim < 2 or not hidden:
            raise ValueError("need side >= 1, embed_dim >= 2 and a hidden layer")
        self.side = side
        self.embed_dim = embed_dim
        n = side * side
        dims = [n + embed_dim] + list(hidden) + [n]
        self.layers = torch.nn.ModuleList(
            torch.nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:])
        )

    def forward(self, x_flat: torch.Tensor, emb: torch.Tensor) -> torch.Tensor:
        h = torch.cat([x_flat, emb], dim=-1)
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i != last:
                h = torch.nn.functional.silu(h)
        return h


def export_weight_bytes(model: EpsilonMlp) -> bytes:
    parts = [
        struct.pack(
            "<4sIIII",
            WEIGHT_MAGIC,
            VERSION_EPS,
            model.side,
            model.embed_dim,
            len(model.layers),
        )
    ]
    for layer in model.layers:
        w = layer.weight.detach().cpu().numpy()
        b = layer.bias.detach().cpu().numpy()
        parts.append(struct.pack("<II", w.shape[0], w.shape[1]))
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))
