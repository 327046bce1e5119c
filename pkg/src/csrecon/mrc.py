"""Minimal MRC2014 stack reader/writer (mode 2, 32-bit float only).

The 1024-byte little-endian header is parsed field by field; an extended
header of ``nsymbt`` bytes is honored. Slices are exposed through a
memory map so large stacks are never loaded whole.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

HEADER_SIZE = 1024
MODE_FLOAT32 = 2


class MrcParseError(ValueError):
    """Malformed or unsupported MRC file; message carries the byte offset."""


@dataclass
class MrcStack:
    path: str
    count: int
    side: int
    pixel_size: float
    mode: int
    _data: np.memmap

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i: int) -> np.ndarray:
        return np.asarray(self._data[i], dtype=float)


def read_mrc(path) -> MrcStack:
    with open(path, "rb") as fh:
        header = fh.read(HEADER_SIZE)
    if len(header) < HEADER_SIZE:
        raise MrcParseError(f"truncated header: {len(header)} bytes < {HEADER_SIZE}")
    nx, ny, nz, mode = struct.unpack_from("<4i", header, 0)
    if header[208:212] != b"MAP ":
        raise MrcParseError(
            f"missing 'MAP ' identifier at byte offset 208, got {header[208:212]!r}"
        )
    if mode != MODE_FLOAT32:
        raise MrcParseError(f"unsupported mode {mode} at byte offset 12 (need mode 2)")
    if nx != ny:
        raise MrcParseError(f"non-square images {nx}x{ny} (offsets 0/4)")
    if nx <= 0 or nz <= 0 or nx > 1 << 16 or nz > 1 << 24:
        raise MrcParseError(f"implausible dimensions nx={nx} nz={nz} (offsets 0/8)")
    mx = struct.unpack_from("<i", header, 28)[0]
    xlen = struct.unpack_from("<f", header, 40)[0]
    nsymbt = struct.unpack_from("<i", header, 92)[0]
    pixel_size = xlen / mx if mx > 0 and xlen > 0 else 1.0

    offset = HEADER_SIZE + nsymbt
    expected = offset + 4 * nx * ny * nz
    import os

    actual = os.path.getsize(path)
    if actual < expected:
        raise MrcParseError(
            f"truncated data: file has {actual} bytes, need {expected} "
            f"(data starts at offset {offset})"
        )
    data = np.memmap(path, dtype="<f4", mode="r", offset=offset, shape=(nz, ny, nx))
    return MrcStack(
        path=str(path), count=nz, side=nx, pixel_size=pixel_size, mode=mode, _data=data
    )


def write_mrc(path, images: np.ndarray, pixel_size: float = 1.0) -> None:
    """Write a (count, D, D) or (D, D) float array as a mode-2 MRC stack."""
    images = np.asarray(images, dtype="<f4")
    if images.ndim == 2:
        images = images[None]
    nz, ny, nx = images.shape
    header = bytearray(HEADER_SIZE)
    struct.pack_into("<4i", header, 0, nx, ny, nz, MODE_FLOAT32)
    struct.pack_into("<3i", header, 28, nx, ny, nz)  # mx, my, mz
    struct.pack_into(
        "<3f", header, 40, nx * pixel_size, ny * pixel_size, nz * pixel_size
    )
    struct.pack_into("<3f", header, 52, 90.0, 90.0, 90.0)
    struct.pack_into("<3i", header, 64, 1, 2, 3)  # mapc, mapr, maps
    struct.pack_into(
        "<3f", header, 76, float(images.min()), float(images.max()), float(images.mean())
    )
    header[208:212] = b"MAP "
    header[212:216] = bytes([0x44, 0x44, 0x00, 0x00])  # little-endian machine stamp
    struct.pack_into("<f", header, 216, float(images.std()))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(images.tobytes())
