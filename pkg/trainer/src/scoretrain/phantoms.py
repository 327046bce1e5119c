"""Synthetic smooth blob phantoms.

Byte-for-byte the same distribution as the reconstruction library's
generator (same RNG call order, same constants), so models trained here
see exactly the data that library's experiments use. A fixture test pins
the agreement.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage


def synth_particles(count: int, side: int, seed: int) -> list[np.ndarray]:
    if side < 16:
        raise ValueError("phantom side must be >= 16")
    rng = np.random.default_rng(seed)
    coords = np.arange(side)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    images = []
    for _ in range(count):
        img = np.zeros((side, side))
        for _ in range(rng.integers(3, 9)):
            cy, cx = rng.uniform(0.25 * side, 0.75 * side, size=2)
            s1 = rng.uniform(side / 16, side / 5)
            s2 = rng.uniform(side / 16, side / 5)
            theta = rng.uniform(0, np.pi)
            amp = rng.uniform(0.3, 1.0)
            ct, st = np.cos(theta), np.sin(theta)
            u = ct * (xx - cx) + st * (yy - cy)
            v = -st * (xx - cx) + ct * (yy - cy)
            img += amp * np.exp(-0.5 * ((u / s1) ** 2 + (v / s2) ** 2))
        img = scipy.ndimage.gaussian_filter(img, sigma=side / 64.0 + 0.5)
        lo, hi = img.min(), img.max()
        images.append(2.0 * (img - lo) / (hi - lo) - 1.0)
    return images
