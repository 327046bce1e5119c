"""Synthetic smooth blob phantoms for self-contained experiments.

Each phantom is a sum of 3-8 randomly rotated anisotropic Gaussians,
mildly band-limited, then affinely normalized to [-1, 1]. Deterministic
given the seed.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage

from .transforms import ParameterError


def synth_particles(count: int, side: int, seed: int) -> list[np.ndarray]:
    if side < 16:
        raise ParameterError("phantom side must be >= 16")
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
