"""Denoising training loop with AdamW and a CSV loss log.

Standard noise-prediction objective: draw a timestep, mix the clean image
with Gaussian noise at that timestep's signal level, and regress the
noise. The exported file records the noise-prediction convention so the
consumer converts to a score at load time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .model import EpsilonMlp, export_weight_bytes, time_embedding_table


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite; carries the epoch index."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainSpec:
    side: int = 16
    hidden: list[int] = field(default_factory=lambda: [512, 512])
    embed_dim: int = 64
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    t_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    seed: int = 0
    output_path: str = "score_weights.cssm"

    def __post_init__(self):
        if not 16 <= self.side <= 32:
            raise ValueError("side must be in [16, 32] at this model scale")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if not (0.0 < self.beta_start < self.beta_end < 1.0):
            raise ValueError("need 0 < beta_start < beta_end < 1")


def train(spec: TrainSpec, dataset: list[np.ndarray] | np.ndarray) -> Path:
    """Train on images in [-1, 1] and write the weight file.

    Also writes `<output stem>_log.csv` with one (epoch, loss) row per
    epoch. Returns the weight-file path.
    """
    data = np.stack([np.asarray(img, dtype=np.float32) for img in dataset])
    if data.ndim != 3 or data.shape[1:] != (spec.side, spec.side):
        raise ValueError(f"dataset images must be {spec.side}x{spec.side}")
    if data.min() < -1.0 - 1e-6 or data.max() > 1.0 + 1e-6:
        raise ValueError("dataset images must be normalized to [-1, 1]")
    count = data.shape[0]

    torch.manual_seed(spec.seed)
    beta = np.linspace(spec.beta_start, spec.beta_end, spec.t_steps)
    alpha_bar = np.cumprod(1.0 - beta)
    signal = torch.tensor(np.sqrt(alpha_bar), dtype=torch.float32)
    noise_level = torch.tensor(np.sqrt(1.0 - alpha_bar), dtype=torch.float32)
    embeddings = torch.tensor(
        time_embedding_table(spec.t_steps, spec.embed_dim), dtype=torch.float32
    )
    x_all = torch.tensor(data.reshape(count, -1))

    model = EpsilonMlp(spec.side, spec.embed_dim, spec.hidden)
    optim = torch.optim.AdamW(
        model.parameters(), lr=spec.learning_rate, weight_decay=spec.weight_decay
    )
    anneal = torch.optim.lr_scheduler.CosineAnnealingLR(optim, T_max=spec.epochs)
    sampler = torch.Generator().manual_seed(spec.seed + 1)

    out_path = Path(spec.output_path)
    log_path = out_path.with_name(out_path.stem + "_log.csv")
    with open(log_path, "w", newline="") as fh:
        log = csv.writer(fh)
        log.writerow(["epoch", "loss"])
        for epoch in range(spec.epochs):
            perm = torch.randperm(count, generator=sampler)
            total = 0.0
            for start in range(0, count, spec.batch_size):
                idx = perm[start : start + spec.batch_size]
                x0 = x_all[idx]
                t = torch.randint(
                    1, spec.t_steps + 1, (len(idx),), generator=sampler
                )
                eps = torch.randn(len(idx), x0.shape[1], generator=sampler)
                x_t = (
                    signal[t - 1][:, None] * x0 + noise_level[t - 1][:, None] * eps
                )
                pred = model(x_t, embeddings[t])
                loss = torch.mean((pred - eps) ** 2)
                if not math.isfinite(loss.item()):
                    raise TrainingDiverged(epoch)
                optim.zero_grad()
                loss.backward()
                optim.step()
                total += loss.item() * len(idx)
            anneal.step()
            log.writerow([epoch, f"{total / count:.8f}"])

    out_path.write_bytes(export_weight_bytes(model))
    return out_path
