"""Sinusoidal tables and label-based positional encodings.

Label encodings make position information length-robust: instead of using
positions 0..L-1, each sequence draws L distinct indices uniformly from a
large table of N sinusoidal rows, sorts them, and uses those rows as its
positions. At test time longer sequences remain inside the table's range,
so the encoder never sees out-of-range positions.
"""

from __future__ import annotations

import math

import numpy as np
import torch


def sinusoidal_table(n_positions: int, d_model: int) -> torch.Tensor:
    """Standard sin/cos table of shape [n_positions, d_model]."""
    if d_model % 2 != 0:
        raise ValueError("d_model must be even")
    position = torch.arange(n_positions, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, d_model, 2, dtype=torch.float32)
        * (-math.log(10000.0) / d_model)
    )
    table = torch.zeros(n_positions, d_model)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)
    return table


def sample_label_positions(
    length: int, n_positions: int, rng: np.random.Generator
) -> np.ndarray:
    """L distinct indices drawn uniformly from [0, N-1], sorted ascending."""
    if length > n_positions:
        raise ValueError(f"sequence length {length} exceeds table size {n_positions}")
    return np.sort(rng.choice(n_positions, size=length, replace=False))


def label_positions(
    length: int, n_positions: int, rng: np.random.Generator, table: torch.Tensor
) -> tuple[np.ndarray, torch.Tensor]:
    """Sampled sorted indices plus the encoding rows they select."""
    indices = sample_label_positions(length, n_positions, rng)
    return indices, table[torch.from_numpy(indices).long()]


def sample_position_batch(
    lengths: list[int], n_positions: int, rng: np.random.Generator
) -> torch.Tensor:
    """Per-sequence label positions, padded with 0 to the longest length."""
    max_len = max(lengths)
    out = np.zeros((len(lengths), max_len), dtype=np.int64)
    for i, length in enumerate(lengths):
        out[i, :length] = sample_label_positions(length, n_positions, rng)
    return torch.from_numpy(out)
