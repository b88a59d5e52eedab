"""Attention masks for the encoder's local (banded) self-attention."""

from __future__ import annotations

import torch


def diagonal_mask(
    length: int, half_width: int, dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """Additive [L, L] mask keeping a 2k+1 wide band around the diagonal.

    Off-band entries use the dtype's most negative finite value rather than
    -inf so rows can never produce NaN under softmax; in-band logits dominate
    and off-band attention underflows to exactly zero.
    """
    if length < 1 or half_width < 0:
        raise ValueError("length must be >= 1 and half_width >= 0")
    idx = torch.arange(length)
    outside = (idx.unsqueeze(0) - idx.unsqueeze(1)).abs() > half_width
    mask = torch.zeros(length, length, dtype=dtype)
    mask[outside] = torch.finfo(dtype).min
    return mask


def causal_mask(length: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Standard autoregressive mask for decoder self-attention."""
    mask = torch.zeros(length, length, dtype=dtype)
    mask[torch.triu(torch.ones(length, length, dtype=torch.bool), diagonal=1)] = (
        torch.finfo(dtype).min
    )
    return mask
