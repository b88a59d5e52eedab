"""Fragment solver: reduces a leaf fragment or signals termination.

A plain encoder-decoder trained on two kinds of pairs drawn with equal
probability per batch slot: leaf fragments mapped to their reductions, and
atomic values mapped to the end-of-computation marker. Decoding is greedy,
so the trained solver is a pure function of its input.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..datagen import DatasetExample
from ..tasks import OMEGA, Task
from .seq2seq import Seq2SeqTransformer, greedy_decode


class MalformedOutput(ValueError):
    """Solver decode contained specials mid-sequence or nothing at all."""


@dataclass
class SolverConfig:
    d_model: int = 256
    num_encoder_layers: int = 2
    num_decoder_layers: int = 2
    nhead: int = 4
    dropout: float = 0.1
    n_positions: int = 512
    max_decode_len: int = 16
    norm_first: bool = False   # post-norm by default; pre-norm trains faster
                               # at the high learning rates small runs need

    @property
    def dim_feedforward(self) -> int:
        return 4 * self.d_model


SOLVER_DEFAULTS = {
    "listops": SolverConfig(d_model=128, num_encoder_layers=2, num_decoder_layers=2, dropout=0.33),
    "arithmetic": SolverConfig(d_model=256, num_encoder_layers=3, num_decoder_layers=3, dropout=0.1),
    "algebra": SolverConfig(d_model=256, num_encoder_layers=2, num_decoder_layers=2, dropout=0.33),
}


def build_solver_model(task: Task, config: SolverConfig) -> Seq2SeqTransformer:
    return Seq2SeqTransformer(
        vocab_size=len(task.vocabulary),
        d_model=config.d_model,
        nhead=config.nhead,
        num_encoder_layers=config.num_encoder_layers,
        num_decoder_layers=config.num_decoder_layers,
        dim_feedforward=config.dim_feedforward,
        dropout=config.dropout,
        n_positions=config.n_positions,
        pad_id=task.vocabulary.pad_id,
        norm_first=config.norm_first,
    )


class NeuralSolver:
    """Trained solver model with validated greedy decoding."""

    def __init__(self, task: Task, config: SolverConfig, model: Seq2SeqTransformer):
        self.task = task
        self.config = config
        self.model = model

    def solve_fragment(self, fragment: str) -> str:
        return self.solve_batch([fragment])[0]

    def solve_batch(self, fragments: list[str]) -> list[str]:
        decoded = greedy_decode(
            self.model, self.task.vocabulary, fragments, self.config.max_decode_len
        )
        return [self._validate(text) for text in decoded]

    def _validate(self, text: str) -> str:
        if text == OMEGA:
            return OMEGA
        if not text or any(ch not in self.task.chars for ch in text):
            raise MalformedOutput(f"solver produced {text!r}")
        return text


def mixed_batch_iterator(
    leaf_pool: list[DatasetExample],
    atomic_pool: list[DatasetExample],
    batch_size: int,
    rng: np.random.Generator,
):
    """Endless batches whose slots come from either pool with probability
    one half each, so termination examples stay as frequent as reductions."""
    if not leaf_pool or not atomic_pool:
        raise ValueError("both example pools must be nonempty")

    def batches():
        while True:
            take_leaf = rng.random(batch_size) < 0.5
            yield [
                leaf_pool[int(rng.integers(0, len(leaf_pool)))]
                if leaf
                else atomic_pool[int(rng.integers(0, len(atomic_pool)))]
                for leaf in take_leaf
            ]

    return batches()


def split_solver_pools(
    examples: list[DatasetExample],
) -> tuple[list[DatasetExample], list[DatasetExample]]:
    """Separate reduction pairs from termination (OMEGA-target) pairs."""
    leaves = [ex for ex in examples if ex.target != OMEGA]
    atomics = [ex for ex in examples if ex.target == OMEGA]
    return leaves, atomics


def desk_solver_config(task_name: str, **overrides) -> SolverConfig:
    """Small-budget variant of the per-task defaults (pre-norm for
    trainability at the larger learning rates short runs use)."""
    base = SOLVER_DEFAULTS[task_name]
    small = replace(
        base,
        d_model=128 if task_name == "arithmetic" else 64,
        num_encoder_layers=2,
        num_decoder_layers=2,
        dropout=min(base.dropout, 0.1),
        norm_first=True,
    )
    return replace(small, **overrides) if overrides else small
