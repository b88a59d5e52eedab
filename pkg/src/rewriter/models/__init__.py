from .masking import causal_mask, diagonal_mask
from .positional import label_positions, sample_label_positions, sinusoidal_table
from .seq2seq import Seq2SeqTransformer, greedy_decode, sampled_decode
from .selector import (
    SELECTOR_DEFAULTS,
    CandidateOutput,
    NeuralSelector,
    SelectorConfig,
    build_selector_model,
    dynamic_window_inputs,
    select_output,
)
from .solver import (
    SOLVER_DEFAULTS,
    MalformedOutput,
    NeuralSolver,
    SolverConfig,
    build_solver_model,
    mixed_batch_iterator,
    split_solver_pools,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "CandidateOutput",
    "MalformedOutput",
    "NeuralSelector",
    "NeuralSolver",
    "SELECTOR_DEFAULTS",
    "SOLVER_DEFAULTS",
    "SelectorConfig",
    "Seq2SeqTransformer",
    "SolverConfig",
    "build_selector_model",
    "build_solver_model",
    "causal_mask",
    "diagonal_mask",
    "dynamic_window_inputs",
    "greedy_decode",
    "label_positions",
    "load_checkpoint",
    "mixed_batch_iterator",
    "sample_label_positions",
    "sampled_decode",
    "save_checkpoint",
    "select_output",
    "sinusoidal_table",
    "split_solver_pools",
]
