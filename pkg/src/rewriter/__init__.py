"""Neuro-symbolic rewriting pipeline for nested formula simplification."""

from .tasks import OMEGA, Task, Vocabulary, get_task
from .formulas import Atom, OpNode, parse, render, find_leaves
from .oracle import (
    SelectedFragment,
    SolveTrace,
    brute_force_eval,
    canonical_monomial,
    oracle_select,
    oracle_solve,
    oracle_trace,
)

__version__ = "0.1.0"

__all__ = [
    "OMEGA",
    "Task",
    "Vocabulary",
    "get_task",
    "Atom",
    "OpNode",
    "parse",
    "render",
    "find_leaves",
    "SelectedFragment",
    "SolveTrace",
    "brute_force_eval",
    "canonical_monomial",
    "oracle_select",
    "oracle_solve",
    "oracle_trace",
    "__version__",
]
