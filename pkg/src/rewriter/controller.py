"""Iterative solve loop: select a fragment, locate it, reduce it, splice.

The controller is module-agnostic: anything exposing the two small
protocols below can drive it, which is how the symbolic oracle stands in
for the trained networks in tests and how the end-to-end system runs in
production. It operates on raw token strings and never raises on model
misbehavior -- failures are encoded in the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from .combiner import match_many, splice
from .models.selector import CandidateOutput, NeuralSelector, select_output
from .models.solver import MalformedOutput, NeuralSolver
from .oracle import oracle_select, oracle_solve
from .tasks import OMEGA, Task

FAILURE_NO_EXACT_MATCH = "no-exact-match"
FAILURE_BUDGET_EXCEEDED = "budget-exceeded"
FAILURE_MALFORMED_OUTPUT = "malformed-output"


class SelectorModule(Protocol):
    def propose(self, formula: str, step_seed: int) -> list[CandidateOutput]: ...


class SolverModule(Protocol):
    def reduce(self, fragment: str) -> str: ...


@dataclass
class TraceStep:
    formula: str
    fragment: str
    position: int
    solver_output: str
    result: str


@dataclass
class SolveResult:
    status: str                       # "solved" | "failure"
    answer: str | None
    failure_reason: str | None
    trace: list[TraceStep] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "answer": self.answer,
            "failure_reason": self.failure_reason,
            "iterations": self.iterations,
            "trace": [vars(step) for step in self.trace],
        }


def solve(
    formula: str,
    task: Task,
    selector: SelectorModule,
    solver: SolverModule,
    max_steps: int | None = None,
    seed: int = 0,
) -> SolveResult:
    """Reduce ``formula`` until the solver signals termination.

    Each iteration: sample candidates, score agreement against the full
    current formula, keep the best exact match, reduce it, splice. The
    selector runs on the termination iteration exactly like on any other;
    the budget defaults to the initial token length (reductions are
    contractive, so that is enough for well-behaved modules).
    """
    budget = max_steps if max_steps is not None else max(1, len(formula))
    current = formula
    trace: list[TraceStep] = []
    for step in range(budget):
        candidates = selector.propose(current, seed + step)
        results = match_many(
            current, [c.text for c in candidates], task.vocabulary
        )
        for cand, res in zip(candidates, results):
            if res is None:
                cand.agreement = 0.0
                cand.position = None
            else:
                cand.agreement = res.agreement
                cand.position = res.position
        chosen = select_output(candidates)
        if chosen is None:
            return SolveResult("failure", None, FAILURE_NO_EXACT_MATCH, trace)
        try:
            output = solver.reduce(chosen.text)
        except MalformedOutput:
            trace.append(TraceStep(current, chosen.text, chosen.position, "", current))
            return SolveResult("failure", None, FAILURE_MALFORMED_OUTPUT, trace)
        if output == OMEGA:
            trace.append(TraceStep(current, chosen.text, chosen.position, OMEGA, current))
            return SolveResult("solved", current, None, trace)
        updated = splice(current, chosen.position, len(chosen.text), output)
        trace.append(TraceStep(current, chosen.text, chosen.position, output, updated))
        current = updated
    return SolveResult("failure", None, FAILURE_BUDGET_EXCEEDED, trace)


def replay_trace(initial: str, trace: list[TraceStep]) -> str:
    """Re-run the recorded splices; used to check trace fidelity."""
    current = initial
    for step in trace:
        if step.formula != current:
            raise ValueError("trace does not follow from the initial formula")
        if step.solver_output == OMEGA or step.solver_output == "":
            return step.result
        current = splice(current, step.position, len(step.fragment), step.solver_output)
        if current != step.result:
            raise ValueError("recorded splice result mismatch")
    return current


# ---------------------------------------------------------------------------
# Module adapters
# ---------------------------------------------------------------------------

class OracleSelector:
    """Symbolic stand-in for the trained selector (single perfect candidate)."""

    def __init__(self, task: Task):
        self.task = task

    def propose(self, formula: str, step_seed: int) -> list[CandidateOutput]:
        fragment = oracle_select(self.task, formula)
        return [CandidateOutput(text=fragment.text, token_probs=(1.0,) * len(fragment.text))]


class OracleSolver:
    """Symbolic stand-in for the trained solver."""

    def __init__(self, task: Task):
        self.task = task

    def reduce(self, fragment: str) -> str:
        return oracle_solve(self.task, fragment)


class SamplingSelector:
    """Adapter running the trained selector's multi-output generation."""

    def __init__(
        self,
        module: NeuralSelector,
        m: int | None = None,
        threshold: int | None = None,
        windowing: bool = True,
    ):
        self.module = module
        self.m = m if m is not None else module.config.multi_output
        self.threshold = threshold
        self.windowing = windowing

    def propose(self, formula: str, step_seed: int) -> list[CandidateOutput]:
        return self.module.sample_candidates(
            formula,
            m=self.m,
            seed=step_seed,
            windowing=self.windowing,
            threshold=self.threshold,
        )


class GreedySolver:
    """Adapter for the trained solver's deterministic decoding."""

    def __init__(self, module: NeuralSolver):
        self.module = module

    def reduce(self, fragment: str) -> str:
        return self.module.solve_fragment(fragment)
