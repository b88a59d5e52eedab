import numpy as np
import pytest

from rewriter.controller import (
    FAILURE_BUDGET_EXCEEDED,
    FAILURE_MALFORMED_OUTPUT,
    FAILURE_NO_EXACT_MATCH,
    OracleSelector,
    OracleSolver,
    replay_trace,
    solve,
)
from rewriter.datagen import generate_formula
from rewriter.formulas import parse, render, is_atomic
from rewriter.models.selector import CandidateOutput
from rewriter.models.solver import MalformedOutput
from rewriter.oracle import oracle_trace
from rewriter.tasks import OMEGA, get_task

LISTOPS = get_task("listops")
ARITH = get_task("arithmetic")
ALGEBRA = get_task("algebra")


class ConstantSelector:
    def __init__(self, text):
        self.text = text

    def propose(self, formula, step_seed):
        return [CandidateOutput(text=self.text, token_probs=(0.5,))]


class IdentitySolver:
    """Returns the fragment unchanged: never contractive, never terminates."""

    def reduce(self, fragment):
        return fragment


class BrokenSolver:
    def reduce(self, fragment):
        raise MalformedOutput("garbage")


class TestOracleBackedSolve:
    def test_listops_walkthrough(self):
        result = solve("[MIN[SM54][MIN39]]", LISTOPS, OracleSelector(LISTOPS), OracleSolver(LISTOPS))
        assert result.solved and result.answer == "3"
        assert result.iterations == 4  # three reductions plus the omega step
        assert [s.result for s in result.trace[:-1]] == ["[MIN[SM54]3]", "[MIN93]", "3"]

    def test_atomic_input_single_iteration(self):
        result = solve("7", LISTOPS, OracleSelector(LISTOPS), OracleSolver(LISTOPS))
        assert result.solved and result.answer == "7" and result.iterations == 1
        assert result.trace[0].solver_output == OMEGA

    def test_matches_oracle_trace_on_random_formulas(self):
        rng = np.random.default_rng(5)
        for task in (LISTOPS, ARITH, ALGEBRA):
            for _ in range(60):
                nesting = int(rng.integers(1, 5))
                num_args = int(rng.integers(2, 5)) if task.name == "listops" else 2
                text = render(task, generate_formula(task, nesting, rng, num_args=num_args))
                result = solve(text, task, OracleSelector(task), OracleSolver(task))
                reference = oracle_trace(task, text)
                assert result.solved
                assert result.answer == reference.answer
                assert [s.result for s in result.trace[:-1]] == reference.steps

    def test_solved_answers_are_atomic(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            text = render(ARITH, generate_formula(ARITH, 3, rng))
            result = solve(text, ARITH, OracleSelector(ARITH), OracleSolver(ARITH))
            assert is_atomic(parse(ARITH, result.answer))

    def test_monotone_shrinkage_bounds_iterations(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            text = render(LISTOPS, generate_formula(LISTOPS, 3, rng, num_args=3))
            result = solve(text, LISTOPS, OracleSelector(LISTOPS), OracleSolver(LISTOPS))
            lengths = [len(s.formula) for s in result.trace]
            assert all(a > b for a, b in zip(lengths, lengths[1:]))
            assert result.iterations <= len(text)


class TestFailurePaths:
    def test_absent_fragment_fails_immediately(self):
        result = solve("[SM54]", LISTOPS, ConstantSelector("[MIN99]"), OracleSolver(LISTOPS))
        assert not result.solved
        assert result.failure_reason == FAILURE_NO_EXACT_MATCH
        assert result.iterations == 0

    def test_budget_exceeded(self):
        result = solve(
            "[MIN[SM54][MIN39]]", LISTOPS, OracleSelector(LISTOPS), IdentitySolver(),
            max_steps=5,
        )
        assert result.failure_reason == FAILURE_BUDGET_EXCEEDED
        assert result.iterations == 5

    def test_malformed_output(self):
        result = solve("[SM54]", LISTOPS, OracleSelector(LISTOPS), BrokenSolver())
        assert result.failure_reason == FAILURE_MALFORMED_OUTPUT

    def test_never_raises_on_bad_candidates(self):
        # OMEGA and out-of-vocab candidates are discarded, not fatal
        class NoisySelector:
            def propose(self, formula, step_seed):
                return [
                    CandidateOutput(text=OMEGA, token_probs=(1.0,)),
                    CandidateOutput(text="", token_probs=()),
                    CandidateOutput(text=formula * 3, token_probs=(0.1,)),
                ]

        result = solve("[SM54]", LISTOPS, NoisySelector(), OracleSolver(LISTOPS))
        assert result.failure_reason == FAILURE_NO_EXACT_MATCH


class TestSelection:
    def test_confidence_rule_prefers_exact_match(self):
        class TwoCandidateSelector:
            def propose(self, formula, step_seed):
                return [
                    CandidateOutput(text="[MIN99]", token_probs=(0.9,)),   # absent
                    CandidateOutput(text="[SM54]", token_probs=(0.5,)),    # present
                ]

        result = solve("[MIN[SM54]3]", LISTOPS, TwoCandidateSelector(), OracleSolver(LISTOPS))
        # first step must pick the lower-confidence exact match over the
        # higher-confidence absent candidate; the stub then cannot continue
        assert result.trace[0].fragment == "[SM54]"
        assert result.trace[0].result == "[MIN93]"
        assert result.failure_reason == FAILURE_NO_EXACT_MATCH


class TestReplay:
    def test_replay_reproduces_final_string(self):
        text = "[MIN[SM54][MIN39]]"
        result = solve(text, LISTOPS, OracleSelector(LISTOPS), OracleSolver(LISTOPS))
        assert replay_trace(text, result.trace) == result.answer

    def test_replay_detects_tampering(self):
        text = "[MIN[SM54][MIN39]]"
        result = solve(text, LISTOPS, OracleSelector(LISTOPS), OracleSolver(LISTOPS))
        result.trace[1].result = "[MIN99]"
        with pytest.raises(ValueError):
            replay_trace(text, result.trace)


def test_result_serialization():
    result = solve("(3+4)", ARITH, OracleSelector(ARITH), OracleSolver(ARITH))
    payload = result.to_dict()
    assert payload["status"] == "solved" and payload["answer"] == "7"
    assert payload["iterations"] == len(payload["trace"]) == 2
