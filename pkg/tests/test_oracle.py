import numpy as np
import pytest

from rewriter.datagen import generate_formula
from rewriter.formulas import Atom, OpNode, is_atomic, parse, render
from rewriter.oracle import (
    InvalidFragment,
    NotAMonomial,
    brute_force_eval,
    canonical_monomial,
    fragment_kind,
    grade_answer,
    oracle_select,
    oracle_solve,
    oracle_trace,
    splice_at,
)
from rewriter.tasks import OMEGA, get_task

LISTOPS = get_task("listops")
ARITH = get_task("arithmetic")
ALGEBRA = get_task("algebra")


class TestOracleSelect:
    def test_rightmost_leaf(self):
        frag = oracle_select(LISTOPS, "[MIN[SM54][MIN39]]")
        assert frag.text == "[MIN39]" and not frag.partial
        assert (frag.start, frag.length) == (10, 7)

    def test_arity_four_partial(self):
        frag = oracle_select(LISTOPS, "[MAX1234]")
        assert frag.text == "[MAX12" and frag.partial
        assert (frag.start, frag.length) == (0, 6)

    def test_atomic_selects_itself(self):
        frag = oracle_select(LISTOPS, "7")
        assert frag.text == "7" and not frag.partial

    def test_arithmetic_rightmost(self):
        frag = oracle_select(ARITH, "((-12+34)*(5-7))")
        assert frag.text == "(5-7)" and frag.start == 10

    def test_full_two_arg_leaf_includes_brackets(self):
        frag = oracle_select(LISTOPS, "[SM54]")
        assert frag.text == "[SM54]"


class TestOracleSolve:
    def test_listops_min(self):
        assert oracle_solve(LISTOPS, "[MIN39]") == "3"

    def test_listops_partial(self):
        assert oracle_solve(LISTOPS, "[MAX12") == "[MAX2"

    def test_listops_sum_mod_10(self):
        assert oracle_solve(LISTOPS, "[SM54]") == "9"
        assert oracle_solve(LISTOPS, "[SM99]") == "8"

    def test_arithmetic_sum(self):
        assert oracle_solve(ARITH, "(-12+34)") == "22"

    def test_arithmetic_signed_residue(self):
        assert oracle_solve(ARITH, "(-99-99)") == "-98"
        assert oracle_solve(ARITH, "(50+50)") == "0"
        assert oracle_solve(ARITH, "(-25*8)") == "0"

    def test_nonnegative_convention(self):
        arith_nn = get_task("arithmetic", residue_convention="nonnegative")
        assert oracle_solve(arith_nn, "(5-7)") == "98"
        assert oracle_solve(ARITH, "(5-7)") == "-2"

    def test_algebra_coefficients(self):
        assert oracle_solve(ALGEBRA, "(22ab-54ab)") == "-32ab"

    def test_atomic_to_omega(self):
        assert oracle_solve(ARITH, "7") == OMEGA
        assert oracle_solve(ALGEBRA, "-32ab") == OMEGA

    def test_mismatched_variables_rejected(self):
        with pytest.raises(InvalidFragment):
            oracle_solve(ALGEBRA, "(22ab-54ax)")

    def test_non_leaf_rejected(self):
        with pytest.raises(InvalidFragment):
            oracle_solve(LISTOPS, "[MIN[SM54]3]")

    def test_garbage_rejected(self):
        with pytest.raises(InvalidFragment):
            oracle_solve(LISTOPS, "IN39]")


class TestOracleTrace:
    def test_listops_walkthrough(self):
        trace = oracle_trace(LISTOPS, "[MIN[SM54][MIN39]]")
        assert trace.steps == ["[MIN[SM54]3]", "[MIN93]", "3"]
        assert trace.answer == "3"

    def test_arithmetic_walkthrough(self):
        trace = oracle_trace(ARITH, "((-12+34)*(5-7))")
        assert trace.steps == ["((-12+34)*-2)", "(22*-2)", "-44"]
        assert trace.answer == "-44"

    def test_atomic_input(self):
        trace = oracle_trace(ARITH, "3")
        assert trace.steps == [] and trace.answer == "3"

    def test_partial_fragment_chain(self):
        trace = oracle_trace(LISTOPS, "[MAX1234]")
        assert trace.steps == ["[MAX234]", "[MAX34]", "4"]

    def test_every_step_parses(self):
        trace = oracle_trace(ARITH, "((-12+34)*(5-7))")
        for step in trace.steps:
            parse(ARITH, step)


class TestBruteForce:
    def test_sum_mod_10(self):
        assert brute_force_eval(LISTOPS, OpNode("SM", (Atom(5), Atom(4)))) == Atom(9)

    def test_signed_residue_subtraction(self):
        assert brute_force_eval(ARITH, OpNode("-", (Atom(5), Atom(7)))) == Atom(-2)

    def test_agrees_with_trace_on_random_formulas(self):
        rng = np.random.default_rng(7)
        for task in (LISTOPS, ARITH, ALGEBRA):
            for _ in range(250):
                nesting = int(rng.integers(1, 5))
                num_args = int(rng.integers(2, 5)) if task.name == "listops" else 2
                ast = generate_formula(task, nesting, rng, num_args=num_args)
                text = render(task, ast)
                expected = render(task, brute_force_eval(task, ast))
                assert oracle_trace(task, text).answer == expected


class TestInvariants:
    def test_contractivity(self):
        rng = np.random.default_rng(11)
        for task in (LISTOPS, ARITH, ALGEBRA):
            for _ in range(200):
                nesting = int(rng.integers(1, 4))
                num_args = int(rng.integers(2, 5)) if task.name == "listops" else 2
                text = render(task, generate_formula(task, nesting, rng, num_args=num_args))
                current = text
                while True:
                    frag = oracle_select(task, current)
                    out = oracle_solve(task, frag.text)
                    if out == OMEGA:
                        break
                    assert len(out) < frag.length
                    current = splice_at(current, frag.start, frag.length, out)

    def test_leaf_order_confluence(self):
        # reducing simultaneous leaves in any order gives the same formula
        rng = np.random.default_rng(13)
        checked = 0
        while checked < 60:
            task = (LISTOPS, ARITH, ALGEBRA)[checked % 3]
            num_args = 2 if task.name != "listops" else int(rng.integers(2, 4))
            ast = generate_formula(task, int(rng.integers(2, 4)), rng, num_args=num_args)
            text = render(task, ast)
            from rewriter.formulas import find_leaves

            leaves = find_leaves(task, parse(task, text))
            if len(leaves) < 2:
                continue
            results = set()
            for order in ([0, 1], [1, 0]):
                current = text
                spans = [(s.start, s.length) for _, s in leaves[:2]]
                for idx in order:
                    start, length = spans[idx]
                    frag = current[start:start + length]
                    out = oracle_solve(task, frag)
                    current = splice_at(current, start, length, out)
                    delta = len(out) - length
                    spans = [
                        (s + delta, l) if s > start else (s, l) for s, l in spans
                    ]
                results.add(current)
            assert len(results) == 1
            checked += 1

    def test_value_closure(self):
        rng = np.random.default_rng(17)
        for task in (LISTOPS, ARITH, ALGEBRA):
            bound = 9 if task.name == "listops" else 99
            for _ in range(120):
                num_args = 2 if task.name != "listops" else int(rng.integers(2, 5))
                ast = generate_formula(task, int(rng.integers(1, 5)), rng, num_args=num_args)
                trace = oracle_trace(task, render(task, ast))
                for step in trace.steps:
                    node = parse(task, step)
                    from rewriter.formulas import iter_nodes

                    for sub in iter_nodes(node):
                        if is_atomic(sub):
                            assert abs(sub.value) <= bound


class TestCanonicalMonomial:
    def test_sorts_variables(self):
        assert canonical_monomial("-32ba") == "-32ab"

    def test_already_canonical(self):
        assert canonical_monomial("-32ab") == "-32ab"

    def test_rejects_garbage(self):
        with pytest.raises(NotAMonomial):
            canonical_monomial("hello")

    def test_implicit_unit_coefficient(self):
        assert canonical_monomial("ab") == "1ab"
        assert canonical_monomial("-xy") == "-1xy"

    def test_strips_separators(self):
        assert canonical_monomial("-32*a*b") == "-32ab"
        assert canonical_monomial(" -32 ab ") == "-32ab"

    def test_negative_zero(self):
        assert canonical_monomial("-0ab") == "0ab"

    def test_bare_integer(self):
        assert canonical_monomial("22") == "22"

    def test_rejects_repeated_variables(self):
        with pytest.raises(NotAMonomial):
            canonical_monomial("3aab")


class TestGrading:
    def test_algebra_equivalent_forms(self):
        assert grade_answer(ALGEBRA, "-32ba", "-32ab")

    def test_exact_match_elsewhere(self):
        assert grade_answer(ARITH, "-44", "-44")
        assert not grade_answer(ARITH, "44", "-44")


def test_fragment_kind():
    assert fragment_kind(LISTOPS, "7") == "atomic"
    assert fragment_kind(LISTOPS, "[SM54]") == "leaf"
    assert fragment_kind(LISTOPS, "[MAX12") == "partial"
    assert fragment_kind(LISTOPS, "[MIN[SM54]3]") is None
    assert fragment_kind(LISTOPS, "IN39]") is None
    assert fragment_kind(ALGEBRA, "(22ab-54ab)") == "leaf"
