import pytest

from rewriter.formulas import (
    Atom,
    FormulaSyntaxError,
    OpNode,
    Span,
    find_leaves,
    is_leaf,
    nesting_depth,
    parse,
    render,
)
from rewriter.tasks import get_task

LISTOPS = get_task("listops")
ARITH = get_task("arithmetic")
ALGEBRA = get_task("algebra")


class TestParse:
    def test_nested_listops(self):
        ast = parse(LISTOPS, "[MIN[SM54][MIN39]]")
        assert ast == OpNode(
            "MIN",
            (OpNode("SM", (Atom(5), Atom(4))), OpNode("MIN", (Atom(3), Atom(9)))),
        )

    def test_atomic(self):
        assert parse(LISTOPS, "7") == Atom(7)

    def test_unbalanced_bracket_position(self):
        with pytest.raises(FormulaSyntaxError) as err:
            parse(LISTOPS, "[MIN[SM54]")
        assert err.value.position == 10

    def test_unknown_operator(self):
        with pytest.raises(FormulaSyntaxError):
            parse(LISTOPS, "[MED12]")

    def test_empty_input(self):
        with pytest.raises(FormulaSyntaxError):
            parse(ARITH, "")

    def test_empty_argument_list(self):
        with pytest.raises(FormulaSyntaxError):
            parse(LISTOPS, "[MIN]")

    def test_arity_cap(self):
        with pytest.raises(FormulaSyntaxError):
            parse(LISTOPS, "[MIN12345]")

    def test_arithmetic_negative_atoms(self):
        ast = parse(ARITH, "(-12+34)")
        assert ast == OpNode("+", (Atom(-12), Atom(34)))

    def test_arithmetic_negative_right_operand(self):
        assert parse(ARITH, "(22*-2)") == OpNode("*", (Atom(22), Atom(-2)))

    def test_arithmetic_rejects_three_digits(self):
        with pytest.raises(FormulaSyntaxError):
            parse(ARITH, "(100+2)")

    def test_arithmetic_rejects_leading_zero(self):
        with pytest.raises(FormulaSyntaxError):
            parse(ARITH, "(07+2)")

    def test_algebra_monomials(self):
        ast = parse(ALGEBRA, "(22ab-54ab)")
        assert ast == OpNode("-", (Atom(22, "ab"), Atom(54, "ab")))

    def test_algebra_rejects_unsorted_variables(self):
        with pytest.raises(FormulaSyntaxError):
            parse(ALGEBRA, "3ba")

    def test_algebra_rejects_repeated_variable(self):
        with pytest.raises(FormulaSyntaxError):
            parse(ALGEBRA, "3aa")

    def test_trailing_characters(self):
        with pytest.raises(FormulaSyntaxError):
            parse(ARITH, "(3+4))")

    def test_omega_rejected(self):
        with pytest.raises(FormulaSyntaxError):
            parse(ARITH, "ω")


class TestRender:
    def test_listops_leaf(self):
        assert render(LISTOPS, OpNode("SM", (Atom(5), Atom(4)))) == "[SM54]"

    def test_arithmetic_canonical(self):
        assert render(ARITH, OpNode("+", (Atom(-12), Atom(34)))) == "(-12+34)"

    def test_algebra_monomial(self):
        assert render(ALGEBRA, Atom(-32, "ab")) == "-32ab"

    def test_algebra_unit_coefficient_explicit(self):
        assert render(ALGEBRA, Atom(1, "xy")) == "1xy"
        assert render(ALGEBRA, Atom(-1, "a")) == "-1a"

    def test_round_trip_examples(self):
        for task, text in [
            (LISTOPS, "[MIN[SM54][MIN39]]"),
            (LISTOPS, "[MAX1[SM23]4]"),
            (ARITH, "((-12+34)*(5-7))"),
            (ALGEBRA, "((22ab-54ab)+1ab)"),
        ]:
            assert render(task, parse(task, text)) == text


class TestFindLeaves:
    def test_two_leaves_with_spans(self):
        ast = parse(LISTOPS, "[MIN[SM54][MIN39]]")
        leaves = find_leaves(LISTOPS, ast)
        assert [(span.start, span.length) for _, span in leaves] == [(4, 6), (10, 7)]
        text = "[MIN[SM54][MIN39]]"
        assert [text[s.start:s.end] for _, s in leaves] == ["[SM54]", "[MIN39]"]

    def test_atomic_has_no_leaves(self):
        assert find_leaves(LISTOPS, parse(LISTOPS, "7")) == []

    def test_formula_that_is_itself_a_leaf(self):
        leaves = find_leaves(ARITH, parse(ARITH, "(3+4)"))
        assert len(leaves) == 1
        node, span = leaves[0]
        assert is_leaf(node) and (span.start, span.end) == (0, 5)

    def test_left_to_right_order(self):
        ast = parse(ARITH, "((1+2)*(3+4))")
        spans = [span.start for _, span in find_leaves(ARITH, ast)]
        assert spans == sorted(spans)


def test_nesting_depth():
    assert nesting_depth(parse(ARITH, "7")) == 0
    assert nesting_depth(parse(ARITH, "(3+4)")) == 1
    assert nesting_depth(parse(ARITH, "((-12+34)*(5-7))")) == 2


def test_span_end():
    assert Span(4, 6).end == 10
