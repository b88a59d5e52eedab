import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rewriter.combiner import (
    FragmentTooLong,
    correlation_scores,
    match,
    match_many,
    one_hot,
    splice,
)
from rewriter.datagen import generate_formula
from rewriter.formulas import render
from rewriter.tasks import UnknownToken, get_task

LISTOPS = get_task("listops")
ARITH = get_task("arithmetic")
VOCAB = LISTOPS.vocabulary


def brute_force_best(formula: str, candidate: str) -> tuple[int, int]:
    """Independent python-loop oracle for the best alignment."""
    best_pos, best_score = 0, -1
    for pos in range(len(formula) - len(candidate) + 1):
        score = sum(a == b for a, b in zip(formula[pos:pos + len(candidate)], candidate))
        if score > best_score:
            best_pos, best_score = pos, score
    return best_pos, best_score


class TestOneHot:
    def test_identity_rows(self):
        mat = one_hot("ab", get_task("algebra").vocabulary)
        assert mat.shape == (2, len(get_task("algebra").vocabulary))
        assert mat.sum() == 2
        assert (mat.sum(axis=1) == 1).all()

    def test_padding_rows_are_zero(self):
        mat = one_hot("ab", get_task("algebra").vocabulary, pad_to=5)
        assert mat.shape[0] == 5
        assert (mat[2:] == 0).all()

    def test_unknown_token(self):
        with pytest.raises(UnknownToken):
            one_hot("z", VOCAB)


class TestMatch:
    def test_exact_match_position(self):
        result = match("[MIN[SM54][MIN39]]", "[MIN39]", VOCAB)
        assert result.position == 10 and result.agreement == 1.0

    def test_one_token_off(self):
        result = match("[MIN[SM54][MIN39]]", "[MIN38]", VOCAB)
        assert result.position == 10
        assert result.matches == 6 and result.length == 7
        assert result.agreement == 6 / 7

    def test_self_match(self):
        f = "[MIN[SM54][MIN39]]"
        result = match(f, f, VOCAB)
        assert result.position == 0 and result.exact

    def test_fragment_too_long(self):
        with pytest.raises(FragmentTooLong):
            match("[SM54]", "[MIN[SM54]3]", VOCAB)

    def test_leftmost_tie_break(self):
        result = match("[SM11][SM11]", "[SM11]", VOCAB)
        assert result.position == 0 and result.exact

    def test_padding_does_not_match(self):
        formula_mat = one_hot("[SM54]", VOCAB)
        frag = one_hot("[SM", VOCAB, pad_to=6)
        scores = correlation_scores(formula_mat, frag)
        assert scores[0] == 3  # the three real tokens only


class TestMatchMany:
    def test_mixed_batch(self):
        f = "[MIN[SM54][MIN39]]"
        results = match_many(f, ["[MIN39]", "[SM54]", "", "zzz", f + "]"], VOCAB)
        assert results[0].position == 10 and results[0].exact
        assert results[1].position == 4 and results[1].exact
        assert results[2] is None  # empty
        assert results[3] is None  # out of vocabulary
        assert results[4] is None  # too long

    def test_agrees_with_single_match(self):
        rng = np.random.default_rng(3)
        f = render(LISTOPS, generate_formula(LISTOPS, 3, rng, num_args=3))
        candidates = [f[i:i + 5] for i in range(0, len(f) - 5, 2)]
        many = match_many(f, candidates, VOCAB)
        for cand, got in zip(candidates, many):
            single = match(f, cand, VOCAB)
            assert (got.position, got.matches) == (single.position, single.matches)


class TestSplice:
    def test_reduction_splice(self):
        assert splice("[MIN[SM54][MIN39]]", 10, 7, "3") == "[MIN[SM54]3]"

    def test_partial_fragment_splice(self):
        assert splice("[MAX1234]", 0, 6, "[MAX2") == "[MAX234]"

    def test_identity_splice(self):
        f = "[SM54]"
        assert splice(f, 0, 6, f) == f

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            splice("[SM54]", 3, 10, "x")


@st.composite
def formula_and_substring(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    task = (LISTOPS, ARITH)[draw(st.integers(0, 1))]
    nesting = draw(st.integers(1, 4))
    num_args = draw(st.integers(2, 4)) if task.name == "listops" else 2
    text = render(task, generate_formula(task, nesting, rng, num_args=num_args))
    start = draw(st.integers(0, len(text) - 1))
    length = draw(st.integers(1, len(text) - start))
    return task, text, text[start:start + length], start


@settings(max_examples=200, deadline=None)
@given(formula_and_substring())
def test_true_substrings_match_exactly(case):
    task, text, sub, _ = case
    result = match(text, sub, task.vocabulary)
    assert result.exact
    assert text[result.position:result.position + len(sub)] == sub


@settings(max_examples=200, deadline=None)
@given(formula_and_substring(), st.integers(0, 2**31 - 1))
def test_hamming_relation_against_brute_force(case, corrupt_seed):
    task, text, sub, _ = case
    rng = np.random.default_rng(corrupt_seed)
    chars = list(sub)
    flips = int(rng.integers(0, len(chars) + 1))
    alphabet = list(task.chars)
    for pos in rng.choice(len(chars), size=min(flips, len(chars)), replace=False):
        options = [c for c in alphabet if c != chars[pos]]
        chars[pos] = options[int(rng.integers(0, len(options)))]
    corrupted = "".join(chars)
    expected_pos, expected_score = brute_force_best(text, corrupted)
    result = match(text, corrupted, task.vocabulary)
    assert result.matches == expected_score
    assert result.position == expected_pos
    assert result.agreement == expected_score / len(corrupted)
