"""Deterministic fragment matcher and splicer.

Candidate fragments are located in the formula by sliding the fragment's
one-hot matrix over the formula's one-hot matrix and counting per-offset
token agreements -- a cross-correlation whose filter is set from the
candidate at run time instead of being learned. Everything is integer
arithmetic, so results are bit-exact and platform independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tasks import Vocabulary


class FragmentTooLong(ValueError):
    """Candidate is longer than the formula it should be found in."""


@dataclass(frozen=True)
class MatchResult:
    """Best alignment of a candidate inside a formula.

    ``agreement`` is ``matches / len(candidate)``; 1.0 means the candidate
    occurs verbatim at ``position``.
    """

    position: int
    matches: int
    length: int

    @property
    def agreement(self) -> float:
        return self.matches / self.length

    @property
    def exact(self) -> bool:
        return self.matches == self.length


def one_hot(text: str, vocabulary: Vocabulary, pad_to: int | None = None) -> np.ndarray:
    """|text| x |V| binary matrix; optional all-zero padding rows so fragments
    of different lengths can share one batch without spurious matches."""
    ids = vocabulary.encode(text)
    rows = pad_to if pad_to is not None else len(ids)
    if rows < len(ids):
        raise ValueError("pad_to shorter than the sequence")
    mat = np.zeros((rows, len(vocabulary)), dtype=np.int64)
    mat[np.arange(len(ids)), ids] = 1
    return mat


def correlation_scores(formula_mat: np.ndarray, fragment_mat: np.ndarray) -> np.ndarray:
    """Agreement count at every offset of the fragment over the formula."""
    n, m = formula_mat.shape[0], fragment_mat.shape[0]
    if m > n:
        raise FragmentTooLong(f"fragment length {m} exceeds formula length {n}")
    windows = np.lib.stride_tricks.sliding_window_view(formula_mat, (m, formula_mat.shape[1]))
    # windows: (n-m+1, 1, m, |V|); contract against the fragment filter
    return np.einsum("oxmv,mv->o", windows, fragment_mat)


def match(formula: str, candidate: str, vocabulary: Vocabulary) -> MatchResult:
    """Best alignment of ``candidate`` in ``formula``; ties go to the
    leftmost offset (safe: exact matches of identical text are interchangeable
    because leaf reduction order does not change the result)."""
    if not candidate or not formula:
        raise ValueError("formula and candidate must be nonempty")
    scores = correlation_scores(
        one_hot(formula, vocabulary), one_hot(candidate, vocabulary)
    )
    position = int(np.argmax(scores))
    return MatchResult(position=position, matches=int(scores[position]), length=len(candidate))


def match_many(
    formula: str, candidates: list[str], vocabulary: Vocabulary
) -> list[MatchResult | None]:
    """Match a batch of candidates against one formula.

    Candidates are grouped by length and each group is scored in one
    einsum over zero-padded one-hot filters. Entries are None for
    candidates that are empty, too long, or contain out-of-vocabulary
    tokens (all discarded by the caller).
    """
    results: list[MatchResult | None] = [None] * len(candidates)
    formula_mat = one_hot(formula, vocabulary)
    by_length: dict[int, list[int]] = {}
    for i, cand in enumerate(candidates):
        if not cand or len(cand) > len(formula):
            continue
        if any(tok not in vocabulary for tok in cand):
            continue
        by_length.setdefault(len(cand), []).append(i)
    for length, indices in by_length.items():
        filters = np.stack(
            [one_hot(candidates[i], vocabulary) for i in indices]
        )
        windows = np.lib.stride_tricks.sliding_window_view(
            formula_mat, (length, formula_mat.shape[1])
        )
        scores = np.einsum("oxmv,cmv->co", windows, filters)
        positions = np.argmax(scores, axis=1)
        for row, i in enumerate(indices):
            pos = int(positions[row])
            results[i] = MatchResult(
                position=pos, matches=int(scores[row, pos]), length=length
            )
    return results


def splice(formula: str, position: int, fragment_length: int, replacement: str) -> str:
    """Replace the ``fragment_length`` tokens at ``position`` with
    ``replacement``. The caller guarantees the position comes from an exact
    match."""
    if position < 0 or position + fragment_length > len(formula):
        raise ValueError("splice span outside the formula")
    return formula[:position] + replacement + formula[position + fragment_length:]
