"""Deterministic symbolic oracle: leaf selection, rewriting rules, traces.

The oracle is the ground truth the neural modules are trained against. Its
three core operations mirror the solve loop: pick the last (rightmost
starting) leaf fragment, reduce it, splice the reduction back in, repeat
until the formula is a single atomic element.

``brute_force_eval`` computes the same final value by plain recursion and is
kept independent of the iterative path so the two can cross-check each other.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .formulas import (
    Atom,
    Formula,
    OpNode,
    find_leaves,
    is_atomic,
    is_leaf,
    parse,
    render_atom,
    try_parse,
)
from .tasks import OMEGA, Task


class InvalidFragment(ValueError):
    """No rewriting rule applies to the given fragment."""


@dataclass(frozen=True)
class SelectedFragment:
    """A selection target: a full leaf, a partial leaf prefix, or an atom.

    ``partial`` marks the arity>2 listops case where only the opening
    bracket, the operator and the first two arguments are selected.
    ``start``/``length`` locate the fragment in the source string (oracle
    bookkeeping; the neural path re-locates fragments by matching).
    """

    text: str
    partial: bool
    start: int
    length: int


@dataclass
class SolveTrace:
    """Step-by-step record of one full reduction."""

    task: str
    initial: str
    steps: list[str] = field(default_factory=list)
    fragments: list[SelectedFragment] = field(default_factory=list)
    answer: str = ""


def _apply_listops(op: str, values: list[int]) -> int:
    if op == "MIN":
        return min(values)
    if op == "MAX":
        return max(values)
    if op == "SM":
        # pairwise left-to-right; equals sum mod 10 by associativity
        acc = values[0]
        for v in values[1:]:
            acc = (acc + v) % 10
        return acc
    raise InvalidFragment(f"unknown listops operator {op!r}")


def _apply_binary(task: Task, op: str, left: Atom, right: Atom) -> Atom:
    if task.name == "algebra" and left.variables != right.variables:
        raise InvalidFragment(
            f"monomials {left!r} and {right!r} have different variables"
        )
    if op == "+":
        raw = left.value + right.value
    elif op == "-":
        raw = left.value - right.value
    elif op == "*":
        raw = left.value * right.value
    else:
        raise InvalidFragment(f"unknown operator {op!r}")
    return Atom(task.residue(raw), left.variables)


def reduce_leaf(task: Task, leaf: OpNode) -> Atom:
    """Apply the task's rewriting rule to a full leaf formula."""
    if not is_leaf(leaf):
        raise InvalidFragment("not a leaf formula")
    if task.name == "listops":
        return Atom(_apply_listops(leaf.op, [a.value for a in leaf.args]))
    return _apply_binary(task, leaf.op, *leaf.args)


def oracle_select(task: Task, text: str) -> SelectedFragment:
    """The selector's training target for ``text``.

    Atomic input selects itself (the termination case). Otherwise the leaf
    whose span starts last is selected; leaves with more than two arguments
    yield the partial prefix ``[op a b`` so the rewrite stays contractive.
    """
    ast = parse(task, text)
    if is_atomic(ast):
        return SelectedFragment(text, partial=False, start=0, length=len(text))
    leaves = find_leaves(task, ast)
    node, span = max(leaves, key=lambda item: item[1].start)
    assert isinstance(node, OpNode)
    if task.name == "listops" and len(node.args) > 2:
        prefix = "[" + node.op + "".join(render_atom(task, a) for a in node.args[:2])
        return SelectedFragment(prefix, partial=True, start=span.start, length=len(prefix))
    return SelectedFragment(text[span.start:span.end], partial=False,
                            start=span.start, length=span.length)


_PARTIAL_RE = re.compile(r"^\[(MIN|MAX|SM)(\d)(\d)$")


def parse_partial_fragment(text: str) -> tuple[str, int, int] | None:
    """Match a listops partial fragment ``[op a b`` -> (op, a, b)."""
    m = _PARTIAL_RE.match(text)
    if m is None:
        return None
    return m.group(1), int(m.group(2)), int(m.group(3))


def oracle_solve(task: Task, fragment: str) -> str:
    """Reduce a fragment: full leaf -> atom, partial -> shorter partial prefix,
    atom -> OMEGA. Raises InvalidFragment when no rule applies."""
    ast = try_parse(task, fragment)
    if ast is not None:
        if is_atomic(ast):
            return OMEGA
        if is_leaf(ast):
            return render_atom(task, reduce_leaf(task, ast))
        raise InvalidFragment(f"{fragment!r} is not a leaf formula")
    if task.name == "listops":
        partial = parse_partial_fragment(fragment)
        if partial is not None:
            op, a, b = partial
            return f"[{op}{_apply_listops(op, [a, b])}"
    raise InvalidFragment(f"no rewriting rule applies to {fragment!r}")


def splice_at(text: str, start: int, length: int, replacement: str) -> str:
    return text[:start] + replacement + text[start + length:]


def oracle_trace(task: Task, text: str, max_steps: int | None = None) -> SolveTrace:
    """Reduce ``text`` to its atomic value, recording every intermediate.

    ``steps`` holds each formula after a splice (the initial formula is not
    repeated); an atomic input produces no steps. ``max_steps`` is a safety
    valve only, reductions are contractive so the loop always terminates.
    """
    parse(task, text)  # surface syntax check up front
    trace = SolveTrace(task=task.name, initial=text)
    current = text
    limit = max_steps if max_steps is not None else len(text) + 1
    for _ in range(limit):
        fragment = oracle_select(task, current)
        reduction = oracle_solve(task, fragment.text)
        if reduction == OMEGA:
            trace.answer = current
            return trace
        trace.fragments.append(fragment)
        current = splice_at(current, fragment.start, fragment.length, reduction)
        trace.steps.append(current)
    raise RuntimeError(f"reduction of {text!r} did not terminate in {limit} steps")


def brute_force_eval(task: Task, ast: Formula) -> Atom:
    """Final value by plain bottom-up recursion (test oracle for the trace)."""
    if isinstance(ast, Atom):
        return ast
    args = [brute_force_eval(task, a) for a in ast.args]
    if task.name == "listops":
        return Atom(_apply_listops(ast.op, [a.value for a in args]))
    acc = args[0]
    for nxt in args[1:]:
        acc = _apply_binary(task, ast.op, acc, nxt)
    return acc


class NotAMonomial(ValueError):
    """Text cannot be read as a monomial (an ungradable answer)."""


_MONOMIAL_RE = re.compile(r"^([+-]?)(\d*)([abxy]*)$")


def canonical_monomial(text: str) -> str:
    """Canonicalize a monomial answer: sign, explicit coefficient, variables
    sorted alphabetically. Accepts unsorted variables, ``*`` separators and
    stray whitespace; anything else raises NotAMonomial.
    """
    cleaned = text.strip().replace("*", "").replace(" ", "")
    m = _MONOMIAL_RE.match(cleaned)
    if m is None or not cleaned:
        raise NotAMonomial(f"cannot read {text!r} as a monomial")
    sign, digits, variables = m.groups()
    if not digits and not variables:
        raise NotAMonomial(f"cannot read {text!r} as a monomial")
    if len(set(variables)) != len(variables):
        raise NotAMonomial(f"repeated variable in {text!r}")
    coeff = int(digits) if digits else 1
    if coeff == 0:
        sign = ""
    prefix = "-" if sign == "-" and coeff != 0 else ""
    return f"{prefix}{coeff}{''.join(sorted(variables))}"


def grade_answer(task: Task, predicted: str, target: str) -> bool:
    """Exact-match grading; algebra compares canonical monomial forms."""
    if task.name != "algebra":
        return predicted == target
    try:
        return canonical_monomial(predicted) == canonical_monomial(target)
    except NotAMonomial:
        return False


def fragment_kind(task: Task, fragment: str) -> str | None:
    """Classify fragment text: 'atomic', 'leaf', 'partial', or None.

    Used by error analysis to decide whether a matched selection was a
    well-formed rewrite target.
    """
    ast = try_parse(task, fragment)
    if ast is not None:
        if is_atomic(ast):
            return "atomic"
        if is_leaf(ast):
            return "leaf"
        return None
    if task.name == "listops" and parse_partial_fragment(fragment) is not None:
        return "partial"
    return None
