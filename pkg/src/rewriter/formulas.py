"""Formula ASTs, character-level parsing/rendering, and leaf discovery.

Surface syntax is canonical per task:

* listops:    ``[MIN[SM54][MIN39]]`` -- no separators, multi-char operators
  are plain letter sequences, arguments are digits or nested brackets.
* arithmetic: ``((-12+34)*(5-7))`` -- fully parenthesized binary infix,
  unary minus glued to the number, magnitudes capped at 99.
* algebra:    ``(22ab-54ab)`` -- parenthesized binary infix over monomials;
  a monomial is an optional sign, explicit coefficient digits (1 is written
  out), then variables in alphabetical order.

``parse(task, render(ast)) == ast`` for every valid AST.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tasks import ALGEBRA_VARIABLES, LISTOPS_OPERATORS, Task

LISTOPS_MIN_ARITY = 2
LISTOPS_MAX_ARITY = 4


class FormulaSyntaxError(ValueError):
    """Malformed formula text; ``position`` is the offending char index."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at index {position})")
        self.position = position


@dataclass(frozen=True)
class Atom:
    """Atomic element: a digit, a signed integer, or a monomial.

    ``variables`` is the empty string except for algebra, where it holds the
    monomial's variables in alphabetical order (each at most once).
    """

    value: int
    variables: str = ""


@dataclass(frozen=True)
class OpNode:
    op: str
    args: tuple["Formula", ...]


Formula = Atom | OpNode


@dataclass(frozen=True)
class Span:
    """Location of a subtree in the rendered string."""

    start: int
    length: int

    @property
    def end(self) -> int:
        return self.start + self.length


def is_atomic(ast: Formula) -> bool:
    return isinstance(ast, Atom)


def is_leaf(ast: Formula) -> bool:
    """A leaf formula: an operator node whose arguments are all atomic."""
    return isinstance(ast, OpNode) and all(isinstance(a, Atom) for a in ast.args)


def nesting_depth(ast: Formula) -> int:
    if isinstance(ast, Atom):
        return 0
    return 1 + max(nesting_depth(a) for a in ast.args)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render_atom(task: Task, atom: Atom) -> str:
    if task.name == "listops":
        return str(atom.value)
    if task.name == "arithmetic":
        return str(atom.value)
    # algebra: explicit coefficient, even for +-1; -0 normalizes to 0
    coeff = atom.value if atom.value != 0 else 0
    return f"{coeff}{atom.variables}"


def render(task: Task, ast: Formula) -> str:
    if isinstance(ast, Atom):
        return render_atom(task, ast)
    if task.name == "listops":
        return "[" + ast.op + "".join(render(task, a) for a in ast.args) + "]"
    left, right = ast.args
    return "(" + render(task, left) + ast.op + render(task, right) + ")"


def annotate_spans(task: Task, ast: Formula) -> list[tuple[Formula, Span]]:
    """Render positions of every subtree, in left-to-right textual order."""
    out: list[tuple[Formula, Span]] = []

    def walk(node: Formula, start: int) -> int:
        text = render(task, node)
        out.append((node, Span(start, len(text))))
        if isinstance(node, OpNode):
            if task.name == "listops":
                cursor = start + 1 + len(node.op)
                for arg in node.args:
                    cursor = walk(arg, cursor)
                cursor += 1
            else:
                cursor = walk(node.args[0], start + 1)
                cursor += len(node.op)
                cursor = walk(node.args[1], cursor)
                cursor += 1
            return cursor
        return start + len(text)

    walk(ast, 0)
    out.sort(key=lambda item: item[1].start)
    return out


def find_leaves(task: Task, ast: Formula) -> list[tuple[Formula, Span]]:
    """All leaf formulas with their spans in the rendered string.

    An atomic formula has no leaves; a formula that is itself a leaf returns
    itself with span covering the whole string.
    """
    return [(node, span) for node, span in annotate_spans(task, ast) if is_leaf(node)]


# ---------------------------------------------------------------------------
# Parsing (recursive descent, canonical grammar only)
# ---------------------------------------------------------------------------

class _Cursor:
    __slots__ = ("text", "pos")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str | None:
        return self.text[self.pos] if self.pos < len(self.text) else None

    def take(self) -> str:
        ch = self.peek()
        if ch is None:
            raise FormulaSyntaxError("unexpected end of input", self.pos)
        self.pos += 1
        return ch

    def expect(self, ch: str) -> None:
        got = self.peek()
        if got != ch:
            raise FormulaSyntaxError(f"expected {ch!r}, found {got!r}", self.pos)
        self.pos += 1

    def fail(self, message: str):
        raise FormulaSyntaxError(message, self.pos)


def _parse_uint(cur: _Cursor, max_digits: int) -> int:
    start = cur.pos
    digits = ""
    while (ch := cur.peek()) is not None and ch.isdigit():
        digits += cur.take()
        if len(digits) > max_digits:
            cur.fail(f"number longer than {max_digits} digits")
    if not digits:
        cur.fail("expected a digit")
    if len(digits) > 1 and digits[0] == "0":
        raise FormulaSyntaxError("leading zero", start)
    return int(digits)


def _parse_int(cur: _Cursor) -> int:
    negative = cur.peek() == "-"
    if negative:
        cur.take()
    value = _parse_uint(cur, max_digits=2)
    if negative and value == 0:
        cur.fail("negative zero")
    return -value if negative else value


def _parse_monomial(cur: _Cursor) -> Atom:
    value = _parse_int(cur)
    variables = ""
    while (ch := cur.peek()) is not None and ch in ALGEBRA_VARIABLES:
        if variables and ch <= variables[-1]:
            cur.fail("variables must be distinct and alphabetically ordered")
        variables += cur.take()
    return Atom(value, variables)


def _parse_listops(cur: _Cursor) -> Formula:
    ch = cur.peek()
    if ch is None:
        cur.fail("unexpected end of input")
    if ch.isdigit():
        return Atom(int(cur.take()))
    if ch != "[":
        cur.fail(f"expected digit or '[', found {ch!r}")
    cur.take()
    op_start = cur.pos
    op = ""
    while (ch := cur.peek()) is not None and ch.isalpha():
        op += cur.take()
    if op not in LISTOPS_OPERATORS:
        raise FormulaSyntaxError(f"unknown operator {op!r}", op_start)
    args: list[Formula] = []
    while (ch := cur.peek()) != "]":
        if ch is None:
            cur.fail("unbalanced bracket")
        args.append(_parse_listops(cur))
        if len(args) > LISTOPS_MAX_ARITY:
            cur.fail(f"more than {LISTOPS_MAX_ARITY} arguments")
    if len(args) < LISTOPS_MIN_ARITY:
        cur.fail("operator needs at least 2 arguments")
    cur.take()
    return OpNode(op, tuple(args))


def _parse_infix(cur: _Cursor, task: Task) -> Formula:
    ch = cur.peek()
    if ch is None:
        cur.fail("unexpected end of input")
    if ch == "(":
        cur.take()
        left = _parse_infix(cur, task)
        op = cur.peek()
        if op not in task.operators:
            cur.fail(f"expected operator, found {op!r}")
        cur.take()
        right = _parse_infix(cur, task)
        cur.expect(")")
        return OpNode(op, (left, right))
    if task.name == "algebra":
        return _parse_monomial(cur)
    return Atom(_parse_int(cur))


def parse(task: Task, text: str) -> Formula:
    """Parse canonical formula text into an AST.

    Raises FormulaSyntaxError (with position) on malformed input; the grammar
    is strict so that any deviation from canonical rendering is rejected.
    """
    if not text:
        raise FormulaSyntaxError("empty input", 0)
    cur = _Cursor(text)
    ast = _parse_listops(cur) if task.name == "listops" else _parse_infix(cur, task)
    if cur.pos != len(text):
        cur.fail("trailing characters")
    return ast


def iter_nodes(ast: Formula):
    yield ast
    if isinstance(ast, OpNode):
        for arg in ast.args:
            yield from iter_nodes(arg)


def try_parse(task: Task, text: str) -> Formula | None:
    """Parse, returning None instead of raising on malformed input."""
    try:
        return parse(task, text)
    except FormulaSyntaxError:
        return None
