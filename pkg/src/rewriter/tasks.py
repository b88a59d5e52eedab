"""Task definitions: alphabets, operators, vocabularies and modular reduction.

Three character-level formula simplification tasks are supported:

* ``listops``    -- bracketed operations (MIN / MAX / SM) on single digits,
* ``arithmetic`` -- fully parenthesized binary +, -, * over two-digit integers,
* ``algebra``    -- parenthesized sums/differences of monomials over {a,b,x,y}.

Every task shares the same special tokens. OMEGA is the end-of-computation
marker emitted by the solver on atomic inputs; it never occurs inside a
formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

PAD = "·"      # padding, never rendered into data files
BOS = "⟨"      # decoder start
EOS = "⟩"      # decoder stop
OMEGA = "ω"    # end-of-computation marker

SPECIALS = (PAD, BOS, EOS, OMEGA)

DIGITS = tuple("0123456789")

LISTOPS_OPERATORS = ("MIN", "MAX", "SM")
ARITHMETIC_OPERATORS = ("+", "-", "*")
ALGEBRA_OPERATORS = ("+", "-")
ALGEBRA_VARIABLES = ("a", "b", "x", "y")

#: absolute bound on integer atoms / monomial coefficients
COEFF_LIMIT = 99


def signed_residue(value: int, modulus: int) -> int:
    """Reduce ``value`` keeping its sign: sign(v) * (|v| mod m)."""
    if value < 0:
        return -((-value) % modulus)
    return value % modulus


def nonnegative_residue(value: int, modulus: int) -> int:
    """Least non-negative residue of ``value`` mod ``m``."""
    return value % modulus


RESIDUE_CONVENTIONS = {
    "signed": signed_residue,
    "nonnegative": nonnegative_residue,
}


@dataclass(frozen=True)
class Vocabulary:
    """Bidirectional char <-> id mapping shared by datasets and models."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def pad_id(self) -> int:
        return self._index[PAD]

    @property
    def bos_id(self) -> int:
        return self._index[BOS]

    @property
    def eos_id(self) -> int:
        return self._index[EOS]

    @property
    def omega_id(self) -> int:
        return self._index[OMEGA]

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset(self._index[t] for t in SPECIALS)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def encode(self, text: str) -> list[int]:
        try:
            return [self._index[ch] for ch in text]
        except KeyError as exc:
            raise UnknownToken(f"token {exc.args[0]!r} not in vocabulary") from None

    def decode(self, ids) -> str:
        return "".join(self.tokens[i] for i in ids)


class UnknownToken(ValueError):
    """A character outside the task vocabulary was encountered."""


@dataclass(frozen=True)
class Task:
    """One formula simplification task.

    ``chars`` is the formula alphabet (no specials); ``vocabulary`` prepends
    the shared specials so that model token ids are stable per task.
    """

    name: str
    chars: tuple[str, ...]
    operators: tuple[str, ...]
    modulus: int
    residue_convention: str = "signed"
    vocabulary: Vocabulary = field(init=False)

    def __post_init__(self):
        if self.residue_convention not in RESIDUE_CONVENTIONS:
            raise ValueError(f"unknown residue convention {self.residue_convention!r}")
        object.__setattr__(self, "vocabulary", Vocabulary(SPECIALS + self.chars))

    def residue(self, value: int) -> int:
        return RESIDUE_CONVENTIONS[self.residue_convention](value, self.modulus)

    def with_residue_convention(self, convention: str) -> "Task":
        return replace(self, residue_convention=convention)


_TASKS = {
    "listops": Task(
        name="listops",
        chars=("[", "]") + DIGITS + ("M", "I", "N", "A", "X", "S"),
        operators=LISTOPS_OPERATORS,
        modulus=10,
    ),
    "arithmetic": Task(
        name="arithmetic",
        chars=DIGITS + ("+", "-", "*", "(", ")"),
        operators=ARITHMETIC_OPERATORS,
        modulus=100,
    ),
    "algebra": Task(
        name="algebra",
        chars=DIGITS + ("+", "-", "(", ")") + ALGEBRA_VARIABLES,
        operators=ALGEBRA_OPERATORS,
        modulus=100,
    ),
}

TASK_NAMES = tuple(_TASKS)


def get_task(name: str, residue_convention: str = "signed") -> Task:
    """Look up a task by name, optionally overriding the modulo convention."""
    try:
        task = _TASKS[name]
    except KeyError:
        raise ValueError(f"unknown task {name!r}; expected one of {TASK_NAMES}") from None
    if residue_convention != task.residue_convention:
        task = task.with_residue_convention(residue_convention)
    return task
