"""Procedural formula generation and dataset construction.

Formulas are generated by nesting level: the skeleton places exactly two
formula-valued argument slots at every level below the deepest. The root
hosts both nesting points (at distinct argument positions); at each deeper
level the two nodes carry one nesting point each, so a formula of nesting
``d`` always has ``2d - 1`` operator nodes and exactly two leaf formulas
(one when ``d == 1``). All remaining argument slots are atoms sampled per
task.

Selector examples pair each formula (the original, its intermediate
reduction steps, and the final atomic value) with the fragment the oracle
selects. Solver examples pair each selected fragment with its reduction and
each final atomic with the end-of-computation marker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formulas import Atom, Formula, OpNode, render
from .oracle import oracle_select, oracle_solve, oracle_trace
from .tasks import ALGEBRA_VARIABLES, COEFF_LIMIT, OMEGA, Task


class SchemaError(ValueError):
    """A dataset record is missing fields or has the wrong shape."""


@dataclass(frozen=True)
class DatasetExample:
    task: str
    split: str
    input: str
    target: str
    nesting: int
    num_args: int
    step: int

    FIELDS = ("task", "split", "input", "target", "nesting", "num_args", "step")


@dataclass(frozen=True)
class SplitSpec:
    """Recipe for one dataset split.

    ``count`` is the number of top-level formulas per stratum, except when
    ``balance`` is set, in which case it is the exact number of final
    examples per stratum (generation continues until the quota is filled,
    then trims). Strata are the cross product of ``nestings`` and, for
    listops, ``num_args``.
    """

    name: str
    nestings: tuple[int, ...]
    num_args: tuple[int, ...] = (2,)
    count: int = 100
    include_intermediates: bool = True
    include_atomics: bool = True
    balance: bool = False
    seed: int = 0


def _sample_atom(task: Task, rng: np.random.Generator, variables: str) -> Atom:
    if task.name == "listops":
        return Atom(int(rng.integers(0, 10)))
    value = int(rng.integers(-COEFF_LIMIT, COEFF_LIMIT + 1))
    if task.name == "arithmetic":
        return Atom(value)
    return Atom(value, variables)


def _sample_variables(rng: np.random.Generator) -> str:
    size = int(rng.integers(1, len(ALGEBRA_VARIABLES) + 1))
    chosen = rng.choice(len(ALGEBRA_VARIABLES), size=size, replace=False)
    return "".join(sorted(ALGEBRA_VARIABLES[i] for i in chosen))


def generate_formula(
    task: Task,
    nesting: int,
    rng: np.random.Generator,
    num_args: int = 2,
) -> Formula:
    """Sample one formula with the two-points-per-level nesting skeleton."""
    if nesting < 1:
        raise ValueError("nesting must be >= 1")
    if task.name != "listops":
        num_args = 2
    elif not 2 <= num_args <= 4:
        raise ValueError("listops argument count must be in [2, 4]")

    variables = _sample_variables(rng) if task.name == "algebra" else ""

    def make_node(children: list[Formula], slots: int) -> OpNode:
        op = task.operators[int(rng.integers(0, len(task.operators)))]
        positions = rng.choice(num_args, size=slots, replace=False) if slots else []
        placed = dict(zip(sorted(int(p) for p in positions), children))
        args = tuple(
            placed[i] if i in placed else _sample_atom(task, rng, variables)
            for i in range(num_args)
        )
        return OpNode(op, args)

    # build bottom-up: the deepest level's nodes are leaves
    if nesting == 1:
        return make_node([], 0)
    level_nodes: list[Formula] = [make_node([], 0), make_node([], 0)]
    for _ in range(nesting - 2):
        level_nodes = [make_node([child], 1) for child in level_nodes]
    return make_node(level_nodes, 2)


def expand_intermediates(task: Task, text: str) -> list[str]:
    """All formulas the reduction passes through after the first splice,
    including the final atomic value; empty for atomic input."""
    return list(oracle_trace(task, text).steps)


def _strata(spec: SplitSpec, task: Task) -> list[tuple[int, int]]:
    if task.name == "listops":
        return [(n, a) for n in spec.nestings for a in spec.num_args]
    return [(n, 2) for n in spec.nestings]


def _stratum_rng(spec: SplitSpec, index: int) -> np.random.Generator:
    return np.random.default_rng((spec.seed, index))


def _selector_pairs(task: Task, text: str, spec: SplitSpec):
    # yields (input, target, step index, input-is-atomic)
    yield text, oracle_select(task, text).text, 0, False
    steps = expand_intermediates(task, text)
    if not steps:
        return
    if spec.include_intermediates:
        for k, step_text in enumerate(steps[:-1], start=1):
            yield step_text, oracle_select(task, step_text).text, k, False
    if spec.include_atomics:
        yield steps[-1], steps[-1], len(steps), True


def _solver_pairs(task: Task, text: str, spec: SplitSpec):
    trace = oracle_trace(task, text)
    fragments = trace.fragments if spec.include_intermediates else trace.fragments[:1]
    for k, frag in enumerate(fragments):
        yield frag.text, oracle_solve(task, frag.text), k, False
    if spec.include_atomics:
        yield trace.answer, OMEGA, len(trace.steps), True


def _build_dataset(
    task: Task,
    spec: SplitSpec,
    pair_fn,
    exclude: set[str] | None,
) -> list[DatasetExample]:
    exclude = exclude or set()
    out: list[DatasetExample] = []
    for index, (nesting, num_args) in enumerate(_strata(spec, task)):
        rng = _stratum_rng(spec, index)
        stratum: list[DatasetExample] = []
        produced = 0
        attempts = 0
        while True:
            if spec.balance:
                if len(stratum) >= spec.count:
                    del stratum[spec.count:]
                    break
            elif produced >= spec.count:
                break
            attempts += 1
            if attempts > spec.count * 50 + 1000:
                raise RuntimeError(
                    f"could not fill stratum {(nesting, num_args)} of split {spec.name!r}"
                )
            ast = generate_formula(task, nesting, rng, num_args=num_args)
            text = render(task, ast)
            if text in exclude:
                continue
            produced += 1
            for source, target, step, atomic_input in pair_fn(task, text, spec):
                # atomic inputs are exempt from disjointness: the atom pools
                # are small enough that train/val overlap is unavoidable
                if not atomic_input and source in exclude:
                    continue
                stratum.append(
                    DatasetExample(
                        task=task.name,
                        split=spec.name,
                        input=source,
                        target=target,
                        nesting=nesting,
                        num_args=num_args,
                        step=step,
                    )
                )
        out.extend(stratum)
    return out


def build_selector_dataset(
    task: Task, spec: SplitSpec, exclude: set[str] | None = None
) -> list[DatasetExample]:
    """Formula -> selected-fragment pairs for every reduction stage."""
    return _build_dataset(task, spec, _selector_pairs, exclude)


def build_solver_dataset(
    task: Task, spec: SplitSpec, exclude: set[str] | None = None
) -> list[DatasetExample]:
    """Fragment -> reduction pairs, plus atomic -> end marker pairs."""
    return _build_dataset(task, spec, _solver_pairs, exclude)


def build_test_suite(
    task: Task,
    max_nesting: int,
    count: int = 100,
    seed: int = 0,
    num_args: tuple[int, ...] = (2, 3, 4),
) -> dict[str, list[DatasetExample]]:
    """Held-out evaluation splits: ``count`` top-level formulas per
    complexity level, each paired with its final value."""
    if max_nesting < 1:
        raise ValueError("max_nesting must be >= 1")
    from .oracle import brute_force_eval
    from .formulas import render_atom

    suite: dict[str, list[DatasetExample]] = {}
    arg_options = num_args if task.name == "listops" else (2,)
    index = 0
    for nesting in range(1, max_nesting + 1):
        for args in arg_options:
            name = f"N{nesting}A{args}" if task.name == "listops" else f"N{nesting}"
            rng = np.random.default_rng((seed, 1000 + index))
            index += 1
            seen: set[str] = set()
            examples: list[DatasetExample] = []
            while len(examples) < count:
                ast = generate_formula(task, nesting, rng, num_args=args)
                text = render(task, ast)
                if text in seen:
                    continue
                seen.add(text)
                answer = render_atom(task, brute_force_eval(task, ast))
                examples.append(
                    DatasetExample(
                        task=task.name,
                        split=name,
                        input=text,
                        target=answer,
                        nesting=nesting,
                        num_args=args,
                        step=0,
                    )
                )
            suite[name] = examples
    return suite


def collect_inputs(examples: list[DatasetExample]) -> set[str]:
    return {ex.input for ex in examples}


def default_split_specs(task: Task, train_count: int, val_count: int,
                        ood_count: int, seed: int = 0) -> dict[str, SplitSpec]:
    """The standard split layout: shallow train/in-distribution validation,
    deeper balanced out-of-distribution validation used for model selection."""
    if task.name == "listops":
        train_nestings, train_args = (1, 2), (2, 3)
        ood_nestings, ood_args = (3, 4), (2, 3, 4)
    else:
        train_nestings, train_args = (1, 2, 3), (2,)
        ood_nestings, ood_args = (4, 5, 6), (2,)
    return {
        "train": SplitSpec(
            name="train", nestings=train_nestings, num_args=train_args,
            count=train_count, seed=seed,
        ),
        "val_in": SplitSpec(
            name="val_in", nestings=train_nestings, num_args=train_args,
            count=val_count, seed=seed + 1,
        ),
        "val_ood": SplitSpec(
            name="val_ood", nestings=ood_nestings, num_args=ood_args,
            count=ood_count, balance=True, seed=seed + 2,
        ),
    }


def build_module_datasets(
    task: Task, specs: dict[str, SplitSpec], kind: str
) -> dict[str, list[DatasetExample]]:
    """Build train/val_in/val_ood for one module with train/val inputs
    disjoint on full (non-atomic) input strings."""
    builder = build_selector_dataset if kind == "selector" else build_solver_dataset
    train = builder(task, specs["train"])
    block = collect_inputs(train)
    return {
        "train": train,
        "val_in": builder(task, specs["val_in"], exclude=block),
        "val_ood": builder(task, specs["val_ood"], exclude=block),
    }


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_examples(path: str | Path, examples: list[DatasetExample]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ex in examples:
            record = {name: getattr(ex, name) for name in DatasetExample.FIELDS}
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def load_examples(path: str | Path) -> list[DatasetExample]:
    out: list[DatasetExample] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            missing = [f for f in DatasetExample.FIELDS if f not in record]
            if missing:
                raise SchemaError(f"{path}:{lineno} missing fields {missing}")
            out.append(DatasetExample(**{f: record[f] for f in DatasetExample.FIELDS}))
    return out
