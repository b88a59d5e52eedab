"""Test-suite execution, error taxonomy, confidence profiling, ablations.

Failures are classified by their root cause at the earliest faulty step:

* ``missing-leaf``    -- no sampled fragment occurred verbatim in the formula,
* ``corrupted-leaf``  -- the chosen fragment matched but was not a valid
  rewrite target (or its substitution changes the formula's value),
* ``wrong-solution``  -- the fragment was valid but the reduction was wrong,
* ``budget-exceeded`` -- the loop ran out of iterations with no earlier fault.

Within one step a selection fault outranks a solver fault, mirroring the
order in which the pipeline stages act.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

from .combiner import splice
from .controller import (
    FAILURE_BUDGET_EXCEEDED,
    FAILURE_NO_EXACT_MATCH,
    SamplingSelector,
    SolveResult,
    solve,
)
from .datagen import DatasetExample
from .formulas import is_atomic, try_parse
from .models.selector import NeuralSelector
from .oracle import brute_force_eval, fragment_kind, grade_answer, oracle_solve
from .tasks import OMEGA, Task

MISSING_LEAF = "missing-leaf"
CORRUPTED_LEAF = "corrupted-leaf"
WRONG_SOLUTION = "wrong-solution"
BUDGET_EXCEEDED = "budget-exceeded"
CAUSES = (MISSING_LEAF, CORRUPTED_LEAF, WRONG_SOLUTION, BUDGET_EXCEEDED)


def sequence_accuracy(predictions: list[str], targets: list[str]) -> float:
    """Mean exact string match."""
    if len(predictions) != len(targets):
        raise ValueError("prediction/target length mismatch")
    if not targets:
        return 0.0
    return sum(p == t for p, t in zip(predictions, targets)) / len(targets)


@dataclass
class ErrorRecord:
    example_id: int
    split: str
    cause: str
    iteration: int
    fragment: str | None
    solver_output: str | None


def _value_key(task: Task, text: str):
    ast = try_parse(task, text)
    if ast is None:
        return None
    atom = brute_force_eval(task, ast)
    return (atom.value, atom.variables)


def _step_fault(task: Task, step) -> str | None:
    """Fault class of one trace step, or None if the step is sound."""
    formula_ast = try_parse(task, step.formula)
    formula_atomic = formula_ast is not None and is_atomic(formula_ast)
    kind = fragment_kind(task, step.fragment)

    if not formula_atomic:
        # selection stage: the fragment must be a reducible leaf (or partial)
        # whose substitution keeps the formula's value intact
        if kind not in ("leaf", "partial"):
            return CORRUPTED_LEAF
        reference = oracle_solve(task, step.fragment)
        spliced = splice(step.formula, step.position, len(step.fragment), reference)
        if _value_key(task, spliced) != _value_key(task, step.formula):
            return CORRUPTED_LEAF

    expected = oracle_solve(task, step.fragment) if kind is not None else None
    if formula_atomic and kind == "atomic":
        expected = OMEGA
    if step.solver_output != expected:
        return WRONG_SOLUTION
    return None


def classify_error(
    task: Task, result: SolveResult, target: str, split: str = "", example_id: int = 0
) -> ErrorRecord | None:
    """Root-cause record for a failed or wrong-answer solve, None if correct."""
    if result.solved and grade_answer(task, result.answer or "", target):
        return None
    for index, step in enumerate(result.trace):
        cause = _step_fault(task, step)
        if cause is not None:
            return ErrorRecord(example_id, split, cause, index, step.fragment, step.solver_output)
    if result.failure_reason == FAILURE_NO_EXACT_MATCH:
        return ErrorRecord(example_id, split, MISSING_LEAF, len(result.trace), None, None)
    if result.failure_reason == FAILURE_BUDGET_EXCEEDED:
        return ErrorRecord(example_id, split, BUDGET_EXCEEDED, len(result.trace), None, None)
    # defensive: no detectable step fault should imply a correct answer
    last = len(result.trace) - 1
    return ErrorRecord(example_id, split, CORRUPTED_LEAF, max(last, 0), None, None)


@dataclass
class SplitReport:
    split: str
    total: int
    correct: int
    errors: list[ErrorRecord] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def cause_counts(self) -> dict[str, int]:
        counts = {cause: 0 for cause in CAUSES}
        for err in self.errors:
            counts[err.cause] += 1
        return counts


@dataclass
class EvaluationReport:
    task: str
    splits: dict[str, SplitReport]
    settings: dict

    def accuracy_table(self) -> dict[str, float]:
        return {name: report.accuracy for name, report in self.splits.items()}

    def check_partition(self) -> None:
        for name, report in self.splits.items():
            counted = report.correct + sum(report.cause_counts().values())
            if counted != report.total:
                raise AssertionError(f"split {name}: {counted} != {report.total}")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "settings": self.settings,
            "splits": {
                name: {
                    "total": rep.total,
                    "correct": rep.correct,
                    "accuracy": rep.accuracy,
                    "causes": rep.cause_counts(),
                }
                for name, rep in self.splits.items()
            },
        }


def evaluate_system(
    task: Task,
    suite: dict[str, list[DatasetExample]],
    selector,
    solver,
    max_steps: int | None = None,
    seed: int = 0,
    settings: dict | None = None,
) -> EvaluationReport:
    """Run the full solve loop over every split and grade exact matches."""
    splits: dict[str, SplitReport] = {}
    for name, examples in suite.items():
        report = SplitReport(split=name, total=len(examples), correct=0)
        for i, example in enumerate(examples):
            result = solve(
                example.input, task, selector, solver,
                max_steps=max_steps, seed=seed + i,
            )
            error = classify_error(task, result, example.target, split=name, example_id=i)
            if error is None:
                report.correct += 1
            else:
                report.errors.append(error)
        splits[name] = report
    report = EvaluationReport(task=task.name, splits=splits, settings=settings or {})
    report.check_partition()
    return report


def write_report(report: EvaluationReport, out_dir: str | Path) -> dict[str, Path]:
    """Persist an evaluation: JSON metrics, CSV table, accuracy heatmap."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, ensure_ascii=False))

    csv_path = out_dir / "accuracy.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "total", "correct", "accuracy", *CAUSES])
        for name, rep in report.splits.items():
            counts = rep.cause_counts()
            writer.writerow(
                [name, rep.total, rep.correct, f"{rep.accuracy:.4f}"]
                + [counts[c] for c in CAUSES]
            )

    png_path = out_dir / "accuracy.png"
    _plot_accuracy_grid(report, png_path)
    return {"json": json_path, "csv": csv_path, "png": png_path}


def _split_grid(report: EvaluationReport) -> tuple[list[int], list[int], np.ndarray]:
    names = list(report.splits)
    if all(name.startswith("N") and "A" in name for name in names):
        nestings = sorted({int(n[1:n.index("A")]) for n in names})
        args = sorted({int(n[n.index("A") + 1:]) for n in names})
        grid = np.full((len(nestings), len(args)), np.nan)
        for name, rep in report.splits.items():
            r = nestings.index(int(name[1:name.index("A")]))
            c = args.index(int(name[name.index("A") + 1:]))
            grid[r, c] = rep.accuracy
        return nestings, args, grid
    nestings = sorted(int(n[1:]) for n in names)
    grid = np.array([[report.splits[f"N{n}"].accuracy for n in nestings]]).T
    return nestings, [2], grid


def _plot_accuracy_grid(report: EvaluationReport, path: Path) -> None:
    nestings, args, grid = _split_grid(report)
    fig, ax = plt.subplots(figsize=(1.2 + len(args), 1.0 + 0.6 * len(nestings)))
    im = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(args)), [f"A={a}" for a in args])
    ax.set_yticks(range(len(nestings)), [f"N={n}" for n in nestings])
    for r in range(grid.shape[0]):
        for c in range(grid.shape[1]):
            if not np.isnan(grid[r, c]):
                ax.text(c, r, f"{grid[r, c]:.2f}", ha="center", va="center",
                        color="white" if grid[r, c] < 0.6 else "black", fontsize=8)
    ax.set_title(f"{report.task}: sequence accuracy")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Confidence profiling
# ---------------------------------------------------------------------------

@dataclass
class ProfilePoint:
    length: int
    mean_confidence: float


def confidence_profile(
    selector: NeuralSelector,
    formulas: list[str],
    m: int = 100,
    seed: int = 0,
) -> list[ProfilePoint]:
    """Mean sampling confidence per input over ``m`` stochastic outputs.

    Windowing is off: the profile measures the raw model, which is exactly
    what the windowing threshold is later chosen from.
    """
    points = []
    for i, formula in enumerate(formulas):
        candidates = selector.sample_candidates(formula, m=m, seed=seed + i, windowing=False)
        mean_conf = float(np.mean([c.confidence for c in candidates]))
        points.append(ProfilePoint(length=len(formula), mean_confidence=mean_conf))
    return points


def confidence_drop_test(
    points: list[ProfilePoint], train_max_len: int, long_factor: float = 2.0
) -> dict:
    """One-sided Welch test that confidence beyond ``long_factor`` times the
    training maximum is lower than inside the training range."""
    in_range = [p.mean_confidence for p in points if p.length <= train_max_len]
    long_range = [p.mean_confidence for p in points if p.length >= long_factor * train_max_len]
    if not in_range or not long_range:
        raise ValueError("need probes both inside and beyond the training range")
    result = stats.ttest_ind(long_range, in_range, equal_var=False, alternative="less")
    return {
        "n_in_range": len(in_range),
        "n_long": len(long_range),
        "mean_in_range": float(np.mean(in_range)),
        "mean_long": float(np.mean(long_range)),
        "t_statistic": float(result.statistic),
        "p_value": float(result.pvalue),
    }


def plot_confidence_profile(
    points: list[ProfilePoint], train_max_len: int, path: str | Path
) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([p.length for p in points], [p.mean_confidence for p in points],
               s=12, alpha=0.5)
    ax.axvline(train_max_len, color="crimson", linestyle="--",
               label="max training length")
    ax.set_xlabel("input length (tokens)")
    ax.set_ylabel("mean sampling confidence")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Ablations
# ---------------------------------------------------------------------------

@dataclass
class AblationCell:
    m: int
    windowing: bool
    split: str
    total: int
    correct: int
    causes: dict[str, int]

    @property
    def total_errors(self) -> int:
        return self.total - self.correct


def ablation_report(
    task: Task,
    suite: dict[str, list[DatasetExample]],
    selector_module: NeuralSelector,
    solver,
    ms: tuple[int, ...] = (10, 100, 1000),
    windowing_options: tuple[bool, ...] = (False, True),
    threshold: int | None = None,
    max_steps: int | None = None,
    seed: int = 0,
) -> list[AblationCell]:
    """Error counts per (sample budget, windowing, split, cause)."""
    cells = []
    for m in ms:
        for windowing in windowing_options:
            selector = SamplingSelector(
                selector_module, m=m, threshold=threshold, windowing=windowing
            )
            report = evaluate_system(
                task, suite, selector, solver, max_steps=max_steps, seed=seed,
                settings={"m": m, "windowing": windowing},
            )
            for name, rep in report.splits.items():
                cells.append(
                    AblationCell(
                        m=m, windowing=windowing, split=name,
                        total=rep.total, correct=rep.correct,
                        causes=rep.cause_counts(),
                    )
                )
    return cells


def write_ablation(cells: list[AblationCell], out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "ablation.json"
    json_path.write_text(json.dumps([vars(c) for c in cells], indent=2))
    png_path = out_dir / "ablation.png"
    _plot_ablation(cells, png_path)
    return {"json": json_path, "png": png_path}


def _plot_ablation(cells: list[AblationCell], path: Path) -> None:
    splits = sorted({c.split for c in cells})
    configs = sorted({(c.m, c.windowing) for c in cells})
    width = 0.8 / max(1, len(configs))
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(splits), 4))
    colors = dict(zip(CAUSES, ("#d62728", "#ff7f0e", "#1f77b4", "#7f7f7f")))
    for ci, (m, dw) in enumerate(configs):
        xs = []
        bottoms = np.zeros(len(splits))
        for cause in CAUSES:
            heights = []
            for si, split in enumerate(splits):
                cell = next(
                    (c for c in cells if c.split == split and c.m == m and c.windowing == dw),
                    None,
                )
                heights.append(cell.causes[cause] if cell else 0)
            xs = np.arange(len(splits)) + ci * width
            ax.bar(xs, heights, width=width, bottom=bottoms,
                   color=colors[cause],
                   label=cause if ci == 0 else None)
            bottoms += np.array(heights)
        for si, x in enumerate(xs):
            ax.text(x, -0.5, f"M={m}{'+DW' if dw else ''}", rotation=90,
                    ha="center", va="top", fontsize=5)
    ax.set_xticks(np.arange(len(splits)) + 0.4 - width / 2, splits)
    ax.set_ylabel("errors")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
