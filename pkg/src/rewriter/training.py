"""Optimization loop: warmup + cosine schedule, checkpoints, model selection.

Training streams batches from the generated datasets (uniform sampling for
the selector, fifty-fifty leaf/termination mixing for the solver), logs
line-delimited JSON metrics, snapshots checkpoints on an evaluation cadence,
and picks the final model by out-of-distribution validation sequence
accuracy -- never by test performance.
"""

from __future__ import annotations

import json
import math
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .datagen import DatasetExample
from .models.checkpoint import save_checkpoint
from .models.selector import SelectorConfig, build_selector_model
from .models.solver import (
    SolverConfig,
    build_solver_model,
    mixed_batch_iterator,
    split_solver_pools,
)
from .models.seq2seq import (
    Seq2SeqTransformer,
    encode_sources,
    encode_targets,
    greedy_decode,
    source_positions,
)
from .tasks import Task


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; a diagnostic record was written first."""


@dataclass
class TrainConfig:
    iterations: int
    batch_size: int
    learning_rate: float
    warmup: int
    seed: int = 0
    eval_every: int | None = None      # default: every 5% of iterations
    checkpoint_every: int | None = None  # default: eval cadence
    log_every: int = 50
    grad_clip: float = 1.0
    eval_samples: int = 256
    eval_batch: int = 64

    def __post_init__(self):
        if self.warmup >= self.iterations:
            raise ValueError("warmup must be shorter than the run")

    @property
    def eval_cadence(self) -> int:
        return self.eval_every or max(1, self.iterations // 20)


#: appendix-default optimization settings per (module, task)
TRAIN_DEFAULTS = {
    ("solver", "listops"): TrainConfig(iterations=10_000, batch_size=512, learning_rate=5e-5, warmup=1500),
    ("solver", "arithmetic"): TrainConfig(iterations=100_000, batch_size=512, learning_rate=9e-5, warmup=1500),
    ("solver", "algebra"): TrainConfig(iterations=40_000, batch_size=512, learning_rate=8e-5, warmup=1500),
    ("selector", "listops"): TrainConfig(iterations=20_000, batch_size=512, learning_rate=5e-5, warmup=1200),
    ("selector", "arithmetic"): TrainConfig(iterations=30_000, batch_size=512, learning_rate=1e-5, warmup=2200),
    ("selector", "algebra"): TrainConfig(iterations=30_000, batch_size=256, learning_rate=4e-5, warmup=2000),
}


def lr_at(t: int, config: TrainConfig) -> float:
    """Linear ramp to the base rate over the warmup, then cosine decay to 0."""
    if t < 0 or t > config.iterations:
        raise ValueError("step outside the schedule")
    if config.warmup > 0 and t < config.warmup:
        return config.learning_rate * t / config.warmup
    span = config.iterations - config.warmup
    progress = (t - config.warmup) / span
    return config.learning_rate * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class CheckpointRecord:
    iteration: int
    ood_accuracy: float
    in_accuracy: float
    path: Path


@dataclass
class TrainResult:
    checkpoints: list[CheckpointRecord]
    best: CheckpointRecord
    metrics_path: Path
    final_loss: float


def select_best(checkpoints: list[CheckpointRecord]) -> CheckpointRecord:
    """Checkpoint with the highest OOD validation accuracy; ties -> latest."""
    if not checkpoints:
        raise ValueError("no evaluated checkpoints")
    best = checkpoints[0]
    for record in checkpoints[1:]:
        if record.ood_accuracy >= best.ood_accuracy:
            best = record
    return best


def sequence_loss(
    model: Seq2SeqTransformer,
    task: Task,
    inputs: list[str],
    targets: list[str],
    positions: torch.Tensor | None = None,
    rng: np.random.Generator | None = None,
) -> torch.Tensor:
    """Teacher-forced cross-entropy over target tokens (PAD ignored)."""
    vocab = task.vocabulary
    src, padding = encode_sources(vocab, inputs)
    tgt_in, tgt_out = encode_targets(vocab, targets)
    if positions is None:
        positions = source_positions(model, inputs, rng)
    logits = model(src, tgt_in, src_positions=positions, src_padding=padding)
    return nn.functional.cross_entropy(
        logits.reshape(-1, logits.size(-1)),
        tgt_out.reshape(-1),
        ignore_index=vocab.pad_id,
    )


def greedy_accuracy(
    model: Seq2SeqTransformer,
    task: Task,
    examples: list[DatasetExample],
    max_decode_len: int,
    batch_size: int = 64,
    seed: int = 0,
) -> float:
    """Exact-match rate of greedy decoding over a (sub)set of examples."""
    if not examples:
        return 0.0
    rng = np.random.default_rng(seed)
    correct = 0
    for start in range(0, len(examples), batch_size):
        chunk = examples[start:start + batch_size]
        decoded = greedy_decode(
            model, task.vocabulary, [ex.input for ex in chunk], max_decode_len, rng=rng
        )
        correct += sum(got == ex.target for got, ex in zip(decoded, chunk))
    return correct / len(examples)


def _selector_batches(examples, batch_size, rng):
    while True:
        idx = rng.integers(0, len(examples), size=batch_size)
        yield [examples[int(i)] for i in idx]


def _subsample(examples, limit, rng):
    if len(examples) <= limit:
        return list(examples)
    idx = rng.choice(len(examples), size=limit, replace=False)
    return [examples[int(i)] for i in idx]


def train(
    kind: str,
    task: Task,
    model_config: SelectorConfig | SolverConfig,
    datasets: dict[str, list[DatasetExample]],
    config: TrainConfig,
    out_dir: str | Path,
) -> TrainResult:
    """Train one module and checkpoint it periodically.

    ``datasets`` must hold ``train``, ``val_in`` and ``val_ood`` example
    lists. Returns the checkpoint series and the best record; the winner is
    also copied to ``out_dir/best``.
    """
    if kind not in ("selector", "solver"):
        raise ValueError(f"unknown module kind {kind!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    if kind == "selector":
        model = build_selector_model(task, model_config)
        batches = _selector_batches(datasets["train"], config.batch_size, rng)
    else:
        model = build_solver_model(task, model_config)
        leaves, atomics = split_solver_pools(datasets["train"])
        batches = mixed_batch_iterator(leaves, atomics, config.batch_size, rng)

    eval_rng = np.random.default_rng(config.seed + 1)
    val_in = _subsample(datasets["val_in"], config.eval_samples, eval_rng)
    val_ood = _subsample(datasets["val_ood"], config.eval_samples, eval_rng)

    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    metrics_path = out_dir / "metrics.jsonl"
    checkpoints: list[CheckpointRecord] = []
    cadence = config.eval_cadence
    ckpt_cadence = config.checkpoint_every or cadence
    loss_value = float("nan")

    with metrics_path.open("w", encoding="utf-8") as metrics:
        def emit(record: dict) -> None:
            metrics.write(json.dumps(record, ensure_ascii=False) + "\n")
            metrics.flush()

        for step in range(1, config.iterations + 1):
            lr = lr_at(min(step, config.iterations - 1), config)
            for group in optimizer.param_groups:
                group["lr"] = lr
            batch = next(batches)
            model.train()
            loss = sequence_loss(
                model, task,
                [ex.input for ex in batch], [ex.target for ex in batch],
                rng=rng,
            )
            loss_value = float(loss)
            if not math.isfinite(loss_value):
                emit({"event": "non_finite_loss", "iteration": step, "loss": loss_value})
                raise TrainingDiverged(f"non-finite loss at iteration {step}")
            optimizer.zero_grad()
            loss.backward()
            if config.grad_clip:
                nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()

            if step % config.log_every == 0 or step == 1:
                emit({"iteration": step, "loss": round(loss_value, 6), "lr": lr})

            if step % cadence == 0 or step == config.iterations:
                max_len = model_config.max_decode_len
                acc_in = greedy_accuracy(model, task, val_in, max_len, config.eval_batch,
                                         seed=config.seed + 2)
                acc_ood = greedy_accuracy(model, task, val_ood, max_len, config.eval_batch,
                                          seed=config.seed + 3)
                emit({
                    "iteration": step, "loss": round(loss_value, 6), "lr": lr,
                    "val_in_accuracy": acc_in, "val_ood_accuracy": acc_ood,
                })
                if step % ckpt_cadence == 0 or step == config.iterations:
                    path = out_dir / f"step_{step:06d}"
                    save_checkpoint(
                        path, kind, task, model_config, model,
                        training_state={
                            "iteration": step,
                            "val_in_accuracy": acc_in,
                            "val_ood_accuracy": acc_ood,
                            "loss": loss_value,
                        },
                    )
                    checkpoints.append(CheckpointRecord(step, acc_ood, acc_in, path))

    best = select_best(checkpoints)
    best_dir = out_dir / "best"
    if best_dir.exists():
        shutil.rmtree(best_dir)
    shutil.copytree(best.path, best_dir)
    return TrainResult(
        checkpoints=checkpoints, best=best, metrics_path=metrics_path,
        final_loss=loss_value,
    )
