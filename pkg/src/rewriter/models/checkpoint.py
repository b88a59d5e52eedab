"""Checkpoint directory layout: config manifest, weights, training state.

A checkpoint directory holds everything needed to rebuild a module:

    config.json          kind, task, residue convention, model config, vocabulary
    weights.pt           model state dict
    training_state.json  optional harness bookkeeping (iteration, metrics)
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import torch

from ..tasks import Task, get_task
from .selector import NeuralSelector, SelectorConfig, build_selector_model
from .solver import NeuralSolver, SolverConfig, build_solver_model


def save_checkpoint(
    directory: str | Path,
    kind: str,
    task: Task,
    config,
    model: torch.nn.Module,
    training_state: dict | None = None,
) -> Path:
    if kind not in ("selector", "solver"):
        raise ValueError(f"unknown module kind {kind!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": kind,
        "task": task.name,
        "residue_convention": task.residue_convention,
        "model": dataclasses.asdict(config),
        "vocabulary": list(task.vocabulary.tokens),
    }
    (directory / "config.json").write_text(json.dumps(manifest, indent=2, ensure_ascii=False))
    torch.save(model.state_dict(), directory / "weights.pt")
    if training_state is not None:
        (directory / "training_state.json").write_text(
            json.dumps(training_state, indent=2, ensure_ascii=False)
        )
    return directory


def load_checkpoint(directory: str | Path) -> NeuralSelector | NeuralSolver:
    directory = Path(directory)
    manifest = json.loads((directory / "config.json").read_text())
    task = get_task(manifest["task"], manifest.get("residue_convention", "signed"))
    if list(task.vocabulary.tokens) != manifest["vocabulary"]:
        raise ValueError(f"vocabulary mismatch in checkpoint {directory}")
    if manifest["kind"] == "selector":
        config = SelectorConfig(**manifest["model"])
        model = build_selector_model(task, config)
        module: NeuralSelector | NeuralSolver = NeuralSelector(task, config, model)
    else:
        config = SolverConfig(**manifest["model"])
        model = build_solver_model(task, config)
        module = NeuralSolver(task, config, model)
    state = torch.load(directory / "weights.pt", map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return module


def load_training_state(directory: str | Path) -> dict | None:
    path = Path(directory) / "training_state.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())
