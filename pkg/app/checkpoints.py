from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import torch

from .config import PolicyConfig
from .flat_policy import FlatPolicy
from .policy_net import POLICY_KIND_FLAT, POLICY_KIND_GNN, GraphPolicy, NegotiationPolicy

CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_DIR_NAME = "checkpoints"
_STEP_PATTERN = re.compile(r"^step_(\d+)\.pt$")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    path: Path
    policy: NegotiationPolicy
    seed: int
    step: int
    optimizer_state: dict[str, Any] | None = None
    trainer_state: dict[str, Any] | None = None


def build_policy(config: PolicyConfig, *, value_counts: tuple[int, ...] | None = None) -> NegotiationPolicy:
    if config.kind == POLICY_KIND_GNN:
        return GraphPolicy(
            num_layers=config.num_layers,
            hidden_width=config.hidden_width,
            attention_heads=config.attention_heads,
            negative_slope=config.negative_slope,
            offer_logprob_on_accept=config.offer_logprob_on_accept,
        )
    if config.kind == POLICY_KIND_FLAT:
        if value_counts is None:
            raise CheckpointError("A flat policy needs the domain of its fixed problem.")
        return FlatPolicy(
            value_counts,
            hidden_layers=config.flat_hidden_layers,
            hidden_width=config.flat_hidden_width,
            offer_logprob_on_accept=config.offer_logprob_on_accept,
        )
    raise CheckpointError(f"Unknown policy kind '{config.kind}'.")


def policy_from_architecture(kind: str, architecture: dict[str, Any]) -> NegotiationPolicy:
    try:
        if kind == POLICY_KIND_GNN:
            return GraphPolicy(
                num_layers=int(architecture["num_layers"]),
                hidden_width=int(architecture["hidden_width"]),
                attention_heads=int(architecture["attention_heads"]),
                input_width=int(architecture["input_width"]),
                negative_slope=float(architecture["negative_slope"]),
                offer_logprob_on_accept=bool(architecture["offer_logprob_on_accept"]),
            )
        if kind == POLICY_KIND_FLAT:
            return FlatPolicy(
                tuple(int(size) for size in architecture["value_counts"]),
                hidden_layers=int(architecture["hidden_layers"]),
                hidden_width=int(architecture["hidden_width"]),
                offer_logprob_on_accept=bool(architecture["offer_logprob_on_accept"]),
            )
    except (KeyError, TypeError, ValueError) as error:
        raise CheckpointError(f"Checkpoint architecture is incomplete: {error}.") from error
    raise CheckpointError(f"Unknown policy kind '{kind}'.")


def checkpoint_path(run_dir: Path, step: int) -> Path:
    return run_dir / CHECKPOINT_DIR_NAME / f"step_{int(step)}.pt"


def list_checkpoints(run_dir: Path) -> list[tuple[int, Path]]:
    directory = run_dir / CHECKPOINT_DIR_NAME
    if not directory.is_dir():
        return []
    found: list[tuple[int, Path]] = []
    for path in directory.iterdir():
        match = _STEP_PATTERN.match(path.name)
        if match:
            found.append((int(match.group(1)), path))
    return sorted(found)


def latest_checkpoint(run_dir: Path) -> Path | None:
    found = list_checkpoints(run_dir)
    return found[-1][1] if found else None


def expand_checkpoint_sources(sources: Sequence[str | Path]) -> list[Path]:
    """Resolve checkpoint files, run directories (newest checkpoint) and multi-seed roots (one per seed)."""
    resolved: list[Path] = []
    for source in sources:
        path = Path(source)
        if path.is_file():
            resolved.append(path)
            continue
        if not path.is_dir():
            raise CheckpointError(f"Checkpoint not found: {path}.")
        newest = latest_checkpoint(path)
        if newest is not None:
            resolved.append(newest)
            continue
        seed_dirs = sorted(
            (child for child in path.iterdir() if child.is_dir() and child.name.startswith("seed_")),
            key=lambda child: child.name,
        )
        seed_checkpoints = [latest_checkpoint(child) for child in seed_dirs]
        if not seed_checkpoints or any(item is None for item in seed_checkpoints):
            raise CheckpointError(f"No checkpoints found under {path}.")
        resolved.extend(item for item in seed_checkpoints if item is not None)
    return resolved


def save_checkpoint(
    path: Path,
    policy: NegotiationPolicy,
    *,
    seed: int,
    step: int,
    optimizer: torch.optim.Optimizer | None = None,
    trainer_state: dict[str, Any] | None = None,
) -> Path:
    payload = {
        "format": CHECKPOINT_FORMAT_VERSION,
        "kind": policy.kind,
        "architecture": policy.architecture(),
        "parameters": {name: tensor.detach().cpu() for name, tensor in policy.state_dict().items()},
        "seed": int(seed),
        "step": int(step),
        "optimizer": None if optimizer is None else optimizer.state_dict(),
        "trainer_state": trainer_state,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_suffix(path.suffix + ".partial")
    torch.save(payload, partial)
    partial.replace(path)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    if not path.is_file():
        raise CheckpointError(f"Checkpoint not found: {path}.")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as error:  # noqa: BLE001
        raise CheckpointError(f"Checkpoint {path} could not be read: {error}.") from error
    if not isinstance(payload, dict):
        raise CheckpointError(f"Checkpoint {path} is not a mapping.")
    if payload.get("format") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"Checkpoint {path} has unsupported format {payload.get('format')!r}.")

    policy = policy_from_architecture(str(payload.get("kind")), dict(payload.get("architecture") or {}))
    parameters = payload.get("parameters")
    if not isinstance(parameters, dict):
        raise CheckpointError(f"Checkpoint {path} has no parameter sections.")
    expected = policy.state_dict()
    for name, tensor in expected.items():
        if name not in parameters:
            raise CheckpointError(f"Checkpoint {path} is missing parameter section '{name}'.")
        if tuple(parameters[name].shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"Checkpoint {path} section '{name}' has shape {tuple(parameters[name].shape)}, "
                f"expected {tuple(tensor.shape)}."
            )
    unexpected = sorted(set(parameters) - set(expected))
    if unexpected:
        raise CheckpointError(f"Checkpoint {path} has unexpected parameter sections: {', '.join(unexpected)}.")
    policy.load_state_dict(parameters)
    return Checkpoint(
        path=path,
        policy=policy,
        seed=int(payload.get("seed", 0)),
        step=int(payload.get("step", 0)),
        optimizer_state=payload.get("optimizer"),
        trainer_state=payload.get("trainer_state"),
    )
