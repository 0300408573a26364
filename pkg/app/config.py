from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .negotiation import DEFAULT_OUTCOME_CAP

OPPONENT_NAMES = ("boulware", "conceder", "linear", "random")
POLICY_KINDS = ("gnn", "flat")
PROBLEM_MODE_RANDOM = "random"
PROBLEM_MODE_FIXED = "fixed"

DEFAULT_RUNS_ROOT = "runs"
DEFAULT_CONFIG_PATH = "config.yaml"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Settings:
    project_root: Path
    runs_root: Path
    config_path: Path


@dataclass(frozen=True)
class GeneratorConfig:
    min_outcomes: int = 200
    max_outcomes: int = 1000
    min_objectives: int = 3
    max_objectives: int = 7
    min_values: int = 2
    max_values: int = 12
    max_attempts: int = 10_000
    seed: int = 0

    def validate(self, prefix: str = "generator") -> None:
        if not 1 <= self.min_objectives <= self.max_objectives:
            raise ConfigError(f"{prefix}.min_objectives must satisfy 1 <= min_objectives <= max_objectives.")
        if not 1 < self.min_outcomes <= self.max_outcomes:
            raise ConfigError(f"{prefix}.min_outcomes must satisfy 1 < min_outcomes <= max_outcomes.")
        if self.max_outcomes > DEFAULT_OUTCOME_CAP:
            raise ConfigError(f"{prefix}.max_outcomes must be <= {DEFAULT_OUTCOME_CAP}, the outcome enumeration cap.")
        if not 2 <= self.min_values <= self.max_values:
            raise ConfigError(f"{prefix}.min_values must satisfy 2 <= min_values <= max_values.")
        if self.max_attempts < 1:
            raise ConfigError(f"{prefix}.max_attempts must be >= 1.")


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "gnn"
    num_layers: int = 4
    hidden_width: int = 256
    attention_heads: int = 4
    negative_slope: float = 0.2
    offer_logprob_on_accept: bool = True
    flat_hidden_layers: int = 2
    flat_hidden_width: int = 256

    def validate(self, prefix: str = "policy") -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"{prefix}.kind must be one of {', '.join(POLICY_KINDS)}.")
        if self.num_layers < 1:
            raise ConfigError(f"{prefix}.num_layers must be >= 1.")
        if self.attention_heads < 1 or self.hidden_width % self.attention_heads != 0:
            raise ConfigError(f"{prefix}.hidden_width must be divisible by {prefix}.attention_heads.")
        if self.negative_slope < 0:
            raise ConfigError(f"{prefix}.negative_slope must be non-negative.")
        if self.flat_hidden_layers < 1 or self.flat_hidden_width < 1:
            raise ConfigError(f"{prefix}.flat_hidden_layers and {prefix}.flat_hidden_width must be >= 1.")


@dataclass(frozen=True)
class TrainerConfig:
    total_timesteps: int = 2_000_000
    batch_size: int = 6000
    minibatch_size: int = 300
    update_epochs: int = 30
    entropy_coef: float = 0.001
    gamma: float = 1.0
    value_coef: float = 1.0
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    learning_rate: float = 3e-4
    anneal_lr: bool = True
    normalize_advantages: bool = True
    clip_value_loss: bool = False
    max_grad_norm: float = 0.5
    adam_eps: float = 1e-5
    target_kl: float | None = None
    seed: int = 0
    opponents: tuple[str, ...] = OPPONENT_NAMES
    problems: str = PROBLEM_MODE_RANDOM
    deadline: int = 40
    checkpoint_every: int = 10
    num_workers: int = 1

    @property
    def num_minibatches(self) -> int:
        return self.batch_size // self.minibatch_size

    @property
    def num_updates(self) -> int:
        return self.total_timesteps // self.batch_size

    def validate(self, prefix: str = "trainer") -> None:
        if self.batch_size < 1 or self.minibatch_size < 1:
            raise ConfigError(f"{prefix}.batch_size and {prefix}.minibatch_size must be >= 1.")
        if self.batch_size % self.minibatch_size != 0:
            raise ConfigError(f"{prefix}.batch_size must be divisible by {prefix}.minibatch_size.")
        if self.total_timesteps < self.batch_size:
            raise ConfigError(f"{prefix}.total_timesteps must be >= {prefix}.batch_size.")
        for name in (
            "entropy_coef",
            "gamma",
            "value_coef",
            "gae_lambda",
            "clip_epsilon",
            "learning_rate",
            "max_grad_norm",
            "adam_eps",
        ):
            if float(getattr(self, name)) < 0:
                raise ConfigError(f"{prefix}.{name} must be non-negative.")
        if self.target_kl is not None and self.target_kl <= 0:
            raise ConfigError(f"{prefix}.target_kl must be positive when set.")
        if self.update_epochs < 1:
            raise ConfigError(f"{prefix}.update_epochs must be >= 1.")
        if self.deadline < 1:
            raise ConfigError(f"{prefix}.deadline must be >= 1.")
        if self.checkpoint_every < 1:
            raise ConfigError(f"{prefix}.checkpoint_every must be >= 1.")
        if self.num_workers < 1:
            raise ConfigError(f"{prefix}.num_workers must be >= 1.")
        validate_opponent_names(self.opponents, f"{prefix}.opponents")
        parse_problem_source(self.problems, f"{prefix}.problems")


@dataclass(frozen=True)
class EvalConfig:
    checkpoints: tuple[str, ...] = ()
    opponents: tuple[str, ...] = OPPONENT_NAMES
    games_per_opponent: int = 1000
    problems: str = PROBLEM_MODE_RANDOM
    seed: int = 1_000_003
    greedy: bool = False
    deadline: int = 40
    num_workers: int = 1

    def validate(self, prefix: str = "eval", *, require_checkpoints: bool = True) -> None:
        if require_checkpoints and not self.checkpoints:
            raise ConfigError(f"{prefix}.checkpoints must list at least one checkpoint.")
        if self.games_per_opponent < 1:
            raise ConfigError(f"{prefix}.games_per_opponent must be >= 1.")
        if self.deadline < 1:
            raise ConfigError(f"{prefix}.deadline must be >= 1.")
        if self.num_workers < 1:
            raise ConfigError(f"{prefix}.num_workers must be >= 1.")
        validate_opponent_names(self.opponents, f"{prefix}.opponents")
        parse_problem_source(self.problems, f"{prefix}.problems")


@dataclass(frozen=True)
class OpponentConfig:
    """Parameters of the baseline strategies, shared by training and evaluation."""

    boulware_exponent: float = 0.2
    linear_exponent: float = 1.0
    conceder_exponent: float = 2.0
    reservation: float = 0.0
    random_accept_threshold: float = 0.6

    def validate(self, prefix: str = "opponent") -> None:
        for name in ("boulware_exponent", "linear_exponent", "conceder_exponent"):
            if float(getattr(self, name)) <= 0:
                raise ConfigError(f"{prefix}.{name} must be positive.")
        if not 0.0 <= self.reservation < 1.0:
            raise ConfigError(f"{prefix}.reservation must lie in [0, 1).")
        if not 0.0 <= self.random_accept_threshold <= 1.0:
            raise ConfigError(f"{prefix}.random_accept_threshold must lie in [0, 1].")


@dataclass(frozen=True)
class RunConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    opponent: OpponentConfig = field(default_factory=OpponentConfig)
    run_dir: str | None = None

    def validate(self) -> None:
        self.generator.validate()
        self.policy.validate()
        self.trainer.validate()
        self.eval.validate(require_checkpoints=False)
        self.opponent.validate()
        mode, _path = parse_problem_source(self.trainer.problems, "trainer.problems")
        if self.policy.kind == "flat" and mode != PROBLEM_MODE_FIXED:
            raise ConfigError("policy.kind flat requires trainer.problems to be fixed:<path>.")


_SECTIONS: dict[str, type] = {
    "generator": GeneratorConfig,
    "policy": PolicyConfig,
    "trainer": TrainerConfig,
    "eval": EvalConfig,
    "opponent": OpponentConfig,
}
_OPTIONAL_FLOAT_KEYS = frozenset({"trainer.target_kl"})


def validate_opponent_names(names: tuple[str, ...], key_path: str) -> None:
    if not names:
        raise ConfigError(f"{key_path} must name at least one opponent.")
    for name in names:
        if name not in OPPONENT_NAMES:
            raise ConfigError(f"{key_path} contains unknown opponent '{name}'; expected {'|'.join(OPPONENT_NAMES)}.")


def parse_problem_source(raw: str, key_path: str = "problems") -> tuple[str, Path | None]:
    value = str(raw or "").strip()
    if value == PROBLEM_MODE_RANDOM:
        return PROBLEM_MODE_RANDOM, None
    if value.startswith(f"{PROBLEM_MODE_FIXED}:"):
        path_text = value.split(":", 1)[1].strip()
        if path_text:
            return PROBLEM_MODE_FIXED, Path(path_text)
    raise ConfigError(f"{key_path} must be 'random' or 'fixed:<path>', got '{value}'.")


def _resolve_path(project_root: Path, value: str) -> Path:
    path = Path(value)
    if path.is_absolute():
        return path
    return (project_root / path).resolve()


def _read_config_file(path: Path) -> dict[str, object]:
    if not path.exists():
        return {}

    with path.open("r", encoding="utf-8") as handle:
        if path.suffix.lower() == ".json":
            payload = json.load(handle)
        else:
            # YAML for .yaml, .yml and unknown extensions.
            payload = yaml.safe_load(handle)

    if payload is None:
        return {}
    if not isinstance(payload, dict):
        raise ConfigError(f"Config file {path} must contain a mapping at the top level.")
    return payload


def _parse_bool(raw: object, key_path: str) -> bool:
    if isinstance(raw, bool):
        return raw
    normalized = str(raw).strip().lower()
    if normalized in {"1", "true", "yes", "on"}:
        return True
    if normalized in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"{key_path} must be a boolean, got '{raw}'.")


def _coerce_name_list(raw: object, key_path: str) -> tuple[str, ...]:
    if isinstance(raw, str):
        values = raw.split(",")
    elif isinstance(raw, (list, tuple)):
        values = [str(value) for value in raw]
    else:
        raise ConfigError(f"{key_path} must be a list or a comma-separated string.")

    deduplicated: list[str] = []
    seen: set[str] = set()
    for value in values:
        normalized = str(value).strip().lower()
        if not normalized or normalized in seen:
            continue
        seen.add(normalized)
        deduplicated.append(normalized)
    return tuple(deduplicated)


def _coerce_path_list(raw: object, key_path: str) -> tuple[str, ...]:
    if isinstance(raw, str):
        values = raw.split(",")
    elif isinstance(raw, (list, tuple)):
        values = [str(value) for value in raw]
    else:
        raise ConfigError(f"{key_path} must be a list or a comma-separated string.")
    return tuple(value.strip() for value in values if value.strip())


def _coerce_value(raw: object, default: object, key_path: str) -> object:
    if key_path in _OPTIONAL_FLOAT_KEYS:
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in {"", "none", "null"}):
            return None
        default = 0.0
    if raw is None:
        raise ConfigError(f"{key_path} must not be null.")
    try:
        if isinstance(default, bool):
            return _parse_bool(raw, key_path)
        if isinstance(default, int):
            if isinstance(raw, bool):
                raise ConfigError(f"{key_path} must be an integer, got '{raw}'.")
            if isinstance(raw, float) and not raw.is_integer():
                raise ConfigError(f"{key_path} must be an integer, got '{raw}'.")
            return int(float(raw)) if isinstance(raw, str) and "e" in raw.lower() else int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            if key_path.endswith("checkpoints"):
                return _coerce_path_list(raw, key_path)
            return _coerce_name_list(raw, key_path)
        return str(raw)
    except (TypeError, ValueError) as error:
        if isinstance(error, ConfigError):
            raise
        raise ConfigError(f"{key_path} has invalid value '{raw}': {error}.") from error


def _build_section(section_type: type, defaults: object, raw: object, prefix: str) -> object:
    if raw is None:
        return defaults
    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix} must be a mapping.")
    known = {item.name for item in fields(section_type)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"Unknown config key: {prefix}.{key}.")
    updates = {
        key: _coerce_value(value, getattr(defaults, key), f"{prefix}.{key}")
        for key, value in raw.items()
    }
    return replace(defaults, **updates)


def _merge_overrides(payload: dict[str, Any], overrides: dict[str, object]) -> dict[str, Any]:
    merged: dict[str, Any] = {key: (dict(value) if isinstance(value, dict) else value) for key, value in payload.items()}
    for dotted_key, value in overrides.items():
        parts = dotted_key.split(".")
        if len(parts) == 1:
            merged[parts[0]] = value
            continue
        if len(parts) != 2:
            raise ConfigError(f"Unknown config key: {dotted_key}.")
        section = merged.setdefault(parts[0], {})
        if not isinstance(section, dict):
            raise ConfigError(f"{parts[0]} must be a mapping.")
        section[parts[1]] = value
    return merged


def run_config_from_mapping(payload: dict[str, Any], *, validate: bool = True) -> RunConfig:
    known_top_level = set(_SECTIONS) | {"run_dir"}
    for key in payload:
        if key not in known_top_level:
            raise ConfigError(f"Unknown config key: {key}.")

    base = RunConfig()
    sections = {
        name: _build_section(section_type, getattr(base, name), payload.get(name), name)
        for name, section_type in _SECTIONS.items()
    }
    run_dir_raw = payload.get("run_dir")
    config = RunConfig(
        generator=sections["generator"],  # type: ignore[arg-type]
        policy=sections["policy"],  # type: ignore[arg-type]
        trainer=sections["trainer"],  # type: ignore[arg-type]
        eval=sections["eval"],  # type: ignore[arg-type]
        opponent=sections["opponent"],  # type: ignore[arg-type]
        run_dir=None if run_dir_raw is None else str(run_dir_raw),
    )
    if validate:
        config.validate()
    return config


def load_run_config(
    path: Path | None = None,
    *,
    overrides: dict[str, object] | None = None,
    validate: bool = True,
) -> RunConfig:
    config_path = settings.config_path if path is None else path
    if path is not None and not path.exists():
        raise ConfigError(f"Config file not found: {path}.")
    payload = _read_config_file(config_path)
    merged = _merge_overrides(payload, overrides or {})
    return run_config_from_mapping(merged, validate=validate)


def run_config_to_mapping(config: RunConfig) -> dict[str, Any]:
    payload = asdict(config)
    for section in payload.values():
        if not isinstance(section, dict):
            continue
        for key, value in section.items():
            if isinstance(value, tuple):
                section[key] = list(value)
    return payload


def write_config_snapshot(config: RunConfig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        yaml.safe_dump(run_config_to_mapping(config), sort_keys=False, allow_unicode=False),
        encoding="utf-8",
    )


def load_settings() -> Settings:
    project_root = Path(os.getenv("PROJECT_ROOT", ".")).resolve()
    config_path = _resolve_path(project_root, os.getenv("APP_CONFIG_PATH", DEFAULT_CONFIG_PATH))
    runs_root = _resolve_path(project_root, os.getenv("NEGOTIATION_RUNS_DIR", DEFAULT_RUNS_ROOT))
    return Settings(project_root=project_root, runs_root=runs_root, config_path=config_path)


settings = load_settings()
