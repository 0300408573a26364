from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any

from .. import config
from ..config import RunConfig, load_run_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class CliUsageError(ValueError):
    pass


class CliArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise CliUsageError(f"{self.prog}: {message}")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="YAML or JSON config file (default: APP_CONFIG_PATH).")
    parser.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override any config key, e.g. --set trainer.update_epochs=10. Repeatable.",
    )


def parse_assignments(items: list[str]) -> dict[str, object]:
    overrides: dict[str, object] = {}
    for item in items:
        key, separator, value = item.partition("=")
        if not separator or not key.strip():
            raise CliUsageError(f"--set expects KEY=VALUE, got '{item}'.")
        overrides[key.strip()] = value.strip()
    return overrides


def load_cli_config(args: argparse.Namespace, flags: dict[str, Any]) -> RunConfig:
    overrides = parse_assignments(list(args.assignments))
    overrides.update({key: value for key, value in flags.items() if value is not None})
    path = None if args.config is None else Path(args.config)
    return load_run_config(path, overrides=overrides)


def resolve_run_dir(explicit: str | None, configured: str | None, default_name: str) -> Path:
    value = explicit or configured
    if value:
        return Path(value)
    return config.settings.runs_root / default_name


def echo(message: str) -> None:
    print(message, flush=True)


def echo_error(message: str) -> None:
    print(f"error: {message}", file=sys.stderr, flush=True)
