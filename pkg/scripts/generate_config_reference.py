#!/usr/bin/env python3
from __future__ import annotations

import argparse
from dataclasses import fields
from pathlib import Path
import sys

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from app.config import RunConfig


def _format_default(value: object) -> str:
    if isinstance(value, tuple):
        return "[" + ", ".join(str(item) for item in value) + "]" if value else "[]"
    if value is None:
        return "null"
    return str(value)


def build_reference_markdown() -> str:
    defaults = RunConfig()
    lines: list[str] = []
    lines.append("# Config Reference")
    lines.append("")
    lines.append("Every key accepted in `config.yaml`, `--set KEY=VALUE` and the matching CLI flags, with its default.")
    lines.append("")
    for section in ("generator", "policy", "trainer", "eval", "opponent"):
        values = getattr(defaults, section)
        lines.append(f"## {section}")
        lines.append("")
        lines.append("| Key | Default |")
        lines.append("| --- | --- |")
        for item in fields(values):
            lines.append(f"| `{section}.{item.name}` | `{_format_default(getattr(values, item.name))}` |")
        lines.append("")
    lines.append("## run_dir")
    lines.append("")
    lines.append("Optional run directory; falls back to `<NEGOTIATION_RUNS_DIR>/<policy kind>`.")
    return "\n".join(lines) + "\n"


def main() -> int:
    parser = argparse.ArgumentParser(description="Generate the config key reference markdown.")
    parser.add_argument(
        "--output",
        default="CONFIG_REFERENCE.md",
        help="Output markdown path (default: CONFIG_REFERENCE.md).",
    )
    args = parser.parse_args()

    output_path = Path(args.output)
    output_path.write_text(build_reference_markdown(), encoding="utf-8")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
