from __future__ import annotations

import argparse
from pathlib import Path

from ..plotting import plot_run
from ..run_constants import EVENT_RUN_COMPLETED, STAGE_PLOT
from ..run_events import RunEventLog
from .common import EXIT_OK, echo

NAME = "plot"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="Render learning curves and summary bars to SVG.")
    parser.add_argument("run_dir", help="Run directory, multi-seed root, or evaluation directory.")
    parser.add_argument("--out-dir", default=None, help="Output directory (default: run_dir).")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    out_dir = None if args.out_dir is None else Path(args.out_dir)
    written = plot_run(run_dir, output_dir=out_dir)
    for path in written:
        echo(str(path))
    RunEventLog(out_dir or run_dir).emit_completed(
        stage=STAGE_PLOT,
        event_type=EVENT_RUN_COMPLETED,
        message=f"Rendered {len(written)} plots.",
        data={"files": [path.name for path in written]},
    )
    return EXIT_OK
