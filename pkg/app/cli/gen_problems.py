from __future__ import annotations

import argparse
from pathlib import Path

from ..config import ConfigError
from ..problem_gen import generate_problem, problem_seed_sequence
from ..problem_io import write_problem
from ..run_constants import EVENT_RUN_COMPLETED, EVENT_RUN_STARTED, STAGE_GEN_PROBLEMS, STREAM_GEN_PROBLEMS
from ..run_events import RunEventLog
from .common import EXIT_OK, add_config_arguments, echo, load_cli_config

NAME = "gen-problems"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="Generate random negotiation problem files.")
    add_config_arguments(parser)
    parser.add_argument("--count", type=int, default=1, help="Number of problems (default: 1).")
    parser.add_argument("--out-dir", required=True, help="Directory for problem_<i>.yaml files.")
    parser.add_argument("--seed", type=int, default=None, help="Generator seed (generator.seed).")
    parser.add_argument("--min-outcomes", type=int, default=None, help="generator.min_outcomes")
    parser.add_argument("--max-outcomes", type=int, default=None, help="generator.max_outcomes")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_cli_config(
        args,
        {
            "generator.seed": args.seed,
            "generator.min_outcomes": args.min_outcomes,
            "generator.max_outcomes": args.max_outcomes,
        },
    )
    if args.count < 1:
        raise ConfigError("--count must be >= 1.")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    event_log = RunEventLog(out_dir)
    event_log.emit_started(
        stage=STAGE_GEN_PROBLEMS,
        event_type=EVENT_RUN_STARTED,
        message=f"Generating {args.count} problems.",
        data={"seed": config.generator.seed, "count": args.count},
    )
    sizes: list[int] = []
    for index in range(args.count):
        problem = generate_problem(
            config.generator,
            problem_seed_sequence(config.generator.seed, STREAM_GEN_PROBLEMS, index),
        )
        path = out_dir / f"problem_{index}.yaml"
        try:
            write_problem(problem, path)
        except OSError as error:
            raise OSError(f"Could not write {path}: {error}") from error
        sizes.append(problem.domain.outcome_space_size)
        echo(f"{path.name} |outcomes|={problem.domain.outcome_space_size} objectives={problem.domain.value_counts}")
    event_log.emit_completed(
        stage=STAGE_GEN_PROBLEMS,
        event_type=EVENT_RUN_COMPLETED,
        message=f"Wrote {args.count} problems.",
        data={"outcome_space_sizes": sizes},
    )
    return EXIT_OK
