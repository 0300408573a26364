from __future__ import annotations

import argparse
from pathlib import Path

import yaml

from ..config import ConfigError
from ..graph_encoder import SIDE_OPPONENT, SIDE_SELF, build_graph, empty_stats, graph_document, update_stats
from ..problem_io import read_problem
from .common import EXIT_OK, add_config_arguments, echo, load_cli_config

NAME = "inspect-graph"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="Dump the observation graph of a problem as YAML.")
    add_config_arguments(parser)
    parser.add_argument("--problem", required=True, help="Problem file.")
    parser.add_argument("--agent", type=int, choices=(0, 1), default=0, help="Observing agent (default: 0).")
    parser.add_argument("--deadline", type=int, default=None, help="trainer.deadline")
    parser.add_argument(
        "--offer",
        dest="offers",
        action="append",
        default=[],
        metavar="SIDE:V0,V1,...",
        help="Offer in history order; SIDE is self or opponent. Repeatable.",
    )
    parser.add_argument("--output", default=None, help="Write YAML here instead of stdout.")
    parser.set_defaults(handler=run)


def _parse_offer(raw: str) -> tuple[str, tuple[int, ...]]:
    side, separator, values = raw.partition(":")
    side = side.strip().lower()
    if not separator or side not in (SIDE_SELF, SIDE_OPPONENT):
        raise ConfigError(f"--offer expects self:<values> or opponent:<values>, got '{raw}'.")
    try:
        return side, tuple(int(value) for value in values.split(","))
    except ValueError as error:
        raise ConfigError(f"--offer values must be integers, got '{raw}'.") from error


def run(args: argparse.Namespace) -> int:
    config = load_cli_config(args, {"trainer.deadline": args.deadline})
    problem = read_problem(Path(args.problem))
    stats = empty_stats(problem.domain)
    for raw in args.offers:
        side, outcome = _parse_offer(raw)
        stats = update_stats(stats, outcome, side)  # type: ignore[arg-type]
    rounds = len(args.offers)
    if rounds > config.trainer.deadline:
        raise ConfigError(f"{rounds} offers exceed the deadline {config.trainer.deadline}.")
    graph = build_graph(problem.domain, problem.utilities[args.agent], stats, rounds, config.trainer.deadline)
    text = yaml.safe_dump(graph_document(graph), sort_keys=False, default_flow_style=None, width=4096)
    if args.output:
        output = Path(args.output)
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")
        echo(str(output))
    else:
        print(text, end="")
    return EXIT_OK
