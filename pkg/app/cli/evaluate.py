from __future__ import annotations

import argparse

from ..evaluation import (
    RESULTS_FILE_NAME,
    SUMMARY_FILE_NAME,
    PairingResult,
    run_tournament,
    write_results_csv,
    write_summary_csv,
)
from ..run_constants import EVENT_RUN_COMPLETED, EVENT_RUN_FAILED, EVENT_RUN_STARTED, STAGE_EVALUATE
from ..run_events import RunEventLog
from .common import EXIT_OK, add_config_arguments, echo, load_cli_config, resolve_run_dir

NAME = "evaluate"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="Play a tournament of checkpoints against baseline opponents.")
    add_config_arguments(parser)
    parser.add_argument("--checkpoints", default=None, help="eval.checkpoints: files or run directories.")
    parser.add_argument("--opponents", default=None, help="eval.opponents, comma-separated.")
    parser.add_argument("--games", type=int, default=None, help="eval.games_per_opponent")
    parser.add_argument("--problems", default=None, help="eval.problems: random or fixed:<path>.")
    parser.add_argument("--seed", type=int, default=None, help="eval.seed")
    parser.add_argument("--deadline", type=int, default=None, help="eval.deadline")
    parser.add_argument("--workers", type=int, default=None, help="eval.num_workers")
    parser.add_argument("--greedy", action="store_true", default=None, help="Act with the most likely action.")
    parser.add_argument("--out-dir", default=None, help="Where results.csv and summary.csv go.")
    parser.set_defaults(handler=run)


def _report(pairing: PairingResult) -> None:
    echo(
        f"seed={pairing.checkpoint_seed} opponent={pairing.opponent} self={pairing.mean_utility_self:.4f} "
        f"opp={pairing.mean_utility_opp:.4f} agreement={pairing.agreement_rate:.3f}"
    )


def run(args: argparse.Namespace) -> int:
    config = load_cli_config(
        args,
        {
            "eval.checkpoints": args.checkpoints,
            "eval.opponents": args.opponents,
            "eval.games_per_opponent": args.games,
            "eval.problems": args.problems,
            "eval.seed": args.seed,
            "eval.deadline": args.deadline,
            "eval.num_workers": args.workers,
            "eval.greedy": args.greedy,
        },
    )
    out_dir = resolve_run_dir(args.out_dir, config.run_dir, "evaluation")
    out_dir.mkdir(parents=True, exist_ok=True)
    event_log = RunEventLog(out_dir)
    event_log.emit_started(
        stage=STAGE_EVALUATE,
        event_type=EVENT_RUN_STARTED,
        message=f"Evaluating {len(config.eval.checkpoints)} checkpoint sources.",
        data={"checkpoints": list(config.eval.checkpoints), "seed": config.eval.seed},
    )
    try:
        results = run_tournament(
            config.eval,
            config.generator,
            opponent_config=config.opponent,
            event_log=event_log,
            on_pairing=_report,
        )
    except Exception as error:
        event_log.emit_failed(
            stage=STAGE_EVALUATE,
            event_type=EVENT_RUN_FAILED,
            error=error,
            message_prefix="Evaluation failed",
        )
        raise
    write_results_csv(out_dir / RESULTS_FILE_NAME, results)
    write_summary_csv(out_dir / SUMMARY_FILE_NAME, results)
    event_log.emit_completed(
        stage=STAGE_EVALUATE,
        event_type=EVENT_RUN_COMPLETED,
        message=f"Wrote {len(results.pairings)} pairings.",
        data={"pairings": len(results.pairings)},
    )
    echo(f"results={out_dir / RESULTS_FILE_NAME} summary={out_dir / SUMMARY_FILE_NAME}")
    return EXIT_OK
