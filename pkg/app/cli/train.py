from __future__ import annotations

import argparse
from dataclasses import replace

from ..config import ConfigError, RunConfig
from ..ppo import MetricsRow, train
from .common import EXIT_OK, add_config_arguments, echo, load_cli_config, resolve_run_dir

NAME = "train"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(NAME, help="Train a policy with PPO.")
    add_config_arguments(parser)
    parser.add_argument("--run-dir", default=None, help="Run directory (default: <runs root>/<policy>).")
    parser.add_argument("--policy", choices=("gnn", "flat"), default=None, help="policy.kind")
    parser.add_argument("--opponents", default=None, help="trainer.opponents, comma-separated.")
    parser.add_argument("--problems", default=None, help="trainer.problems: random or fixed:<path>.")
    parser.add_argument("--total-timesteps", type=int, default=None, help="trainer.total_timesteps")
    parser.add_argument("--batch-size", type=int, default=None, help="trainer.batch_size")
    parser.add_argument("--minibatch-size", type=int, default=None, help="trainer.minibatch_size")
    parser.add_argument("--update-epochs", type=int, default=None, help="trainer.update_epochs")
    parser.add_argument("--deadline", type=int, default=None, help="trainer.deadline")
    parser.add_argument("--seed", type=int, default=None, help="trainer.seed")
    parser.add_argument("--seeds", default=None, help="Comma-separated seeds; each trains into <run_dir>/seed_<s>.")
    parser.add_argument("--workers", type=int, default=None, help="trainer.num_workers")
    parser.add_argument("--resume", action="store_true", help="Continue from the newest checkpoint.")
    parser.set_defaults(handler=run)


def _parse_seeds(raw: str) -> list[int]:
    try:
        seeds = [int(item) for item in raw.split(",") if item.strip()]
    except ValueError as error:
        raise ConfigError(f"--seeds must be comma-separated integers, got '{raw}'.") from error
    if not seeds:
        raise ConfigError("--seeds must name at least one seed.")
    return seeds


def _report(seed: int):
    def on_batch(update: int, row: MetricsRow) -> None:
        echo(
            f"seed={seed} batch={update} step={row.step} return={row.episodic_return_mean:.4f} "
            f"agreement={row.agreement_rate:.3f} lr={row.lr:.3g}"
        )

    return on_batch


def run(args: argparse.Namespace) -> int:
    config: RunConfig = load_cli_config(
        args,
        {
            "run_dir": args.run_dir,
            "policy.kind": args.policy,
            "trainer.opponents": args.opponents,
            "trainer.problems": args.problems,
            "trainer.total_timesteps": args.total_timesteps,
            "trainer.batch_size": args.batch_size,
            "trainer.minibatch_size": args.minibatch_size,
            "trainer.update_epochs": args.update_epochs,
            "trainer.deadline": args.deadline,
            "trainer.seed": args.seed,
            "trainer.num_workers": args.workers,
        },
    )
    run_dir = resolve_run_dir(None, config.run_dir, config.policy.kind)

    if args.seeds is None:
        result = train(config, run_dir, resume=args.resume, on_batch=_report(config.trainer.seed))
        echo(f"run_dir={result.run_dir} step={result.global_step} checkpoint={result.final_checkpoint}")
        return EXIT_OK

    for seed in _parse_seeds(args.seeds):
        seeded = replace(config, trainer=replace(config.trainer, seed=seed))
        result = train(seeded, run_dir / f"seed_{seed}", resume=args.resume, on_batch=_report(seed))
        echo(f"run_dir={result.run_dir} step={result.global_step} checkpoint={result.final_checkpoint}")
    return EXIT_OK
