#!/usr/bin/env python3
"""Scaled-down learning checks: rising returns, generalization to unseen problems, GNN/flat parity."""
from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path
import sys

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from app.config import EvalConfig, PolicyConfig, RunConfig, TrainerConfig
from app.evaluation import run_tournament
from app.ppo import METRICS_FILE_NAME, MetricsRow, read_metrics, train
from app.problem_gen import generate_problem, problem_seed_sequence
from app.problem_io import write_problem
from app.run_constants import STREAM_GEN_PROBLEMS

RETURN_GAIN = 0.15
CONCEDER_AGREEMENT = 0.9
GENERALIZATION_GAP = 0.05
PARITY_GAP = 0.1
WINDOW = 20


def _window_mean(rows: list[MetricsRow], *, last: bool) -> float:
    size = max(1, min(WINDOW, len(rows) // 2))
    selected = rows[-size:] if last else rows[:size]
    return sum(row.episodic_return_mean for row in selected) / len(selected)


def _train_seeds(config: RunConfig, root: Path, seeds: list[int]) -> dict[int, Path]:
    checkpoints: dict[int, Path] = {}
    for seed in seeds:
        seeded = replace(config, trainer=replace(config.trainer, seed=seed))
        result = train(seeded, root / f"seed_{seed}")
        if result.final_checkpoint is None:
            raise RuntimeError(f"Seed {seed} produced no checkpoint.")
        checkpoints[seed] = result.final_checkpoint
        print(
            f"trained seed={seed} first={_window_mean(result.metrics, last=False):.4f} "
            f"last={_window_mean(result.metrics, last=True):.4f}",
            flush=True,
        )
    return checkpoints


def check_learning(config: RunConfig, root: Path, seeds: list[int], games: int) -> bool:
    checkpoints = _train_seeds(config, root / "random", seeds)
    passed = True
    for seed, checkpoint in checkpoints.items():
        run_dir = root / "random" / f"seed_{seed}"
        rows = read_metrics(run_dir / METRICS_FILE_NAME)
        gain = _window_mean(rows, last=True) - _window_mean(rows, last=False)
        agreement = run_tournament(
            EvalConfig(checkpoints=(str(checkpoint),), opponents=("conceder",), games_per_opponent=games, seed=10_007),
            config.generator,
            opponent_config=config.opponent,
        ).pairings[0].agreement_rate
        ok = gain >= RETURN_GAIN and agreement >= CONCEDER_AGREEMENT
        passed = passed and ok
        print(f"learning seed={seed} gain={gain:.4f} conceder_agreement={agreement:.3f} {'ok' if ok else 'FAIL'}")

    for seed, checkpoint in checkpoints.items():
        unseen, fresh = (
            run_tournament(
                EvalConfig(checkpoints=(str(checkpoint),), games_per_opponent=games, seed=eval_seed),
                config.generator,
                opponent_config=config.opponent,
            )
            for eval_seed in (20_011, 30_011)
        )
        for left, right in zip(unseen.pairings, fresh.pairings):
            gap = abs(left.mean_utility_self - right.mean_utility_self)
            ok = gap <= GENERALIZATION_GAP
            passed = passed and ok
            print(f"generalization seed={seed} opponent={left.opponent} gap={gap:.4f} {'ok' if ok else 'FAIL'}")
    return passed


def check_parity(config: RunConfig, root: Path, seeds: list[int]) -> bool:
    problem = generate_problem(config.generator, problem_seed_sequence(0, STREAM_GEN_PROBLEMS, 0))
    problem_path = root / "fixed_problem.yaml"
    write_problem(problem, problem_path)
    finals: dict[str, float] = {}
    for kind in ("gnn", "flat"):
        fixed = replace(
            config,
            policy=replace(config.policy, kind=kind),
            trainer=replace(config.trainer, problems=f"fixed:{problem_path}"),
        )
        _train_seeds(fixed, root / f"fixed_{kind}", seeds)
        values = [
            _window_mean(read_metrics(root / f"fixed_{kind}" / f"seed_{seed}" / METRICS_FILE_NAME), last=True)
            for seed in seeds
        ]
        finals[kind] = sum(values) / len(values)
    gap = abs(finals["gnn"] - finals["flat"])
    ok = gap <= PARITY_GAP
    print(f"parity gnn={finals['gnn']:.4f} flat={finals['flat']:.4f} gap={gap:.4f} {'ok' if ok else 'FAIL'}")
    return ok


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the scaled-down learning checks.")
    parser.add_argument("--out-dir", default="runs/learning_checks", help="Where the runs are written.")
    parser.add_argument("--total-timesteps", type=int, default=200_000, help="Steps per training run.")
    parser.add_argument("--seeds", default="0,1,2", help="Comma-separated training seeds.")
    parser.add_argument("--games", type=int, default=200, help="Evaluation games per opponent.")
    parser.add_argument("--workers", type=int, default=1, help="Rollout worker threads.")
    parser.add_argument("--skip-parity", action="store_true", help="Only run the random-problem checks.")
    args = parser.parse_args()

    seeds = [int(item) for item in args.seeds.split(",") if item.strip()]
    root = Path(args.out_dir)
    config = RunConfig(
        policy=PolicyConfig(),
        trainer=TrainerConfig(total_timesteps=args.total_timesteps, num_workers=args.workers),
    )
    passed = check_learning(config, root, seeds, args.games)
    if not args.skip_parity:
        passed = check_parity(config, root, seeds) and passed
    print("all checks passed" if passed else "some checks failed")
    return 0 if passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
