from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .checkpoints import Checkpoint, expand_checkpoint_sources, load_checkpoint
from .config import PROBLEM_MODE_RANDOM, ConfigError, EvalConfig, GeneratorConfig, OpponentConfig
from .episodes import EpisodeRecord, EpisodeSeeds, ProblemSource, coin_flip, episode_seeds, problem_source, run_episode
from .flat_policy import FlatPolicy
from .negotiation import NegotiationProblem, Outcome, ProtocolViolationError, UtilityFunction
from .opponents import Negotiator, OpponentSpec, make_opponent, opponent_specs
from .policy_negotiator import PolicyNegotiator
from .run_constants import EVENT_EPISODE_ABORTED, EVENT_TOURNAMENT_PAIR_COMPLETED, STAGE_EVALUATE, STREAM_EVAL
from .run_events import RunEventLog

CI_LEVEL = 0.99
UTILITY_TOLERANCE = 1e-9
RESULTS_FILE_NAME = "results.csv"
SUMMARY_FILE_NAME = "summary.csv"
RESULTS_COLUMNS = (
    "opponent",
    "checkpoint_seed",
    "mean_utility_self",
    "mean_utility_opp",
    "agreement_rate",
    "mean_rounds",
)
SUMMARY_COLUMNS = ("opponent", "mean_self", "ci99_self", "mean_opp", "ci99_opp")


class InsufficientDataError(ValueError):
    pass


class UtilityMismatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class GameRecord:
    game: int
    learner_utility: float
    opponent_utility: float
    agreed: bool
    rounds_used: int
    first_turn: int
    aborted: bool = False


@dataclass(frozen=True)
class PairingResult:
    checkpoint: str
    checkpoint_seed: int
    opponent: str
    games: int
    mean_utility_self: float
    mean_utility_opp: float
    agreement_rate: float
    mean_rounds: float
    aborted_games: int = 0


@dataclass(frozen=True)
class OpponentSummary:
    opponent: str
    mean_self: float
    ci99_self: float | None
    mean_opp: float
    ci99_opp: float | None


@dataclass(frozen=True)
class EvalResults:
    pairings: tuple[PairingResult, ...]
    summaries: tuple[OpponentSummary, ...]


def aggregate_ci(samples: Sequence[float], level: float = CI_LEVEL) -> tuple[float, float]:
    """Mean and Student-t half-width across per-seed means."""
    values = np.asarray(list(samples), dtype=np.float64)
    if values.size < 2:
        raise InsufficientDataError("A confidence interval needs at least two samples.")
    if not 0.0 <= level < 1.0:
        raise InsufficientDataError(f"Confidence level must lie in [0, 1), got {level}.")
    mean = math.fsum(values) / values.size
    if level == 0.0 or bool(np.all(values == values[0])):
        return mean, 0.0
    standard_error = float(np.std(values, ddof=1)) / math.sqrt(values.size)
    quantile = float(stats.t.ppf((1.0 + level) / 2.0, values.size - 1))
    return mean, quantile * standard_error


def brute_force_utility(u_fn: UtilityFunction, outcome: Outcome) -> float:
    total = 0.0
    for objective, choice in enumerate(outcome):
        total += u_fn.objective_weights[objective] * u_fn.value_weights[objective][choice]
    return total


def _check_utilities(problem: NegotiationProblem, record: EpisodeRecord) -> None:
    if record.result.agreement is None:
        if record.result.utilities != (0.0, 0.0):
            raise UtilityMismatchError("A failed episode must pay zero to both agents.")
        return
    for agent, u_fn in enumerate(problem.utilities):
        expected = brute_force_utility(u_fn, record.result.agreement)
        if abs(expected - record.result.utilities[agent]) > UTILITY_TOLERANCE:
            raise UtilityMismatchError(
                f"Agent {agent} utility {record.result.utilities[agent]} disagrees with the oracle value {expected}."
            )


def play_pairing(
    first: Negotiator,
    second: Negotiator,
    problem: NegotiationProblem,
    seeds: EpisodeSeeds,
    *,
    deadline: int,
) -> EpisodeRecord:
    """Play ``first`` as agent 0 against ``second`` as agent 1, with the first mover drawn from the seeds."""
    first_turn = coin_flip(np.random.default_rng(seeds.schedule))
    first.reset(problem.domain, problem.utilities[0], seeds.learner, agent_id=0)
    second.reset(problem.domain, problem.utilities[1], seeds.opponent, agent_id=1)
    record = run_episode(problem, (first, second), deadline=deadline, first_turn=first_turn)
    _check_utilities(problem, record)
    return record


def play_game(
    learner_factory: Callable[[], Negotiator],
    opponent_name: str,
    opponent_index: int,
    game: int,
    config: EvalConfig,
    source: ProblemSource,
    specs: Mapping[str, OpponentSpec] | None = None,
) -> GameRecord:
    # Keyed by (opponent, game) only, so every checkpoint meets the same problems.
    seeds = episode_seeds(config.seed, STREAM_EVAL, game, opponent_index)
    problem = source.problem(seeds.problem)
    opponent = make_opponent(opponent_name, None if specs is None else specs.get(opponent_name))
    try:
        record = play_pairing(learner_factory(), opponent, problem, seeds, deadline=config.deadline)
    except ProtocolViolationError:
        return GameRecord(
            game=game,
            learner_utility=0.0,
            opponent_utility=0.0,
            agreed=False,
            rounds_used=0,
            first_turn=-1,
            aborted=True,
        )
    return GameRecord(
        game=game,
        learner_utility=record.result.utilities[0],
        opponent_utility=record.result.utilities[1],
        agreed=record.result.agreed,
        rounds_used=record.result.rounds_used,
        first_turn=record.first_turn,
    )


def summarize_games(checkpoint: str, checkpoint_seed: int, opponent: str, games: Sequence[GameRecord]) -> PairingResult:
    count = len(games)
    return PairingResult(
        checkpoint=checkpoint,
        checkpoint_seed=checkpoint_seed,
        opponent=opponent,
        games=count,
        mean_utility_self=math.fsum(game.learner_utility for game in games) / count,
        mean_utility_opp=math.fsum(game.opponent_utility for game in games) / count,
        agreement_rate=sum(1 for game in games if game.agreed) / count,
        mean_rounds=sum(game.rounds_used for game in games) / count,
        aborted_games=sum(1 for game in games if game.aborted),
    )


def summarize_pairings(pairings: Sequence[PairingResult], opponents: Sequence[str]) -> tuple[OpponentSummary, ...]:
    summaries: list[OpponentSummary] = []
    for opponent in opponents:
        rows = [row for row in pairings if row.opponent == opponent]
        if not rows:
            continue
        own = [row.mean_utility_self for row in rows]
        other = [row.mean_utility_opp for row in rows]
        if len(rows) < 2:
            summaries.append(OpponentSummary(opponent, own[0], None, other[0], None))
            continue
        mean_self, ci_self = aggregate_ci(own)
        mean_opp, ci_opp = aggregate_ci(other)
        summaries.append(OpponentSummary(opponent, mean_self, ci_self, mean_opp, ci_opp))
    return tuple(summaries)


def _validate_checkpoints(config: EvalConfig, source: ProblemSource, checkpoints: Sequence[Checkpoint]) -> None:
    for checkpoint in checkpoints:
        if isinstance(checkpoint.policy, FlatPolicy):
            if source.fixed_problem is None:
                raise ConfigError(
                    f"eval.problems must be fixed:<path> to evaluate the flat policy in {checkpoint.path}."
                )
            if source.fixed_problem.domain.value_counts != checkpoint.policy.value_counts:
                raise ConfigError(f"Flat policy in {checkpoint.path} was trained on a different domain.")
        if source.mode == PROBLEM_MODE_RANDOM and checkpoint.seed == config.seed:
            raise ConfigError(f"eval.seed {config.seed} collides with the training seed of {checkpoint.path}.")


def run_tournament(
    config: EvalConfig,
    generator: GeneratorConfig,
    *,
    opponent_config: OpponentConfig | None = None,
    event_log: RunEventLog | None = None,
    on_pairing: Callable[[PairingResult], None] | None = None,
) -> EvalResults:
    config.validate()
    source = problem_source(config.problems, generator, key_path="eval.problems")
    checkpoints = [load_checkpoint(path) for path in expand_checkpoint_sources(config.checkpoints)]
    _validate_checkpoints(config, source, checkpoints)
    specs = opponent_specs(opponent_config or OpponentConfig())

    pairings: list[PairingResult] = []
    executor = ThreadPoolExecutor(max_workers=config.num_workers) if config.num_workers > 1 else None
    try:
        for checkpoint in checkpoints:
            policy = checkpoint.policy
            policy.eval()

            def learner_factory(policy=policy) -> Negotiator:
                return PolicyNegotiator(policy, greedy=config.greedy)

            for opponent_index, opponent in enumerate(config.opponents):

                def play(game: int, opponent: str = opponent, opponent_index: int = opponent_index) -> GameRecord:
                    return play_game(learner_factory, opponent, opponent_index, game, config, source, specs)

                games_range = range(config.games_per_opponent)
                games = list(executor.map(play, games_range)) if executor is not None else [play(g) for g in games_range]
                pairing = summarize_games(str(checkpoint.path), checkpoint.seed, opponent, games)
                pairings.append(pairing)
                if event_log is not None:
                    if pairing.aborted_games:
                        event_log.emit(
                            stage=STAGE_EVALUATE,
                            event_type=EVENT_EPISODE_ABORTED,
                            message=f"{pairing.aborted_games} games against {opponent} aborted on protocol violations.",
                            data={"checkpoint": pairing.checkpoint, "opponent": opponent},
                        )
                    event_log.emit(
                        stage=STAGE_EVALUATE,
                        event_type=EVENT_TOURNAMENT_PAIR_COMPLETED,
                        message=f"{checkpoint.path.name} vs {opponent}: {pairing.mean_utility_self:.4f}.",
                        data={
                            "checkpoint": pairing.checkpoint,
                            "checkpoint_seed": pairing.checkpoint_seed,
                            "opponent": opponent,
                            "mean_utility_self": pairing.mean_utility_self,
                            "mean_utility_opp": pairing.mean_utility_opp,
                            "agreement_rate": pairing.agreement_rate,
                        },
                    )
                if on_pairing is not None:
                    on_pairing(pairing)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    return EvalResults(pairings=tuple(pairings), summaries=summarize_pairings(pairings, config.opponents))


def _format_float(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_results_csv(path: Path, results: EvalResults) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULTS_COLUMNS)
        for row in results.pairings:
            writer.writerow(
                [
                    row.opponent,
                    str(row.checkpoint_seed),
                    _format_float(row.mean_utility_self),
                    _format_float(row.mean_utility_opp),
                    _format_float(row.agreement_rate),
                    _format_float(row.mean_rounds),
                ]
            )


def write_summary_csv(path: Path, results: EvalResults) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in results.summaries:
            writer.writerow(
                [
                    row.opponent,
                    _format_float(row.mean_self),
                    _format_float(row.ci99_self),
                    _format_float(row.mean_opp),
                    _format_float(row.ci99_opp),
                ]
            )


def read_summary_csv(path: Path) -> list[OpponentSummary]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))

    def optional(raw: str) -> float | None:
        return None if raw == "" else float(raw)

    return [
        OpponentSummary(
            opponent=row["opponent"],
            mean_self=float(row["mean_self"]),
            ci99_self=optional(row["ci99_self"]),
            mean_opp=float(row["mean_opp"]),
            ci99_opp=optional(row["ci99_opp"]),
        )
        for row in rows
    ]
