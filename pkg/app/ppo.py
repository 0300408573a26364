from __future__ import annotations

import copy
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import torch
from torch import nn

from .checkpoints import build_policy, checkpoint_path, latest_checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, TrainerConfig, write_config_snapshot
from .episodes import ProblemSource, coin_flip, episode_seeds, problem_source, run_episode
from .graph_encoder import ObservationGraph
from .negotiation import InvalidInputError, Outcome, ProtocolViolationError
from .opponents import OpponentSpec, make_opponent, opponent_specs
from .policy_negotiator import PolicyNegotiator
from .policy_net import GraphBatch, NegotiationPolicy, collate_graphs
from .run_constants import (
    EVENT_BATCH_COMPLETED,
    EVENT_CHECKPOINT_LOADED,
    EVENT_CHECKPOINT_SAVED,
    EVENT_EPISODE_ABORTED,
    EVENT_RUN_COMPLETED,
    EVENT_RUN_FAILED,
    EVENT_RUN_STARTED,
    EVENT_UPDATE_ABORTED,
    EVENT_UPDATE_EARLY_STOPPED,
    STAGE_ROLLOUT,
    STAGE_TRAIN,
    STAGE_UPDATE,
    STREAM_TRAIN,
    STREAM_UPDATE,
)
from .run_events import RunEventLog

METRICS_FILE_NAME = "metrics.csv"
CONFIG_SNAPSHOT_NAME = "config.yaml"
METRICS_COLUMNS = (
    "step",
    "episodic_return_mean",
    "agreement_rate",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_frac",
    "lr",
)
ADVANTAGE_EPS = 1e-8


class NonFiniteLossError(RuntimeError):
    pass


@dataclass(frozen=True)
class Transition:
    graph: ObservationGraph
    accept: bool
    choices: Outcome
    log_prob: float
    value: float
    reward: float
    done: bool
    episode_id: int


@dataclass(frozen=True)
class EpisodeSummary:
    episode_id: int
    opponent: str
    learner_utility: float
    opponent_utility: float
    agreed: bool
    rounds_used: int
    steps: int


@dataclass(frozen=True)
class TrajectoryBatch:
    transitions: tuple[Transition, ...]
    episodes: tuple[EpisodeSummary, ...]
    aborted_episodes: int = 0
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @property
    def num_steps(self) -> int:
        return len(self.transitions)

    @property
    def episodic_return_mean(self) -> float:
        if not self.episodes:
            return 0.0
        return math.fsum(episode.learner_utility for episode in self.episodes) / len(self.episodes)

    @property
    def agreement_rate(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(1 for episode in self.episodes if episode.agreed) / len(self.episodes)


@dataclass(frozen=True)
class EpisodeRollout:
    episode_id: int
    transitions: tuple[Transition, ...] = ()
    summary: EpisodeSummary | None = None
    error: str | None = None


@dataclass(frozen=True)
class MinibatchTensors:
    graphs: GraphBatch
    accept: torch.Tensor
    choices: torch.Tensor
    old_log_probs: torch.Tensor
    old_values: torch.Tensor
    advantages: torch.Tensor
    returns: torch.Tensor


@dataclass(frozen=True)
class LossTerms:
    loss: torch.Tensor
    policy_loss: torch.Tensor
    value_loss: torch.Tensor
    entropy: torch.Tensor
    approx_kl: torch.Tensor
    clip_frac: torch.Tensor


@dataclass(frozen=True)
class UpdateMetrics:
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_frac: float
    gradient_steps: int
    early_stopped: bool = False


@dataclass(frozen=True)
class MetricsRow:
    step: int
    episodic_return_mean: float
    agreement_rate: float
    policy_loss: float
    value_loss: float
    entropy: float
    clip_frac: float
    lr: float

    def as_csv_row(self) -> list[str]:
        return [str(self.step)] + [repr(float(getattr(self, name))) for name in METRICS_COLUMNS[1:]]


@dataclass
class TrainResult:
    run_dir: Path
    policy: NegotiationPolicy
    metrics: list[MetricsRow] = field(default_factory=list)
    global_step: int = 0
    final_checkpoint: Path | None = None


def annealed_learning_rate(base_rate: float, progress: float) -> float:
    return base_rate * (1.0 - min(1.0, max(0.0, progress)))


def gae_arrays(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    gae_lambda: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward GAE recursion over contiguous episodes; the last transition must end an episode."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if not (rewards.shape == values.shape == dones.shape):
        raise InvalidInputError("Rewards, values and done flags must have the same length.")
    if rewards.size and not dones[-1]:
        raise InvalidInputError("Advantages need complete episodes; the last transition is not terminal.")
    advantages = np.zeros_like(rewards)
    running = 0.0
    for index in range(rewards.size - 1, -1, -1):
        if dones[index]:
            next_value = 0.0
            running = 0.0
        else:
            next_value = values[index + 1]
        delta = rewards[index] + gamma * next_value - values[index]
        running = delta + gamma * gae_lambda * running
        advantages[index] = running
    return advantages, advantages + values


def compute_gae(batch: TrajectoryBatch, gamma: float, gae_lambda: float) -> TrajectoryBatch:
    advantages, returns = gae_arrays(
        np.asarray([item.reward for item in batch.transitions]),
        np.asarray([item.value for item in batch.transitions]),
        np.asarray([item.done for item in batch.transitions]),
        gamma,
        gae_lambda,
    )
    return replace(batch, advantages=advantages, returns=returns)


def play_training_episode(
    policy: NegotiationPolicy,
    trainer: TrainerConfig,
    source: ProblemSource,
    episode_id: int,
    specs: Mapping[str, OpponentSpec] | None = None,
) -> EpisodeRollout:
    """Learner is agent 0; the opponent kind and the first mover are drawn from the episode's schedule stream."""
    seeds = episode_seeds(trainer.seed, STREAM_TRAIN, episode_id)
    schedule = np.random.default_rng(seeds.schedule)
    opponent_name = trainer.opponents[int(schedule.integers(len(trainer.opponents)))]
    first_turn = coin_flip(schedule)
    problem = source.problem(seeds.problem)

    learner = PolicyNegotiator(policy, record=True)
    learner.reset(problem.domain, problem.utilities[0], seeds.learner, agent_id=0)
    opponent = make_opponent(opponent_name, None if specs is None else specs.get(opponent_name))
    opponent.reset(problem.domain, problem.utilities[1], seeds.opponent, agent_id=1)
    try:
        record = run_episode(problem, (learner, opponent), deadline=trainer.deadline, first_turn=first_turn)
    except ProtocolViolationError as error:
        return EpisodeRollout(episode_id=episode_id, error=f"{opponent_name}: {error}")

    transitions = []
    last = len(learner.steps) - 1
    for position, item in enumerate(learner.steps):
        terminal = position == last
        transitions.append(
            Transition(
                graph=item.graph,
                accept=item.action.accept,
                choices=item.action.choices,
                log_prob=item.log_prob,
                value=item.value,
                reward=record.result.utilities[0] if terminal else 0.0,
                done=terminal,
                episode_id=episode_id,
            )
        )
    summary = EpisodeSummary(
        episode_id=episode_id,
        opponent=opponent_name,
        learner_utility=record.result.utilities[0],
        opponent_utility=record.result.utilities[1],
        agreed=record.result.agreed,
        rounds_used=record.result.rounds_used,
        steps=len(transitions),
    )
    return EpisodeRollout(episode_id=episode_id, transitions=tuple(transitions), summary=summary)


def collect_rollout(
    policy: NegotiationPolicy,
    trainer: TrainerConfig,
    source: ProblemSource,
    *,
    episode_start: int = 0,
    executor: ThreadPoolExecutor | None = None,
    event_log: RunEventLog | None = None,
    specs: Mapping[str, OpponentSpec] | None = None,
) -> tuple[TrajectoryBatch, int]:
    """Play whole episodes from ``episode_start`` until the batch holds at least ``batch_size`` learner steps.

    Returns the batch and the index of the first unused episode. Episodes are consumed strictly in index
    order, so the batch does not depend on the number of workers.
    """
    transitions: list[Transition] = []
    summaries: list[EpisodeSummary] = []
    aborted = 0
    next_episode = episode_start
    chunk = 1 if executor is None else trainer.num_workers

    while len(transitions) < trainer.batch_size:
        indices = range(next_episode, next_episode + chunk)
        if executor is None:
            rollouts = [play_training_episode(policy, trainer, source, index, specs) for index in indices]
        else:
            rollouts = list(
                executor.map(lambda index: play_training_episode(policy, trainer, source, index, specs), indices)
            )
        for rollout in rollouts:
            next_episode = rollout.episode_id + 1
            if rollout.error is not None:
                aborted += 1
                if event_log is not None:
                    event_log.emit(
                        stage=STAGE_ROLLOUT,
                        event_type=EVENT_EPISODE_ABORTED,
                        message=f"Episode {rollout.episode_id} aborted: {rollout.error}",
                        data={"episode_id": rollout.episode_id},
                    )
                continue
            transitions.extend(rollout.transitions)
            if rollout.summary is not None:
                summaries.append(rollout.summary)
            if len(transitions) >= trainer.batch_size:
                break

    batch = TrajectoryBatch(transitions=tuple(transitions), episodes=tuple(summaries), aborted_episodes=aborted)
    return batch, next_episode


def minibatch_tensors(batch: TrajectoryBatch, indices: Sequence[int], *, dtype: torch.dtype) -> MinibatchTensors:
    if batch.advantages is None or batch.returns is None:
        raise InvalidInputError("Compute advantages before building minibatches.")
    selected = [batch.transitions[int(index)] for index in indices]
    index_array = np.asarray(indices, dtype=np.int64)
    return MinibatchTensors(
        graphs=collate_graphs([item.graph for item in selected], dtype=dtype),
        accept=torch.tensor([item.accept for item in selected], dtype=torch.bool),
        choices=torch.tensor([choice for item in selected for choice in item.choices], dtype=torch.long),
        old_log_probs=torch.tensor([item.log_prob for item in selected], dtype=dtype),
        old_values=torch.tensor([item.value for item in selected], dtype=dtype),
        advantages=torch.as_tensor(batch.advantages[index_array], dtype=dtype),
        returns=torch.as_tensor(batch.returns[index_array], dtype=dtype),
    )


def clipped_surrogate(ratio: torch.Tensor, advantages: torch.Tensor, clip_epsilon: float) -> torch.Tensor:
    """Per-sample PPO objective ``min(r A, clip(r, 1 - eps, 1 + eps) A)``."""
    return torch.minimum(ratio * advantages, torch.clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantages)


def ppo_loss(policy: NegotiationPolicy, minibatch: MinibatchTensors, trainer: TrainerConfig) -> LossTerms:
    output = policy(minibatch.graphs)
    new_log_probs = output.distribution.log_prob(minibatch.accept, minibatch.choices)
    entropy = output.distribution.entropy()
    new_values = output.state_value

    log_ratio = new_log_probs - minibatch.old_log_probs
    ratio = torch.exp(log_ratio)
    with torch.no_grad():
        approx_kl = ((ratio - 1.0) - log_ratio).mean()
        clip_frac = ((ratio - 1.0).abs() > trainer.clip_epsilon).to(ratio.dtype).mean()

    advantages = minibatch.advantages
    if trainer.normalize_advantages and advantages.shape[0] > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + ADVANTAGE_EPS)
    policy_loss = -clipped_surrogate(ratio, advantages, trainer.clip_epsilon).mean()

    if trainer.clip_value_loss:
        unclipped = (new_values - minibatch.returns) ** 2
        clipped_values = minibatch.old_values + torch.clamp(
            new_values - minibatch.old_values,
            -trainer.clip_epsilon,
            trainer.clip_epsilon,
        )
        clipped = (clipped_values - minibatch.returns) ** 2
        value_loss = torch.maximum(unclipped, clipped).mean()
    else:
        value_loss = ((new_values - minibatch.returns) ** 2).mean()

    entropy_mean = entropy.mean()
    loss = policy_loss - trainer.entropy_coef * entropy_mean + trainer.value_coef * value_loss
    return LossTerms(
        loss=loss,
        policy_loss=policy_loss,
        value_loss=value_loss,
        entropy=entropy_mean,
        approx_kl=approx_kl,
        clip_frac=clip_frac,
    )


def _restore(policy: nn.Module, optimizer: torch.optim.Optimizer, snapshot: tuple[dict, dict]) -> None:
    policy.load_state_dict(snapshot[0])
    optimizer.load_state_dict(snapshot[1])


def ppo_update(
    policy: NegotiationPolicy,
    optimizer: torch.optim.Optimizer,
    batch: TrajectoryBatch,
    trainer: TrainerConfig,
    *,
    learning_rate: float,
    rng: np.random.Generator,
) -> UpdateMetrics:
    if batch.advantages is None or batch.returns is None:
        raise InvalidInputError("Compute advantages before the update.")
    if batch.num_steps == 0:
        raise InvalidInputError("Cannot update on an empty batch.")
    for group in optimizer.param_groups:
        group["lr"] = learning_rate
    snapshot = (copy.deepcopy(policy.state_dict()), copy.deepcopy(optimizer.state_dict()))

    totals = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "approx_kl": 0.0, "clip_frac": 0.0}
    steps = 0
    early_stopped = False
    num_minibatches = min(trainer.num_minibatches, batch.num_steps)
    policy.train()
    for _epoch in range(trainer.update_epochs):
        approx_kl = 0.0
        for indices in np.array_split(rng.permutation(batch.num_steps), num_minibatches):
            terms = ppo_loss(policy, minibatch_tensors(batch, indices.tolist(), dtype=policy.dtype), trainer)
            if not bool(torch.isfinite(terms.loss)):
                _restore(policy, optimizer, snapshot)
                raise NonFiniteLossError(f"PPO loss became non-finite after {steps} gradient steps.")
            optimizer.zero_grad()
            terms.loss.backward()
            nn.utils.clip_grad_norm_(policy.parameters(), trainer.max_grad_norm)
            optimizer.step()
            if not all(bool(torch.isfinite(parameter).all()) for parameter in policy.parameters()):
                _restore(policy, optimizer, snapshot)
                raise NonFiniteLossError(f"Parameters became non-finite after {steps + 1} gradient steps.")
            steps += 1
            approx_kl = float(terms.approx_kl)
            totals["policy_loss"] += float(terms.policy_loss)
            totals["value_loss"] += float(terms.value_loss)
            totals["entropy"] += float(terms.entropy)
            totals["approx_kl"] += approx_kl
            totals["clip_frac"] += float(terms.clip_frac)
        if trainer.target_kl is not None and approx_kl > trainer.target_kl:
            early_stopped = True
            break
    policy.eval()
    return UpdateMetrics(
        policy_loss=totals["policy_loss"] / steps,
        value_loss=totals["value_loss"] / steps,
        entropy=totals["entropy"] / steps,
        approx_kl=totals["approx_kl"] / steps,
        clip_frac=totals["clip_frac"] / steps,
        gradient_steps=steps,
        early_stopped=early_stopped,
    )


def read_metrics(path: Path) -> list[MetricsRow]:
    if not path.exists():
        return []
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        return [
            MetricsRow(
                step=int(row["step"]),
                **{name: float(row[name]) for name in METRICS_COLUMNS[1:]},
            )
            for row in reader
        ]


def write_metrics(path: Path, rows: Sequence[MetricsRow]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv_row())


def _append_metrics(path: Path, row: MetricsRow) -> None:
    if not path.exists():
        write_metrics(path, [row])
        return
    with path.open("a", encoding="utf-8", newline="") as handle:
        csv.writer(handle, lineterminator="\n").writerow(row.as_csv_row())


def _update_rng(seed: int, update: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(STREAM_UPDATE, int(update))))


def train(
    config: RunConfig,
    run_dir: Path,
    *,
    resume: bool = False,
    on_batch: Callable[[int, MetricsRow], None] | None = None,
) -> TrainResult:
    trainer = config.trainer
    run_dir.mkdir(parents=True, exist_ok=True)
    event_log = RunEventLog(run_dir)
    metrics_path = run_dir / METRICS_FILE_NAME
    write_config_snapshot(config, run_dir / CONFIG_SNAPSHOT_NAME)

    source = problem_source(trainer.problems, config.generator, key_path="trainer.problems")
    specs = opponent_specs(config.opponent)
    torch.manual_seed(trainer.seed)
    policy = build_policy(config.policy, value_counts=source.fixed_value_counts)
    policy.eval()
    optimizer = torch.optim.Adam(policy.parameters(), lr=trainer.learning_rate, eps=trainer.adam_eps)

    start_update = 1
    episode_index = 0
    global_step = 0
    metrics: list[MetricsRow] = []
    if resume and (newest := latest_checkpoint(run_dir)) is not None:
        checkpoint = load_checkpoint(newest)
        policy.load_state_dict(checkpoint.policy.state_dict())
        if checkpoint.optimizer_state is not None:
            optimizer.load_state_dict(checkpoint.optimizer_state)
        state = checkpoint.trainer_state or {}
        start_update = int(state.get("update", 0)) + 1
        episode_index = int(state.get("episode_index", 0))
        global_step = int(state.get("global_step", checkpoint.step))
        metrics = [row for row in read_metrics(metrics_path) if row.step <= global_step]
        write_metrics(metrics_path, metrics)
        event_log.emit(
            stage=STAGE_TRAIN,
            event_type=EVENT_CHECKPOINT_LOADED,
            message=f"Resumed from {newest.name}.",
            data={"update": start_update - 1, "global_step": global_step},
        )
    elif metrics_path.exists():
        metrics_path.unlink()

    event_log.emit_started(
        stage=STAGE_TRAIN,
        event_type=EVENT_RUN_STARTED,
        message=f"Training {policy.kind} policy for {trainer.num_updates} updates.",
        data={"seed": trainer.seed, "num_updates": trainer.num_updates, "start_update": start_update},
    )
    result = TrainResult(run_dir=run_dir, policy=policy, metrics=metrics, global_step=global_step)
    executor = ThreadPoolExecutor(max_workers=trainer.num_workers) if trainer.num_workers > 1 else None
    try:
        for update in range(start_update, trainer.num_updates + 1):
            if trainer.anneal_lr:
                learning_rate = annealed_learning_rate(trainer.learning_rate, (update - 1) / trainer.num_updates)
            else:
                learning_rate = trainer.learning_rate
            batch, episode_index = collect_rollout(
                policy,
                trainer,
                source,
                episode_start=episode_index,
                executor=executor,
                event_log=event_log,
                specs=specs,
            )
            batch = compute_gae(batch, trainer.gamma, trainer.gae_lambda)
            global_step += batch.num_steps
            try:
                update_metrics = ppo_update(
                    policy,
                    optimizer,
                    batch,
                    trainer,
                    learning_rate=learning_rate,
                    rng=_update_rng(trainer.seed, update),
                )
            except NonFiniteLossError as error:
                event_log.emit_failed(
                    stage=STAGE_UPDATE,
                    event_type=EVENT_UPDATE_ABORTED,
                    error=error,
                    message_prefix=f"Update {update} aborted",
                    data={"update": update, "global_step": global_step},
                )
                raise
            if update_metrics.early_stopped:
                event_log.emit(
                    stage=STAGE_UPDATE,
                    event_type=EVENT_UPDATE_EARLY_STOPPED,
                    message=f"Update {update} stopped early on approximate KL.",
                    data={"update": update, "gradient_steps": update_metrics.gradient_steps},
                )

            row = MetricsRow(
                step=global_step,
                episodic_return_mean=batch.episodic_return_mean,
                agreement_rate=batch.agreement_rate,
                policy_loss=update_metrics.policy_loss,
                value_loss=update_metrics.value_loss,
                entropy=update_metrics.entropy,
                clip_frac=update_metrics.clip_frac,
                lr=learning_rate,
            )
            _append_metrics(metrics_path, row)
            result.metrics.append(row)
            result.global_step = global_step
            event_log.emit(
                stage=STAGE_UPDATE,
                event_type=EVENT_BATCH_COMPLETED,
                message=f"Batch {update}/{trainer.num_updates} done at step {global_step}.",
                data={
                    "update": update,
                    "global_step": global_step,
                    "episodes": len(batch.episodes),
                    "aborted_episodes": batch.aborted_episodes,
                    "approx_kl": update_metrics.approx_kl,
                    "gradient_steps": update_metrics.gradient_steps,
                },
            )
            if on_batch is not None:
                on_batch(update, row)

            if update % trainer.checkpoint_every == 0 or update == trainer.num_updates:
                path = save_checkpoint(
                    checkpoint_path(run_dir, global_step),
                    policy,
                    seed=trainer.seed,
                    step=global_step,
                    optimizer=optimizer,
                    trainer_state={"update": update, "episode_index": episode_index, "global_step": global_step},
                )
                result.final_checkpoint = path
                event_log.emit(
                    stage=STAGE_TRAIN,
                    event_type=EVENT_CHECKPOINT_SAVED,
                    message=f"Saved {path.name}.",
                    data={"update": update, "global_step": global_step},
                )
    except Exception as error:
        event_log.emit_failed(
            stage=STAGE_TRAIN,
            event_type=EVENT_RUN_FAILED,
            error=error,
            message_prefix="Training failed",
        )
        raise
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    if result.final_checkpoint is None:
        result.final_checkpoint = latest_checkpoint(run_dir)
    event_log.emit_completed(
        stage=STAGE_TRAIN,
        event_type=EVENT_RUN_COMPLETED,
        message=f"Training finished at step {global_step}.",
        data={"global_step": global_step, "updates": len(result.metrics)},
    )
    return result
