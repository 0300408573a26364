from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PROBLEM_MODE_FIXED, PROBLEM_MODE_RANDOM, GeneratorConfig, parse_problem_source
from .negotiation import EpisodeResult, NegotiationProblem, SessionState, new_session, step
from .opponents import Negotiator
from .problem_gen import generate_problem
from .problem_io import read_problem


@dataclass(frozen=True)
class EpisodeRecord:
    result: EpisodeResult
    final_state: SessionState
    first_turn: int


@dataclass(frozen=True)
class EpisodeSeeds:
    """Independent substreams for everything random inside one episode."""

    schedule: np.random.SeedSequence
    problem: np.random.SeedSequence
    opponent: np.random.SeedSequence
    learner: np.random.SeedSequence


def episode_seeds(seed: int, stream: int, index: int, *extra_key: int) -> EpisodeSeeds:
    root = np.random.SeedSequence(int(seed), spawn_key=(int(stream), *(int(key) for key in extra_key), int(index)))
    schedule, problem, opponent, learner = root.spawn(4)
    return EpisodeSeeds(schedule=schedule, problem=problem, opponent=opponent, learner=learner)


def coin_flip(rng: np.random.Generator) -> int:
    return int(rng.integers(2))


@dataclass(frozen=True)
class ProblemSource:
    mode: str
    generator: GeneratorConfig
    fixed_problem: NegotiationProblem | None = None
    path: Path | None = None

    def problem(self, seed_sequence: np.random.SeedSequence) -> NegotiationProblem:
        if self.fixed_problem is not None:
            return self.fixed_problem
        return generate_problem(self.generator, seed_sequence)

    @property
    def fixed_value_counts(self) -> tuple[int, ...] | None:
        return None if self.fixed_problem is None else self.fixed_problem.domain.value_counts


def problem_source(raw: str, generator: GeneratorConfig, *, key_path: str = "problems") -> ProblemSource:
    mode, path = parse_problem_source(raw, key_path)
    if mode == PROBLEM_MODE_FIXED and path is not None:
        return ProblemSource(mode=mode, generator=generator, fixed_problem=read_problem(path), path=path)
    return ProblemSource(mode=PROBLEM_MODE_RANDOM, generator=generator)


def run_episode(
    problem: NegotiationProblem,
    negotiators: tuple[Negotiator, Negotiator],
    *,
    deadline: int,
    first_turn: int,
) -> EpisodeRecord:
    """Play one Alternating Offers session. Negotiators must already be reset with agent ids 0 and 1."""
    state = new_session(deadline, first_turn)
    while True:
        action = negotiators[state.turn].act(state)
        state, result = step(state, action, problem.domain, problem.utilities)
        if result is not None:
            return EpisodeRecord(result=result, final_state=state, first_turn=first_turn)
