from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import TypeAlias

import numpy as np

from .statuses import STATUS_AGREEMENT, STATUS_FAILED, STATUS_RUNNING, is_terminal_status

Outcome: TypeAlias = tuple[int, ...]

WEIGHT_TOLERANCE = 1e-9
DEFAULT_OUTCOME_CAP = 10_000
NUM_AGENTS = 2


class InvalidInputError(ValueError):
    pass


class ProtocolViolationError(RuntimeError):
    pass


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Objectives of a negotiation problem, stored as the size of each value set."""

    value_counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.value_counts) < 1:
            raise InvalidInputError("Domain must have at least one objective.")
        for size in self.value_counts:
            if int(size) < 2:
                raise InvalidInputError("Every objective must have at least two values.")

    @property
    def num_objectives(self) -> int:
        return len(self.value_counts)

    @property
    def total_values(self) -> int:
        return sum(self.value_counts)

    @property
    def outcome_space_size(self) -> int:
        return math.prod(self.value_counts)

    def validate_outcome(self, outcome: Outcome) -> None:
        if len(outcome) != self.num_objectives:
            raise InvalidInputError(
                f"Outcome has {len(outcome)} choices but the domain has {self.num_objectives} objectives."
            )
        for index, (choice, size) in enumerate(zip(outcome, self.value_counts)):
            if not 0 <= int(choice) < size:
                raise InvalidInputError(f"Value index {choice} is out of range for objective {index}.")


@dataclass(frozen=True)
class UtilityFunction:
    objective_weights: tuple[float, ...]
    value_weights: tuple[tuple[float, ...], ...]

    def validate(self, domain: Domain) -> None:
        if len(self.objective_weights) != domain.num_objectives or len(self.value_weights) != domain.num_objectives:
            raise InvalidInputError("Utility function dimensions do not match the domain.")
        if abs(math.fsum(self.objective_weights) - 1.0) > WEIGHT_TOLERANCE:
            raise InvalidInputError("Objective weights must sum to 1.")
        for index, (weights, size) in enumerate(zip(self.value_weights, domain.value_counts)):
            if len(weights) != size:
                raise InvalidInputError(f"Objective {index} has {len(weights)} value weights, expected {size}.")
            if abs(max(weights) - 1.0) > WEIGHT_TOLERANCE or abs(min(weights)) > WEIGHT_TOLERANCE:
                raise InvalidInputError(f"Value weights of objective {index} must span [0, 1].")
        for weight in self.objective_weights:
            if not 0.0 <= weight <= 1.0:
                raise InvalidInputError("Objective weights must lie in [0, 1].")


@dataclass(frozen=True)
class NegotiationProblem:
    domain: Domain
    utilities: tuple[UtilityFunction, UtilityFunction]

    def validate(self) -> None:
        if len(self.utilities) != NUM_AGENTS:
            raise InvalidInputError("A bilateral problem needs exactly two utility functions.")
        for u_fn in self.utilities:
            u_fn.validate(self.domain)


@dataclass(frozen=True)
class Accept:
    pass


@dataclass(frozen=True)
class Offer:
    outcome: Outcome


Action: TypeAlias = Accept | Offer


@dataclass(frozen=True)
class SessionState:
    round: int
    deadline: int
    turn: int
    history: tuple[tuple[int, Outcome], ...] = ()
    status: str = STATUS_RUNNING
    agreement: Outcome | None = None

    @property
    def is_running(self) -> bool:
        return not is_terminal_status(self.status)

    @property
    def progress(self) -> float:
        return self.round / self.deadline


@dataclass(frozen=True)
class EpisodeResult:
    agreement: Outcome | None
    utilities: tuple[float, float]
    rounds_used: int

    @property
    def agreed(self) -> bool:
        return self.agreement is not None


def utility(u_fn: UtilityFunction, domain: Domain, outcome: Outcome) -> float:
    domain.validate_outcome(outcome)
    if len(u_fn.objective_weights) != domain.num_objectives:
        raise InvalidInputError("Utility function dimensions do not match the domain.")
    # Summed in the same order as outcome_utilities.
    total = 0.0
    for index, (weight, choice) in enumerate(zip(u_fn.objective_weights, outcome)):
        total = total + weight * u_fn.value_weights[index][choice]
    return min(1.0, max(0.0, total))


def outcome_utilities(u_fn: UtilityFunction, domain: Domain) -> np.ndarray:
    """Utilities of every outcome, in the order of ``enumerate_outcomes``."""
    table = np.zeros(domain.value_counts, dtype=np.float64)
    for index, (weight, values) in enumerate(zip(u_fn.objective_weights, u_fn.value_weights)):
        shape = [1] * domain.num_objectives
        shape[index] = domain.value_counts[index]
        table = table + weight * np.asarray(values, dtype=np.float64).reshape(shape)
    return np.clip(table.reshape(-1), 0.0, 1.0)


def enumerate_outcomes(domain: Domain, *, cap: int = DEFAULT_OUTCOME_CAP) -> list[Outcome]:
    size = domain.outcome_space_size
    if size > cap:
        raise CapacityError(f"Outcome space of size {size} exceeds the enumeration cap {cap}.")
    return [tuple(choice) for choice in itertools.product(*(range(count) for count in domain.value_counts))]


def new_session(deadline: int, first_turn: int) -> SessionState:
    if deadline < 1:
        raise InvalidInputError("Deadline must be at least one round.")
    if first_turn not in (0, 1):
        raise InvalidInputError("First turn must be agent 0 or agent 1.")
    return SessionState(round=0, deadline=deadline, turn=first_turn)


def last_offer(state: SessionState) -> tuple[int, Outcome] | None:
    return state.history[-1] if state.history else None


def step(
    state: SessionState,
    action: Action,
    domain: Domain,
    utilities: tuple[UtilityFunction, UtilityFunction],
) -> tuple[SessionState, EpisodeResult | None]:
    if not state.is_running:
        raise ProtocolViolationError("Session has already terminated.")

    if isinstance(action, Accept):
        standing = last_offer(state)
        if standing is None:
            raise ProtocolViolationError("Cannot accept before any offer was made.")
        _offerer, outcome = standing
        payoffs = (
            utility(utilities[0], domain, outcome),
            utility(utilities[1], domain, outcome),
        )
        finished = replace(state, status=STATUS_AGREEMENT, agreement=outcome)
        return finished, EpisodeResult(agreement=outcome, utilities=payoffs, rounds_used=state.round)

    if not isinstance(action, Offer):
        raise InvalidInputError(f"Unsupported action type {type(action).__name__}.")

    outcome = tuple(int(choice) for choice in action.outcome)
    domain.validate_outcome(outcome)
    next_round = state.round + 1
    advanced = replace(
        state,
        round=next_round,
        turn=1 - state.turn,
        history=state.history + ((state.turn, outcome),),
    )
    if next_round >= state.deadline:
        failed = replace(advanced, status=STATUS_FAILED)
        return failed, EpisodeResult(agreement=None, utilities=(0.0, 0.0), rounds_used=next_round)
    return advanced, None
