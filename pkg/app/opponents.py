from __future__ import annotations

import bisect
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .config import OPPONENT_NAMES, ConfigError, OpponentConfig
from .negotiation import (
    Accept,
    Action,
    Domain,
    InvalidInputError,
    Offer,
    Outcome,
    ProtocolViolationError,
    SessionState,
    UtilityFunction,
    enumerate_outcomes,
    last_offer,
    outcome_utilities,
    utility,
)

KIND_BOULWARE = "boulware"
KIND_CONCEDER = "conceder"
KIND_LINEAR = "linear"
KIND_RANDOM = "random"

TIME_DEPENDENT_KINDS = frozenset({KIND_BOULWARE, KIND_CONCEDER, KIND_LINEAR})
DEFAULT_EXPONENTS = {
    KIND_BOULWARE: OpponentConfig.boulware_exponent,
    KIND_LINEAR: OpponentConfig.linear_exponent,
    KIND_CONCEDER: OpponentConfig.conceder_exponent,
}
DEFAULT_RANDOM_ACCEPT_THRESHOLD = OpponentConfig.random_accept_threshold


@dataclass(frozen=True)
class OpponentSpec:
    kind: str
    concession_exponent: float = 1.0
    reservation: float = 0.0
    accept_threshold: float = DEFAULT_RANDOM_ACCEPT_THRESHOLD

    def __post_init__(self) -> None:
        if self.kind not in OPPONENT_NAMES:
            raise InvalidInputError(f"Unknown opponent kind '{self.kind}'.")
        if self.concession_exponent <= 0:
            raise InvalidInputError("Concession exponent must be positive.")
        if not 0.0 <= self.reservation < 1.0:
            raise InvalidInputError("Reservation utility must lie in [0, 1).")
        if not 0.0 <= self.accept_threshold <= 1.0:
            raise InvalidInputError("Accept threshold must lie in [0, 1].")


@dataclass(frozen=True)
class OpponentState:
    """Outcomes sorted ascending by own utility, ties broken by lexicographic index."""

    sorted_outcomes: tuple[Outcome, ...]
    sorted_utilities: tuple[float, ...]


def default_spec(kind: str) -> OpponentSpec:
    normalized = str(kind).strip().lower()
    if normalized == KIND_RANDOM:
        return OpponentSpec(kind=KIND_RANDOM)
    if normalized not in DEFAULT_EXPONENTS:
        raise InvalidInputError(f"Unknown opponent kind '{kind}'.")
    return OpponentSpec(kind=normalized, concession_exponent=DEFAULT_EXPONENTS[normalized])


def opponent_specs(config: OpponentConfig, prefix: str = "opponent") -> dict[str, OpponentSpec]:
    """One spec per opponent kind; invalid parameters surface as ConfigError."""
    try:
        specs = {
            kind: OpponentSpec(
                kind=kind,
                concession_exponent=float(getattr(config, f"{kind}_exponent")),
                reservation=config.reservation,
            )
            for kind in sorted(TIME_DEPENDENT_KINDS)
        }
        specs[KIND_RANDOM] = OpponentSpec(kind=KIND_RANDOM, accept_threshold=config.random_accept_threshold)
    except InvalidInputError as error:
        raise ConfigError(f"{prefix}: {error}") from error
    return specs


def target_utility(spec: OpponentSpec, progress: float) -> float:
    if not 0.0 <= progress <= 1.0:
        raise InvalidInputError(f"Progress must lie in [0, 1], got {progress}.")
    max_utility = 1.0
    return max_utility - (max_utility - spec.reservation) * progress ** (1.0 / spec.concession_exponent)


def build_opponent_state(u_fn: UtilityFunction, domain: Domain) -> OpponentState:
    outcomes = enumerate_outcomes(domain)
    utilities = outcome_utilities(u_fn, domain)
    # Stable sort keeps lexicographic order among equal utilities.
    order = np.argsort(utilities, kind="stable")
    return OpponentState(
        sorted_outcomes=tuple(outcomes[int(index)] for index in order),
        sorted_utilities=tuple(float(utilities[int(index)]) for index in order),
    )


def select_offer(state: OpponentState, target: float) -> Outcome:
    position = bisect.bisect_left(state.sorted_utilities, target)
    if position >= len(state.sorted_outcomes):
        best = state.sorted_utilities[-1]
        # Lowest lexicographic index among the best outcomes.
        return state.sorted_outcomes[bisect.bisect_left(state.sorted_utilities, best)]
    return state.sorted_outcomes[position]


class Negotiator(ABC):
    """Turn-based negotiating agent: ``reset`` once per episode, then ``act`` on its turns."""

    name: str = "negotiator"

    def __init__(self) -> None:
        self.domain: Domain | None = None
        self.u_fn: UtilityFunction | None = None
        self.agent_id = 0

    def reset(self, domain: Domain, u_fn: UtilityFunction, seed: int | np.random.SeedSequence, agent_id: int = 1) -> None:
        self.domain = domain
        self.u_fn = u_fn
        self.agent_id = int(agent_id)
        self.on_reset(np.random.default_rng(seed))

    def on_reset(self, rng: np.random.Generator) -> None:
        pass

    def _check_turn(self, session: SessionState) -> None:
        if self.domain is None or self.u_fn is None:
            raise ProtocolViolationError(f"{self.name} was not reset before acting.")
        if not session.is_running:
            raise ProtocolViolationError(f"{self.name} cannot act on a terminated session.")
        if session.turn != self.agent_id:
            raise ProtocolViolationError(f"{self.name} (agent {self.agent_id}) called out of turn.")

    def standing_offer_utility(self, session: SessionState) -> float | None:
        standing = last_offer(session)
        if standing is None or standing[0] == self.agent_id:
            return None
        assert self.domain is not None and self.u_fn is not None
        return utility(self.u_fn, self.domain, standing[1])

    @abstractmethod
    def act(self, session: SessionState) -> Action:
        raise NotImplementedError


class TimeDependentNegotiator(Negotiator):
    def __init__(self, spec: OpponentSpec) -> None:
        super().__init__()
        if spec.kind not in TIME_DEPENDENT_KINDS:
            raise InvalidInputError(f"{spec.kind} is not a time-dependent strategy.")
        self.spec = spec
        self.name = spec.kind
        self.state: OpponentState | None = None

    def on_reset(self, rng: np.random.Generator) -> None:
        assert self.domain is not None and self.u_fn is not None
        self.state = build_opponent_state(self.u_fn, self.domain)

    def act(self, session: SessionState) -> Action:
        self._check_turn(session)
        assert self.state is not None
        target = target_utility(self.spec, session.progress)
        standing = self.standing_offer_utility(session)
        if standing is not None and standing >= target:
            return Accept()
        return Offer(select_offer(self.state, target))


class RandomNegotiator(Negotiator):
    def __init__(self, spec: OpponentSpec | None = None) -> None:
        super().__init__()
        self.spec = spec or OpponentSpec(kind=KIND_RANDOM)
        self.name = KIND_RANDOM
        self.rng = np.random.default_rng(0)

    def on_reset(self, rng: np.random.Generator) -> None:
        self.rng = rng

    def act(self, session: SessionState) -> Action:
        self._check_turn(session)
        assert self.domain is not None
        standing = self.standing_offer_utility(session)
        if standing is not None and standing > self.spec.accept_threshold:
            return Accept()
        return Offer(tuple(int(self.rng.integers(size)) for size in self.domain.value_counts))


def make_opponent(name: str, spec: OpponentSpec | None = None) -> Negotiator:
    resolved = spec or default_spec(name)
    if resolved.kind == KIND_RANDOM:
        return RandomNegotiator(resolved)
    return TimeDependentNegotiator(resolved)
