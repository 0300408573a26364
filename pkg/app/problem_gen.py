from __future__ import annotations

import numpy as np

from .config import GeneratorConfig
from .negotiation import Domain, NegotiationProblem, UtilityFunction


class GenerationError(RuntimeError):
    pass


def generate_domain(config: GeneratorConfig, rng: np.random.Generator) -> Domain:
    config.validate()
    for _attempt in range(config.max_attempts):
        num_objectives = int(rng.integers(config.min_objectives, config.max_objectives, endpoint=True))
        sizes = rng.integers(config.min_values, config.max_values, size=num_objectives, endpoint=True)
        outcome_space = int(np.prod(sizes, dtype=np.int64))
        if config.min_outcomes <= outcome_space <= config.max_outcomes:
            return Domain(value_counts=tuple(int(size) for size in sizes))
    raise GenerationError(
        f"No domain with {config.min_outcomes}..{config.max_outcomes} outcomes found in "
        f"{config.max_attempts} attempts."
    )


def _normalized_value_weights(rng: np.random.Generator, size: int) -> tuple[float, ...]:
    while True:
        raw = rng.random(size)
        low = float(raw.min())
        span = float(raw.max()) - low
        if span > 0.0:
            break
    scaled = (raw - low) / span
    # Pin the extremes so min/max are exactly 0 and 1.
    scaled[int(raw.argmin())] = 0.0
    scaled[int(raw.argmax())] = 1.0
    return tuple(float(value) for value in scaled)


def generate_utility(domain: Domain, rng: np.random.Generator) -> UtilityFunction:
    # 1 - U[0, 1) lies in (0, 1]
    raw_weights = 1.0 - rng.random(domain.num_objectives)
    objective_weights = raw_weights / raw_weights.sum()
    value_weights = tuple(_normalized_value_weights(rng, size) for size in domain.value_counts)
    return UtilityFunction(
        objective_weights=tuple(float(weight) for weight in objective_weights),
        value_weights=value_weights,
    )


def generate_problem(config: GeneratorConfig, seed_sequence: np.random.SeedSequence) -> NegotiationProblem:
    domain_seq, first_seq, second_seq = seed_sequence.spawn(3)
    domain = generate_domain(config, np.random.default_rng(domain_seq))
    return NegotiationProblem(
        domain=domain,
        utilities=(
            generate_utility(domain, np.random.default_rng(first_seq)),
            generate_utility(domain, np.random.default_rng(second_seq)),
        ),
    )


def problem_seed_sequence(seed: int, stream: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))
