from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from .negotiation import Domain, InvalidInputError, NegotiationProblem, UtilityFunction

PROBLEM_FORMAT_VERSION = 1


class ProblemFormatError(ValueError):
    pass


class _CanonicalDumper(yaml.SafeDumper):
    pass


def _represent_float(dumper: yaml.SafeDumper, value: float) -> yaml.ScalarNode:
    return dumper.represent_scalar("tag:yaml.org,2002:float", format(value, ".17g"))


_CanonicalDumper.add_representer(float, _represent_float)


def problem_to_document(problem: NegotiationProblem) -> dict[str, Any]:
    return {
        "format": PROBLEM_FORMAT_VERSION,
        "domain": {"objectives": [int(size) for size in problem.domain.value_counts]},
        "utilities": [
            {
                "objectives": [
                    {
                        "size": int(size),
                        "weight": float(weight),
                        "value_weights": [float(value) for value in values],
                    }
                    for size, weight, values in zip(
                        problem.domain.value_counts,
                        u_fn.objective_weights,
                        u_fn.value_weights,
                    )
                ]
            }
            for u_fn in problem.utilities
        ],
    }


def dumps_problem(problem: NegotiationProblem) -> str:
    return yaml.dump(
        problem_to_document(problem),
        Dumper=_CanonicalDumper,
        sort_keys=False,
        default_flow_style=None,
        width=4096,
    )


def _as_float(raw: object, where: str) -> float:
    try:
        return float(raw)  # type: ignore[arg-type]
    except (TypeError, ValueError) as error:
        raise ProblemFormatError(f"{where} must be a number.") from error


def problem_from_document(payload: object) -> NegotiationProblem:
    if not isinstance(payload, dict):
        raise ProblemFormatError("Problem document must be a mapping.")
    if payload.get("format") != PROBLEM_FORMAT_VERSION:
        raise ProblemFormatError(f"Unsupported problem format {payload.get('format')!r}.")

    domain_block = payload.get("domain")
    if not isinstance(domain_block, dict) or not isinstance(domain_block.get("objectives"), list):
        raise ProblemFormatError("Problem document needs a domain.objectives list.")
    try:
        domain = Domain(value_counts=tuple(int(size) for size in domain_block["objectives"]))
    except (TypeError, ValueError) as error:
        raise ProblemFormatError(f"Invalid domain: {error}") from error

    utilities_block = payload.get("utilities")
    if not isinstance(utilities_block, list) or len(utilities_block) != 2:
        raise ProblemFormatError("Problem document needs exactly two utilities.")

    utilities: list[UtilityFunction] = []
    for agent_index, side in enumerate(utilities_block):
        objectives = side.get("objectives") if isinstance(side, dict) else None
        if not isinstance(objectives, list) or len(objectives) != domain.num_objectives:
            raise ProblemFormatError(f"utilities[{agent_index}].objectives must match the domain.")
        weights: list[float] = []
        values: list[tuple[float, ...]] = []
        for objective_index, objective in enumerate(objectives):
            where = f"utilities[{agent_index}].objectives[{objective_index}]"
            if not isinstance(objective, dict):
                raise ProblemFormatError(f"{where} must be a mapping.")
            if int(objective.get("size", -1)) != domain.value_counts[objective_index]:
                raise ProblemFormatError(f"{where}.size does not match the domain.")
            raw_values = objective.get("value_weights")
            if not isinstance(raw_values, list):
                raise ProblemFormatError(f"{where}.value_weights must be a list.")
            weights.append(_as_float(objective.get("weight"), f"{where}.weight"))
            values.append(tuple(_as_float(value, f"{where}.value_weights") for value in raw_values))
        utilities.append(UtilityFunction(objective_weights=tuple(weights), value_weights=tuple(values)))

    problem = NegotiationProblem(domain=domain, utilities=(utilities[0], utilities[1]))
    try:
        problem.validate()
    except InvalidInputError as error:
        raise ProblemFormatError(f"Invalid utility function: {error}") from error
    return problem


def loads_problem(text: str) -> NegotiationProblem:
    try:
        payload = yaml.safe_load(text)
    except yaml.YAMLError as error:
        raise ProblemFormatError(f"Problem file is not valid YAML: {error}") from error
    return problem_from_document(payload)


def write_problem(problem: NegotiationProblem, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_problem(problem), encoding="utf-8")


def read_problem(path: Path) -> NegotiationProblem:
    if not path.exists():
        raise ProblemFormatError(f"Problem file not found: {path}.")
    return loads_problem(path.read_text(encoding="utf-8"))
