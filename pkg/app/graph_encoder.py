from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Literal, TypeAlias

import numpy as np

from .negotiation import Domain, InvalidInputError, Outcome, UtilityFunction

NODE_FEATURE_WIDTH = 8
NODE_TYPE_HEAD = 0
NODE_TYPE_OBJECTIVE = 1
NODE_TYPE_VALUE = 2
ROLE_FEATURE_OFFSET = 3

# Columns of a value-node row.
COL_VALUE_WEIGHT = 3
COL_OPPONENT_LAST = 4
COL_OWN_LAST = 5
COL_OPPONENT_FRACTION = 6
COL_OWN_FRACTION = 7
HISTORY_COLUMNS = (COL_OPPONENT_LAST, COL_OWN_LAST, COL_OPPONENT_FRACTION, COL_OWN_FRACTION)

# Columns of objective and head rows.
COL_OBJECTIVE_SIZE = 3
COL_OBJECTIVE_WEIGHT = 4
COL_HEAD_OBJECTIVES = 3
COL_HEAD_PROGRESS = 4

SIDE_SELF = "self"
SIDE_OPPONENT = "opponent"
Side: TypeAlias = Literal["self", "opponent"]

_ROLE_NAMES = {NODE_TYPE_HEAD: "head", NODE_TYPE_OBJECTIVE: "objective", NODE_TYPE_VALUE: "value"}


def _value_offsets(value_counts: tuple[int, ...]) -> tuple[int, ...]:
    offsets = [0]
    for count in value_counts[:-1]:
        offsets.append(offsets[-1] + count)
    return tuple(offsets)


@dataclass(frozen=True)
class HistoryStats:
    """Per-value offer statistics for both sides, flattened in (objective, value) order."""

    value_counts: tuple[int, ...]
    opponent_counts: np.ndarray
    own_counts: np.ndarray
    opponent_last: np.ndarray
    own_last: np.ndarray
    opponent_offers: int = 0
    own_offers: int = 0

    @property
    def opponent_fractions(self) -> np.ndarray:
        if self.opponent_offers == 0:
            return np.zeros_like(self.opponent_counts, dtype=np.float64)
        return self.opponent_counts / float(self.opponent_offers)

    @property
    def own_fractions(self) -> np.ndarray:
        if self.own_offers == 0:
            return np.zeros_like(self.own_counts, dtype=np.float64)
        return self.own_counts / float(self.own_offers)


def empty_stats(domain: Domain) -> HistoryStats:
    total = domain.total_values
    return HistoryStats(
        value_counts=domain.value_counts,
        opponent_counts=np.zeros(total, dtype=np.int64),
        own_counts=np.zeros(total, dtype=np.int64),
        opponent_last=np.zeros(total, dtype=np.float64),
        own_last=np.zeros(total, dtype=np.float64),
    )


def _flat_positions(value_counts: tuple[int, ...], offer: Outcome) -> np.ndarray:
    if len(offer) != len(value_counts):
        raise InvalidInputError("Offer does not match the domain of these statistics.")
    for choice, size in zip(offer, value_counts):
        if not 0 <= int(choice) < size:
            raise InvalidInputError("Offer value index is out of range.")
    offsets = _value_offsets(value_counts)
    return np.asarray([offset + int(choice) for offset, choice in zip(offsets, offer)], dtype=np.int64)


def update_stats(stats: HistoryStats, offer: Outcome, side: Side) -> HistoryStats:
    positions = _flat_positions(stats.value_counts, offer)
    last = np.zeros_like(stats.own_last)
    last[positions] = 1.0
    if side == SIDE_SELF:
        counts = stats.own_counts.copy()
        counts[positions] += 1
        return replace(stats, own_counts=counts, own_last=last, own_offers=stats.own_offers + 1)
    if side == SIDE_OPPONENT:
        counts = stats.opponent_counts.copy()
        counts[positions] += 1
        return replace(stats, opponent_counts=counts, opponent_last=last, opponent_offers=stats.opponent_offers + 1)
    raise InvalidInputError(f"Unknown side '{side}'.")


def stats_from_history(domain: Domain, history: tuple[tuple[int, Outcome], ...], agent_id: int) -> HistoryStats:
    """Rebuild statistics from a full offer history as seen by ``agent_id``."""
    total = domain.total_values
    offsets = _value_offsets(domain.value_counts)
    own_counts = np.zeros(total, dtype=np.int64)
    opponent_counts = np.zeros(total, dtype=np.int64)
    own_last = np.zeros(total, dtype=np.float64)
    opponent_last = np.zeros(total, dtype=np.float64)
    own_offers = 0
    opponent_offers = 0
    last_own: Outcome | None = None
    last_opponent: Outcome | None = None
    for offerer, outcome in history:
        target = own_counts if offerer == agent_id else opponent_counts
        for offset, choice in zip(offsets, outcome):
            target[offset + int(choice)] += 1
        if offerer == agent_id:
            own_offers += 1
            last_own = outcome
        else:
            opponent_offers += 1
            last_opponent = outcome
    for outcome, flags in ((last_own, own_last), (last_opponent, opponent_last)):
        if outcome is None:
            continue
        for offset, choice in zip(offsets, outcome):
            flags[offset + int(choice)] = 1.0
    return HistoryStats(
        value_counts=domain.value_counts,
        opponent_counts=opponent_counts,
        own_counts=own_counts,
        opponent_last=opponent_last,
        own_last=own_last,
        opponent_offers=opponent_offers,
        own_offers=own_offers,
    )


@dataclass(frozen=True)
class ObservationGraph:
    node_features: np.ndarray
    edges: tuple[tuple[int, int], ...]
    head_node: int
    objective_nodes: tuple[int, ...]
    value_nodes: tuple[tuple[int, ...], ...]
    value_counts: tuple[int, ...]
    can_accept: bool

    @property
    def num_nodes(self) -> int:
        return int(self.node_features.shape[0])

    def edge_index(self) -> np.ndarray:
        """Directed edge list ``[2, 2E]`` (source row, target row) with both directions of every edge."""
        if not self.edges:
            return np.zeros((2, 0), dtype=np.int64)
        pairs = np.asarray(self.edges, dtype=np.int64)
        return np.concatenate([pairs.T, pairs[:, ::-1].T], axis=1)


def graph_topology(domain: Domain) -> tuple[tuple[tuple[int, int], ...], tuple[int, ...], tuple[tuple[int, ...], ...]]:
    objective_nodes = tuple(range(1, domain.num_objectives + 1))
    next_node = domain.num_objectives + 1
    value_nodes: list[tuple[int, ...]] = []
    edges: list[tuple[int, int]] = []
    for objective_node, count in zip(objective_nodes, domain.value_counts):
        edges.append((0, objective_node))
        nodes = tuple(range(next_node, next_node + count))
        edges.extend((objective_node, node) for node in nodes)
        value_nodes.append(nodes)
        next_node += count
    return tuple(edges), objective_nodes, tuple(value_nodes)


def build_graph(domain: Domain, u_fn: UtilityFunction, stats: HistoryStats, t: int, H: int) -> ObservationGraph:
    if H < 1 or not 0 <= t <= H:
        raise InvalidInputError(f"Round {t} is outside the deadline {H}.")
    if stats.value_counts != domain.value_counts:
        raise InvalidInputError("History statistics belong to a different domain.")

    edges, objective_nodes, value_nodes = graph_topology(domain)
    features = np.zeros((1 + domain.num_objectives + domain.total_values, NODE_FEATURE_WIDTH), dtype=np.float64)

    features[0, NODE_TYPE_HEAD] = 1.0
    features[0, COL_HEAD_OBJECTIVES] = float(domain.num_objectives)
    features[0, COL_HEAD_PROGRESS] = t / H

    opponent_fractions = stats.opponent_fractions
    own_fractions = stats.own_fractions
    flat_index = 0
    for objective, (objective_node, nodes) in enumerate(zip(objective_nodes, value_nodes)):
        features[objective_node, NODE_TYPE_OBJECTIVE] = 1.0
        features[objective_node, COL_OBJECTIVE_SIZE] = float(domain.value_counts[objective])
        features[objective_node, COL_OBJECTIVE_WEIGHT] = u_fn.objective_weights[objective]
        for value, node in enumerate(nodes):
            features[node, NODE_TYPE_VALUE] = 1.0
            features[node, COL_VALUE_WEIGHT] = u_fn.value_weights[objective][value]
            features[node, COL_OPPONENT_LAST] = stats.opponent_last[flat_index]
            features[node, COL_OWN_LAST] = stats.own_last[flat_index]
            features[node, COL_OPPONENT_FRACTION] = opponent_fractions[flat_index]
            features[node, COL_OWN_FRACTION] = own_fractions[flat_index]
            flat_index += 1

    features.setflags(write=False)
    return ObservationGraph(
        node_features=features,
        edges=edges,
        head_node=0,
        objective_nodes=objective_nodes,
        value_nodes=value_nodes,
        value_counts=domain.value_counts,
        can_accept=stats.opponent_offers > 0,
    )


def graph_document(graph: ObservationGraph) -> dict[str, Any]:
    roles: dict[int, str] = {graph.head_node: "head"}
    for objective, node in enumerate(graph.objective_nodes):
        roles[node] = f"objective[{objective}]"
    for objective, nodes in enumerate(graph.value_nodes):
        for value, node in enumerate(nodes):
            roles[node] = f"value[{objective}][{value}]"
    nodes_payload = []
    for node in range(graph.num_nodes):
        row = graph.node_features[node]
        node_type = int(np.argmax(row[:ROLE_FEATURE_OFFSET]))
        nodes_payload.append(
            {
                "id": node,
                "type": _ROLE_NAMES[node_type],
                "role": roles[node],
                "features": [float(value) for value in row],
            }
        )
    return {
        "num_nodes": graph.num_nodes,
        "num_edges": len(graph.edges),
        "can_accept": bool(graph.can_accept),
        "nodes": nodes_payload,
        "edges": [[int(a), int(b)] for a, b in graph.edges],
    }
