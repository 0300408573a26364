from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import torch
from torch import nn

from .graph_encoder import COL_HEAD_PROGRESS, HISTORY_COLUMNS, ObservationGraph
from .negotiation import InvalidInputError
from .policy_net import (
    POLICY_HEAD_GAIN,
    POLICY_KIND_FLAT,
    VALUE_HEAD_GAIN,
    ActionDistribution,
    GraphBatch,
    NegotiationPolicy,
    NumericError,
    PolicyOutput,
    layer_init,
)


def flat_width(value_counts: tuple[int, ...]) -> int:
    return len(HISTORY_COLUMNS) * sum(value_counts) + 1


@dataclass(frozen=True)
class FlatObservation:
    """Fixed-width vector: four history features per value, then deadline progress."""

    vector: np.ndarray
    value_counts: tuple[int, ...]
    can_accept: bool

    @property
    def width(self) -> int:
        return int(self.vector.shape[0])


def flat_observation(graph: ObservationGraph) -> FlatObservation:
    value_rows = [node for nodes in graph.value_nodes for node in nodes]
    history = graph.node_features[np.asarray(value_rows, dtype=np.int64)][:, list(HISTORY_COLUMNS)]
    progress = graph.node_features[graph.head_node, COL_HEAD_PROGRESS]
    vector = np.concatenate([history.reshape(-1), np.asarray([progress])]).astype(np.float64)
    return FlatObservation(vector=vector, value_counts=graph.value_counts, can_accept=graph.can_accept)


def _layout(value_counts: tuple[int, ...], num_graphs: int) -> dict[str, torch.Tensor]:
    sizes = torch.as_tensor(value_counts, dtype=torch.long).repeat(num_graphs)
    offsets = torch.cumsum(sizes, dim=0) - sizes
    objectives = len(value_counts)
    return {
        "value_group": torch.repeat_interleave(torch.arange(sizes.shape[0]), sizes),
        "objective_graph": torch.repeat_interleave(torch.arange(num_graphs), objectives),
        "objective_offsets": offsets,
        "objective_sizes": sizes,
    }


class FlatPolicy(NegotiationPolicy):
    """Multilayer perceptron over a flat observation, tied to one domain."""

    kind = POLICY_KIND_FLAT

    def __init__(
        self,
        value_counts: tuple[int, ...],
        *,
        hidden_layers: int = 2,
        hidden_width: int = 256,
        offer_logprob_on_accept: bool = True,
    ) -> None:
        super().__init__(offer_logprob_on_accept=offer_logprob_on_accept)
        if not value_counts:
            raise InvalidInputError("Flat policy needs a domain with at least one objective.")
        self.value_counts = tuple(int(size) for size in value_counts)
        self.hidden_layers = hidden_layers
        self.hidden_width = hidden_width
        self.input_width = flat_width(self.value_counts)
        blocks: list[nn.Module] = []
        width = self.input_width
        for _ in range(hidden_layers):
            blocks.append(layer_init(nn.Linear(width, hidden_width)))
            blocks.append(nn.ReLU())
            width = hidden_width
        self.trunk = nn.Sequential(*blocks)
        self.value_head = layer_init(nn.Linear(hidden_width, 1), std=VALUE_HEAD_GAIN)
        self.accept_head = layer_init(nn.Linear(hidden_width, 2), std=POLICY_HEAD_GAIN)
        self.offer_head = layer_init(nn.Linear(hidden_width, sum(self.value_counts)), std=POLICY_HEAD_GAIN)

    def architecture(self) -> dict[str, Any]:
        return {
            "value_counts": list(self.value_counts),
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "offer_logprob_on_accept": self.offer_logprob_on_accept,
        }

    def heads(self, features: torch.Tensor, can_accept: torch.Tensor) -> PolicyOutput:
        if features.dim() != 2 or features.shape[1] != self.input_width:
            raise InvalidInputError(
                f"Flat observation width {features.shape[-1]} does not match the policy width {self.input_width}."
            )
        hidden = self.trunk(features.to(self.dtype))
        if not bool(torch.isfinite(hidden).all()):
            raise NumericError("Non-finite activations in the flat trunk.", layer_index=self.hidden_layers - 1)
        num_graphs = int(features.shape[0])
        distribution = ActionDistribution(
            accept_logits=self.accept_head(hidden),
            offer_logits=self.offer_head(hidden).reshape(-1),
            can_accept=can_accept.to(torch.bool).reshape(-1),
            offer_logprob_on_accept=self.offer_logprob_on_accept,
            **_layout(self.value_counts, num_graphs),
        )
        return PolicyOutput(distribution=distribution, state_value=self.value_head(hidden).squeeze(-1))

    def forward(self, batch: GraphBatch) -> PolicyOutput:  # type: ignore[override]
        for value_counts in batch.value_counts:
            if tuple(value_counts) != self.value_counts:
                raise InvalidInputError(
                    f"Flat policy is fixed to domain {self.value_counts}, got {tuple(value_counts)}."
                )
        history = batch.node_features[batch.value_index][:, list(HISTORY_COLUMNS)]
        history = history.reshape(batch.num_graphs, -1)
        progress = batch.node_features[batch.head_index, COL_HEAD_PROGRESS].unsqueeze(-1)
        return self.heads(torch.cat([history, progress], dim=-1), batch.can_accept)


def flat_forward(policy: FlatPolicy, obs: FlatObservation) -> PolicyOutput:
    if obs.width != policy.input_width or tuple(obs.value_counts) != policy.value_counts:
        raise InvalidInputError(
            f"Flat observation width {obs.width} does not match the policy width {policy.input_width}."
        )
    features = torch.as_tensor(obs.vector, dtype=policy.dtype).unsqueeze(0)
    return policy.heads(features, torch.tensor([bool(obs.can_accept)]))
