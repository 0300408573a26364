from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .graph_encoder import NODE_FEATURE_WIDTH, ObservationGraph
from .negotiation import Accept, Action, InvalidInputError, Offer, Outcome

POLICY_KIND_GNN = "gnn"
POLICY_KIND_FLAT = "flat"
HIDDEN_GAIN = math.sqrt(2.0)
POLICY_HEAD_GAIN = 0.01
VALUE_HEAD_GAIN = 1.0


class NumericError(RuntimeError):
    def __init__(self, message: str, *, layer_index: int) -> None:
        super().__init__(message)
        self.layer_index = layer_index


def layer_init(layer: nn.Linear, std: float = HIDDEN_GAIN, bias_const: float = 0.0) -> nn.Linear:
    nn.init.orthogonal_(layer.weight, std)
    nn.init.constant_(layer.bias, bias_const)
    return layer


@dataclass(frozen=True)
class GraphBatch:
    """Disjoint union of observation graphs, node rows of graph ``g`` contiguous."""

    node_features: torch.Tensor
    edge_index: torch.Tensor
    head_index: torch.Tensor
    value_index: torch.Tensor
    value_group: torch.Tensor
    objective_graph: torch.Tensor
    objective_offsets: torch.Tensor
    objective_sizes: torch.Tensor
    can_accept: torch.Tensor
    value_counts: tuple[tuple[int, ...], ...]

    @property
    def num_graphs(self) -> int:
        return int(self.head_index.shape[0])

    @property
    def num_objectives(self) -> int:
        return int(self.objective_graph.shape[0])


def collate_graphs(graphs: Sequence[ObservationGraph], *, dtype: torch.dtype = torch.float32) -> GraphBatch:
    if not graphs:
        raise InvalidInputError("Cannot batch an empty list of graphs.")
    features: list[np.ndarray] = []
    edges: list[np.ndarray] = []
    head_index: list[int] = []
    value_index: list[int] = []
    value_group: list[int] = []
    objective_graph: list[int] = []
    objective_offsets: list[int] = []
    objective_sizes: list[int] = []
    node_offset = 0
    objective_id = 0
    for graph_id, graph in enumerate(graphs):
        if graph.node_features.shape[1] != NODE_FEATURE_WIDTH:
            raise InvalidInputError(f"Node features must have width {NODE_FEATURE_WIDTH}.")
        features.append(graph.node_features)
        edges.append(graph.edge_index() + node_offset)
        head_index.append(graph.head_node + node_offset)
        for nodes in graph.value_nodes:
            objective_graph.append(graph_id)
            objective_offsets.append(len(value_index))
            objective_sizes.append(len(nodes))
            for node in nodes:
                value_index.append(node + node_offset)
                value_group.append(objective_id)
            objective_id += 1
        node_offset += graph.num_nodes

    return GraphBatch(
        node_features=torch.as_tensor(np.concatenate(features, axis=0), dtype=dtype),
        edge_index=torch.as_tensor(np.concatenate(edges, axis=1), dtype=torch.long),
        head_index=torch.as_tensor(head_index, dtype=torch.long),
        value_index=torch.as_tensor(value_index, dtype=torch.long),
        value_group=torch.as_tensor(value_group, dtype=torch.long),
        objective_graph=torch.as_tensor(objective_graph, dtype=torch.long),
        objective_offsets=torch.as_tensor(objective_offsets, dtype=torch.long),
        objective_sizes=torch.as_tensor(objective_sizes, dtype=torch.long),
        can_accept=torch.as_tensor([bool(graph.can_accept) for graph in graphs], dtype=torch.bool),
        value_counts=tuple(graph.value_counts for graph in graphs),
    )


def segment_sum(values: torch.Tensor, segment: torch.Tensor, num_segments: int) -> torch.Tensor:
    output = values.new_zeros((num_segments, *values.shape[1:]))
    return output.index_add(0, segment, values)


def segment_max(values: torch.Tensor, segment: torch.Tensor, num_segments: int) -> torch.Tensor:
    index = segment.view(-1, *([1] * (values.dim() - 1))).expand_as(values)
    output = values.new_zeros((num_segments, *values.shape[1:]))
    return output.scatter_reduce(0, index, values, reduce="amax", include_self=False)


def segment_log_softmax(scores: torch.Tensor, segment: torch.Tensor, num_segments: int) -> torch.Tensor:
    shift = segment_max(scores.detach(), segment, num_segments)
    shifted = scores - shift[segment]
    log_norm = torch.log(segment_sum(torch.exp(shifted), segment, num_segments))
    return shifted - log_norm[segment]


def segment_softmax(scores: torch.Tensor, segment: torch.Tensor, num_segments: int) -> torch.Tensor:
    return torch.exp(segment_log_softmax(scores, segment, num_segments))


class GATLayer(nn.Module):
    """One graph-attention layer: ``h_u = phi(x_u || sum_v a(x_u, x_v) psi(x_v))`` with multi-head attention."""

    def __init__(self, in_width: int, out_width: int, heads: int, *, negative_slope: float = 0.2) -> None:
        super().__init__()
        if out_width % heads != 0:
            raise InvalidInputError("Layer width must be divisible by the number of attention heads.")
        self.in_width = in_width
        self.out_width = out_width
        self.heads = heads
        self.head_width = out_width // heads
        self.negative_slope = negative_slope
        self.psi = layer_init(nn.Linear(in_width, heads * self.head_width))
        self.attention_target = nn.Parameter(torch.empty(heads, self.head_width))
        self.attention_source = nn.Parameter(torch.empty(heads, self.head_width))
        nn.init.orthogonal_(self.attention_target, 1.0)
        nn.init.orthogonal_(self.attention_source, 1.0)
        self.phi = layer_init(nn.Linear(in_width + heads * self.head_width, out_width))

    def attention(self, x: torch.Tensor, edge_index: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return attention coefficients ``[E, heads]`` over incoming edges and transformed nodes ``[N, heads, D]``."""
        if x.shape[-1] != self.in_width:
            raise InvalidInputError(f"Expected feature width {self.in_width}, got {x.shape[-1]}.")
        transformed = self.psi(x).view(-1, self.heads, self.head_width)
        target_scores = (transformed * self.attention_target).sum(dim=-1)
        source_scores = (transformed * self.attention_source).sum(dim=-1)
        source, target = edge_index[0], edge_index[1]
        edge_scores = F.leaky_relu(target_scores[target] + source_scores[source], self.negative_slope)
        return segment_softmax(edge_scores, target, x.shape[0]), transformed

    def forward(self, x: torch.Tensor, edge_index: torch.Tensor) -> torch.Tensor:
        coefficients, transformed = self.attention(x, edge_index)
        source, target = edge_index[0], edge_index[1]
        messages = transformed[source] * coefficients.unsqueeze(-1)
        # Isolated nodes keep a zero aggregate.
        aggregate = segment_sum(messages, target, x.shape[0]).reshape(x.shape[0], -1)
        return self.phi(torch.cat([x, aggregate], dim=-1))


@dataclass(frozen=True)
class CompositeAction:
    """Full sample of the factored policy: accept flag plus one value per objective."""

    accept: bool
    choices: Outcome

    def to_action(self) -> Action:
        return Accept() if self.accept else Offer(self.choices)


@dataclass(frozen=True)
class ActionDistribution:
    accept_logits: torch.Tensor
    offer_logits: torch.Tensor
    value_group: torch.Tensor
    objective_graph: torch.Tensor
    objective_offsets: torch.Tensor
    objective_sizes: torch.Tensor
    can_accept: torch.Tensor
    offer_logprob_on_accept: bool = True

    @classmethod
    def from_logits(
        cls,
        batch: GraphBatch,
        accept_logits: torch.Tensor,
        offer_logits: torch.Tensor,
        *,
        offer_logprob_on_accept: bool = True,
    ) -> "ActionDistribution":
        return cls(
            accept_logits=accept_logits,
            offer_logits=offer_logits,
            value_group=batch.value_group,
            objective_graph=batch.objective_graph,
            objective_offsets=batch.objective_offsets,
            objective_sizes=batch.objective_sizes,
            can_accept=batch.can_accept,
            offer_logprob_on_accept=offer_logprob_on_accept,
        )

    @property
    def num_graphs(self) -> int:
        return int(self.accept_logits.shape[0])

    @property
    def num_objectives(self) -> int:
        return int(self.objective_graph.shape[0])

    def with_accept_mask(self, can_accept: torch.Tensor) -> "ActionDistribution":
        return replace(self, can_accept=can_accept.to(dtype=torch.bool).reshape(-1))

    def accept_log_probs(self) -> torch.Tensor:
        """``[G, 2]`` log-probabilities of (reject, accept); accept is masked out where illegal."""
        mask = torch.stack([torch.ones_like(self.can_accept), self.can_accept], dim=-1)
        masked = self.accept_logits.masked_fill(~mask, torch.finfo(self.accept_logits.dtype).min)
        return F.log_softmax(masked, dim=-1)

    def offer_log_probs(self) -> torch.Tensor:
        return segment_log_softmax(self.offer_logits, self.value_group, self.num_objectives)

    def objective_probs(self, objective: int) -> torch.Tensor:
        start = int(self.objective_offsets[objective])
        size = int(self.objective_sizes[objective])
        return torch.exp(self.offer_log_probs()[start : start + size])

    def sample(self, generator: torch.Generator | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        accept_probs = torch.exp(self.accept_log_probs())
        accept = torch.multinomial(accept_probs, 1, generator=generator).squeeze(-1).to(torch.bool)
        offer_probs = torch.exp(self.offer_log_probs())
        choices = []
        for objective in range(self.num_objectives):
            start = int(self.objective_offsets[objective])
            size = int(self.objective_sizes[objective])
            choices.append(torch.multinomial(offer_probs[start : start + size], 1, generator=generator))
        return accept & self.can_accept, torch.cat(choices).to(torch.long)

    def mode(self) -> tuple[torch.Tensor, torch.Tensor]:
        accept = torch.argmax(self.accept_log_probs(), dim=-1).to(torch.bool)
        offer_log_probs = self.offer_log_probs()
        choices = []
        for objective in range(self.num_objectives):
            start = int(self.objective_offsets[objective])
            size = int(self.objective_sizes[objective])
            choices.append(torch.argmax(offer_log_probs[start : start + size]).reshape(1))
        return accept & self.can_accept, torch.cat(choices).to(torch.long)

    def log_prob(self, accept: torch.Tensor, choices: torch.Tensor) -> torch.Tensor:
        """Composite log-probability per graph ``[G]``."""
        accept = accept.to(torch.bool).reshape(-1)
        choices = choices.to(torch.long).reshape(-1)
        if accept.shape[0] != self.num_graphs or choices.shape[0] != self.num_objectives:
            raise InvalidInputError("Action shape does not match the distribution.")
        if bool(((choices < 0) | (choices >= self.objective_sizes)).any()):
            raise InvalidInputError("Action value index is out of range.")
        if bool((accept & ~self.can_accept).any()):
            raise InvalidInputError("Accept is not a legal action for this observation.")
        accept_term = self.accept_log_probs().gather(1, accept.long().unsqueeze(-1)).squeeze(-1)
        offer_terms = self.offer_log_probs()[self.objective_offsets + choices]
        if not self.offer_logprob_on_accept:
            offer_terms = offer_terms * (~accept[self.objective_graph]).to(offer_terms.dtype)
        return accept_term + segment_sum(offer_terms, self.objective_graph, self.num_graphs)

    def entropy(self) -> torch.Tensor:
        accept_log_probs = self.accept_log_probs()
        accept_entropy = -torch.special.xlogy(torch.exp(accept_log_probs), torch.exp(accept_log_probs)).sum(dim=-1)
        offer_log_probs = self.offer_log_probs()
        offer_probs = torch.exp(offer_log_probs)
        value_entropy = -torch.special.xlogy(offer_probs, offer_probs)
        objective_entropy = segment_sum(value_entropy, self.value_group, self.num_objectives)
        return accept_entropy + segment_sum(objective_entropy, self.objective_graph, self.num_graphs)


@dataclass(frozen=True)
class PolicyOutput:
    distribution: ActionDistribution
    state_value: torch.Tensor


class NegotiationPolicy(nn.Module):
    kind = "policy"

    def __init__(self, *, offer_logprob_on_accept: bool = True) -> None:
        super().__init__()
        self.offer_logprob_on_accept = offer_logprob_on_accept

    def architecture(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def forward(self, batch: GraphBatch) -> PolicyOutput:  # type: ignore[override]
        raise NotImplementedError


class GraphPolicy(NegotiationPolicy):
    kind = POLICY_KIND_GNN

    def __init__(
        self,
        *,
        num_layers: int = 4,
        hidden_width: int = 256,
        attention_heads: int = 4,
        input_width: int = NODE_FEATURE_WIDTH,
        negative_slope: float = 0.2,
        offer_logprob_on_accept: bool = True,
    ) -> None:
        super().__init__(offer_logprob_on_accept=offer_logprob_on_accept)
        self.num_layers = num_layers
        self.hidden_width = hidden_width
        self.attention_heads = attention_heads
        self.input_width = input_width
        self.negative_slope = negative_slope
        widths = [input_width] + [hidden_width] * num_layers
        self.layers = nn.ModuleList(
            GATLayer(widths[index], widths[index + 1], attention_heads, negative_slope=negative_slope)
            for index in range(num_layers)
        )
        self.value_head = layer_init(nn.Linear(hidden_width, 1), std=VALUE_HEAD_GAIN)
        self.accept_head = layer_init(nn.Linear(hidden_width, 2), std=POLICY_HEAD_GAIN)
        self.offer_head = layer_init(nn.Linear(hidden_width, 1), std=POLICY_HEAD_GAIN)

    def architecture(self) -> dict[str, Any]:
        return {
            "num_layers": self.num_layers,
            "hidden_width": self.hidden_width,
            "attention_heads": self.attention_heads,
            "input_width": self.input_width,
            "negative_slope": self.negative_slope,
            "offer_logprob_on_accept": self.offer_logprob_on_accept,
        }

    def embed(self, batch: GraphBatch) -> torch.Tensor:
        hidden = batch.node_features.to(self.dtype)
        for index, layer in enumerate(self.layers):
            hidden = layer(hidden, batch.edge_index)
            if index < len(self.layers) - 1:
                hidden = F.relu(hidden)
            if not bool(torch.isfinite(hidden).all()):
                raise NumericError(f"Non-finite activations after GAT layer {index}.", layer_index=index)
        return hidden

    def forward(self, batch: GraphBatch) -> PolicyOutput:  # type: ignore[override]
        hidden = self.embed(batch)
        head = hidden[batch.head_index]
        state_value = self.value_head(head).squeeze(-1)
        accept_logits = self.accept_head(head)
        offer_logits = self.offer_head(hidden[batch.value_index]).squeeze(-1)
        for tensor in (state_value, accept_logits, offer_logits):
            if not bool(torch.isfinite(tensor).all()):
                raise NumericError("Non-finite policy outputs.", layer_index=self.num_layers)
        distribution = ActionDistribution.from_logits(
            batch,
            accept_logits,
            offer_logits,
            offer_logprob_on_accept=self.offer_logprob_on_accept,
        )
        return PolicyOutput(distribution=distribution, state_value=state_value)


def parameter_count(policy: nn.Module) -> int:
    return sum(int(parameter.numel()) for parameter in policy.parameters())


def forward(policy: NegotiationPolicy, graph: ObservationGraph) -> PolicyOutput:
    return policy(collate_graphs([graph], dtype=policy.dtype))


def sample_composite(
    dist: ActionDistribution,
    history_nonempty: bool,
    generator: torch.Generator | None = None,
    *,
    greedy: bool = False,
) -> tuple[CompositeAction, float]:
    if dist.num_graphs != 1:
        raise InvalidInputError("Sampling a single action needs a single-graph distribution.")
    masked = dist.with_accept_mask(torch.tensor([bool(history_nonempty)]))
    accept, choices = masked.mode() if greedy else masked.sample(generator)
    log_probability = float(masked.log_prob(accept, choices)[0])
    return CompositeAction(accept=bool(accept[0]), choices=tuple(int(c) for c in choices.tolist())), log_probability


def sample_action(
    dist: ActionDistribution,
    history_nonempty: bool,
    generator: torch.Generator | None = None,
) -> tuple[Action, float]:
    composite, log_probability = sample_composite(dist, history_nonempty, generator)
    return composite.to_action(), log_probability


def log_prob(dist: ActionDistribution, action: Action | CompositeAction) -> float:
    if isinstance(action, CompositeAction):
        composite = action
    elif isinstance(action, Offer):
        composite = CompositeAction(accept=False, choices=tuple(int(c) for c in action.outcome))
    elif isinstance(action, Accept):
        if dist.offer_logprob_on_accept:
            raise InvalidInputError("Accept log-probability needs the sampled offer components.")
        composite = CompositeAction(accept=True, choices=(0,) * dist.num_objectives)
    else:
        raise InvalidInputError(f"Unsupported action type {type(action).__name__}.")
    if len(composite.choices) != dist.num_objectives:
        raise InvalidInputError("Action shape does not match the distribution.")
    value = dist.log_prob(
        torch.tensor([composite.accept]),
        torch.tensor(composite.choices, dtype=torch.long),
    )
    return float(value[0])


def entropy(dist: ActionDistribution) -> float:
    return float(dist.entropy().sum())
