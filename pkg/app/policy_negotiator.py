from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .graph_encoder import (
    SIDE_OPPONENT,
    SIDE_SELF,
    HistoryStats,
    ObservationGraph,
    build_graph,
    empty_stats,
    update_stats,
)
from .negotiation import Action, SessionState
from .opponents import Negotiator
from .policy_net import CompositeAction, NegotiationPolicy, forward, sample_composite


@dataclass(frozen=True)
class PolicyStep:
    graph: ObservationGraph
    action: CompositeAction
    log_prob: float
    value: float


class PolicyNegotiator(Negotiator):
    """Runs a policy network behind the same interface as the baseline opponents."""

    name = "policy"

    def __init__(self, policy: NegotiationPolicy, *, greedy: bool = False, record: bool = False) -> None:
        super().__init__()
        self.policy = policy
        self.greedy = greedy
        self.record = record
        self.generator = torch.Generator()
        self.stats: HistoryStats | None = None
        self.steps: list[PolicyStep] = []
        self._seen = 0

    def on_reset(self, rng: np.random.Generator) -> None:
        assert self.domain is not None
        self.generator = torch.Generator().manual_seed(int(rng.integers(2**62)))
        self.stats = empty_stats(self.domain)
        self.steps = []
        self._seen = 0

    def _sync_history(self, session: SessionState) -> HistoryStats:
        assert self.stats is not None
        stats = self.stats
        for offerer, outcome in session.history[self._seen :]:
            stats = update_stats(stats, outcome, SIDE_SELF if offerer == self.agent_id else SIDE_OPPONENT)
        self.stats = stats
        self._seen = len(session.history)
        return stats

    def observe(self, session: SessionState) -> ObservationGraph:
        assert self.domain is not None and self.u_fn is not None
        stats = self._sync_history(session)
        return build_graph(self.domain, self.u_fn, stats, session.round, session.deadline)

    def act(self, session: SessionState) -> Action:
        self._check_turn(session)
        graph = self.observe(session)
        with torch.no_grad():
            output = forward(self.policy, graph)
            composite, log_probability = sample_composite(
                output.distribution,
                graph.can_accept,
                self.generator,
                greedy=self.greedy,
            )
        if self.record:
            self.steps.append(
                PolicyStep(graph=graph, action=composite, log_prob=log_probability, value=float(output.state_value[0]))
            )
        return composite.to_action()
