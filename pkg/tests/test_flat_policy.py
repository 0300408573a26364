from __future__ import annotations

import math
import unittest

import torch

from app.flat_policy import FlatPolicy, flat_forward, flat_observation, flat_width
from app.graph_encoder import SIDE_OPPONENT, SIDE_SELF, build_graph, empty_stats, update_stats
from app.negotiation import Domain, InvalidInputError, Offer, UtilityFunction
from app.policy_net import GraphPolicy, collate_graphs, entropy, forward, log_prob

DOMAIN = Domain(value_counts=(2, 3))
U_FN = UtilityFunction(objective_weights=(0.25, 0.75), value_weights=((1.0, 0.0), (0.0, 0.4, 1.0)))


def midgame_graph():
    stats = update_stats(empty_stats(DOMAIN), (1, 2), SIDE_OPPONENT)
    stats = update_stats(stats, (0, 0), SIDE_SELF)
    return build_graph(DOMAIN, U_FN, stats, 10, 40)


class FlatObservationTests(unittest.TestCase):
    def test_vector_layout(self) -> None:
        obs = flat_observation(midgame_graph())
        self.assertEqual(obs.width, flat_width((2, 3)))
        self.assertEqual(obs.width, 21)
        self.assertEqual(float(obs.vector[-1]), 0.25)
        # Value (0, 1): opponent last, own last, opponent fraction, own fraction.
        self.assertEqual(obs.vector[4:8].tolist(), [1.0, 0.0, 1.0, 0.0])
        self.assertEqual(obs.vector[0:4].tolist(), [0.0, 1.0, 0.0, 1.0])
        self.assertTrue(obs.can_accept)


class FlatPolicyTests(unittest.TestCase):
    def setUp(self) -> None:
        torch.manual_seed(0)
        self.policy = FlatPolicy((2, 3), hidden_layers=2, hidden_width=16)

    def test_zeroed_heads_give_uniform_distribution_and_zero_value(self) -> None:
        with torch.no_grad():
            for head in (self.policy.value_head, self.policy.accept_head, self.policy.offer_head):
                head.weight.zero_()
                head.bias.zero_()
            output = flat_forward(self.policy, flat_observation(midgame_graph()))
        self.assertEqual(float(output.state_value[0]), 0.0)
        self.assertAlmostEqual(log_prob(output.distribution, Offer((1, 1))), -math.log(12.0), places=6)
        self.assertAlmostEqual(entropy(output.distribution), 2 * math.log(2.0) + math.log(3.0), places=6)

    def test_output_shapes_match_graph_policy(self) -> None:
        torch.manual_seed(0)
        graph_policy = GraphPolicy(num_layers=1, hidden_width=8, attention_heads=2)
        with torch.no_grad():
            flat = forward(self.policy, midgame_graph())
            graph = forward(graph_policy, midgame_graph())
        self.assertEqual(flat.distribution.accept_logits.shape, graph.distribution.accept_logits.shape)
        self.assertEqual(flat.distribution.offer_logits.shape, graph.distribution.offer_logits.shape)
        self.assertEqual(flat.state_value.shape, graph.state_value.shape)

    def test_graph_batch_and_flat_vector_agree(self) -> None:
        graph = midgame_graph()
        with torch.no_grad():
            from_batch = self.policy(collate_graphs([graph, graph]))
            from_vector = flat_forward(self.policy, flat_observation(graph))
        torch.testing.assert_close(from_batch.state_value[:1], from_vector.state_value)
        torch.testing.assert_close(from_batch.distribution.offer_logits[:5], from_vector.distribution.offer_logits)

    def test_other_domain_is_rejected(self) -> None:
        other = Domain(value_counts=(3, 2))
        graph = build_graph(
            other,
            UtilityFunction(objective_weights=(0.5, 0.5), value_weights=((0.0, 0.5, 1.0), (1.0, 0.0))),
            empty_stats(other),
            0,
            40,
        )
        with self.assertRaises(InvalidInputError):
            forward(self.policy, graph)
        wider = Domain(value_counts=(2, 3, 2))
        graph = build_graph(
            wider,
            UtilityFunction(
                objective_weights=(0.2, 0.3, 0.5),
                value_weights=((0.0, 1.0), (0.0, 0.5, 1.0), (1.0, 0.0)),
            ),
            empty_stats(wider),
            0,
            40,
        )
        with self.assertRaises(InvalidInputError):
            flat_forward(self.policy, flat_observation(graph))


if __name__ == "__main__":
    unittest.main()
