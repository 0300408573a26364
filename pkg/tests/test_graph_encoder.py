from __future__ import annotations

import unittest

import numpy as np

from app.config import GeneratorConfig
from app.graph_encoder import (
    COL_HEAD_PROGRESS,
    COL_OBJECTIVE_SIZE,
    COL_OBJECTIVE_WEIGHT,
    COL_OPPONENT_FRACTION,
    COL_OPPONENT_LAST,
    COL_OWN_FRACTION,
    COL_OWN_LAST,
    COL_VALUE_WEIGHT,
    HISTORY_COLUMNS,
    NODE_FEATURE_WIDTH,
    SIDE_OPPONENT,
    SIDE_SELF,
    build_graph,
    empty_stats,
    graph_document,
    stats_from_history,
    update_stats,
)
from app.negotiation import Domain, InvalidInputError, UtilityFunction
from app.problem_gen import generate_problem, problem_seed_sequence

DOMAIN = Domain(value_counts=(2, 3))
U_FN = UtilityFunction(objective_weights=(0.25, 0.75), value_weights=((1.0, 0.0), (0.0, 0.4, 1.0)))


class HistoryStatsTests(unittest.TestCase):
    def test_single_opponent_offer(self) -> None:
        stats = update_stats(empty_stats(DOMAIN), (0, 1), SIDE_OPPONENT)
        np.testing.assert_array_equal(stats.opponent_last, [1, 0, 0, 1, 0])
        np.testing.assert_array_equal(stats.opponent_fractions, [1, 0, 0, 1, 0])
        np.testing.assert_array_equal(stats.own_last, np.zeros(5))
        np.testing.assert_array_equal(stats.own_fractions, np.zeros(5))

    def test_two_opponent_offers(self) -> None:
        stats = empty_stats(DOMAIN)
        stats = update_stats(stats, (0, 1), SIDE_OPPONENT)
        stats = update_stats(stats, (0, 0), SIDE_OPPONENT)
        np.testing.assert_allclose(stats.opponent_fractions, [1.0, 0.0, 0.5, 0.5, 0.0])
        np.testing.assert_array_equal(stats.opponent_last, [1, 0, 1, 0, 0])

    def test_sides_are_separate(self) -> None:
        stats = update_stats(empty_stats(DOMAIN), (1, 2), SIDE_SELF)
        self.assertEqual(stats.opponent_offers, 0)
        np.testing.assert_array_equal(stats.opponent_counts, np.zeros(5))
        np.testing.assert_array_equal(stats.own_last, [0, 1, 0, 0, 1])

    def test_update_does_not_mutate_input(self) -> None:
        stats = empty_stats(DOMAIN)
        update_stats(stats, (1, 2), SIDE_SELF)
        self.assertEqual(stats.own_offers, 0)
        np.testing.assert_array_equal(stats.own_counts, np.zeros(5))

    def test_rebuild_matches_incremental_updates(self) -> None:
        rng = np.random.default_rng(0)
        for index in range(50):
            problem = generate_problem(GeneratorConfig(), problem_seed_sequence(0, 0, index))
            history = []
            stats = empty_stats(problem.domain)
            for turn in range(int(rng.integers(0, 40))):
                offerer = (turn + index) % 2
                outcome = tuple(int(rng.integers(size)) for size in problem.domain.value_counts)
                history.append((offerer, outcome))
                stats = update_stats(stats, outcome, SIDE_SELF if offerer == 0 else SIDE_OPPONENT)
            rebuilt = stats_from_history(problem.domain, tuple(history), agent_id=0)
            np.testing.assert_array_equal(rebuilt.own_counts, stats.own_counts)
            np.testing.assert_array_equal(rebuilt.opponent_counts, stats.opponent_counts)
            np.testing.assert_array_equal(rebuilt.own_last, stats.own_last)
            np.testing.assert_array_equal(rebuilt.opponent_last, stats.opponent_last)
            graph_a = build_graph(problem.domain, problem.utilities[0], stats, len(history), 40)
            graph_b = build_graph(problem.domain, problem.utilities[0], rebuilt, len(history), 40)
            np.testing.assert_array_equal(graph_a.node_features, graph_b.node_features)

    def test_invalid_offer(self) -> None:
        with self.assertRaises(InvalidInputError):
            update_stats(empty_stats(DOMAIN), (2, 0), SIDE_SELF)


class BuildGraphTests(unittest.TestCase):
    def test_structure_counts(self) -> None:
        graph = build_graph(DOMAIN, U_FN, empty_stats(DOMAIN), 0, 40)
        self.assertEqual(graph.num_nodes, 8)
        self.assertEqual(len(graph.edges), 7)
        self.assertEqual(graph.node_features.shape, (8, NODE_FEATURE_WIDTH))
        self.assertEqual(graph.edge_index().shape, (2, 14))
        self.assertFalse(graph.can_accept)

    def test_adjacency_follows_roles(self) -> None:
        graph = build_graph(DOMAIN, U_FN, empty_stats(DOMAIN), 0, 40)
        neighbours: dict[int, set[int]] = {node: set() for node in range(graph.num_nodes)}
        for a, b in graph.edges:
            neighbours[a].add(b)
            neighbours[b].add(a)
        self.assertEqual(neighbours[graph.head_node], set(graph.objective_nodes))
        for objective_node, values in zip(graph.objective_nodes, graph.value_nodes):
            self.assertEqual(neighbours[objective_node], {graph.head_node, *values})
            for value_node in values:
                self.assertEqual(neighbours[value_node], {objective_node})

    def test_features_at_start_and_midway(self) -> None:
        graph = build_graph(DOMAIN, U_FN, empty_stats(DOMAIN), 0, 40)
        value_rows = [node for nodes in graph.value_nodes for node in nodes]
        self.assertEqual(float(graph.node_features[graph.head_node, COL_HEAD_PROGRESS]), 0.0)
        np.testing.assert_array_equal(graph.node_features[np.ix_(value_rows, HISTORY_COLUMNS)], 0.0)
        np.testing.assert_allclose(graph.node_features[value_rows, COL_VALUE_WEIGHT], [1.0, 0.0, 0.0, 0.4, 1.0])
        self.assertEqual(graph.node_features[graph.objective_nodes[1], COL_OBJECTIVE_SIZE], 3.0)
        self.assertEqual(graph.node_features[graph.objective_nodes[1], COL_OBJECTIVE_WEIGHT], 0.75)

        stats = update_stats(empty_stats(DOMAIN), (1, 2), SIDE_OPPONENT)
        stats = update_stats(stats, (0, 0), SIDE_SELF)
        graph = build_graph(DOMAIN, U_FN, stats, 20, 40)
        self.assertEqual(float(graph.node_features[graph.head_node, COL_HEAD_PROGRESS]), 0.5)
        self.assertTrue(graph.can_accept)
        self.assertEqual(graph.node_features[graph.value_nodes[0][1], COL_OPPONENT_LAST], 1.0)
        self.assertEqual(graph.node_features[graph.value_nodes[1][2], COL_OPPONENT_FRACTION], 1.0)
        self.assertEqual(graph.node_features[graph.value_nodes[0][0], COL_OWN_LAST], 1.0)
        self.assertEqual(graph.node_features[graph.value_nodes[1][0], COL_OWN_FRACTION], 1.0)

    def test_topology_ignores_history_and_features_are_bounded(self) -> None:
        empty = build_graph(DOMAIN, U_FN, empty_stats(DOMAIN), 0, 40)
        stats = update_stats(empty_stats(DOMAIN), (1, 1), SIDE_OPPONENT)
        later = build_graph(DOMAIN, U_FN, stats, 7, 40)
        self.assertEqual(empty.edges, later.edges)
        self.assertGreaterEqual(float(later.node_features.min()), 0.0)
        self.assertLessEqual(float(later.node_features.max()), 3.0)

    def test_round_past_deadline_is_rejected(self) -> None:
        with self.assertRaises(InvalidInputError):
            build_graph(DOMAIN, U_FN, empty_stats(DOMAIN), 41, 40)

    def test_graph_document_lists_roles(self) -> None:
        document = graph_document(build_graph(DOMAIN, U_FN, empty_stats(DOMAIN), 0, 40))
        self.assertEqual(document["num_nodes"], 8)
        self.assertEqual(document["nodes"][0]["role"], "head")
        self.assertEqual(document["nodes"][1]["type"], "objective")
        self.assertEqual(document["nodes"][-1]["role"], "value[1][2]")
        self.assertEqual(len(document["edges"]), 7)


if __name__ == "__main__":
    unittest.main()
