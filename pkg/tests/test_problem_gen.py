from __future__ import annotations

import math
import unittest

import numpy as np

from app.config import GeneratorConfig
from app.negotiation import outcome_utilities
from app.problem_gen import GenerationError, generate_domain, generate_problem, generate_utility, problem_seed_sequence
from app.run_constants import STREAM_EVAL, STREAM_GEN_PROBLEMS, STREAM_TRAIN


class ProblemGenerationTests(unittest.TestCase):
    def test_outcome_space_stays_in_configured_band(self) -> None:
        config = GeneratorConfig()
        for index in range(200):
            problem = generate_problem(config, problem_seed_sequence(3, STREAM_TRAIN, index))
            size = problem.domain.outcome_space_size
            self.assertGreaterEqual(size, 200)
            self.assertLessEqual(size, 1000)
            self.assertTrue(3 <= problem.domain.num_objectives <= 7)
            self.assertTrue(all(2 <= count <= 12 for count in problem.domain.value_counts))
            problem.validate()

    def test_same_seed_sequence_gives_same_problem(self) -> None:
        config = GeneratorConfig()
        first = generate_problem(config, problem_seed_sequence(11, STREAM_TRAIN, 5))
        second = generate_problem(config, problem_seed_sequence(11, STREAM_TRAIN, 5))
        self.assertEqual(first, second)

    def test_streams_are_disjoint(self) -> None:
        config = GeneratorConfig()
        train = generate_problem(config, problem_seed_sequence(11, STREAM_TRAIN, 0))
        evaluation = generate_problem(config, problem_seed_sequence(11, STREAM_EVAL, 0))
        self.assertNotEqual(train, evaluation)

    def test_single_objective_domain(self) -> None:
        config = GeneratorConfig(min_outcomes=2, max_outcomes=2, min_objectives=1, max_objectives=1, max_values=2)
        domain = generate_domain(config, np.random.default_rng(0))
        self.assertEqual(domain.value_counts, (2,))

    def test_unreachable_band_raises(self) -> None:
        config = GeneratorConfig(
            min_outcomes=5000,
            max_outcomes=6000,
            min_objectives=1,
            max_objectives=1,
            max_values=12,
            max_attempts=50,
        )
        with self.assertRaises(GenerationError):
            generate_domain(config, np.random.default_rng(0))

    def test_weights_are_normalized(self) -> None:
        config = GeneratorConfig()
        domain = generate_domain(config, np.random.default_rng(1))
        u_fn = generate_utility(domain, np.random.default_rng(2))
        self.assertAlmostEqual(math.fsum(u_fn.objective_weights), 1.0, delta=1e-9)
        for values in u_fn.value_weights:
            self.assertEqual(min(values), 0.0)
            self.assertEqual(max(values), 1.0)
        self.assertTrue(all(weight > 0 for weight in u_fn.objective_weights))

    def test_agent_utilities_are_uncorrelated_on_average(self) -> None:
        config = GeneratorConfig()
        correlations = []
        for index in range(1000):
            problem = generate_problem(config, problem_seed_sequence(17, STREAM_GEN_PROBLEMS, index))
            first, second = (outcome_utilities(u_fn, problem.domain) for u_fn in problem.utilities)
            correlations.append(float(np.corrcoef(first, second)[0, 1]))
        self.assertTrue(all(math.isfinite(value) for value in correlations))
        self.assertLess(abs(float(np.mean(correlations))), 0.05)


if __name__ == "__main__":
    unittest.main()
