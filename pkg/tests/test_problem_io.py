from __future__ import annotations

import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

from app.config import GeneratorConfig
from app.problem_gen import generate_problem, problem_seed_sequence
from app.problem_io import ProblemFormatError, dumps_problem, loads_problem, read_problem, write_problem


class ProblemFileTests(unittest.TestCase):
    def test_write_read_write_is_byte_identical(self) -> None:
        problem = generate_problem(GeneratorConfig(), problem_seed_sequence(0, 2, 4))
        with TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "problem_0.yaml"
            write_problem(problem, path)
            loaded = read_problem(path)
            self.assertEqual(loaded, problem)
            self.assertEqual(dumps_problem(loaded), path.read_text(encoding="utf-8"))

    def test_rejects_wrong_format_version(self) -> None:
        text = dumps_problem(generate_problem(GeneratorConfig(), problem_seed_sequence(0, 2, 0)))
        with self.assertRaises(ProblemFormatError):
            loads_problem(text.replace("format: 1", "format: 2", 1))

    def test_rejects_unnormalized_weights(self) -> None:
        text = """
format: 1
domain: {objectives: [2]}
utilities:
  - objectives: [{size: 2, weight: 0.5, value_weights: [0.0, 1.0]}]
  - objectives: [{size: 2, weight: 1.0, value_weights: [0.0, 1.0]}]
"""
        with self.assertRaises(ProblemFormatError):
            loads_problem(text)

    def test_rejects_size_mismatch_and_garbage(self) -> None:
        text = """
format: 1
domain: {objectives: [2]}
utilities:
  - objectives: [{size: 3, weight: 1.0, value_weights: [0.0, 1.0, 0.5]}]
  - objectives: [{size: 2, weight: 1.0, value_weights: [0.0, 1.0]}]
"""
        with self.assertRaises(ProblemFormatError):
            loads_problem(text)
        with self.assertRaises(ProblemFormatError):
            loads_problem("[unclosed")
        with self.assertRaises(ProblemFormatError):
            read_problem(Path("/nonexistent/problem.yaml"))


if __name__ == "__main__":
    unittest.main()
