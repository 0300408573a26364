from __future__ import annotations

import json
import os
import unittest
from contextlib import ExitStack
from pathlib import Path
from tempfile import TemporaryDirectory
from unittest.mock import patch

from app import config
from app.config import (
    ConfigError,
    RunConfig,
    Settings,
    TrainerConfig,
    load_run_config,
    load_settings,
    parse_problem_source,
    run_config_from_mapping,
    write_config_snapshot,
)


class RunConfigTests(unittest.TestCase):
    def setUp(self) -> None:
        self.temp_dir = TemporaryDirectory()
        self.project_root = Path(self.temp_dir.name)
        self.test_settings = Settings(
            project_root=self.project_root,
            runs_root=self.project_root / "runs",
            config_path=self.project_root / "config.yaml",
        )
        self.stack = ExitStack()
        self.stack.enter_context(patch.object(config, "settings", self.test_settings))

    def tearDown(self) -> None:
        self.stack.close()
        self.temp_dir.cleanup()

    def test_defaults_follow_training_table(self) -> None:
        trainer = TrainerConfig()
        self.assertEqual(trainer.total_timesteps, 2_000_000)
        self.assertEqual((trainer.batch_size, trainer.minibatch_size, trainer.update_epochs), (6000, 300, 30))
        self.assertEqual((trainer.gamma, trainer.gae_lambda, trainer.clip_epsilon), (1.0, 0.95, 0.2))
        self.assertEqual((trainer.entropy_coef, trainer.value_coef, trainer.learning_rate), (0.001, 1.0, 3e-4))
        self.assertEqual(trainer.deadline, 40)
        self.assertEqual(trainer.opponents, ("boulware", "conceder", "linear", "random"))

    def test_missing_default_file_gives_defaults(self) -> None:
        self.assertEqual(load_run_config(), RunConfig())

    def test_yaml_file_and_overrides(self) -> None:
        self.test_settings.config_path.write_text(
            "trainer:\n  batch_size: 600\n  minibatch_size: 60\n  opponents: [Conceder, random, conceder]\n"
            "policy:\n  hidden_width: 64\n",
            encoding="utf-8",
        )
        loaded = load_run_config(
            overrides={
                "trainer.update_epochs": "10",
                "trainer.total_timesteps": "2e6",
                "trainer.anneal_lr": "no",
                "trainer.target_kl": "0.02",
                "run_dir": "runs/custom",
            }
        )
        self.assertEqual(loaded.trainer.batch_size, 600)
        self.assertEqual(loaded.trainer.update_epochs, 10)
        self.assertEqual(loaded.trainer.total_timesteps, 2_000_000)
        self.assertFalse(loaded.trainer.anneal_lr)
        self.assertEqual(loaded.trainer.target_kl, 0.02)
        self.assertEqual(loaded.trainer.opponents, ("conceder", "random"))
        self.assertEqual(loaded.policy.hidden_width, 64)
        self.assertEqual(loaded.run_dir, "runs/custom")

    def test_opponent_parameters_are_configurable(self) -> None:
        loaded = load_run_config(
            overrides={"opponent.random_accept_threshold": "0", "opponent.boulware_exponent": "0.1"}
        )
        self.assertEqual(loaded.opponent.random_accept_threshold, 0.0)
        self.assertEqual(loaded.opponent.boulware_exponent, 0.1)
        self.assertEqual(loaded.opponent.conceder_exponent, 2.0)

    def test_json_file(self) -> None:
        path = self.project_root / "run.json"
        path.write_text(json.dumps({"eval": {"games_per_opponent": 20, "checkpoints": "a.pt, b.pt"}}), encoding="utf-8")
        loaded = load_run_config(path)
        self.assertEqual(loaded.eval.games_per_opponent, 20)
        self.assertEqual(loaded.eval.checkpoints, ("a.pt", "b.pt"))

    def test_invalid_values_are_rejected(self) -> None:
        cases = [
            {"trainer": {"bogus": 1}},
            {"bogus": {}},
            {"trainer": {"batch_size": 1000, "minibatch_size": 300}},
            {"trainer": {"total_timesteps": 100}},
            {"trainer": {"opponents": ["hardliner"]}},
            {"trainer": {"update_epochs": 2.5}},
            {"trainer": {"anneal_lr": "maybe"}},
            {"trainer": {"problems": "fixed:"}},
            {"policy": {"hidden_width": 30, "attention_heads": 4}},
            {"policy": {"kind": "flat"}},
            {"generator": {"min_objectives": 0}},
            {"generator": {"max_outcomes": 20_000}},
            {"opponent": {"reservation": 1.0}},
            {"opponent": {"conceder_exponent": 0}},
            {"opponent": {"random_accept_threshold": 1.5}},
            {"opponent": {"hardliner_exponent": 3.0}},
            {"eval": {"games_per_opponent": 0}},
            {"policy": "gnn"},
        ]
        for payload in cases:
            with self.subTest(payload=payload):
                with self.assertRaises(ConfigError):
                    run_config_from_mapping(payload)

    def test_missing_explicit_file(self) -> None:
        with self.assertRaises(ConfigError):
            load_run_config(self.project_root / "absent.yaml")

    def test_top_level_must_be_a_mapping(self) -> None:
        path = self.project_root / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_run_config(path)

    def test_snapshot_reloads_to_same_config(self) -> None:
        original = run_config_from_mapping(
            {
                "trainer": {"seed": 7, "target_kl": 0.05},
                "eval": {"checkpoints": ["runs/gnn"]},
                "opponent": {"reservation": 0.25},
            }
        )
        path = self.project_root / "snapshot.yaml"
        write_config_snapshot(original, path)
        self.assertEqual(load_run_config(path), original)

    def test_problem_source_parsing(self) -> None:
        self.assertEqual(parse_problem_source("random"), ("random", None))
        self.assertEqual(parse_problem_source("fixed:problems/p.yaml"), ("fixed", Path("problems/p.yaml")))
        with self.assertRaises(ConfigError):
            parse_problem_source("sometimes")


class SettingsTests(unittest.TestCase):
    def test_environment_overrides(self) -> None:
        with TemporaryDirectory() as temp_dir:
            env = {"PROJECT_ROOT": temp_dir, "NEGOTIATION_RUNS_DIR": "out/runs", "APP_CONFIG_PATH": "conf/run.yaml"}
            with patch.dict(os.environ, env):
                loaded = load_settings()
            root = Path(temp_dir).resolve()
            self.assertEqual(loaded.project_root, root)
            self.assertEqual(loaded.runs_root, root / "out" / "runs")
            self.assertEqual(loaded.config_path, root / "conf" / "run.yaml")


if __name__ == "__main__":
    unittest.main()
