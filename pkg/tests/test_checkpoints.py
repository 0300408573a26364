from __future__ import annotations

import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

import torch

from app.checkpoints import (
    CheckpointError,
    build_policy,
    checkpoint_path,
    expand_checkpoint_sources,
    latest_checkpoint,
    list_checkpoints,
    load_checkpoint,
    save_checkpoint,
)
from app.config import PolicyConfig
from app.flat_policy import FlatPolicy
from app.graph_encoder import SIDE_OPPONENT, build_graph, empty_stats, update_stats
from app.negotiation import Domain, UtilityFunction
from app.policy_net import GraphPolicy, forward

DOMAIN = Domain(value_counts=(2, 3))
U_FN = UtilityFunction(objective_weights=(0.25, 0.75), value_weights=((1.0, 0.0), (0.0, 0.4, 1.0)))


def sample_graph():
    stats = update_stats(empty_stats(DOMAIN), (1, 2), SIDE_OPPONENT)
    return build_graph(DOMAIN, U_FN, stats, 3, 40)


class CheckpointFileTests(unittest.TestCase):
    def setUp(self) -> None:
        self.temp_dir = TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self) -> None:
        self.temp_dir.cleanup()

    def test_graph_policy_round_trip(self) -> None:
        torch.manual_seed(0)
        policy = GraphPolicy(num_layers=2, hidden_width=16, attention_heads=4, offer_logprob_on_accept=False)
        optimizer = torch.optim.Adam(policy.parameters(), lr=1e-3)
        path = save_checkpoint(
            checkpoint_path(self.root, 120),
            policy,
            seed=4,
            step=120,
            optimizer=optimizer,
            trainer_state={"update": 2, "episode_index": 31, "global_step": 120},
        )
        self.assertEqual(path.name, "step_120.pt")
        self.assertFalse(path.with_suffix(".pt.partial").exists())

        loaded = load_checkpoint(path)
        self.assertIsInstance(loaded.policy, GraphPolicy)
        self.assertEqual(loaded.policy.architecture(), policy.architecture())
        self.assertEqual((loaded.seed, loaded.step), (4, 120))
        self.assertEqual(loaded.trainer_state, {"update": 2, "episode_index": 31, "global_step": 120})
        self.assertIsNotNone(loaded.optimizer_state)
        with torch.no_grad():
            expected = forward(policy, sample_graph())
            actual = forward(loaded.policy, sample_graph())
        torch.testing.assert_close(actual.state_value, expected.state_value, rtol=0.0, atol=0.0)
        torch.testing.assert_close(actual.distribution.offer_logits, expected.distribution.offer_logits)

    def test_flat_policy_round_trip(self) -> None:
        policy = FlatPolicy((2, 3), hidden_layers=1, hidden_width=8)
        loaded = load_checkpoint(save_checkpoint(self.root / "flat.pt", policy, seed=1, step=6))
        self.assertIsInstance(loaded.policy, FlatPolicy)
        self.assertEqual(loaded.policy.value_counts, (2, 3))
        self.assertIsNone(loaded.optimizer_state)

    def test_corrupt_checkpoints_are_rejected(self) -> None:
        policy = GraphPolicy(num_layers=1, hidden_width=8, attention_heads=2)
        path = save_checkpoint(self.root / "good.pt", policy, seed=0, step=1)
        payload = torch.load(path, weights_only=True)

        wrong_shape = dict(payload, parameters=dict(payload["parameters"]))
        wrong_shape["parameters"]["value_head.weight"] = torch.zeros(3, 3)
        torch.save(wrong_shape, self.root / "shape.pt")

        missing = dict(payload, parameters=dict(payload["parameters"]))
        missing["parameters"].pop("offer_head.bias")
        torch.save(missing, self.root / "missing.pt")

        torch.save(dict(payload, format=99), self.root / "format.pt")
        (self.root / "garbage.pt").write_bytes(b"not a checkpoint")

        for name in ("shape.pt", "missing.pt", "format.pt", "garbage.pt", "absent.pt"):
            with self.subTest(name=name):
                with self.assertRaises(CheckpointError):
                    load_checkpoint(self.root / name)

    def test_listing_orders_by_step(self) -> None:
        policy = GraphPolicy(num_layers=1, hidden_width=8, attention_heads=2)
        for step in (20, 100, 3):
            save_checkpoint(checkpoint_path(self.root, step), policy, seed=0, step=step)
        (self.root / "checkpoints" / "notes.txt").write_text("x", encoding="utf-8")
        self.assertEqual([step for step, _path in list_checkpoints(self.root)], [3, 20, 100])
        self.assertEqual(latest_checkpoint(self.root), checkpoint_path(self.root, 100))
        self.assertIsNone(latest_checkpoint(self.root / "elsewhere"))

    def test_expand_sources(self) -> None:
        policy = GraphPolicy(num_layers=1, hidden_width=8, attention_heads=2)
        single = save_checkpoint(self.root / "single.pt", policy, seed=0, step=1)
        run_dir = self.root / "run"
        save_checkpoint(checkpoint_path(run_dir, 10), policy, seed=0, step=10)
        save_checkpoint(checkpoint_path(run_dir, 20), policy, seed=0, step=20)
        multi = self.root / "multi"
        for seed in (1, 2):
            save_checkpoint(checkpoint_path(multi / f"seed_{seed}", 30), policy, seed=seed, step=30)

        resolved = expand_checkpoint_sources([str(single), run_dir, multi])
        self.assertEqual(
            resolved,
            [
                single,
                checkpoint_path(run_dir, 20),
                checkpoint_path(multi / "seed_1", 30),
                checkpoint_path(multi / "seed_2", 30),
            ],
        )
        with self.assertRaises(CheckpointError):
            expand_checkpoint_sources([self.root / "nowhere"])
        (self.root / "empty").mkdir()
        with self.assertRaises(CheckpointError):
            expand_checkpoint_sources([self.root / "empty"])


class BuildPolicyTests(unittest.TestCase):
    def test_builds_each_kind(self) -> None:
        self.assertIsInstance(build_policy(PolicyConfig(hidden_width=8, attention_heads=2)), GraphPolicy)
        flat = build_policy(PolicyConfig(kind="flat", flat_hidden_width=8), value_counts=(3, 2))
        self.assertIsInstance(flat, FlatPolicy)
        with self.assertRaises(CheckpointError):
            build_policy(PolicyConfig(kind="flat"))


if __name__ == "__main__":
    unittest.main()
