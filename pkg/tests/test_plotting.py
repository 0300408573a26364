from __future__ import annotations

import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

from app.evaluation import EvalResults, OpponentSummary, write_summary_csv
from app.plotting import (
    LEARNING_CURVE_FILE,
    SUMMARY_PLOT_FILE,
    PlotError,
    curve_band,
    plot_run,
    seed_run_dirs,
)
from app.ppo import METRICS_FILE_NAME, MetricsRow, write_metrics


def metrics_rows(returns: list[float], batch: int = 100) -> list[MetricsRow]:
    return [
        MetricsRow(
            step=batch * (index + 1),
            episodic_return_mean=value,
            agreement_rate=min(1.0, value + 0.2),
            policy_loss=-0.01,
            value_loss=0.1,
            entropy=3.0,
            clip_frac=0.1,
            lr=3e-4,
        )
        for index, value in enumerate(returns)
    ]


class PlottingTests(unittest.TestCase):
    def setUp(self) -> None:
        self.temp_dir = TemporaryDirectory()
        self.root = Path(self.temp_dir.name)

    def tearDown(self) -> None:
        self.temp_dir.cleanup()

    def test_curve_band_averages_seeds(self) -> None:
        runs = [metrics_rows([0.2, 0.4, 0.6]), metrics_rows([0.4, 0.4])]
        steps, means, half_widths = curve_band(runs, "episodic_return_mean")
        self.assertEqual(steps.tolist(), [100.0, 200.0])
        self.assertAlmostEqual(float(means[0]), 0.3)
        self.assertAlmostEqual(float(means[1]), 0.4)
        self.assertGreater(float(half_widths[0]), 0.0)
        self.assertEqual(float(half_widths[1]), 0.0)

    def test_single_run_has_no_band(self) -> None:
        _steps, means, half_widths = curve_band([metrics_rows([0.1, 0.5])], "agreement_rate")
        self.assertAlmostEqual(float(means[1]), 0.7)
        self.assertEqual(half_widths.tolist(), [0.0, 0.0])

    def test_multi_seed_root_renders_learning_curves(self) -> None:
        for seed, values in ((1, [0.1, 0.3]), (2, [0.2, 0.5])):
            write_metrics(self.root / f"seed_{seed}" / METRICS_FILE_NAME, metrics_rows(values))
        (self.root / "seed_3").mkdir()
        self.assertEqual([path.name for path in seed_run_dirs(self.root)], ["seed_1", "seed_2"])

        written = plot_run(self.root, output_dir=self.root / "plots")
        self.assertEqual(written, [self.root / "plots" / LEARNING_CURVE_FILE])
        self.assertIn("<svg", written[0].read_text(encoding="utf-8"))

    def test_evaluation_dir_renders_summary(self) -> None:
        results = EvalResults(
            pairings=(),
            summaries=(
                OpponentSummary("conceder", 0.8, 0.05, 0.4, 0.03),
                OpponentSummary("random", 0.6, None, 0.5, None),
            ),
        )
        write_summary_csv(self.root / "summary.csv", results)
        written = plot_run(self.root)
        self.assertEqual(written, [self.root / SUMMARY_PLOT_FILE])
        self.assertIn("<svg", written[0].read_text(encoding="utf-8"))

    def test_empty_directory_is_an_error(self) -> None:
        with self.assertRaises(PlotError):
            plot_run(self.root)


if __name__ == "__main__":
    unittest.main()
