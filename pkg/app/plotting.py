from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import CI_LEVEL, SUMMARY_FILE_NAME, aggregate_ci, read_summary_csv  # noqa: E402
from .ppo import METRICS_FILE_NAME, MetricsRow, read_metrics  # noqa: E402

LEARNING_CURVE_FILE = "learning_curve.svg"
SUMMARY_PLOT_FILE = "summary.svg"
CURVE_FIELDS = (("episodic_return_mean", "Episodic return"), ("agreement_rate", "Agreement rate"))


class PlotError(RuntimeError):
    pass


def seed_run_dirs(run_dir: Path) -> list[Path]:
    """A multi-seed root expands to its ``seed_*`` children, anything else is a single run."""
    if (run_dir / METRICS_FILE_NAME).exists():
        return [run_dir]
    children = sorted(child for child in run_dir.glob("seed_*") if (child / METRICS_FILE_NAME).exists())
    return children


def _load_runs(run_dirs: Sequence[Path]) -> list[list[MetricsRow]]:
    runs = [read_metrics(path / METRICS_FILE_NAME) for path in run_dirs]
    runs = [rows for rows in runs if rows]
    if not runs:
        raise PlotError(f"No metrics found in {', '.join(str(path) for path in run_dirs) or 'the run directory'}.")
    return runs


def curve_band(runs: Sequence[Sequence[MetricsRow]], field: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean curve and CI half-width per batch index; steps are averaged since batch sizes differ slightly."""
    length = min(len(rows) for rows in runs)
    steps = np.asarray([np.mean([rows[i].step for rows in runs]) for i in range(length)])
    means = np.zeros(length)
    half_widths = np.zeros(length)
    for index in range(length):
        samples = [float(getattr(rows[index], field)) for rows in runs]
        if len(samples) < 2:
            means[index] = samples[0]
            continue
        means[index], half_widths[index] = aggregate_ci(samples, CI_LEVEL)
    return steps, means, half_widths


def plot_learning_curves(run_dirs: Sequence[Path], output_path: Path) -> Path:
    runs = _load_runs(run_dirs)
    figure, axes = plt.subplots(1, len(CURVE_FIELDS), figsize=(6 * len(CURVE_FIELDS), 4))
    for axis, (field, label) in zip(np.atleast_1d(axes), CURVE_FIELDS):
        steps, means, half_widths = curve_band(runs, field)
        axis.plot(steps, means, color="tab:blue")
        if len(runs) > 1:
            axis.fill_between(steps, means - half_widths, means + half_widths, color="tab:blue", alpha=0.25)
        axis.set_xlabel("Timestep")
        axis.set_ylabel(label)
        axis.set_ylim(0.0, 1.0)
        axis.grid(True, alpha=0.3)
    figure.suptitle(f"Training ({len(runs)} seed{'s' if len(runs) != 1 else ''})")
    figure.tight_layout()
    output_path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(output_path, format="svg")
    plt.close(figure)
    return output_path


def plot_summary(summary_path: Path, output_path: Path) -> Path:
    if not summary_path.exists():
        raise PlotError(f"Summary file not found: {summary_path}.")
    rows = read_summary_csv(summary_path)
    if not rows:
        raise PlotError(f"Summary file {summary_path} has no rows.")
    positions = np.arange(len(rows))
    width = 0.38
    figure, axis = plt.subplots(figsize=(max(5, 1.6 * len(rows)), 4))
    axis.bar(
        positions - width / 2,
        [row.mean_self for row in rows],
        width,
        yerr=[row.ci99_self or 0.0 for row in rows],
        capsize=4,
        label="Policy",
    )
    axis.bar(
        positions + width / 2,
        [row.mean_opp for row in rows],
        width,
        yerr=[row.ci99_opp or 0.0 for row in rows],
        capsize=4,
        label="Opponent",
    )
    axis.set_xticks(positions)
    axis.set_xticklabels([row.opponent for row in rows])
    axis.set_ylabel("Mean utility")
    axis.set_ylim(0.0, 1.0)
    axis.legend()
    figure.tight_layout()
    output_path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(output_path, format="svg")
    plt.close(figure)
    return output_path


def plot_run(run_dir: Path, *, output_dir: Path | None = None) -> list[Path]:
    target = output_dir or run_dir
    written: list[Path] = []
    runs = seed_run_dirs(run_dir)
    summary_path = run_dir / SUMMARY_FILE_NAME
    if not runs and not summary_path.exists():
        raise PlotError(f"No {METRICS_FILE_NAME} or {SUMMARY_FILE_NAME} found in {run_dir}.")
    if runs:
        written.append(plot_learning_curves(runs, target / LEARNING_CURVE_FILE))
    if summary_path.exists():
        written.append(plot_summary(summary_path, target / SUMMARY_PLOT_FILE))
    return written
