from __future__ import annotations

from . import evaluate, gen_problems, inspect_graph, plot, train

SUBCOMMANDS = (gen_problems, train, evaluate, plot, inspect_graph)

__all__ = ["SUBCOMMANDS", "evaluate", "gen_problems", "inspect_graph", "plot", "train"]
