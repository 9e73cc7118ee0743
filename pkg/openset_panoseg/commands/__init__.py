"""
Command-line subcommands. Each module exposes register(subparsers, parent) and run(args).
"""
from . import evaluate, gen_data, infer, inspect_graph, train

__all__ = ["evaluate", "gen_data", "infer", "inspect_graph", "train"]
