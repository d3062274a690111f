"""Command-line subcommands, one module per group; main.py registers them."""

from . import data, diagnostics, evaluation, experiments, training

__all__ = ["data", "diagnostics", "evaluation", "experiments", "training"]
