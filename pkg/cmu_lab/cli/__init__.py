"""Command-line package."""

from .commands import cli, main, run_cli

__all__ = ["cli", "main", "run_cli"]
