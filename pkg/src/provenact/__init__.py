"""Reproducible, replayable execution of planner-driven workflows."""

__version__ = "0.1.0"
