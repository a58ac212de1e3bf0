"""Command implementations used by the CLI entrypoint."""

__all__ = ["bench", "calibrate", "compile", "scenario", "simulate", "sweep", "verify"]
