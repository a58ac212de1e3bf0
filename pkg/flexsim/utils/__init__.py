"""Utility helpers for flexsim."""

from flexsim.utils.logger import logger

__all__ = ["logger"]
