"""Package logger.

Quiet by default so CLI reports stay readable; per-tile traces are available
through the ``FLEXSIM_LOG`` environment variable.
"""

from __future__ import annotations

import logging
import os

LOG_LEVEL = os.getenv("FLEXSIM_LOG", "WARNING").upper()

logger = logging.getLogger("flexsim")
if not logger.handlers:
    handler = logging.StreamHandler()
    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(message)s")
    handler.setFormatter(formatter)
    logger.addHandler(handler)

logger.setLevel(getattr(logging, LOG_LEVEL, logging.WARNING))


def set_verbose(enabled: bool) -> None:
    """Lower the level to INFO when the CLI runs with ``--verbose``."""
    if enabled and logger.level > logging.INFO:
        logger.setLevel(logging.INFO)


__all__ = ["logger", "set_verbose"]
