"""Exception hierarchy shared by every flexsim module.

Each error carries a symbolic ``code`` (the name used in reports) and the
process exit status the CLI maps it to.
"""

from __future__ import annotations

from typing import Optional

EXIT_MISMATCH = 1
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_CAPACITY = 4


class FlexsimError(RuntimeError):
    """Base class for all domain errors raised by flexsim."""

    exit_code = EXIT_CAPACITY

    def __init__(self, code: str, message: str, *, exit_code: Optional[int] = None) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code


class WorkloadError(FlexsimError):
    """Raised when a tensor, layer or workload violates the data model."""


class CompileError(FlexsimError):
    """Raised when a workload cannot be lowered to a memory image."""


class SimulationError(FlexsimError):
    """Raised when the simulator meets a malformed image."""


class EnergyModelError(FlexsimError):
    """Raised when power estimation or calibration cannot proceed."""

    exit_code = EXIT_CONFIG


class WucError(FlexsimError):
    """Raised on illegal power-mode requests."""


class ScenarioError(FlexsimError):
    """Raised when a scenario script cannot be executed."""


class TensorIOError(FlexsimError):
    """Raised when a tensor, image or bundle file cannot be read or written."""

    exit_code = EXIT_IO


class ConfigError(FlexsimError):
    """Raised when the configuration file or overrides cannot be processed."""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, code: str = "CONFIG_ERROR") -> None:
        super().__init__(code, message)


class VerificationMismatch(FlexsimError):
    """Raised by ``verify`` when simulator outputs differ from the golden bundle."""

    exit_code = EXIT_MISMATCH


__all__ = [
    "FlexsimError",
    "WorkloadError",
    "CompileError",
    "SimulationError",
    "EnergyModelError",
    "WucError",
    "ScenarioError",
    "TensorIOError",
    "ConfigError",
    "VerificationMismatch",
    "EXIT_MISMATCH",
    "EXIT_IO",
    "EXIT_CONFIG",
    "EXIT_CAPACITY",
]
