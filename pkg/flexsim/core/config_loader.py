"""User configuration loader and runtime resolver for flexsim."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from flexsim.core.errors import ConfigError

try:  # Python 3.11+
    import tomllib  # type: ignore
except ModuleNotFoundError:  # pragma: no cover
    try:
        import tomli as tomllib  # type: ignore
    except ModuleNotFoundError:  # pragma: no cover
        tomllib = None  # type: ignore

try:  # Optional dependency for YAML configs
    import yaml  # type: ignore
except Exception:  # pragma: no cover
    yaml = None  # type: ignore


@dataclass(frozen=True)
class UserConfig:
    knobs: Dict[str, Any] = field(default_factory=dict)
    op_point: Optional[str] = None
    op_point_overrides: Dict[str, float] = field(default_factory=dict)
    energy_params: Optional[Path] = None
    instr_mem_bytes: Optional[int] = None
    output_dir: Optional[Path] = None


@dataclass(frozen=True)
class ResolvedConfig:
    knobs: Dict[str, Any]
    op_point: str
    op_point_overrides: Dict[str, float]
    energy_params: Optional[Path]
    instr_mem_bytes: int
    output_dir: Path
    config_path: Optional[Path] = None

    def to_display_dict(self) -> Dict[str, str]:
        rows = {
            "Config file": str(self.config_path) if self.config_path else "none",
            "Operating point": self.op_point,
            "Energy params": str(self.energy_params) if self.energy_params else "built-in",
            "Instruction memory": f"{self.instr_mem_bytes} B",
            "Output directory": str(self.output_dir),
        }
        for key in sorted(self.knobs):
            rows[f"knob.{key}"] = str(self.knobs[key])
        return rows


class ConfigLoader:
    """Loads configuration from ~/.config/flexsim, an explicit path, or ``FLEXSIM_CONFIG``."""

    CONFIG_FILES = (
        "config.toml",
        "config.yaml",
        "config.yml",
        "config.json",
    )

    ENV_CONFIG = "FLEXSIM_CONFIG"
    ENV_OP_POINT = "FLEXSIM_OP_POINT"
    ENV_DMA_BW = "FLEXSIM_DMA_BW"
    ENV_ENERGY_PARAMS = "FLEXSIM_ENERGY_PARAMS"

    ALLOWED_KEYS = {"knobs", "op_point", "energy_params", "instr_mem_bytes", "output_dir"}
    OP_POINT_FIELDS = {"name", "core_freq", "v_logic", "v_mem", "aon_freq"}

    def __init__(self, explicit_path: Optional[str] = None, config_file: Optional[str] = None) -> None:
        chosen = config_file or explicit_path or os.getenv(self.ENV_CONFIG)
        self.explicit_path = Path(chosen).expanduser() if chosen else None
        self.config_path: Optional[Path] = None
        self._raw_data: Dict[str, Any] = {}
        self.user_config = UserConfig()
        self._load()

    def load(self) -> ResolvedConfig:
        """Resolve with no overrides."""
        return self.derive()

    def derive(
        self,
        *,
        knobs: Optional[Dict[str, Any]] = None,
        op_point: Optional[str] = None,
        energy_params: Optional[str] = None,
        output_dir: Optional[str] = None,
    ) -> ResolvedConfig:
        """
        Resolve configuration using precedence:
            explicit args > environment > user config file > defaults
        """
        from flexsim import config

        merged = dict(config.DEFAULT_KNOBS)
        merged.update(self.user_config.knobs)
        env_bw = os.getenv(self.ENV_DMA_BW)
        if env_bw:
            merged["dma_bytes_per_cycle"] = env_bw
        if knobs:
            merged.update({k: v for k, v in knobs.items() if v is not None})
        merged = self._validate_knobs(merged)

        point = (
            op_point
            or os.getenv(self.ENV_OP_POINT)
            or self.user_config.op_point
            or config.DEFAULT_OP_POINT
        )
        params_path = energy_params or os.getenv(self.ENV_ENERGY_PARAMS)
        params = Path(params_path).expanduser() if params_path else self.user_config.energy_params
        out_dir = (
            Path(output_dir).expanduser()
            if output_dir
            else (self.user_config.output_dir or config.DEFAULT_OUTPUT_DIR)
        )
        return ResolvedConfig(
            knobs=merged,
            op_point=point.lower(),
            op_point_overrides=dict(self.user_config.op_point_overrides),
            energy_params=params,
            instr_mem_bytes=self.user_config.instr_mem_bytes or config.DEFAULT_INSTR_MEM_BYTES,
            output_dir=out_dir,
            config_path=self.config_path,
        )

    def _load(self) -> None:
        from flexsim import config

        if self.explicit_path:
            # A missing explicit file falls back to defaults instead of crashing.
            if self.explicit_path.exists():
                self.config_path = self.explicit_path
                self._raw_data = self._read_file(self.explicit_path)
                self.user_config = self._parse_user_config(self._raw_data)
            return

        for candidate in self.CONFIG_FILES:
            path = config.CONFIG_DIR / candidate
            if path.exists():
                self.config_path = path
                self._raw_data = self._read_file(path)
                self.user_config = self._parse_user_config(self._raw_data)
                return

    def _parse_user_config(self, payload: Dict[str, Any]) -> UserConfig:
        if not payload:
            return UserConfig()
        unexpected = set(payload.keys()) - self.ALLOWED_KEYS
        if unexpected:
            raise ConfigError(f"Unknown configuration field(s): {', '.join(sorted(unexpected))}")

        knobs = payload.get("knobs") or {}
        if not isinstance(knobs, dict):
            raise ConfigError("knobs must be a table of knob values")
        self._validate_knobs(knobs)

        op_name: Optional[str] = None
        overrides: Dict[str, float] = {}
        raw_point = payload.get("op_point")
        if isinstance(raw_point, str):
            op_name = raw_point.strip().lower()
        elif isinstance(raw_point, dict):
            unknown = set(raw_point) - self.OP_POINT_FIELDS
            if unknown:
                raise ConfigError(f"Unknown op_point field(s): {', '.join(sorted(unknown))}")
            op_name = str(raw_point.get("name", "custom")).lower()
            for key in ("core_freq", "v_logic", "v_mem", "aon_freq"):
                if key in raw_point:
                    overrides[key] = self._positive_float(raw_point[key], f"op_point.{key}")
        elif raw_point is not None:
            raise ConfigError("op_point must be a name or a table")

        instr_mem = payload.get("instr_mem_bytes")
        if instr_mem is not None:
            if not isinstance(instr_mem, int) or instr_mem <= 0 or instr_mem % 32:
                raise ConfigError("instr_mem_bytes must be a positive multiple of 32")

        return UserConfig(
            knobs=dict(knobs),
            op_point=op_name,
            op_point_overrides=overrides,
            energy_params=self._optional_path(payload.get("energy_params")),
            instr_mem_bytes=instr_mem,
            output_dir=self._optional_path(payload.get("output_dir")),
        )

    def _validate_knobs(self, knobs: Dict[str, Any]) -> Dict[str, Any]:
        from flexsim import config

        unknown = set(knobs) - set(config.DEFAULT_KNOBS)
        if unknown:
            raise ConfigError(f"Unknown knob(s): {', '.join(sorted(unknown))}")
        cleaned: Dict[str, Any] = {}
        for key, value in knobs.items():
            default = config.DEFAULT_KNOBS[key]
            try:
                if isinstance(default, bool):
                    cleaned[key] = self._as_bool(value)
                elif isinstance(default, int):
                    cleaned[key] = int(value)
                    if cleaned[key] < 0:
                        raise ValueError
                elif isinstance(default, float):
                    cleaned[key] = float(value)
                else:
                    cleaned[key] = str(value).lower()
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"Invalid value for knob {key}: {value!r}") from exc
        if "prologue_overlap" in cleaned and not 0.0 <= cleaned["prologue_overlap"] <= 1.0:
            raise ConfigError("prologue_overlap must lie in [0, 1]")
        if "dma_bytes_per_cycle" in cleaned and cleaned["dma_bytes_per_cycle"] < 1:
            raise ConfigError("dma_bytes_per_cycle must be at least 1")
        if "deconv_mode" in cleaned and cleaned["deconv_mode"] not in config.DECONV_MODES:
            raise ConfigError(f"deconv_mode must be one of {', '.join(config.DECONV_MODES)}")
        return cleaned

    def _read_file(self, path: Path) -> Dict[str, Any]:
        suffix = path.suffix.lower()
        try:
            text = path.read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise ConfigError(f"Cannot read configuration file {path}: {exc}") from exc
        if not text:
            return {}
        try:
            if suffix == ".json":
                return self._as_dict(json.loads(text), path)
            if suffix == ".toml":
                if tomllib is None:
                    raise ConfigError("Reading TOML configs requires the 'tomli' package on Python < 3.11")
                return self._as_dict(tomllib.loads(text), path)
            if suffix in {".yaml", ".yml"}:
                if yaml is None:
                    raise ConfigError("PyYAML is required to parse YAML configuration files")
                return self._as_dict(yaml.safe_load(text) or {}, path)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"Malformed configuration file {path}: {exc}") from exc
        raise ConfigError(f"Unsupported config format: {path.suffix}")

    @staticmethod
    def _as_dict(value: Any, path: Path) -> Dict[str, Any]:
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ConfigError(f"Configuration file {path} must be a mapping")
        return value

    @staticmethod
    def _as_bool(value: Any) -> bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in {"1", "true", "yes", "on", "0", "false", "no", "off"}:
            return value.lower() in {"1", "true", "yes", "on"}
        if isinstance(value, int) and value in (0, 1):
            return bool(value)
        raise ValueError(value)

    @staticmethod
    def _positive_float(value: Any, name: str) -> float:
        try:
            number = float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name} must be a number") from exc
        if number <= 0:
            raise ConfigError(f"{name} must be positive")
        return number

    @staticmethod
    def _optional_path(value: Any) -> Optional[Path]:
        if value is None:
            return None
        if not isinstance(value, str):
            raise ConfigError("Path values must be strings")
        return Path(value).expanduser()


__all__ = ["ConfigLoader", "ConfigError", "ResolvedConfig", "UserConfig"]
