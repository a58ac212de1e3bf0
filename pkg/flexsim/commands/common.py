"""Helpers shared by the CLI verbs: settings to runtime objects, program lookup, rendering."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import click
from rich.console import Console
from rich.table import Table

from flexsim.core.accel_sim import SimKnobs
from flexsim.core.compiler import MemConfig, MemoryImage, link_program
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.energy_model import OPERATING_POINTS, EnergyParams, OperatingPoint, resolve_op_point
from flexsim.core.errors import ConfigError, EnergyModelError
from flexsim.core.image_io import load_image
from flexsim.core.manifest import RunManifest, dump_report
from flexsim.core.oracle import GoldenBundle
from flexsim.core.tensor_io import load_workload
from flexsim.core.workloads import WORKLOADS, get_workload

OUTPUT_FORMATS = ("table", "json", "csv")


def energy_params(settings: ResolvedConfig) -> EnergyParams:
    if settings.energy_params is None:
        return EnergyParams()
    return EnergyParams.load(settings.energy_params)


def op_point(settings: ResolvedConfig, name: Optional[str] = None) -> OperatingPoint:
    """The named point, or the configured one with its overrides.

    A configured name that is not built in needs ``core_freq``, ``v_logic``
    and ``v_mem`` in the ``[op_point]`` table.
    """
    if name:
        return resolve_op_point(name.lower())
    overrides = settings.op_point_overrides
    if settings.op_point in OPERATING_POINTS:
        return resolve_op_point(settings.op_point, overrides)
    try:
        return OperatingPoint.from_dict({"name": settings.op_point, **overrides})
    except EnergyModelError as exc:
        raise ConfigError(
            f"operating point '{settings.op_point}' is not built in and its table is incomplete ({exc.message})"
        ) from exc


def sim_knobs(settings: ResolvedConfig, overrides: Optional[Mapping[str, Any]] = None) -> SimKnobs:
    return SimKnobs.from_mapping({**settings.knobs, **dict(overrides or {})})


def mem_config(settings: ResolvedConfig) -> MemConfig:
    return MemConfig(instr_mem_bytes=settings.instr_mem_bytes)


def load_knob_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    source = Path(path)
    try:
        payload = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read knob file {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Knob file {source} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"Knob file {source} must hold an object")
    return payload


def load_source(source: str, settings: ResolvedConfig) -> Tuple[MemoryImage, Optional[GoldenBundle], Dict[str, Any]]:
    """Image for ``source``: a compiled ``.fxi`` file, a workload document or a built-in workload name.

    Returns the image, the golden bundle when it was compiled here, and the
    manifest inputs describing where it came from.
    """
    path = Path(source)
    if path.exists():
        if path.suffix.lower() == ".json":
            image, bundle = link_program(load_workload(path), mem_config(settings))
            return image, bundle, {"workload": path}
        return load_image(path), None, {"image": path}
    if source in WORKLOADS:
        image, bundle = link_program(get_workload(source), mem_config(settings))
        return image, bundle, {"workload": f"builtin:{source}".encode("utf-8")}
    # Let the image reader raise its I/O error for a missing file.
    return load_image(path), None, {"image": path}


def manifest_for(
    settings: ResolvedConfig,
    inputs: Optional[Mapping[str, Any]] = None,
    *,
    point: Optional[OperatingPoint] = None,
    knobs: Optional[SimKnobs] = None,
) -> RunManifest:
    return RunManifest.start(
        inputs=inputs,
        knobs=(knobs or sim_knobs(settings)).to_dict(),
        op_point=(point or op_point(settings)).to_dict(),
    )


def render_config(settings: ResolvedConfig, console: Console) -> None:
    table = Table(title="Configuration")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="magenta")

    for key, value in settings.to_display_dict().items():
        table.add_row(key, value)

    console.print(table)


def emit_json(payload: Mapping[str, Any]) -> None:
    click.echo(dump_report(payload))


def emit_csv(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    click.echo(buffer.getvalue(), nl=False)


def format_si(value: float, unit: str) -> str:
    for factor, prefix in ((1e-9, "n"), (1e-6, "u"), (1e-3, "m"), (1.0, "")):
        if abs(value) < factor * 1000 or prefix == "":
            return f"{value / factor:.3f} {prefix}{unit}"
    return f"{value:.3g} {unit}"  # pragma: no cover


__all__: List[str] = [
    "OUTPUT_FORMATS",
    "emit_csv",
    "emit_json",
    "energy_params",
    "format_si",
    "load_knob_file",
    "load_source",
    "manifest_for",
    "mem_config",
    "op_point",
    "render_config",
    "sim_knobs",
]
