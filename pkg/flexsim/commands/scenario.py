"""Implementation of the `flexsim scenario` command."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from flexsim.commands.common import emit_json, energy_params, manifest_for, mem_config, render_config, sim_knobs
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.manifest import embed, write_report
from flexsim.core.scenario import (
    PRESETS,
    PowerTrace,
    ScenarioEngine,
    ScenarioScript,
    load_script,
    write_trace_csv,
    write_wuc_log,
)


def resolve_script(source: str, *, duty: Optional[float] = None, repeat: Optional[int] = None) -> ScenarioScript:
    """A preset name or a JSON script path; ``duty``/``repeat`` only apply to presets."""
    if source in PRESETS and not Path(source).exists():
        options: Dict[str, Any] = {}
        if duty is not None:
            options["duty"] = duty
        if repeat is not None:
            options["repeat"] = repeat
        return PRESETS[source](**options)
    return load_script(source)


def run_scenario(
    *,
    settings: ResolvedConfig,
    console: Console,
    source: str,
    trace_path: Optional[str] = None,
    summary_path: Optional[str] = None,
    events_path: Optional[str] = None,
    duty: Optional[float] = None,
    repeat: Optional[int] = None,
    aon_freq: Optional[float] = None,
    wake_energy: float = 0.0,
    fmt: str = "table",
    verbose: bool = False,
) -> None:
    """Run an application scenario and report its power trace summary."""

    if verbose:
        render_config(settings, console)

    script = resolve_script(source, duty=duty, repeat=repeat)
    inputs: Dict[str, Any] = {"script": Path(source) if Path(source).exists() else f"preset:{source}".encode()}
    knobs = sim_knobs(settings)
    manifest = manifest_for(settings, inputs, knobs=knobs)

    engine_options: Dict[str, Any] = {
        "knobs": knobs,
        "mem_config": mem_config(settings),
        "wake_energy_j": wake_energy,
        "base_dir": Path(source).parent if Path(source).exists() else None,
    }
    if aon_freq is not None:
        engine_options["aon_freq"] = aon_freq
    engine = ScenarioEngine(energy_params(settings), **engine_options)
    trace = engine.run(script)

    if trace_path:
        write_trace_csv(trace, trace_path)
    if events_path:
        write_wuc_log(engine, events_path)
    payload = embed({"script": script.to_dict(), "summary": trace.summary()}, manifest)
    if summary_path:
        write_report(payload, summary_path)

    if fmt == "json":
        emit_json(payload)
        return
    _render_phases(trace, console)
    console.print(
        Panel.fit(
            "\n".join(
                [
                    f"Scenario: [bold]{script.name}[/bold] x{script.repeat}",
                    f"Duration: {trace.total_time:.4f} s",
                    f"Average power: {trace.average_power_w * 1e6:.2f} uW",
                    f"Duty cycle: {trace.duty_cycle:.4f}",
                    f"WuC events: {len(engine.wuc.events)}",
                ]
            ),
            border_style="green",
        )
    )


def _render_phases(trace: PowerTrace, console: Console) -> None:
    time_by_label: Dict[str, float] = {}
    for segment in trace.segments:
        time_by_label[segment.label] = time_by_label.get(segment.label, 0.0) + segment.duration
    energy = trace.phase_energy()

    table = Table(title="Phases")
    table.add_column("Phase", style="cyan")
    table.add_column("Time s", justify="right")
    table.add_column("Energy uJ", justify="right")
    table.add_column("Mean power uW", justify="right")
    for label, seconds in time_by_label.items():
        joules = energy.get(label, 0.0)
        table.add_row(label, f"{seconds:.6f}", f"{joules * 1e6:.3f}", f"{joules / seconds * 1e6:.2f}")
    console.print(table)
