"""Implementation of the `flexsim sweep` command."""

from __future__ import annotations

from typing import Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from flexsim.commands.common import (
    emit_csv,
    emit_json,
    energy_params,
    load_source,
    manifest_for,
    render_config,
    sim_knobs,
)
from flexsim.core.accel_sim import run as simulate
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.energy_model import (
    SWEEP_COLUMNS,
    SWEEP_POINTS,
    load_op_points,
    sweep,
    sweep_row,
    write_sweep_csv,
)
from flexsim.core.manifest import embed


def run_sweep(
    *,
    settings: ResolvedConfig,
    console: Console,
    source: str,
    points_path: Optional[str] = None,
    out_path: Optional[str] = None,
    fmt: str = "table",
    verbose: bool = False,
) -> None:
    """Estimate one program across operating points (efficiency/throughput curve)."""

    if verbose:
        render_config(settings, console)

    knobs = sim_knobs(settings)
    image, _, inputs = load_source(source, settings)
    if points_path:
        inputs["points"] = points_path
    points = load_op_points(points_path) if points_path else list(SWEEP_POINTS)
    manifest = manifest_for(settings, inputs, point=points[0], knobs=knobs)

    _, report = simulate(image, knobs, functional=False)
    rows = sweep(report, points, energy_params(settings))
    if out_path:
        write_sweep_csv(rows, out_path)

    if fmt == "json":
        emit_json(embed({"cycles": report.total_cycles, "points": [row.to_dict() for row in rows]}, manifest))
        return
    if fmt == "csv":
        emit_csv(SWEEP_COLUMNS, [sweep_row(row) for row in rows])
        return

    table = Table(title=f"Operating-point sweep ({report.total_cycles} cycles)")
    table.add_column("Point", style="cyan")
    table.add_column("MHz", justify="right")
    table.add_column("V logic/mem", justify="right")
    table.add_column("Power uW", justify="right")
    table.add_column("GOPS", justify="right")
    table.add_column("TOPS/W", justify="right")
    table.add_column("Energy uJ", justify="right")
    for row in rows:
        table.add_row(
            row.op_point.name,
            f"{row.op_point.core_freq / 1e6:g}",
            f"{row.op_point.v_logic:.2f}/{row.op_point.v_mem:.2f}",
            f"{row.power_w * 1e6:.1f}",
            f"{row.gops:.3f}",
            f"{row.tops_per_w:.3f}",
            f"{row.energy_j * 1e6:.3f}",
        )
    console.print(table)
    if out_path:
        console.print(Panel.fit(f"Curve written to {out_path}", border_style="green"))
