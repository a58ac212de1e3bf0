"""Implementation of the `flexsim calibrate` command."""

from __future__ import annotations

from typing import Any, Dict, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from flexsim.commands.bench import bench_rows
from flexsim.commands.common import (
    emit_json,
    energy_params,
    manifest_for,
    mem_config,
    op_point,
    render_config,
    sim_knobs,
)
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.energy_model import DEFAULT_FREE_PARAMS, CalibrationResult, calibrate
from flexsim.core.manifest import embed
from flexsim.core.workloads import CALIBRATION_ROWS, PREDICTION_ROWS, calibration_targets, get_case


def run_calibrate(
    *,
    settings: ResolvedConfig,
    console: Console,
    out_path: Optional[str] = None,
    free: Sequence[str] = (),
    fmt: str = "table",
    verbose: bool = False,
) -> None:
    """Fit energy parameters on the calibration rows and cross-predict the real-time rows."""

    if verbose:
        render_config(settings, console)

    point = op_point(settings)
    knobs = sim_knobs(settings)
    mem = mem_config(settings)
    manifest = manifest_for(settings, point=point, knobs=knobs)

    targets = calibration_targets(CALIBRATION_ROWS, knobs=knobs.to_dict(), op_point=point, mem_config=mem)
    result = calibrate(targets, tuple(free) or DEFAULT_FREE_PARAMS, base=energy_params(settings))
    predictions = bench_rows(
        [get_case(name) for name in PREDICTION_ROWS],
        knobs=knobs.to_dict(),
        point=point,
        params=result.params,
        mem=mem,
    )
    if out_path:
        result.params.save(out_path)

    cross: Dict[str, Dict[str, Any]] = {
        row.case.name: {
            "predicted_uw": row.energy.power_w * 1e6,
            "reference_uw": row.case.power_uw,
            "error": row.power_error,
        }
        for row in predictions
    }
    if fmt == "json":
        emit_json(embed({**result.to_dict(), "cross_prediction": cross}, manifest))
        return

    _render_fit(result, console)
    table = Table(title="Cross-prediction")
    table.add_column("Workload", style="cyan")
    table.add_column("Predicted uW", justify="right")
    table.add_column("Reference uW", justify="right")
    table.add_column("Error", justify="right")
    for name, record in cross.items():
        table.add_row(
            name, f"{record['predicted_uw']:.1f}", f"{record['reference_uw']:.0f}", f"{record['error'] * 100:+.1f}%"
        )
    console.print(table)
    if out_path:
        console.print(Panel.fit(f"Parameters written to {out_path}", border_style="green"))


def _render_fit(result: CalibrationResult, console: Console) -> None:
    fitted = Table(title="Fitted parameters")
    fitted.add_column("Parameter", style="cyan")
    fitted.add_column("Value", justify="right")
    for name, value in result.fitted.items():
        unit = "x" if name.startswith("leak:") else "pJ"
        fitted.add_row(name, f"{value:.4f} {unit}")
    console.print(fitted)

    residuals = Table(title=f"Residuals (rms log error {result.rms_log_error:.4f})")
    residuals.add_column("Target", style="cyan")
    residuals.add_column("Predicted uW", justify="right")
    residuals.add_column("Log residual", justify="right")
    for name, value in result.residuals.items():
        residuals.add_row(name, f"{result.predictions_w[name] * 1e6:.1f}", f"{value:+.4f}")
    console.print(residuals)
