"""Implementation of the `flexsim simulate` command."""

from __future__ import annotations

from typing import Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from flexsim.commands.common import (
    emit_json,
    energy_params,
    load_knob_file,
    load_source,
    manifest_for,
    op_point,
    render_config,
    sim_knobs,
)
from flexsim.commands.verify import diff_outputs, render_diff
from flexsim.core.accel_sim import PHASES, CycleReport
from flexsim.core.accel_sim import run as simulate
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.energy_model import EnergyReport, estimate
from flexsim.core.errors import VerificationMismatch
from flexsim.core.image_io import load_bundle
from flexsim.core.manifest import embed, write_report
from flexsim.utils.digest import fnv1a64_hex


def run_simulate(
    *,
    settings: ResolvedConfig,
    console: Console,
    source: str,
    report_path: Optional[str] = None,
    compare_path: Optional[str] = None,
    knob_file: Optional[str] = None,
    naive_deconv: bool = False,
    timing_only: bool = False,
    fmt: str = "table",
    verbose: bool = False,
) -> None:
    """Run an image (or a workload, compiled on the fly) and report cycles, power and output digests."""

    if verbose:
        render_config(settings, console)

    overrides = load_knob_file(knob_file)
    if naive_deconv:
        overrides["deconv_mode"] = "naive"
    knobs = sim_knobs(settings, overrides)
    point = op_point(settings)
    image, _, inputs = load_source(source, settings)
    if compare_path:
        inputs["bundle"] = compare_path
    manifest = manifest_for(settings, inputs, point=point, knobs=knobs)

    outputs, report = simulate(image, knobs, functional=not timing_only)
    energy = estimate(report, point, energy_params(settings))

    mismatches = None
    if compare_path:
        bundle = load_bundle(compare_path)
        mismatches = diff_outputs(outputs, bundle.expected_outputs)

    payload = embed(
        {
            "program": image.meta.get("name", "program"),
            "cycle_report": report.to_dict(),
            "energy": energy.to_dict(),
            "outputs": [
                {
                    "shape": list(tensor.shape),
                    "precision": tensor.precision,
                    "digest": fnv1a64_hex(tensor.data.astype("<i8").tobytes()),
                }
                for tensor in outputs
            ],
            "compare": None if mismatches is None else {"match": not mismatches, "mismatches": mismatches},
        },
        manifest,
    )
    if report_path:
        write_report(payload, report_path)

    if fmt == "json":
        emit_json(payload)
    else:
        _render_phases(report, console)
        _render_summary(report, energy, console)
        if mismatches:
            render_diff(mismatches, console)
        elif mismatches is not None:
            console.print(Panel.fit("Outputs match the golden bundle", border_style="green"))

    if mismatches:
        raise VerificationMismatch("MISMATCH", f"{len(mismatches)} or more output values differ")


def _render_phases(report: CycleReport, console: Console) -> None:
    table = Table(title="Cycle breakdown")
    table.add_column("Phase", style="cyan")
    table.add_column("Cycles", justify="right")
    table.add_column("Share", justify="right")
    total = report.total_cycles or 1
    for phase in PHASES:
        cycles = report.phases.get(phase, 0)
        table.add_row(phase, str(cycles), f"{100.0 * cycles / total:.1f}%")
    table.add_row("[bold]total[/bold]", f"[bold]{report.total_cycles}[/bold]", "100.0%")
    console.print(table)


def _render_summary(report: CycleReport, energy: EnergyReport, console: Console) -> None:
    console.print(
        Panel.fit(
            "\n".join(
                [
                    f"Operating point: {energy.op_point.name} ({energy.op_point.core_freq / 1e6:g} MHz)",
                    f"Utilization: {report.utilization:.3f}",
                    f"Time: {energy.time_s * 1e3:.3f} ms",
                    f"Power: {energy.power_w * 1e6:.1f} uW",
                    f"Throughput: {energy.gops:.3f} GOPS ({energy.gops_nominal:.3f} nominal)",
                    f"Efficiency: {energy.tops_per_w:.3f} TOPS/W ({energy.tops_per_w_nominal:.3f} nominal)",
                ]
            ),
            title="Simulation",
            border_style="cyan",
        )
    )
