"""Implementation of the `flexsim bench` command."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from tqdm.auto import tqdm

from flexsim.commands.common import (
    emit_csv,
    emit_json,
    energy_params,
    manifest_for,
    mem_config,
    op_point,
    render_config,
    sim_knobs,
)
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.energy_model import EnergyParams, EnergyReport, OperatingPoint, calibrate, estimate
from flexsim.core.errors import WorkloadError
from flexsim.core.manifest import embed, write_report
from flexsim.core.workloads import SUITE, BenchCase, calibration_targets, simulate_case

CSV_COLUMNS = (
    "workload",
    "group",
    "cycles",
    "power_uw",
    "gops",
    "tops_per_w_nominal",
    "tops_per_w",
    "reference_power_uw",
    "reference_gops",
)


@dataclass(frozen=True)
class BenchRow:
    case: BenchCase
    cycles: int
    energy: EnergyReport

    @property
    def power_error(self) -> float:
        return self.energy.power_w * 1e6 / self.case.power_uw - 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "workload": self.case.name,
            "group": self.case.group,
            "cycles": self.cycles,
            "power_uw": self.energy.power_w * 1e6,
            "gops": self.energy.gops,
            "gops_nominal": self.energy.gops_nominal,
            "tops_per_w_nominal": self.energy.tops_per_w_nominal,
            "tops_per_w": self.energy.tops_per_w,
            "reference_power_uw": self.case.power_uw,
            "reference_gops": self.case.gops,
        }

    def as_csv(self) -> List[str]:
        record = self.to_dict()
        return [
            record["workload"],
            record["group"],
            str(record["cycles"]),
            f"{record['power_uw']:.3f}",
            f"{record['gops']:.6f}",
            f"{record['tops_per_w_nominal']:.6f}",
            f"{record['tops_per_w']:.6f}",
            f"{record['reference_power_uw']:.1f}",
            f"{record['reference_gops']:.3f}",
        ]


def select_cases(names: Sequence[str]) -> List[BenchCase]:
    if not names:
        return list(SUITE)
    by_name = {case.name.lower(): case for case in SUITE}
    chosen = []
    for name in names:
        case = by_name.get(name.lower())
        if case is None:
            known = ", ".join(c.name for c in SUITE)
            raise WorkloadError("UNKNOWN_WORKLOAD", f"no benchmark row named '{name}' (known: {known})")
        chosen.append(case)
    return chosen


def bench_rows(
    cases: Sequence[BenchCase],
    *,
    knobs: Dict[str, Any],
    point: OperatingPoint,
    params: EnergyParams,
    mem: Any = None,
    progress: bool = False,
) -> List[BenchRow]:
    rows = []
    for case in tqdm(cases, desc="Benchmarks", unit="row", disable=not progress):
        report = simulate_case(case, knobs=knobs, mem_config=mem)
        rows.append(BenchRow(case, report.total_cycles, estimate(report, point, params)))
    return rows


def run_bench(
    *,
    settings: ResolvedConfig,
    console: Console,
    rows: Sequence[str] = (),
    fit: bool = False,
    fmt: str = "table",
    report_path: Optional[str] = None,
    verbose: bool = False,
) -> None:
    """Reproduce the workload benchmark table with the configured energy parameters."""

    if verbose:
        render_config(settings, console)

    point = op_point(settings)
    knobs = sim_knobs(settings)
    params = energy_params(settings)
    mem = mem_config(settings)
    inputs: Dict[str, Any] = {}
    if settings.energy_params is not None:
        inputs["energy_params"] = settings.energy_params
    manifest = manifest_for(settings, inputs, point=point, knobs=knobs)

    if fit:
        result = calibrate(calibration_targets(knobs=knobs.to_dict(), op_point=point, mem_config=mem), base=params)
        params = result.params
        if fmt == "table":
            console.print(
                Panel.fit(
                    f"Fitted {', '.join(result.fitted)} on {len(result.residuals)} rows "
                    f"(rms log error {result.rms_log_error:.4f})",
                    border_style="cyan",
                )
            )

    results = bench_rows(
        select_cases(rows),
        knobs=knobs.to_dict(),
        point=point,
        params=params,
        mem=mem,
        progress=fmt == "table" and console.is_terminal,
    )
    payload = embed({"rows": [row.to_dict() for row in results]}, manifest)
    if report_path:
        write_report(payload, report_path)

    if fmt == "json":
        emit_json(payload)
    elif fmt == "csv":
        emit_csv(CSV_COLUMNS, [row.as_csv() for row in results])
    else:
        _render_table(results, point, console)


def _render_table(rows: Sequence[BenchRow], point: OperatingPoint, console: Console) -> None:
    table = Table(title=f"Workload benchmarks at {point.name} ({point.core_freq / 1e6:g} MHz)")
    table.add_column("Workload", style="cyan")
    table.add_column("Cycles", justify="right")
    table.add_column("Power uW", justify="right")
    table.add_column("GOPS", justify="right")
    table.add_column("TOPS/W nom", justify="right")
    table.add_column("TOPS/W eff", justify="right")
    table.add_column("Ref uW", justify="right", style="dim")
    table.add_column("Ref GOPS", justify="right", style="dim")
    table.add_column("Power err", justify="right")

    group = None
    for row in rows:
        if group is not None and row.case.group != group:
            table.add_section()
        group = row.case.group
        error = row.power_error
        colour = "green" if abs(error) <= 0.15 else ("yellow" if abs(error) <= 0.25 else "red")
        table.add_row(
            row.case.name,
            str(row.cycles),
            f"{row.energy.power_w * 1e6:.1f}",
            f"{row.energy.gops:.3f}",
            f"{row.energy.tops_per_w_nominal:.2f}",
            f"{row.energy.tops_per_w:.2f}",
            f"{row.case.power_uw:.0f}",
            f"{row.case.gops:.3f}",
            f"[{colour}]{error * 100:+.1f}%[/{colour}]",
        )

    console.print(table)
