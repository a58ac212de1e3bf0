"""Implementation of the `flexsim verify` command."""

from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from flexsim.commands.common import emit_json, manifest_for, sim_knobs
from flexsim.core.accel_sim import run as simulate
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.errors import VerificationMismatch
from flexsim.core.image_io import load_bundle, load_image
from flexsim.core.manifest import embed, tensors_digest, write_report
from flexsim.core.workload_ir import QuantTensor

DIFF_LIMIT = 10


def diff_outputs(
    actual: Sequence[QuantTensor], expected: Sequence[QuantTensor], limit: int = DIFF_LIMIT
) -> List[Dict[str, Any]]:
    """First ``limit`` mismatches as ``{tensor, index, expected, actual}``; shape errors use index -1."""
    mismatches: List[Dict[str, Any]] = []
    if len(actual) != len(expected):
        return [{"tensor": 0, "index": -1, "expected": len(expected), "actual": len(actual)}]
    for position, (got, want) in enumerate(zip(actual, expected)):
        if got.shape != want.shape:
            mismatches.append(
                {"tensor": position, "index": -1, "expected": list(want.shape), "actual": list(got.shape)}
            )
            continue
        flat_got = got.data.ravel()
        flat_want = want.data.ravel()
        for index in np.flatnonzero(flat_got != flat_want)[: limit - len(mismatches)]:
            mismatches.append(
                {
                    "tensor": position,
                    "index": int(index),
                    "expected": int(flat_want[index]),
                    "actual": int(flat_got[index]),
                }
            )
        if len(mismatches) >= limit:
            break
    return mismatches[:limit]


def render_diff(mismatches: Sequence[Dict[str, Any]], console: Console) -> None:
    table = Table(title=f"First {len(mismatches)} mismatch(es)")
    table.add_column("Tensor", justify="right")
    table.add_column("Index", justify="right", style="cyan")
    table.add_column("Expected", justify="right")
    table.add_column("Actual", justify="right", style="red")
    for item in mismatches:
        index = "shape" if item["index"] < 0 else str(item["index"])
        table.add_row(str(item["tensor"]), index, str(item["expected"]), str(item["actual"]))
    console.print(table)


def run_verify(
    *,
    settings: ResolvedConfig,
    console: Console,
    image_path: str,
    bundle_path: str,
    report_path: Optional[str] = None,
    fmt: str = "table",
) -> None:
    """Simulate ``image_path`` and compare its outputs bit for bit with ``bundle_path``."""

    image = load_image(image_path)
    bundle = load_bundle(bundle_path)
    knobs = sim_knobs(settings)
    manifest = manifest_for(settings, {"image": image_path, "bundle": bundle_path}, knobs=knobs)

    outputs, report = simulate(image, knobs, functional=True)
    mismatches = diff_outputs(outputs, bundle.expected_outputs)
    payload = embed(
        {
            "match": not mismatches,
            "mismatches": mismatches,
            "outputs_digest": tensors_digest(outputs),
            "expected_digest": tensors_digest(bundle.expected_outputs),
            "total_cycles": report.total_cycles,
        },
        manifest,
    )
    if report_path:
        write_report(payload, report_path)

    if fmt == "json":
        emit_json(payload)
    elif mismatches:
        render_diff(mismatches, console)
    else:
        console.print(
            Panel.fit(
                f"Outputs match the golden bundle ({sum(t.size for t in outputs)} values, "
                f"{report.total_cycles} cycles)",
                border_style="green",
            )
        )

    if mismatches:
        raise VerificationMismatch(
            "MISMATCH", f"{len(mismatches)} or more output values differ from the golden bundle"
        )
