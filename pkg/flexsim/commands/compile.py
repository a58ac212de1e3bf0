"""Implementation of the `flexsim compile` / `flexc compile` command."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from flexsim.commands.common import emit_json, load_source, manifest_for, render_config
from flexsim.core.compiler import MemoryImage
from flexsim.core.config_loader import ResolvedConfig
from flexsim.core.errors import CompileError
from flexsim.core.image_io import save_bundle, save_image
from flexsim.core.manifest import embed


def run_compile(
    *,
    settings: ResolvedConfig,
    console: Console,
    source: str,
    output: Optional[str],
    bundle_path: Optional[str],
    fmt: str = "table",
    verbose: bool = False,
) -> None:
    """Lower a workload to a memory image (and optionally its golden bundle)."""

    if verbose:
        render_config(settings, console)

    image, bundle, inputs = load_source(source, settings)
    if bundle is None:
        raise CompileError("NOT_A_WORKLOAD", f"{source} is already a compiled image")
    manifest = manifest_for(settings, inputs)

    name = str(image.meta.get("name", "program"))
    image_path = Path(output) if output else settings.output_dir / f"{name}.fxi"
    save_image(image, image_path)
    written = {"image": str(image_path)}
    if bundle_path:
        save_bundle(bundle, bundle_path)
        written["bundle"] = str(bundle_path)

    summary = {
        "name": name,
        "instructions": image.instruction_count,
        "dma_transfers": len(image.dma),
        "index_words": len(image.index_words),
        "l2_bytes": image.l2_used,
        "layers": [
            {
                "name": layer["name"],
                "kind": layer["desc"]["kind"],
                "ox_par": layer["ox_par"],
                "tap_split": layer["tap_split"],
            }
            for layer in image.meta.get("layers", [])
        ],
        "files": written,
    }
    if fmt == "json":
        emit_json(embed(summary, manifest))
        return

    _render_layers(image, console)
    console.print(
        Panel.fit(
            "\n".join(
                [
                    f"Compiled [bold]{name}[/bold]",
                    f"Instructions: {image.instruction_count}",
                    f"DMA transfers: {len(image.dma)}",
                    f"L2 used: {image.l2_used} B",
                    *[f"{kind.capitalize()}: {path}" for kind, path in written.items()],
                ]
            ),
            border_style="green",
        )
    )


def _render_layers(image: MemoryImage, console: Console) -> None:
    tiles_per_layer: dict = {}
    for tile in image.meta.get("tiles", []):
        tiles_per_layer[tile["layer"]] = tiles_per_layer.get(tile["layer"], 0) + 1

    table = Table(title="Layers")
    table.add_column("#", justify="right")
    table.add_column("Layer", style="cyan")
    table.add_column("Kind")
    table.add_column("Tiles", justify="right")
    table.add_column("OX par", justify="right")
    table.add_column("Tap split", justify="center")

    for index, layer in enumerate(image.meta.get("layers", [])):
        table.add_row(
            str(index),
            layer["name"],
            layer["desc"]["kind"],
            str(tiles_per_layer.get(index, 0)),
            str(layer["ox_par"]),
            "yes" if layer["tap_split"] else "no",
        )

    console.print(table)
