#!/usr/bin/env python3
"""Command-line entrypoints for flexsim (`flexsim`) and the standalone compiler (`flexc`)."""

from __future__ import annotations

import sys
from typing import Any, Optional, Tuple

import click
from rich.console import Console
from rich.panel import Panel

from flexsim import config, get_version
from flexsim.core.config_loader import ConfigLoader
from flexsim.core.errors import FlexsimError
from flexsim.utils.logger import logger, set_verbose

TEXT_FORMATS = ("table", "json")
ALL_FORMATS = ("table", "json", "csv")


def _report_error(exc: FlexsimError) -> None:
    Console(stderr=True).print(
        Panel.fit(f"[bold]{exc.code}[/bold]\n{exc.message}", title="flexsim error", border_style="red")
    )


class FlexsimGroup(click.Group):
    """Click group that turns domain errors into their documented exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except FlexsimError as exc:
            logger.debug("command failed", exc_info=True)
            _report_error(exc)
            ctx.exit(exc.exit_code)


def _setup(ctx: click.Context, config_file: Optional[str], verbose: bool) -> None:
    loader = ConfigLoader(config_file)
    set_verbose(verbose)
    ctx.ensure_object(dict)
    ctx.obj["config_loader"] = loader
    ctx.obj["verbose"] = verbose
    ctx.obj["console"] = Console()


_config_option = click.option(
    "--config",
    "config_file",
    type=click.Path(dir_okay=False, resolve_path=True),
    help="Path to a custom flexsim config file (default: $FLEXSIM_CONFIG or ~/.config/flexsim)",
)
_verbose_option = click.option("--verbose", "-v", is_flag=True, help="Show configuration and info-level logs")


@click.group(cls=FlexsimGroup)
@click.version_option(version=get_version(), prog_name=config.APP_NAME)
@_config_option
@_verbose_option
@click.pass_context
def cli(ctx: click.Context, config_file: Optional[str], verbose: bool) -> None:
    """Simulator, compiler and power model for a flexible tinyML accelerator SoC."""

    _setup(ctx, config_file, verbose)


@click.group(cls=FlexsimGroup)
@click.version_option(version=get_version(), prog_name="flexc")
@_config_option
@_verbose_option
@click.pass_context
def flexc(ctx: click.Context, config_file: Optional[str], verbose: bool) -> None:
    """Layer-to-ucode compiler."""

    _setup(ctx, config_file, verbose)


@click.command(name="compile")
@click.argument("source")
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Image path (default: <output_dir>/<name>.fxi)")
@click.option("--bundle", "bundle_path", type=click.Path(dir_okay=False), help="Also write the golden bundle")
@click.option("--format", "fmt", type=click.Choice(TEXT_FORMATS), default="table", show_default=True)
@click.option("--output-dir", type=click.Path(file_okay=False), help="Override the output directory")
@click.pass_context
def compile_cmd(
    ctx: click.Context,
    source: str,
    output: Optional[str],
    bundle_path: Optional[str],
    fmt: str,
    output_dir: Optional[str],
) -> None:
    """Compile a workload document or built-in workload into a memory image."""

    loader: ConfigLoader = ctx.obj["config_loader"]
    settings = loader.derive(output_dir=output_dir)

    from flexsim.commands.compile import run_compile

    run_compile(
        settings=settings,
        console=ctx.obj["console"],
        source=source,
        output=output,
        bundle_path=bundle_path,
        fmt=fmt,
        verbose=ctx.obj["verbose"],
    )


@click.command(name="simulate")
@click.argument("source")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the JSON report here")
@click.option("--compare", "compare_path", type=click.Path(dir_okay=False), help="Golden bundle to compare against")
@click.option(
    "--mode",
    type=click.Choice(["skip", "naive-deconv"]),
    default="skip",
    show_default=True,
    help="Deconvolution execution mode",
)
@click.option("--knobs", "knob_file", type=click.Path(dir_okay=False), help="JSON file of simulator knobs")
@click.option("--timing-only", is_flag=True, help="Skip functional execution")
@click.option("--op-point", help="Named operating point for the power estimate")
@click.option("--format", "fmt", type=click.Choice(TEXT_FORMATS), default="table", show_default=True)
@click.pass_context
def simulate_cmd(
    ctx: click.Context,
    source: str,
    report_path: Optional[str],
    compare_path: Optional[str],
    mode: str,
    knob_file: Optional[str],
    timing_only: bool,
    op_point: Optional[str],
    fmt: str,
) -> None:
    """Run a memory image on the cycle-approximate simulator."""

    loader: ConfigLoader = ctx.obj["config_loader"]
    settings = loader.derive(op_point=op_point)

    from flexsim.commands.simulate import run_simulate

    run_simulate(
        settings=settings,
        console=ctx.obj["console"],
        source=source,
        report_path=report_path,
        compare_path=compare_path,
        knob_file=knob_file,
        naive_deconv=mode == "naive-deconv",
        timing_only=timing_only,
        fmt=fmt,
        verbose=ctx.obj["verbose"],
    )


@click.command(name="verify")
@click.argument("image_path")
@click.argument("bundle_path")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the JSON diff report here")
@click.option("--format", "fmt", type=click.Choice(TEXT_FORMATS), default="table", show_default=True)
@click.pass_context
def verify_cmd(
    ctx: click.Context, image_path: str, bundle_path: str, report_path: Optional[str], fmt: str
) -> None:
    """Check simulator outputs bit for bit against a golden bundle (exit 1 on mismatch)."""

    loader: ConfigLoader = ctx.obj["config_loader"]
    settings = loader.derive()

    from flexsim.commands.verify import run_verify

    run_verify(
        settings=settings,
        console=ctx.obj["console"],
        image_path=image_path,
        bundle_path=bundle_path,
        report_path=report_path,
        fmt=fmt,
    )


@click.command(name="bench")
@click.option("--row", "rows", multiple=True, help="Only run the named benchmark row (repeatable)")
@click.option("--fit", is_flag=True, help="Calibrate on the reference rows before reporting")
@click.option("--op-point", help="Named operating point")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Write the JSON report here")
@click.option("--format", "fmt", type=click.Choice(ALL_FORMATS), default="table", show_default=True)
@click.pass_context
def bench_cmd(
    ctx: click.Context,
    rows: Tuple[str, ...],
    fit: bool,
    op_point: Optional[str],
    report_path: Optional[str],
    fmt: str,
) -> None:
    """Reproduce the workload benchmark table."""

    loader: ConfigLoader = ctx.obj["config_loader"]
    settings = loader.derive(op_point=op_point)

    from flexsim.commands.bench import run_bench

    run_bench(
        settings=settings,
        console=ctx.obj["console"],
        rows=rows,
        fit=fit,
        fmt=fmt,
        report_path=report_path,
        verbose=ctx.obj["verbose"],
    )


@click.command(name="sweep")
@click.argument("source")
@click.option("--points", "points_path", type=click.Path(dir_okay=False), help="JSON list of operating points")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write the curve as CSV")
@click.option("--format", "fmt", type=click.Choice(ALL_FORMATS), default="table", show_default=True)
@click.pass_context
def sweep_cmd(
    ctx: click.Context, source: str, points_path: Optional[str], out_path: Optional[str], fmt: str
) -> None:
    """Estimate a program across operating points."""

    loader: ConfigLoader = ctx.obj["config_loader"]
    settings = loader.derive()

    from flexsim.commands.sweep import run_sweep

    run_sweep(
        settings=settings,
        console=ctx.obj["console"],
        source=source,
        points_path=points_path,
        out_path=out_path,
        fmt=fmt,
        verbose=ctx.obj["verbose"],
    )


@click.command(name="scenario")
@click.argument("source")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), help="Write the power trace CSV")
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False), help="Write the JSON summary")
@click.option("--events", "events_path", type=click.Path(dir_okay=False), help="Write the WuC event log CSV")
@click.option("--duty", type=click.FloatRange(0.0, 1.0, min_open=True), help="Duty cycle for presets")
@click.option("--repeat", type=click.IntRange(min=1), help="Iterations for presets")
@click.option("--aon-freq", type=float, help="Always-on clock in Hz")
@click.option("--wake-energy", type=float, default=0.0, show_default=True, help="Energy per wake-up in J")
@click.option("--format", "fmt", type=click.Choice(TEXT_FORMATS), default="table", show_default=True)
@click.pass_context
def scenario_cmd(
    ctx: click.Context,
    source: str,
    trace_path: Optional[str],
    summary_path: Optional[str],
    events_path: Optional[str],
    duty: Optional[float],
    repeat: Optional[int],
    aon_freq: Optional[float],
    wake_energy: float,
    fmt: str,
) -> None:
    """Run a scenario script (JSON) or preset (kws, machine-monitoring)."""

    loader: ConfigLoader = ctx.obj["config_loader"]
    settings = loader.derive()

    from flexsim.commands.scenario import run_scenario

    run_scenario(
        settings=settings,
        console=ctx.obj["console"],
        source=source,
        trace_path=trace_path,
        summary_path=summary_path,
        events_path=events_path,
        duty=duty,
        repeat=repeat,
        aon_freq=aon_freq,
        wake_energy=wake_energy,
        fmt=fmt,
        verbose=ctx.obj["verbose"],
    )


@click.command(name="calibrate")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write fitted parameters as JSON")
@click.option(
    "--free",
    multiple=True,
    help="Free parameter to fit (repeatable; default mac8 mac4 mac2 leak:efficiency)",
)
@click.option("--op-point", help="Named operating point of the measurements")
@click.option("--format", "fmt", type=click.Choice(TEXT_FORMATS), default="table", show_default=True)
@click.pass_context
def calibrate_cmd(
    ctx: click.Context, out_path: Optional[str], free: Tuple[str, ...], op_point: Optional[str], fmt: str
) -> None:
    """Fit energy parameters to the reference benchmark rows."""

    loader: ConfigLoader = ctx.obj["config_loader"]
    settings = loader.derive(op_point=op_point)

    from flexsim.commands.calibrate import run_calibrate

    run_calibrate(
        settings=settings,
        console=ctx.obj["console"],
        out_path=out_path,
        free=free,
        fmt=fmt,
        verbose=ctx.obj["verbose"],
    )


for _command in (compile_cmd, simulate_cmd, verify_cmd, bench_cmd, sweep_cmd, scenario_cmd, calibrate_cmd):
    cli.add_command(_command)
flexc.add_command(compile_cmd)


def _run(group: click.Group) -> None:
    try:
        code = group.main(obj={}, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except (KeyboardInterrupt, click.exceptions.Abort):
        Console().print("[yellow]\nOperation cancelled by user[/yellow]")
        sys.exit(130)
    except FlexsimError as exc:
        _report_error(exc)
        sys.exit(exc.exit_code)
    sys.exit(code if isinstance(code, int) else config.EXIT_OK)


def main() -> None:
    """Execute the flexsim CLI and present friendly error messages."""
    _run(cli)


def flexc_main() -> None:
    _run(flexc)


if __name__ == "__main__":
    main()
