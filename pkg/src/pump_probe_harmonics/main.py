#!/usr/bin/env python3
"""
Pump-Probe Harmonic Solver - Main CLI Interface
"""

import csv
import io
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Union

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from . import __version__
from . import system_file as system_files
from .config import ensure_user_directories, settings, show_user_paths
from .errors import PumpProbeError, SweepError
from .harmonic_solver import solve as solve_harmonics
from .models import ExplicitModel
from .plotting import plot_convergence, plot_spectrum
from .spectroscopy import (
    SpectrumResult,
    SweepStatus,
    VelocityGrid,
    intensity_gain,
    k_convergence,
    pump_susceptibility,
    susceptibility,
)
from .spectroscopy import sweep as run_sweep
from .system import flatten, vec_unindex
from .validation import validate_spec

console = Console()
logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def _configure_logging(level: str) -> None:
    handlers: list = [RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)]
    if settings.log_file:
        file_handler = logging.FileHandler(settings.log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        handlers.append(file_handler)
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]", handlers=handlers, force=True)


def _load(config_path: str) -> system_files.SystemFile:
    try:
        return system_files.load(config_path)
    except PumpProbeError as e:
        console.print(f"❌ {e}", style="red")
        raise click.Abort()


def _sweep_label(loaded: system_files.SystemFile) -> str:
    return f"{type(loaded.model).sweep_label.capitalize()} (MHz)"


@click.group(invoke_without_command=True)
@click.version_option(version=__version__)
@click.option('--show-paths', is_flag=True, help='Show file locations and exit')
@click.option('--log-level', default=None,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              help='Logging level (default: PUMP_PROBE_LOG_LEVEL or INFO)')
@click.pass_context
def cli(ctx, show_paths: bool, log_level: Optional[str]):
    """Pump-Probe Harmonic Solver

    Computes the pseudo-steady-state density matrix of an N-level atom driven
    by a pump and a probe on the same transitions, expanded in harmonics of
    their beat frequency, and derives probe susceptibility and gain spectra
    with Doppler averaging.

    System files are TOML; see docs/SYSTEM_FILE_FORMAT.md and configs/.
    """
    ensure_user_directories()
    _configure_logging(log_level or settings.log_level)

    if show_paths:
        show_user_paths()
        return

    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())


@cli.command('show-paths')
def show_paths_command():
    """Show file locations and active settings."""
    show_user_paths()


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--orders', '-k', type=click.IntRange(min=1), help='Harmonic truncation order K')
@click.option('--detuning-hz', type=float, help='Override the [solve] detuning (Hz)')
@click.option('--out', type=click.Path(dir_okay=False), help='Write the labeled A vector as CSV')
@click.option('--show-zeros', is_flag=True, help='Also list A-vector entries that are exactly zero')
@click.option('--dump-config', type=click.Path(dir_okay=False), help='Write the parsed config back as TOML')
def solve(config_path: str, orders: Optional[int], detuning_hz: Optional[float], out: Optional[str],
          show_zeros: bool, dump_config: Optional[str]):
    """Solve one operating point and print the harmonics with diagnostics."""
    loaded = _load(config_path)
    order = orders or loaded.solve.orders or settings.default_orders
    detuning = detuning_hz * TWO_PI if detuning_hz is not None else loaded.solve_detuning

    try:
        spec = loaded.build(detuning)
        console.print(
            f"🔍 Solving N={spec.n_levels}, K={order}, delta = {spec.beat_frequency / TWO_PI:.6g} Hz...",
            style="blue",
        )
        harmonics = solve_harmonics(spec, order)
    except PumpProbeError as e:
        console.print(f"❌ {e}", style="red")
        raise click.Abort()

    a_vector = flatten(harmonics)
    table = Table(title="A vector", show_header=True)
    table.add_column("#", style="dim", justify="right")
    table.add_column("i", style="cyan", justify="right")
    table.add_column("j", style="cyan", justify="right")
    table.add_column("k", style="blue", justify="right")
    table.add_column("Re", style="green", justify="right")
    table.add_column("Im", style="magenta", justify="right")
    for position, value in enumerate(a_vector, start=1):
        if value == 0 and not show_zeros:
            continue
        i, j, k = vec_unindex(position, spec.n_levels, order)
        table.add_row(str(position), str(i), str(j), f"{k:+d}", f"{value.real:.6e}", f"{value.imag:.6e}")
    console.print(table)

    diagnostics = harmonics.diagnostics
    closure = "✅ closed" if spec.is_closed() else f"⚠️  open, defects {np.array2string(spec.closure_defects(), precision=3)}"
    lines = [
        f"[bold]Populations:[/bold] {np.array2string(harmonics.populations, precision=6)}",
        f"[bold]Trace error:[/bold] {harmonics.trace_error():.3e}",
        f"[bold]Hermiticity error:[/bold] {harmonics.hermiticity_error():.3e}",
        f"[bold]Relative residual:[/bold] {diagnostics.residual:.3e}",
        f"[bold]Condition estimate:[/bold] {diagnostics.condition:.3e} (reduced size {diagnostics.size})",
        f"[bold]Closure:[/bold] {closure}",
    ]
    model = loaded.model
    try:
        chi = susceptibility(harmonics, loaded.medium, model.probe_rabi_frequency, model.coherence_pairs())
        lines.append(f"[bold]Probe chi:[/bold] {chi.real:.6e} {chi.imag:+.6e}j (gain {-chi.imag:.6e})")
        if model.pump_rabi_frequency > 0 and model.pump_coherence_pairs():
            pump_chi = pump_susceptibility(
                harmonics, loaded.medium, model.pump_rabi_frequency, model.pump_coherence_pairs()
            )
            lines.append(f"[bold]Pump chi:[/bold] {pump_chi.real:.6e} {pump_chi.imag:+.6e}j")
    except PumpProbeError as e:
        lines.append(f"[bold]Probe chi:[/bold] unavailable ({e})")
    console.print(Panel("\n".join(lines), title="Diagnostics", border_style="blue"))

    if out:
        _write_text(out, _format_a_vector_csv(a_vector, spec.n_levels, order))
        console.print(f"💾 A vector written to {out}", style="green")
    if dump_config:
        _dump_config(loaded, dump_config)


def _format_a_vector_csv(a_vector: np.ndarray, n_levels: int, order: int) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(["position", "i", "j", "k", "real", "imag"])
    for position, value in enumerate(a_vector, start=1):
        i, j, k = vec_unindex(position, n_levels, order)
        writer.writerow([position, i, j, k, repr(float(value.real)), repr(float(value.imag))])
    return output.getvalue()


def format_spectrum_csv(result: SpectrumResult, cell_length_m: Optional[float] = None,
                        wavevector: Optional[float] = None) -> str:
    """Spectrum rows: detuning_hz, chi_real, chi_imag, gain, rho_ii... [, intensity_gain]."""
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    header = ["detuning_hz", "chi_real", "chi_imag", "gain"]
    header += [f"rho_{level}{level}" for level in range(1, result.n_levels + 1)]
    if cell_length_m is not None:
        header.append("intensity_gain")
    writer.writerow(header)

    single_pass = intensity_gain(result.chi, wavevector, cell_length_m) if cell_length_m is not None else None
    for index in range(result.n_points):
        chi = result.chi[index]
        row = [result.detunings_hz[index], chi.real, chi.imag, -chi.imag]
        row += list(result.populations[index])
        if single_pass is not None:
            row.append(single_pass[index])
        writer.writerow([repr(float(value)) for value in row])
    return output.getvalue()


def _write_text(path: str, text: str) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        console.print(f"❌ Cannot write {path}: {e}", style="red")
        raise click.Abort()


def _ensure_writable(path: Union[str, Path]) -> None:
    """Fail before any solving if ``path`` cannot be created."""
    parent = Path(path).parent
    try:
        parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        console.print(f"❌ Cannot write {path}: {e}", style="red")
        raise click.Abort()
    if not os.access(parent, os.W_OK):
        console.print(f"❌ Cannot write {path}: directory {parent} is not writable", style="red")
        raise click.Abort()


def _write_plot(plotter: Callable[..., Path], data, path: str, xlabel: str) -> None:
    try:
        plotter(data, path, xlabel=xlabel)
    except OSError as e:
        console.print(f"❌ Cannot write {path}: {e}", style="red")
        raise click.Abort()
    console.print(f"🖼️  Plot written to {path}", style="green")


def _dump_config(loaded: system_files.SystemFile, path: str) -> None:
    try:
        system_files.dump(loaded, path)
    except PumpProbeError as e:
        console.print(f"❌ {e}", style="red")
        raise click.Abort()
    console.print(f"💾 Config written to {path}", style="green")


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--orders', '-k', type=click.IntRange(min=1), help='Harmonic truncation order K')
@click.option('--points', type=click.IntRange(min=2), help='Number of detuning points')
@click.option('--start-hz', type=float, help='Sweep start (Hz)')
@click.option('--stop-hz', type=float, help='Sweep stop (Hz)')
@click.option('--velocity-groups', type=click.IntRange(min=1), help='Doppler velocity groups (1 = no averaging)')
@click.option('--temperature-k', type=click.FloatRange(min=0, min_open=True), help='Vapor temperature (K)')
@click.option('--jobs', '-j', type=click.IntRange(min=1), help='Worker threads (default: PUMP_PROBE_DEFAULT_JOBS)')
@click.option('--out', '-o', type=click.Path(dir_okay=False), help='CSV output path')
@click.option('--plot', type=click.Path(dir_okay=False), help='Write a PNG plot of the spectrum')
@click.option('--cell-length-m', type=click.FloatRange(min=0, min_open=True),
              help='Cell length for the intensity_gain column (m)')
@click.option('--dump-config', type=click.Path(dir_okay=False), help='Write the effective config as TOML')
def sweep(config_path: str, orders: Optional[int], points: Optional[int], start_hz: Optional[float],
          stop_hz: Optional[float], velocity_groups: Optional[int], temperature_k: Optional[float],
          jobs: Optional[int], out: Optional[str], plot: Optional[str], cell_length_m: Optional[float],
          dump_config: Optional[str]):
    """Sweep the probe detuning and write the spectrum as CSV."""
    loaded = _load(config_path)
    section = loaded.sweep.model_copy(update={
        key: value for key, value in {
            "orders": orders,
            "points": points,
            "start": start_hz * TWO_PI if start_hz is not None else None,
            "stop": stop_hz * TWO_PI if stop_hz is not None else None,
            "velocity_groups": velocity_groups,
            "jobs": jobs,
            "cell_length_m": cell_length_m,
        }.items() if value is not None
    })
    medium = loaded.medium
    if temperature_k is not None:
        medium = medium.model_copy(update={"temperature": temperature_k})
    loaded = system_files.SystemFile(
        model=loaded.model, sweep=section, solve=loaded.solve, medium=medium, path=loaded.path
    )
    if dump_config:
        _dump_config(loaded, dump_config)

    out_path = Path(out) if out else settings.output_dir / f"{Path(config_path).stem}.csv"
    _ensure_writable(out_path)
    if plot:
        _ensure_writable(plot)
    velocities = VelocityGrid.thermal(medium, section.velocity_groups)
    order = section.orders or settings.default_orders
    console.print(
        f"📊 Sweeping {section.points} points x {len(velocities)} velocity group(s), K={order}...",
        style="blue",
    )

    try:
        with Progress(
            TextColumn("[progress.description]{task.description}"), BarColumn(),
            MofNCompleteColumn(), TimeElapsedColumn(), console=console, transient=True,
        ) as progress:
            task = progress.add_task("Solving", total=section.points)
            result = run_sweep(
                loaded.model, section.start, section.stop, section.points, order, medium, velocities,
                jobs=section.jobs, on_point=lambda _: progress.advance(task),
            )
    except SweepError as e:
        console.print(f"❌ {e}", style="red")
        raise click.Abort()
    except PumpProbeError as e:
        console.print(f"❌ Sweep failed: {e}", style="red")
        raise click.Abort()

    _write_text(str(out_path), format_spectrum_csv(result, section.cell_length_m, medium.wavevector))
    if result.status is SweepStatus.PARTIAL:
        console.print(f"⚠️  Sweep completed with {len(result.errors)} failed point(s)", style="yellow")
    else:
        console.print("✅ Sweep completed successfully!", style="green")

    peak = result.peak()
    console.print(f"   📈 Peak gain: {result.gain[peak]:.6e} at {result.detunings_hz[peak] / 1e6:.4f} MHz")
    console.print(f"   🧮 Max residual: {np.nanmax(result.residuals):.3e}")
    console.print(f"   ⏱️  Duration: {result.duration_ms}ms")
    console.print(f"💾 CSV written to {out_path}", style="green")

    if plot:
        _write_plot(plot_spectrum, result, plot, _sweep_label(loaded))


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--orders', '-k', type=click.IntRange(min=1), help='Harmonic order for the builder checks')
@click.option('--oracle-order', type=click.IntRange(min=1), help='Harmonic order for the oracle comparison')
@click.option('--tolerance', type=click.FloatRange(min=0, min_open=True),
              help='Builder tolerance (default: PUMP_PROBE_BUILDER_TOLERANCE)')
@click.option('--oracle-tolerance', type=click.FloatRange(min=0, min_open=True),
              help='Oracle tolerance (default: PUMP_PROBE_ORACLE_TOLERANCE)')
@click.option('--skip-oracle', is_flag=True, help='Skip the time-domain integration')
def validate(config_path: str, orders: Optional[int], oracle_order: Optional[int], tolerance: Optional[float],
             oracle_tolerance: Optional[float], skip_oracle: bool):
    """Cross-check the numeric builder, the term-algebra builder and the time-domain oracle."""
    loaded = _load(config_path)
    order = orders or loaded.solve.orders or settings.default_orders
    try:
        spec = loaded.build()
        console.print(f"🔍 Validating N={spec.n_levels}, K={order}...", style="blue")
        report = validate_spec(
            spec, order, tolerance=tolerance, oracle_order=oracle_order,
            oracle_tolerance=oracle_tolerance, skip_oracle=skip_oracle,
        )
    except PumpProbeError as e:
        console.print(f"❌ {e}", style="red")
        raise click.Abort()

    table = Table(title="Validation", show_header=True)
    table.add_column("Check", style="cyan")
    table.add_column("Deviation", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Result")
    for check in report.checks:
        if check.skipped:
            verdict = f"[yellow]skipped[/yellow] {check.note}"
            deviation = "-"
        else:
            verdict = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
            deviation = f"{check.deviation:.3e}"
            if check.note:
                verdict += f" ({check.note})"
        table.add_row(check.name, deviation, f"{check.tolerance:.1e}", verdict)
    console.print(table)

    if report.passed:
        console.print("✅ All checks passed", style="green")
    else:
        names = ", ".join(check.name for check in report.failures)
        console.print(f"❌ Validation failed: {names}", style="red")
        sys.exit(1)


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--max-order', '-K', default=3, show_default=True, type=click.IntRange(min=2),
              help='Highest harmonic order to compare')
@click.option('--points', type=click.IntRange(min=2), help='Number of detuning points')
@click.option('--jobs', '-j', type=click.IntRange(min=1), help='Worker threads')
@click.option('--plot', type=click.Path(dir_okay=False), help='Write a PNG overlay of all orders')
def converge(config_path: str, max_order: int, points: Optional[int], jobs: Optional[int], plot: Optional[str]):
    """Compare spectra for K = 1..max-order."""
    loaded = _load(config_path)
    section = loaded.sweep
    n_points = points or section.points
    velocities = VelocityGrid.thermal(loaded.medium, section.velocity_groups)
    if plot:
        _ensure_writable(plot)

    console.print(f"📊 Convergence study K = 1..{max_order} over {n_points} points...", style="blue")
    try:
        report = k_convergence(
            loaded.model, section.start, section.stop, n_points, max_order, loaded.medium, velocities,
            jobs=jobs or section.jobs,
        )
    except PumpProbeError as e:
        console.print(f"❌ {e}", style="red")
        raise click.Abort()

    table = Table(title="Harmonic-order convergence", show_header=True)
    table.add_column("Orders", style="cyan")
    table.add_column("max |delta chi|", justify="right", style="magenta")
    table.add_column("relative to peak", justify="right", style="yellow")
    for (low, high), deviation, relative in zip(
        zip(report.orders, report.orders[1:]), report.deviations, report.relative_deviations()
    ):
        table.add_row(f"K={low} -> K={high}", f"{deviation:.3e}", f"{relative:.3e}")
    console.print(table)
    console.print(
        f"   📍 K=1 vs K={max_order} differ most at {report.peak_deviation_detuning() / TWO_PI / 1e6:.4f} MHz"
    )

    if plot:
        _write_plot(plot_convergence, report, plot, _sweep_label(loaded))


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
def describe(config_path: str):
    """Show the parsed model and its SystemSpec at the solve detuning."""
    loaded = _load(config_path)
    model = loaded.model
    try:
        spec = loaded.build()
    except PumpProbeError as e:
        console.print(f"❌ {e}", style="red")
        raise click.Abort()

    kind = "explicit system" if isinstance(model, ExplicitModel) else f"preset {model.preset}"
    console.print(Panel(
        f"[bold]Model:[/bold] {kind}\n"
        f"[bold]Levels:[/bold] {spec.n_levels}, excited {list(spec.excited_levels)}\n"
        f"[bold]Beat frequency:[/bold] {spec.beat_frequency / TWO_PI:.6g} Hz\n"
        f"[bold]Couplings:[/bold] {len(spec.couplings)}, source channels {len(spec.source_channels)}\n"
        f"[bold]Closed:[/bold] {'yes' if spec.is_closed() else 'no'}\n"
        f"[bold]Doppler FWHM:[/bold] {loaded.medium.doppler_fwhm_hz / 1e6:.1f} MHz at {loaded.medium.temperature} K",
        title=Path(config_path).name,
        border_style="blue",
    ))

    table = Table(title="Couplings", show_header=True)
    table.add_column("i", style="cyan", justify="right")
    table.add_column("j", style="cyan", justify="right")
    table.add_column("Rabi (MHz)", justify="right", style="green")
    table.add_column("Tag", style="blue")
    for coupling in spec.couplings:
        table.add_row(str(coupling.level_i), str(coupling.level_j),
                      f"{coupling.rabi_frequency / TWO_PI / 1e6:.4f}", coupling.tag.value)
    console.print(table)


if __name__ == "__main__":
    cli()
