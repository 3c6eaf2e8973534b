"""Static spectrum plots: gain (-Im chi) and dispersion (Re chi) versus detuning in MHz."""

from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .spectroscopy import ConvergenceReport, SpectrumResult  # noqa: E402


def plot_spectrum(
    result: SpectrumResult,
    path: Union[str, Path],
    title: Optional[str] = None,
    xlabel: str = "Detuning (MHz)",
) -> Path:
    """Write a single-image plot of -Im chi and Re chi."""
    path = Path(path)
    detuning_mhz = result.detunings_hz / 1e6

    fig, ax1 = plt.subplots(figsize=(8, 5))
    ax1.plot(detuning_mhz, result.gain, color="tab:red", label=r"$-\mathrm{Im}\,\chi$ (gain)")
    ax1.plot(detuning_mhz, result.chi.real, color="tab:blue", linestyle="--", label=r"$\mathrm{Re}\,\chi$")
    ax1.axhline(0.0, color="gray", linewidth=0.5)
    ax1.set_xlabel(xlabel)
    ax1.set_ylabel(r"$\chi$")
    ax1.legend()
    ax1.set_title(title or f"K = {result.order}, {result.velocity_groups} velocity group(s)")
    plt.tight_layout()
    try:
        fig.savefig(path, dpi=150)
    finally:
        plt.close(fig)
    return path


def plot_convergence(report: ConvergenceReport, path: Union[str, Path], xlabel: str = "Detuning (MHz)") -> Path:
    """Overlay the gain spectra of every harmonic order in ``report``."""
    path = Path(path)
    fig, ax1 = plt.subplots(figsize=(8, 5))
    for order in report.orders:
        spectrum = report.spectra[order]
        ax1.plot(spectrum.detunings_hz / 1e6, spectrum.gain, label=f"K = {order}")
    ax1.set_xlabel(xlabel)
    ax1.set_ylabel(r"$-\mathrm{Im}\,\chi$")
    ax1.legend()
    plt.tight_layout()
    try:
        fig.savefig(path, dpi=150)
    finally:
        plt.close(fig)
    return path
