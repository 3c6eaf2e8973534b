"""
Pump-Probe Harmonic Solver

Pseudo-steady-state density matrices of N-level atoms driven by a pump and a
probe on the same transitions, expanded in harmonics of the beat frequency,
with probe susceptibility spectra and Doppler averaging.
"""

__version__ = "0.1.0"
__description__ = "Harmonic-balance density-matrix solver for pump-probe spectroscopy"

# Import main components for easy access
from .errors import PumpProbeError
from .harmonic_solver import assemble_m, reduce, solve
from .models import four_level, lambda_three_level, rb87_d1_sixteen_level, two_level
from .spectroscopy import MediumParams, SpectrumResult, VelocityGrid, k_convergence, susceptibility, sweep
from .system import (
    CoherencePair,
    Coupling,
    DensityHarmonics,
    HarmonicTag,
    SourceChannel,
    SystemSpec,
    build_hamiltonian,
    flatten,
    unflatten,
    vec_index,
    vec_unindex,
)

__all__ = [
    "__version__",
    "__description__",
    "PumpProbeError",
    "SystemSpec",
    "Coupling",
    "SourceChannel",
    "HarmonicTag",
    "CoherencePair",
    "DensityHarmonics",
    "build_hamiltonian",
    "vec_index",
    "vec_unindex",
    "flatten",
    "unflatten",
    "assemble_m",
    "reduce",
    "solve",
    "two_level",
    "lambda_three_level",
    "four_level",
    "rb87_d1_sixteen_level",
    "MediumParams",
    "VelocityGrid",
    "SpectrumResult",
    "susceptibility",
    "sweep",
    "k_convergence",
]
