#!/usr/bin/env python3
"""
Observables computed from density harmonics.

Probe (and pump) susceptibility, detuning sweeps with Doppler velocity
averaging, harmonic-order convergence studies and a few derived quantities
such as the single-pass intensity gain and the group index.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import constants

from .config import settings
from .errors import PumpProbeError, StructuralError, SweepError
from .harmonic_solver import solve
from .models import ModelPreset
from .system import CoherencePair, DensityHarmonics

logger = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.01
RB87_MASS_AMU = 86.909
ATOMIC_MASS_UNIT = 1.66e-27
D1_WAVELENGTH = 795e-9

PointCallback = Callable[[int], None]


class MediumParams(BaseModel):
    """Vapor properties entering the susceptibility prefactor and Doppler width.

    SI units throughout; ``gamma`` and ``wavevector`` are angular (rad/s, rad/m).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    number_density: float = Field(default=3e18, gt=0)
    saturation_intensity: float = Field(default=120.0, gt=0)
    gamma: float = Field(default=2 * math.pi * 1e7, gt=0)
    speed_of_light: float = Field(default=constants.c, gt=0)
    wavevector: float = Field(default=2 * math.pi / D1_WAVELENGTH, gt=0)
    mass: float = Field(default=RB87_MASS_AMU * ATOMIC_MASS_UNIT, gt=0)
    temperature: float = Field(default=373.15, gt=0)

    @property
    def prefactor(self) -> float:
        """hbar c0 n0 / I_sat * (Gamma/2)^2; divide by the Rabi frequency to get chi per coherence."""
        return (
            constants.hbar * self.speed_of_light * self.number_density / self.saturation_intensity
            * (self.gamma / 2) ** 2
        )

    @property
    def thermal_velocity(self) -> float:
        """sigma = sqrt(2 k_B T / m), the 1/e half-width of the velocity distribution."""
        return math.sqrt(2 * constants.k * self.temperature / self.mass)

    @property
    def carrier_angular_frequency(self) -> float:
        return self.speed_of_light * self.wavevector

    @property
    def doppler_fwhm_hz(self) -> float:
        return 2 * math.sqrt(math.log(2)) * self.wavevector * self.thermal_velocity / (2 * math.pi)


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Velocity groups (m/s) with normalized Maxwell-Boltzmann weights."""

    velocities: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        velocities = np.atleast_1d(np.asarray(self.velocities, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if velocities.shape != weights.shape or velocities.size == 0:
            raise StructuralError(
                f"velocity grid needs matching non-empty arrays, got {velocities.shape} and {weights.shape}"
            )
        if np.any(weights < 0):
            raise StructuralError("velocity weights must be non-negative")
        object.__setattr__(self, "velocities", velocities)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def stationary(cls) -> "VelocityGrid":
        """A single group at rest, i.e. no Doppler averaging."""
        return cls(velocities=np.zeros(1), weights=np.ones(1))

    @classmethod
    def thermal(
        cls, medium: MediumParams, n_groups: Optional[int] = None, span_sigmas: Optional[float] = None
    ) -> "VelocityGrid":
        """Uniform grid over +-span*sigma weighted by exp(-v^2/sigma^2)."""
        n_groups = n_groups or settings.default_velocity_groups
        span = span_sigmas or settings.velocity_span_sigmas
        if n_groups == 1:
            return cls.stationary()
        sigma = medium.thermal_velocity
        velocities = np.linspace(-span * sigma, span * sigma, n_groups)
        weights = np.exp(-((velocities / sigma) ** 2))
        return cls(velocities=velocities, weights=weights / weights.sum())

    def __len__(self) -> int:
        return self.velocities.size

    def doppler_shifts(self, wavevector: float) -> np.ndarray:
        return wavevector * self.velocities


def susceptibility(
    rho: DensityHarmonics,
    medium: MediumParams,
    probe_rabi: float,
    coherence_pairs: Sequence[CoherencePair],
) -> complex:
    """Probe susceptibility from the k = -1 harmonic of the probe-driven coherences.

    Args:
        rho: Solved density harmonics
        medium: Vapor parameters for the prefactor
        probe_rabi: Probe Rabi frequency Omega_s (rad/s), must be positive
        coherence_pairs: (excited, ground) pairs with their relative dipole weights

    Returns:
        Complex chi; the gain is -Im chi
    """
    return _weighted_coherence(rho, medium, probe_rabi, coherence_pairs, harmonic=-1)


def pump_susceptibility(
    rho: DensityHarmonics,
    medium: MediumParams,
    pump_rabi: float,
    coherence_pairs: Sequence[CoherencePair],
) -> complex:
    """Susceptibility seen by the pump, read from the zero-order harmonic."""
    return _weighted_coherence(rho, medium, pump_rabi, coherence_pairs, harmonic=0)


def _weighted_coherence(
    rho: DensityHarmonics,
    medium: MediumParams,
    rabi: float,
    coherence_pairs: Sequence[CoherencePair],
    harmonic: int,
) -> complex:
    if not coherence_pairs:
        raise StructuralError("susceptibility needs at least one coherence pair")
    if not rabi > 0:
        raise StructuralError(f"Rabi frequency must be positive, got {rabi!r}")
    total = sum(pair.weight * rho.element(pair.row, pair.col, harmonic) for pair in coherence_pairs)
    return complex(medium.prefactor / rabi * total)


def intensity_gain(chi, wavevector: float, length: float):
    """Single-pass intensity gain exp(-k L Im chi) of a cell of ``length`` metres."""
    return np.exp(-wavevector * length * np.imag(chi))


def group_index(detunings: Sequence[float], chi: Sequence[complex], carrier_angular_frequency: float) -> np.ndarray:
    """n_g = 1 + Re chi / 2 + (omega / 2) d(Re chi)/d(omega) by finite differences."""
    detunings = np.asarray(detunings, dtype=float)
    real = np.real(np.asarray(chi))
    if detunings.size < 2:
        raise StructuralError("group index needs at least two detuning points")
    slope = np.gradient(real, detunings)
    return 1.0 + real / 2 + carrier_angular_frequency / 2 * slope


class SweepStatus(Enum):
    """Outcome of a detuning sweep."""

    SUCCESS = "success"
    PARTIAL = "partial"
    FAILED = "failed"


@dataclass
class SpectrumResult:
    """Per-detuning susceptibility, populations and solver diagnostics.

    Failed points hold NaN in every numeric array and are listed in
    ``failed_points`` with their error messages in ``errors``.
    """

    detunings: np.ndarray
    chi: np.ndarray
    populations: np.ndarray
    residuals: np.ndarray
    conditions: np.ndarray
    order: int
    velocity_groups: int
    status: SweepStatus = SweepStatus.SUCCESS
    pump_chi: Optional[np.ndarray] = None
    errors: Dict[int, str] = field(default_factory=dict)
    duration_ms: int = 0

    @property
    def n_points(self) -> int:
        return self.detunings.size

    @property
    def n_levels(self) -> int:
        return self.populations.shape[1]

    @property
    def gain(self) -> np.ndarray:
        return -self.chi.imag

    @property
    def detunings_hz(self) -> np.ndarray:
        return self.detunings / (2 * math.pi)

    @property
    def failed_points(self) -> List[int]:
        return sorted(self.errors)

    def peak(self) -> int:
        """Index of the largest gain among the successful points."""
        return int(np.nanargmax(self.gain))


@dataclass
class _PointResult:
    chi: complex
    populations: np.ndarray
    residual: float
    condition: float
    pump_chi: Optional[complex] = None


def _solve_point(
    model: ModelPreset,
    detuning: float,
    order: int,
    medium: MediumParams,
    velocities: VelocityGrid,
    condition_threshold: Optional[float],
) -> _PointResult:
    probe_pairs = model.coherence_pairs()
    pump_pairs = model.pump_coherence_pairs() if model.pump_rabi_frequency > 0 else []
    base = model.build(detuning)

    chi = 0j
    pump_chi = 0j
    populations = np.zeros(base.n_levels)
    residual = 0.0
    condition = 0.0
    # Fixed grid order keeps the average bit-stable for any worker count
    for shift, weight in zip(velocities.doppler_shifts(medium.wavevector), velocities.weights):
        rho = solve(base.doppler_shifted(shift), order, condition_threshold=condition_threshold)
        chi += weight * susceptibility(rho, medium, model.probe_rabi_frequency, probe_pairs)
        if pump_pairs:
            pump_chi += weight * pump_susceptibility(rho, medium, model.pump_rabi_frequency, pump_pairs)
        populations += weight * rho.populations
        residual = max(residual, rho.diagnostics.residual)
        condition = max(condition, rho.diagnostics.condition)
    return _PointResult(chi, populations, residual, condition, pump_chi if pump_pairs else None)


def detuning_grid(start: float, stop: float, n_points: int) -> np.ndarray:
    if n_points < 2:
        raise StructuralError(f"a sweep needs at least 2 points, got {n_points}")
    if not (math.isfinite(start) and math.isfinite(stop)) or stop <= start:
        raise StructuralError(f"invalid detuning range [{start}, {stop}]")
    return np.linspace(start, stop, n_points)


def sweep(
    model: ModelPreset,
    start: float,
    stop: float,
    n_points: int,
    order: Optional[int] = None,
    medium: Optional[MediumParams] = None,
    velocities: Optional[VelocityGrid] = None,
    *,
    jobs: Optional[int] = None,
    condition_threshold: Optional[float] = None,
    on_point: Optional[PointCallback] = None,
) -> SpectrumResult:
    """Velocity-averaged spectrum over ``n_points`` detunings in [start, stop] (rad/s).

    Points are solved on ``jobs`` worker threads, each writing its own slot.
    A failed point is logged and recorded, and the sweep goes on.

    Raises:
        SweepError: if more than 1% of the points failed; the partial result is attached.
    """
    detunings = detuning_grid(start, stop, n_points)
    order = order or settings.default_orders
    medium = medium or MediumParams(gamma=model.linewidth)
    velocities = velocities or VelocityGrid.stationary()
    jobs = jobs or settings.default_jobs
    started = time.time()

    slots: List[Optional[_PointResult]] = [None] * n_points
    errors: Dict[int, str] = {}

    def run(index: int) -> None:
        try:
            slots[index] = _solve_point(
                model, float(detunings[index]), order, medium, velocities, condition_threshold
            )
        except (PumpProbeError, np.linalg.LinAlgError) as e:
            errors[index] = str(e)
            logger.warning("detuning point %d (%.6g Hz) failed: %s", index, detunings[index] / (2 * math.pi), e)
        finally:
            if on_point is not None:
                on_point(index)

    logger.info(
        "sweeping %d points x %d velocity groups at K=%d on %d worker(s)",
        n_points, len(velocities), order, jobs,
    )
    if jobs == 1:
        for index in range(n_points):
            run(index)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            list(executor.map(run, range(n_points)))

    result = _collect(detunings, slots, errors, order, len(velocities))
    result.duration_ms = int((time.time() - started) * 1000)
    logger.info("sweep finished in %d ms with %d failed point(s)", result.duration_ms, len(errors))

    if len(errors) > MAX_FAILED_FRACTION * n_points:
        result.status = SweepStatus.FAILED
        raise SweepError(
            f"{len(errors)} of {n_points} detuning points failed (first: {errors[min(errors)]})",
            result=result,
            failed_points=result.failed_points,
        )
    return result


def _collect(
    detunings: np.ndarray,
    slots: Sequence[Optional[_PointResult]],
    errors: Dict[int, str],
    order: int,
    velocity_groups: int,
) -> SpectrumResult:
    n_points = detunings.size
    n_levels = next((s.populations.size for s in slots if s is not None), 0)
    chi = np.full(n_points, np.nan + 1j * np.nan)
    populations = np.full((n_points, n_levels), np.nan)
    residuals = np.full(n_points, np.nan)
    conditions = np.full(n_points, np.nan)
    has_pump = any(s is not None and s.pump_chi is not None for s in slots)
    pump_chi = np.full(n_points, np.nan + 1j * np.nan) if has_pump else None

    for index, point in enumerate(slots):
        if point is None:
            continue
        chi[index] = point.chi
        populations[index] = point.populations
        residuals[index] = point.residual
        conditions[index] = point.condition
        if pump_chi is not None and point.pump_chi is not None:
            pump_chi[index] = point.pump_chi

    return SpectrumResult(
        detunings=detunings,
        chi=chi,
        populations=populations,
        residuals=residuals,
        conditions=conditions,
        order=order,
        velocity_groups=velocity_groups,
        status=SweepStatus.PARTIAL if errors else SweepStatus.SUCCESS,
        pump_chi=pump_chi,
        errors=dict(errors),
    )


@dataclass
class ConvergenceReport:
    """Spectra for K = 1..K_max and how much they move between orders."""

    orders: List[int]
    spectra: Dict[int, SpectrumResult]
    deviations: List[float]

    @property
    def detunings(self) -> np.ndarray:
        return self.spectra[self.orders[0]].detunings

    def deviation_profile(self, low: Optional[int] = None, high: Optional[int] = None) -> np.ndarray:
        """|chi_high - chi_low| per detuning; defaults to K=1 against K_max."""
        low = low or self.orders[0]
        high = high or self.orders[-1]
        return np.abs(self.spectra[high].chi - self.spectra[low].chi)

    def peak_deviation_detuning(self) -> float:
        """Detuning (rad/s) where K=1 and K_max disagree most."""
        return float(self.detunings[int(np.nanargmax(self.deviation_profile()))])

    def relative_deviations(self) -> List[float]:
        """Consecutive deviations divided by the peak |chi| of the highest order."""
        scale = float(np.nanmax(np.abs(self.spectra[self.orders[-1]].chi)))
        return [d / scale if scale > 0 else 0.0 for d in self.deviations]


def k_convergence(
    model: ModelPreset,
    start: float,
    stop: float,
    n_points: int,
    max_order: int,
    medium: Optional[MediumParams] = None,
    velocities: Optional[VelocityGrid] = None,
    **sweep_options,
) -> ConvergenceReport:
    """Run the same sweep for K = 1..max_order and compare consecutive orders.

    ``deviations[i]`` is the sup-norm of |chi(K=i+2) - chi(K=i+1)| over the grid.
    """
    if max_order < 2:
        raise StructuralError(f"convergence needs max_order >= 2, got {max_order}")
    orders = list(range(1, max_order + 1))
    spectra = {
        order: sweep(model, start, stop, n_points, order, medium, velocities, **sweep_options)
        for order in orders
    }
    deviations = [
        float(np.nanmax(np.abs(spectra[high].chi - spectra[low].chi)))
        for low, high in zip(orders, orders[1:])
    ]
    for (low, high), deviation in zip(zip(orders, orders[1:]), deviations):
        logger.info("K=%d -> K=%d: max |delta chi| = %.3e", low, high, deviation)
    return ConvergenceReport(orders=orders, spectra=spectra, deviations=deviations)
