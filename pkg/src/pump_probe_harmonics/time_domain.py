"""
Direct time integration of the Liouville equation, used as an oracle.

The integrator is a fixed-step RK4 so the final beat period lies on a uniform
grid that divides the period exactly, which makes the harmonic projection an
exact discrete Fourier transform.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import settings
from .errors import IntegrationError, NotSettledError, StructuralError
from .system import DensityHarmonics, SystemSpec, build_hamiltonian, harmonic_orders

logger = logging.getLogger(__name__)

Derivative = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled density matrices rho(t)."""

    times: np.ndarray
    states: np.ndarray

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def trace_error(self) -> float:
        traces = np.trace(self.states, axis1=1, axis2=2)
        return float(np.abs(traces - 1.0).max())

    def hermiticity_error(self) -> float:
        return float(np.abs(self.states - self.states.conj().transpose(0, 2, 1)).max())

    def population(self, level: int) -> np.ndarray:
        return self.states[:, level - 1, level - 1].real


def liouville_derivative(spec: SystemSpec) -> Derivative:
    """d rho / dt = -i (H rho - rho H^dagger) + rho_s for the full H(t)."""
    ham = build_hamiltonian(spec)
    sources = spec.source_matrix()
    delta = spec.beat_frequency
    diagonal = np.diag_indices(spec.n_levels)

    def derivative(t: float, rho: np.ndarray) -> np.ndarray:
        h = ham.at(t, delta)
        drho = -1j * (h @ rho - rho @ h.conj().T)
        drho[diagonal] += sources @ rho.diagonal()
        return drho

    return derivative


def fastest_rate(spec: SystemSpec) -> float:
    """Largest angular frequency the integrator has to resolve."""
    ham = build_hamiltonian(spec)
    rates = [ham.norm_inf(), float(spec.source_matrix().sum(axis=0).max(initial=0.0))]
    if spec.beat_frequency:
        rates.append(abs(spec.beat_frequency))
    return max(rates)


def ground_state(n_levels: int) -> np.ndarray:
    rho0 = np.zeros((n_levels, n_levels), dtype=complex)
    rho0[0, 0] = 1.0
    return rho0


def _rk4(derivative: Derivative, rho: np.ndarray, t: float, dt: float, n_steps: int) -> np.ndarray:
    """Advance ``n_steps`` and return the states after each step."""
    out = np.empty((n_steps,) + rho.shape, dtype=complex)
    for step in range(n_steps):
        k1 = derivative(t, rho)
        k2 = derivative(t + dt / 2, rho + dt / 2 * k1)
        k3 = derivative(t + dt / 2, rho + dt / 2 * k2)
        k4 = derivative(t + dt, rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        if not np.all(np.isfinite(rho)):
            raise IntegrationError(
                f"non-finite density matrix at t={t:.3e} s; the step dt={dt:.3e} s is too "
                "large for this system, retry with a smaller dt"
            )
        out[step] = rho
    return out


def integrate(
    spec: SystemSpec, t_end: float, dt: float, rho0: Optional[np.ndarray] = None
) -> Trajectory:
    """Fixed-step RK4 trajectory from t=0 to the first grid point at or after ``t_end``.

    The initial state defaults to all population in level 1.
    """
    if dt <= 0 or t_end < 0:
        raise StructuralError(f"invalid integration window t_end={t_end}, dt={dt}")
    n = spec.n_levels
    rho = ground_state(n) if rho0 is None else np.array(rho0, dtype=complex)
    if rho.shape != (n, n):
        raise StructuralError(f"initial state has shape {rho.shape}, expected {(n, n)}")

    n_steps = int(math.ceil(t_end / dt - 1e-9))
    states = np.empty((n_steps + 1, n, n), dtype=complex)
    states[0] = rho
    if n_steps:
        states[1:] = _rk4(liouville_derivative(spec), rho, 0.0, dt, n_steps)
    return Trajectory(times=np.arange(n_steps + 1) * dt, states=states)


def extract_harmonics(
    trajectory: Trajectory,
    beat_frequency: float,
    order: int,
    settle_tolerance: Optional[float] = None,
) -> DensityHarmonics:
    """Project the last sampled beat period onto harmonics -K..K.

    When the trajectory holds two full periods, the drift between them is
    checked against ``settle_tolerance`` first.
    """
    if beat_frequency == 0:
        raise StructuralError("harmonics are undefined for a zero beat frequency")
    tolerance = settings.oracle_settle_tolerance if settle_tolerance is None else settle_tolerance
    period = 2 * math.pi / abs(beat_frequency)
    dt = trajectory.step
    if dt <= 0:
        raise StructuralError("trajectory needs at least two samples")
    n = int(round(period / dt))
    if n < 2 * order + 1 or abs(n * dt - period) > 1e-6 * period:
        raise StructuralError(
            f"sample step {dt:.3e} s does not divide the beat period {period:.3e} s "
            f"into at least {2 * order + 1} points"
        )
    if len(trajectory.times) < n:
        raise StructuralError("trajectory is shorter than one beat period")

    samples = trajectory.states[-n:]
    if len(trajectory.times) >= 2 * n:
        drift = float(np.abs(samples - trajectory.states[-2 * n:-n]).max())
        if drift > tolerance:
            raise NotSettledError(
                f"trajectory has not settled: period-to-period drift {drift:.3e} > {tolerance:.1e}",
                drift=drift,
            )

    spectrum = np.fft.fft(samples, axis=0) / n
    t0 = trajectory.times[-n]
    sign = 1 if beat_frequency > 0 else -1
    matrices = [
        spectrum[(sign * k) % n] * np.exp(-1j * k * beat_frequency * t0)
        for k in harmonic_orders(order)
    ]
    return DensityHarmonics(order=order, matrices=np.array(matrices))


def settle(
    spec: SystemSpec,
    order: int,
    *,
    steps_per_scale: Optional[int] = None,
    settle_tolerance: Optional[float] = None,
    max_periods: Optional[int] = None,
    rho0: Optional[np.ndarray] = None,
) -> Trajectory:
    """Integrate whole beat periods until consecutive periods agree.

    Returns the last two periods. The run lasts at least max(10/Gamma, 20 periods).
    """
    delta = spec.beat_frequency
    if delta == 0:
        raise StructuralError("a zero beat frequency has no period to settle on")
    steps_per_scale = steps_per_scale or settings.oracle_steps_per_scale
    tolerance = settings.oracle_settle_tolerance if settle_tolerance is None else settle_tolerance
    max_periods = max_periods or settings.oracle_max_periods

    period = 2 * math.pi / abs(delta)
    dt_max = 2 * math.pi / fastest_rate(spec) / steps_per_scale
    n = max(int(math.ceil(period / dt_max)), 2 * order + 1, 8)
    dt = period / n

    decay = max((-d.imag for d in spec.diagonal_terms), default=0.0)
    settle_time = max(10.0 / decay if decay > 0 else 0.0, 20 * period)
    derivative = liouville_derivative(spec)
    rho = ground_state(spec.n_levels) if rho0 is None else np.array(rho0, dtype=complex)

    previous = None
    drift = float("inf")
    for index in range(max_periods):
        t_start = index * period
        samples = _rk4(derivative, rho, t_start, dt, n)
        rho = samples[-1]
        if previous is not None:
            drift = float(np.abs(samples - previous).max())
            if t_start + period >= settle_time and drift < tolerance:
                logger.debug("settled after %d periods (drift %.2e)", index + 1, drift)
                times = t_start + dt * np.arange(-n + 1, n + 1)
                return Trajectory(times=times, states=np.concatenate([previous, samples]))
        previous = samples

    raise NotSettledError(
        f"no periodic steady state after {max_periods} beat periods (drift {drift:.3e})",
        drift=drift,
    )


def steady_state_harmonics(spec: SystemSpec, order: int, **kwargs) -> DensityHarmonics:
    """Harmonics of the settled trajectory, for comparison with the linear solver."""
    trajectory = settle(spec, order, **kwargs)
    return extract_harmonics(
        trajectory, spec.beat_frequency, order, settle_tolerance=kwargs.get("settle_tolerance")
    )
