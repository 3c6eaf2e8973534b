#!/usr/bin/env python3
"""
Tests for the time-domain oracle: RK4 integration, harmonic projection and
agreement with the linear solver.
"""

import math
import os
import sys
import unittest

import numpy as np
import numpy.testing as npt
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from pump_probe_harmonics.errors import IntegrationError, NotSettledError, StructuralError
from pump_probe_harmonics.harmonic_solver import solve
from pump_probe_harmonics.models import two_level
from pump_probe_harmonics.time_domain import (
    Trajectory,
    extract_harmonics,
    fastest_rate,
    integrate,
    liouville_derivative,
    settle,
    steady_state_harmonics,
)
from pump_probe_harmonics.validation import harmonics_deviation

TWO_PI = 2 * math.pi
GAMMA = TWO_PI * 1e7
PUMP = TWO_PI * 36e6
PROBE = TWO_PI * 6e6


def mollow_spec(beat_frequency):
    return two_level(GAMMA, 0.0, PUMP, PROBE, 0.0, beat_frequency)


class TestIntegrate(unittest.TestCase):
    """Fixed-step RK4 trajectories."""

    def test_pure_exponential_decay(self):
        """Undriven excited state: rho22(t) = exp(-Gamma t)."""
        spec = two_level(GAMMA, 0.0, 0.0, 0.0, 0.0, 0.0)
        t_end = 1.0 / GAMMA
        trajectory = integrate(spec, t_end, t_end / 1000, rho0=np.diag([0.0, 1.0]))
        self.assertAlmostEqual(trajectory.times[-1], t_end, delta=1e-6 * t_end)
        self.assertAlmostEqual(trajectory.population(2)[-1], math.exp(-1.0), delta=1e-6)
        self.assertAlmostEqual(trajectory.population(1)[-1], 1.0 - math.exp(-1.0), delta=1e-6)

    def test_rabi_oscillation(self):
        """Undamped resonant drive: rho22 = sin^2(Omega t / 2), reaching 1 at t = pi / Omega."""
        spec = two_level(0.0, 0.0, PUMP, 0.0, 0.0, 0.0)
        t_end = math.pi / PUMP
        trajectory = integrate(spec, t_end, t_end / 2000)
        expected = np.sin(PUMP * trajectory.times / 2) ** 2
        npt.assert_allclose(trajectory.population(2), expected, atol=1e-8)
        self.assertAlmostEqual(trajectory.population(2).max(), 1.0, delta=1e-8)

    def test_trace_and_hermiticity_along_trajectory(self):
        spec = mollow_spec(TWO_PI * 30e6)
        dt = TWO_PI / fastest_rate(spec) / 100
        trajectory = integrate(spec, 200 * dt, dt)
        self.assertLessEqual(trajectory.trace_error(), 1e-8)
        self.assertLessEqual(trajectory.hermiticity_error(), 1e-8)

    def test_derivative_vanishes_in_ground_state(self):
        """An undriven atom in level 1 does not move."""
        derivative = liouville_derivative(two_level(GAMMA, 0.0, 0.0, 0.0, 0.0, 0.0))
        self.assertFalse(derivative(0.0, np.diag([1.0, 0.0]).astype(complex)).any())

    def test_step_too_large(self):
        """A step far beyond the RK4 stability limit blows up with a clear error."""
        with self.assertRaises(IntegrationError) as context:
            integrate(mollow_spec(TWO_PI * 30e6), 1e-3, 1e-6)
        self.assertIn("smaller dt", str(context.exception))

    def test_invalid_window(self):
        with self.assertRaises(StructuralError):
            integrate(mollow_spec(TWO_PI * 30e6), 1e-6, 0.0)
        with self.assertRaises(StructuralError):
            integrate(mollow_spec(TWO_PI * 30e6), 1e-6, 1e-9, rho0=np.eye(3))


class TestExtractHarmonics(unittest.TestCase):
    """Projection of the last beat period onto harmonics."""

    def setUp(self):
        self.delta = TWO_PI * 1e6
        self.n = 32
        self.dt = TWO_PI / self.delta / self.n
        self.x = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])

    def trajectory(self, values, periods=2):
        times = np.arange(periods * self.n) * self.dt
        states = np.array([value * self.x for value in values(times)])
        return Trajectory(times=times, states=states)

    def test_constant_trajectory(self):
        rho = extract_harmonics(self.trajectory(np.ones_like), self.delta, 2)
        npt.assert_allclose(rho[0], self.x, atol=1e-14)
        for k in (1, -1, 2, -2):
            self.assertLessEqual(np.abs(rho[k]).max(), 1e-14)

    def test_cosine_trajectory(self):
        """cos(delta t) X has rho^1 = rho^-1 = X / 2."""
        rho = extract_harmonics(self.trajectory(lambda t: np.cos(self.delta * t)), self.delta, 1)
        npt.assert_allclose(rho[1], self.x / 2, atol=1e-13)
        npt.assert_allclose(rho[-1], self.x / 2, atol=1e-13)
        self.assertLessEqual(np.abs(rho[0]).max(), 1e-13)

    def test_phase_convention(self):
        """exp(+i delta t) X is harmonic +1 for positive and negative beat frequencies."""
        for delta in (self.delta, -self.delta):
            dt = TWO_PI / abs(delta) / self.n
            times = 5 * dt + np.arange(2 * self.n) * dt
            states = np.array([np.exp(1j * delta * t) * self.x for t in times])
            rho = extract_harmonics(Trajectory(times=times, states=states), delta, 1)
            npt.assert_allclose(rho[1], self.x, atol=1e-13)
            self.assertLessEqual(np.abs(rho[-1]).max(), 1e-13)

    def test_unsettled_trajectory(self):
        """Two different periods raise with the drift attached."""
        trajectory = self.trajectory(lambda t: 1.0 + t / t[-1])
        with self.assertRaises(NotSettledError) as context:
            extract_harmonics(trajectory, self.delta, 1, settle_tolerance=1e-6)
        self.assertGreater(context.exception.drift, 1e-6)

    def test_zero_beat_frequency(self):
        with self.assertRaises(StructuralError):
            extract_harmonics(self.trajectory(np.ones_like), 0.0, 1)

    def test_step_must_divide_period(self):
        times = np.arange(64) * self.dt * 1.37
        trajectory = Trajectory(times=times, states=np.zeros((64, 2, 2), dtype=complex))
        with self.assertRaises(StructuralError):
            extract_harmonics(trajectory, self.delta, 1)


class TestOracleAgreement(unittest.TestCase):
    """The settled trajectory reproduces the linear solve."""

    def test_saturated_two_level_without_probe(self):
        """Omega_s = 0: the oracle finds the closed-form excited population."""
        spec = two_level(GAMMA, 0.0, PUMP, 0.0, 0.0, TWO_PI * 50e6)
        rho = steady_state_harmonics(spec, 1)
        expected = (PUMP ** 2 / 4) / (GAMMA ** 2 / 4 + PUMP ** 2 / 2)
        self.assertAlmostEqual(rho.populations[1], expected, delta=1e-4)

    def test_settle_requires_beat(self):
        with self.assertRaises(StructuralError):
            settle(mollow_spec(0.0), 1)

    def test_settle_gives_up(self):
        """A budget of two periods is not enough to reach the steady state."""
        with self.assertRaises(NotSettledError):
            settle(mollow_spec(TWO_PI * 30e6), 1, max_periods=2)

    @pytest.mark.slow
    @pytest.mark.acceptance
    def test_mollow_detunings(self):
        """rho^-1_21 from both routes agrees to 1e-4 across +-150 MHz."""
        for detuning_mhz in (-150, -120, -90, -60, -30, 15, 30, 60, 90, 120, 150):
            spec = mollow_spec(TWO_PI * detuning_mhz * 1e6)
            harmonics = solve(spec, 6)
            oracle = steady_state_harmonics(spec, 6)
            self.assertLessEqual(harmonics_deviation(harmonics, oracle), 1e-4, f"{detuning_mhz} MHz")

    @pytest.mark.slow
    def test_higher_order_closer_to_oracle(self):
        """A strong probe needs more harmonics: K=3 beats K=1."""
        spec = two_level(GAMMA, 0.0, PUMP, PUMP, 0.0, TWO_PI * 18e6)
        oracle = steady_state_harmonics(spec, 3)
        errors = {order: harmonics_deviation(oracle, solve(spec, order)) for order in (1, 3)}
        self.assertLessEqual(errors[3], errors[1])


if __name__ == '__main__':
    unittest.main()
