#!/usr/bin/env python3
"""
Tests for susceptibilities, detuning sweeps, Doppler averaging and the
harmonic-order convergence study.
"""

import math
import os
import sys
import unittest
from typing import Tuple

import numpy as np
import numpy.testing as npt
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from pump_probe_harmonics.errors import StructuralError, SweepError
from pump_probe_harmonics.harmonic_solver import solve
from pump_probe_harmonics.models import FourLevelModel, LambdaModel, Rb87D1Model, TwoLevelModel, two_level
from pump_probe_harmonics.spectroscopy import (
    MediumParams,
    SweepStatus,
    VelocityGrid,
    group_index,
    intensity_gain,
    k_convergence,
    pump_susceptibility,
    susceptibility,
    sweep,
)
from pump_probe_harmonics.system import CoherencePair

TWO_PI = 2 * math.pi
GAMMA = TWO_PI * 1e7
PUMP = TWO_PI * 36e6
PROBE = TWO_PI * 6e6
MHZ = TWO_PI * 1e6


def mollow_model(probe_rabi=PROBE):
    return TwoLevelModel(gamma=GAMMA, pump_rabi=PUMP, probe_rabi=probe_rabi)


def local_maxima(values) -> list:
    """Indices of interior local maxima, largest first."""
    peaks = [i for i in range(1, len(values) - 1) if values[i - 1] < values[i] >= values[i + 1]]
    return sorted(peaks, key=lambda i: values[i], reverse=True)


class FlakyModel(TwoLevelModel):
    """Two-level preset that refuses to build at chosen detunings."""

    bad_detunings: Tuple[float, ...] = ()

    def build(self, detuning):
        if detuning in self.bad_detunings:
            raise StructuralError(f"no spec at {detuning}")
        return super().build(detuning)


class TestSusceptibility(unittest.TestCase):
    """chi from the k = -1 harmonic of the probe coherences."""

    def setUp(self):
        self.medium = MediumParams(gamma=GAMMA)

    def test_undriven_atom_has_no_response(self):
        rho = solve(two_level(GAMMA, 0.0, 0.0, 0.0, 0.0, MHZ), 1)
        chi = susceptibility(rho, self.medium, PROBE, [CoherencePair(2, 1)])
        self.assertAlmostEqual(abs(chi), 0.0, delta=1e-15)

    def test_scales_with_density(self):
        rho = solve(mollow_model().build(30 * MHZ), 1)
        pairs = [CoherencePair(2, 1)]
        chi = susceptibility(rho, self.medium, PROBE, pairs)
        denser = susceptibility(rho, MediumParams(gamma=GAMMA, number_density=6e18), PROBE, pairs)
        self.assertNotEqual(chi, 0)
        self.assertAlmostEqual(abs(denser / chi - 2.0), 0.0, places=12)

    def test_weights_combine_linearly(self):
        rho = solve(mollow_model().build(30 * MHZ), 1)
        single = susceptibility(rho, self.medium, PROBE, [CoherencePair(2, 1)])
        doubled = susceptibility(rho, self.medium, PROBE, [CoherencePair(2, 1, 0.5), CoherencePair(2, 1, 1.5)])
        self.assertAlmostEqual(abs(doubled - 2 * single), 0.0, delta=1e-12 * abs(single))

    def test_invalid_inputs(self):
        rho = solve(mollow_model().build(30 * MHZ), 1)
        with self.assertRaises(StructuralError):
            susceptibility(rho, self.medium, PROBE, [])
        with self.assertRaises(StructuralError):
            susceptibility(rho, self.medium, 0.0, [CoherencePair(2, 1)])
        with self.assertRaises(StructuralError):
            pump_susceptibility(rho, self.medium, -PUMP, [CoherencePair(2, 1)])

    def test_intensity_gain(self):
        """exp(-k L Im chi): negative Im chi amplifies."""
        self.assertAlmostEqual(intensity_gain(-1e-6j, 1e7, 0.1), math.exp(1.0))
        npt.assert_allclose(intensity_gain(np.array([0j, 1e-6j]), 1e7, 0.1), [1.0, math.exp(-1.0)])

    def test_group_index_of_linear_dispersion(self):
        """Re chi = a * delta gives n_g = 1 + a delta / 2 + omega a / 2."""
        detunings = np.linspace(-10, 10, 21) * MHZ
        slope = 1e-12
        chi = slope * detunings + 0j
        omega = TWO_PI * 3.77e14
        npt.assert_allclose(
            group_index(detunings, chi, omega), 1 + slope * detunings / 2 + omega * slope / 2, rtol=1e-12
        )
        with self.assertRaises(StructuralError):
            group_index([0.0], [0j], omega)


class TestMediumAndVelocities(unittest.TestCase):
    """Vapor parameters and Maxwell-Boltzmann grids."""

    def test_doppler_width_of_hot_rubidium(self):
        """About 564 MHz FWHM at 100 C on the 795 nm line."""
        self.assertAlmostEqual(MediumParams().doppler_fwhm_hz / 564e6, 1.0, delta=0.02)

    def test_thermal_weights(self):
        grid = VelocityGrid.thermal(MediumParams(), 51)
        self.assertEqual(len(grid), 51)
        self.assertAlmostEqual(grid.weights.sum(), 1.0, places=12)
        npt.assert_allclose(grid.velocities, -grid.velocities[::-1], atol=1e-9)
        self.assertEqual(int(np.argmax(grid.weights)), 25)

    def test_single_group_is_stationary(self):
        grid = VelocityGrid.thermal(MediumParams(), 1)
        npt.assert_array_equal(grid.velocities, [0.0])
        npt.assert_array_equal(grid.weights, [1.0])

    def test_invalid_grid(self):
        with self.assertRaises(StructuralError):
            VelocityGrid(velocities=np.zeros(2), weights=np.ones(3))
        with self.assertRaises(StructuralError):
            VelocityGrid(velocities=np.zeros(2), weights=np.array([1.0, -0.5]))


class TestSweep(unittest.TestCase):
    """Detuning sweeps over a fixed grid."""

    def test_stationary_point_matches_direct_solve(self):
        model = mollow_model()
        result = sweep(model, -40 * MHZ, 40 * MHZ, 5)
        rho = solve(model.build(-40 * MHZ), 1)
        expected = susceptibility(rho, MediumParams(gamma=GAMMA), PROBE, model.coherence_pairs())
        npt.assert_allclose(result.chi[0], expected, rtol=1e-14)
        npt.assert_allclose(result.populations[0], rho.populations, rtol=1e-14)
        self.assertEqual(result.status, SweepStatus.SUCCESS)
        self.assertEqual(result.velocity_groups, 1)
        self.assertEqual(result.pump_chi.shape, (5,))

    def test_resonant_pump_symmetry(self):
        """With the pump on resonance chi(-delta) = -conj(chi(delta))."""
        result = sweep(mollow_model(), -150 * MHZ, 150 * MHZ, 20)
        npt.assert_allclose(result.chi[::-1], -np.conj(result.chi), rtol=1e-8)

    def test_worker_count_does_not_change_result(self):
        model = mollow_model()
        serial = sweep(model, -60 * MHZ, 60 * MHZ, 13, jobs=1)
        threaded = sweep(model, -60 * MHZ, 60 * MHZ, 13, jobs=3)
        npt.assert_array_equal(serial.chi, threaded.chi)
        npt.assert_array_equal(serial.populations, threaded.populations)

    def test_progress_callback(self):
        seen = []
        sweep(mollow_model(), -10 * MHZ, 10 * MHZ, 7, on_point=seen.append)
        self.assertEqual(sorted(seen), list(range(7)))

    def test_velocity_average_is_weighted_sum(self):
        """Averaging over groups equals weighting single-group sweeps by hand."""
        model = mollow_model()
        medium = MediumParams(gamma=GAMMA)
        grid = VelocityGrid(velocities=np.array([-150.0, 0.0, 90.0]), weights=np.array([0.25, 0.5, 0.25]))
        averaged = sweep(model, -50 * MHZ, 50 * MHZ, 9, medium=medium, velocities=grid)
        manual = sum(
            w * sweep(
                model, -50 * MHZ, 50 * MHZ, 9, medium=medium,
                velocities=VelocityGrid(velocities=np.array([v]), weights=np.ones(1)),
            ).chi
            for v, w in zip(grid.velocities, grid.weights)
        )
        npt.assert_allclose(averaged.chi, manual, rtol=1e-12)
        self.assertEqual(averaged.velocity_groups, 3)

    def test_doppler_averaging_washes_out_the_peak(self):
        model = mollow_model()
        medium = MediumParams(gamma=GAMMA)
        bare = sweep(model, -150 * MHZ, 150 * MHZ, 31, medium=medium)
        averaged = sweep(
            model, -150 * MHZ, 150 * MHZ, 31, medium=medium, velocities=VelocityGrid.thermal(medium, 21)
        )
        self.assertLess(np.abs(averaged.chi.imag).max(), np.abs(bare.chi.imag).max())

    def test_single_failure_is_partial(self):
        """One failed point in 101 stays under the 1% limit."""
        grid = np.linspace(-50 * MHZ, 50 * MHZ, 101)
        model = FlakyModel(gamma=GAMMA, pump_rabi=PUMP, probe_rabi=PROBE, bad_detunings=(float(grid[50]),))
        result = sweep(model, -50 * MHZ, 50 * MHZ, 101)
        self.assertEqual(result.status, SweepStatus.PARTIAL)
        self.assertEqual(result.failed_points, [50])
        self.assertTrue(np.isnan(result.chi[50]))
        self.assertTrue(np.isfinite(result.chi[49]))

    def test_too_many_failures(self):
        grid = np.linspace(-50 * MHZ, 50 * MHZ, 101)
        model = FlakyModel(
            gamma=GAMMA, pump_rabi=PUMP, probe_rabi=PROBE,
            bad_detunings=(float(grid[10]), float(grid[90])),
        )
        with self.assertRaises(SweepError) as context:
            sweep(model, -50 * MHZ, 50 * MHZ, 101)
        self.assertEqual(context.exception.failed_points, [10, 90])
        self.assertEqual(context.exception.result.status, SweepStatus.FAILED)

    def test_ill_conditioned_everywhere(self):
        with self.assertRaises(SweepError) as context:
            sweep(mollow_model(), -10 * MHZ, 10 * MHZ, 4, condition_threshold=1.0)
        self.assertEqual(context.exception.failed_points, [0, 1, 2, 3])

    def test_invalid_grid(self):
        with self.assertRaises(StructuralError):
            sweep(mollow_model(), 10 * MHZ, -10 * MHZ, 5)
        with self.assertRaises(StructuralError):
            sweep(mollow_model(), -10 * MHZ, 10 * MHZ, 1)

    def test_peak_index(self):
        result = sweep(mollow_model(), -150 * MHZ, 150 * MHZ, 21)
        self.assertEqual(result.gain[result.peak()], np.nanmax(result.gain))
        npt.assert_allclose(result.detunings_hz[[0, -1]], [-150e6, 150e6])


class TestConvergence(unittest.TestCase):
    """Sweeps repeated for K = 1..K_max."""

    def test_weak_probe_needs_one_harmonic(self):
        report = k_convergence(mollow_model(probe_rabi=1e-5 * PUMP), -100 * MHZ, 100 * MHZ, 21, 2)
        self.assertEqual(report.orders, [1, 2])
        self.assertLess(report.relative_deviations()[0], 1e-6)

    def test_max_order_too_small(self):
        with self.assertRaises(StructuralError):
            k_convergence(mollow_model(), -10 * MHZ, 10 * MHZ, 5, 1)

    @pytest.mark.slow
    @pytest.mark.acceptance
    def test_strong_probe_converges_near_the_side_peaks(self):
        """Deviations shrink with K and are largest near the +-18 MHz features."""
        report = k_convergence(mollow_model(), -150 * MHZ, 150 * MHZ, 120, 3)
        self.assertLess(report.deviations[1], report.deviations[0])
        self.assertLess(abs(report.peak_deviation_detuning()) / TWO_PI, 43e6)


class TestAcceptanceSpectra(unittest.TestCase):
    """Gain features of the bundled configurations."""

    @pytest.mark.slow
    @pytest.mark.acceptance
    def test_autler_townes_doublet(self):
        """Two gain peaks split by the pump Rabi frequency around -200 MHz."""
        model = LambdaModel(
            gamma=GAMMA, gamma_g=TWO_PI * 1e5, pump_rabi=PUMP, probe_rabi=MHZ,
            hyperfine_splitting=200 * MHZ,
        )
        result = sweep(model, -260 * MHZ, -140 * MHZ, 241)
        gain = result.gain
        first, second = sorted(local_maxima(gain)[:2])
        self.assertAlmostEqual(result.detunings_hz[first], -218e6, delta=8e6)
        self.assertAlmostEqual(result.detunings_hz[second], -182e6, delta=8e6)
        self.assertGreater(gain[first], 0)
        self.assertGreater(gain[second], 0)
        self.assertLess(gain[first:second + 1].min(), min(gain[first], gain[second]))
        centre = int(np.argmin(np.abs(result.detunings_hz + 200e6)))
        self.assertGreater(result.populations[centre, 0], result.populations[centre, 1])

    @pytest.mark.slow
    @pytest.mark.acceptance
    def test_second_excited_level_breaks_symmetry(self):
        model = FourLevelModel(
            gamma=GAMMA, gamma_g=TWO_PI * 1e5, pump_rabi=PUMP, probe_rabi=MHZ,
            hyperfine_splitting=200 * MHZ, excited_splitting=100 * MHZ,
        )
        gain = sweep(model, -260 * MHZ, -140 * MHZ, 241).gain
        heights = [gain[i] for i in local_maxima(gain)[:2]]
        self.assertEqual(len(heights), 2)
        self.assertGreater(abs(heights[0] - heights[1]) / max(heights), 0.01)

    @pytest.mark.slow
    @pytest.mark.acceptance
    def test_rb87_raman_peak(self):
        """The Doppler-averaged Raman feature sits near zero two-photon detuning."""
        model = Rb87D1Model(pump_detuning=TWO_PI * 172.38e6, pump_rabi_scale=10.0, probe_rabi_scale=0.01)
        medium = MediumParams(gamma=model.linewidth)
        result = sweep(
            model, -20 * MHZ, 20 * MHZ, 41, medium=medium,
            velocities=VelocityGrid.thermal(medium, 5), jobs=2,
        )
        self.assertEqual(result.status, SweepStatus.SUCCESS)
        peak = result.peak()
        self.assertLess(abs(result.detunings_hz[peak]), 10e6)
        self.assertGreater(result.gain[peak], result.gain[0])
        self.assertGreater(result.gain[peak], result.gain[-1])


if __name__ == '__main__':
    unittest.main()
