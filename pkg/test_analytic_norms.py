import math
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

from analytic_norms import (
    CSV_COLUMNS,
    SpectralField,
    apply_lambda,
    diss_blocks,
    diss_blocks_real_space,
    diss_k,
    dissipation_weight,
    energy_E,
    hk_gamma_norm,
    lambda_half_norm,
    linf_gamma_norm,
    norm_report,
    regime_indicator,
    spectral_tail_ratio,
    strip_width_estimate,
)
from errors import InvalidParameterError, ResolutionLossError
from geometry_state import Grid1D, HThetaState, make_params


def band_limited(rng, x, modes=8, scale=1e-2):
    values = np.zeros_like(x)
    for m in range(1, modes + 1):
        a, b = rng.normal(size=2) * scale / m ** 2
        values += a * np.cos(m * x) + b * np.sin(m * x)
    return values


class TestStripNorms(unittest.TestCase):

    def setUp(self):
        self.grid = Grid1D(math.pi, 64)
        self.cos = self.grid.spectral(np.cos(self.grid.nodes))

    def test_hk_cosine_at_zero_width(self):
        self.assertAlmostEqual(hk_gamma_norm(self.cos, 0, 0.0), 2 * math.pi, places=12)

    def test_hk_cosine_inside_strip(self):
        for gamma in (0.1, 0.5, 1.0):
            self.assertAlmostEqual(hk_gamma_norm(self.cos, 0, gamma),
                                   2 * math.pi * math.cosh(2 * gamma), places=11)

    def test_hk_cosine_first_derivative(self):
        self.assertAlmostEqual(hk_gamma_norm(self.cos, 1, 0.0), 4 * math.pi, places=12)

    def test_unsquared_norm(self):
        self.assertAlmostEqual(hk_gamma_norm(self.cos, 0, 0.0, squared=False),
                               math.sqrt(2 * math.pi), places=12)

    def test_parseval_at_zero_width(self):
        rng = np.random.default_rng(3)
        values = band_limited(rng, self.grid.nodes)
        grid_l2 = self.grid.dx * np.sum(values ** 2)
        norm = hk_gamma_norm(self.grid.spectral(values), 0, 0.0)
        self.assertLess(abs(norm - 2 * grid_l2) / (2 * grid_l2), 1e-12)

    def test_monotone_in_k_and_gamma(self):
        field = self.grid.spectral(band_limited(np.random.default_rng(4), self.grid.nodes))
        by_k = [hk_gamma_norm(field, k, 0.1) for k in range(5)]
        by_gamma = [hk_gamma_norm(field, 2, g) for g in (0.0, 0.05, 0.1, 0.2)]
        self.assertEqual(by_k, sorted(by_k))
        self.assertEqual(by_gamma, sorted(by_gamma))

    def test_overflow_guard(self):
        with self.assertRaises(ResolutionLossError) as ctx:
            hk_gamma_norm(self.cos, 0, 11.0)
        self.assertIn("exponent", ctx.exception.diagnostic)

    def test_negative_width_rejected(self):
        with self.assertRaises(InvalidParameterError):
            hk_gamma_norm(self.cos, 0, -0.1)

    def test_linf_cosine(self):
        self.assertAlmostEqual(linf_gamma_norm(self.cos, 0.0), 1.0, places=13)
        self.assertAlmostEqual(linf_gamma_norm(self.cos, 1.0), math.cosh(1.0), places=12)

    def test_linf_zero(self):
        self.assertEqual(linf_gamma_norm(self.grid.spectral(np.zeros(64)), 0.5), 0.0)

    def test_lambda_half_and_apply_lambda(self):
        cos2 = self.grid.spectral(np.cos(2 * self.grid.nodes))
        self.assertAlmostEqual(lambda_half_norm(self.cos), 2 * math.pi, places=12)
        self.assertAlmostEqual(lambda_half_norm(cos2), 4 * math.pi, places=12)
        np.testing.assert_allclose(apply_lambda(cos2).values(), 2 * np.cos(2 * self.grid.nodes),
                                   atol=1e-13)

    def test_derivative_of_cosine(self):
        np.testing.assert_allclose(self.cos.derivative().values(), -np.sin(self.grid.nodes),
                                   atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 0.9), st.integers(0, 4),
           st.floats(0.0, 0.3))
    def test_norm_splitting(self, seed, mu1, k, gamma):
        rng = np.random.default_rng(seed)
        params = make_params(0.0, 2.0 * mu1, 2.0, 0.1)
        x = self.grid.nodes
        f, g = band_limited(rng, x), band_limited(rng, x)
        h = params.mu2 * f + params.mu1 * g
        theta = f - g
        lhs = (params.mu2 * hk_gamma_norm(self.grid.spectral(f), k, gamma)
               + params.mu1 * hk_gamma_norm(self.grid.spectral(g), k, gamma))
        rhs = (hk_gamma_norm(self.grid.spectral(h), k, gamma)
               + params.mu1 * params.mu2 * hk_gamma_norm(self.grid.spectral(theta), k, gamma))
        self.assertLess(abs(lhs - rhs) / abs(lhs), 1e-10)


class TestDissipation(unittest.TestCase):

    def setUp(self):
        self.params = make_params(0, 1, 2, 0.1)
        self.grid = Grid1D(math.pi, 128)
        self.x = self.grid.nodes

    def test_zero_fields(self):
        zero = self.grid.spectral(np.zeros(self.grid.n))
        self.assertEqual(diss_k(zero, zero, 3, 0.1, self.params), 0.0)

    def test_weight_bounds_on_grid(self):
        xi = np.linspace(-200.0, 200.0, 100)
        for sigma in np.geomspace(1e-4, 0.99, 100):
            weight = dissipation_weight(xi, sigma)
            self.assertTrue(np.all(weight >= 0.0))
            bound = np.minimum(np.abs(xi), sigma * xi ** 2)
            self.assertTrue(np.all(weight <= bound * (1 + 1e-12) + 1e-300))

    def test_weight_scalar_and_small_argument(self):
        self.assertEqual(dissipation_weight(0.0, 0.1), 0.0)
        # u = 2 sigma |xi| = 2e-6: weight ~ sigma xi^2
        self.assertAlmostEqual(dissipation_weight(1e-5, 0.1) / (0.1 * 1e-10), 1.0, places=5)
        self.assertIsInstance(dissipation_weight(3.0, 0.1), float)

    def test_real_space_oracle_for_cosine(self):
        h = np.cos(self.x)
        fourier = diss_blocks(self.grid.spectral(h), self.grid.spectral(h), 0, 0.0, self.params)
        real = diss_blocks_real_space(h, h, 0, self.params, math.pi)
        self.assertLess(abs(real[0] - fourier[0]) / fourier[0], 1e-2)
        self.assertLess(abs(real[1] - fourier[1]) / fourier[1], 1e-2)

    def test_real_space_oracle_for_band_limited_theta(self):
        rng = np.random.default_rng(11)
        h = band_limited(rng, self.x)
        theta = band_limited(rng, self.x)
        for k in (0, 1):
            fourier = diss_blocks(self.grid.spectral(h), self.grid.spectral(theta), k, 0.0,
                                  self.params)
            real = diss_blocks_real_space(h, theta, k, self.params, math.pi)
            np.testing.assert_allclose(real, fourier, rtol=1e-2)

    def test_diss_combines_blocks(self):
        h = self.grid.spectral(np.cos(self.x))
        theta = self.grid.spectral(0.5 * np.sin(2 * self.x))
        h_block, theta_block = diss_blocks(h, theta, 1, 0.05, self.params)
        expected = math.sqrt(h_block + (self.params.mu1 * self.params.mu2) ** 2 * theta_block)
        self.assertAlmostEqual(diss_k(h, theta, 1, 0.05, self.params), expected, places=12)


class TestEnergyAndReports(unittest.TestCase):

    def setUp(self):
        self.params = make_params(0, 0.7, 2, 0.1)
        self.grid = Grid1D(math.pi, 64)
        self.x = self.grid.nodes

    def state(self, h, theta, gamma=0.1):
        return HThetaState.from_fields(h, theta, self.params, gamma)

    def test_zero_state(self):
        zero = np.zeros(self.grid.n)
        self.assertEqual(energy_E(self.state(zero, zero), 3, self.params, math.pi), 0.0)

    def test_no_gap_perturbation(self):
        h = 1e-3 * np.cos(self.x)
        state = self.state(h, np.zeros(self.grid.n))
        self.assertAlmostEqual(energy_E(state, 3, self.params, math.pi),
                               hk_gamma_norm(self.grid.spectral(h), 3, 0.1), places=15)

    def test_energy_splitting(self):
        rng = np.random.default_rng(5)
        f, g = band_limited(rng, self.x), band_limited(rng, self.x)
        p = self.params
        state = self.state(p.mu2 * f + p.mu1 * g, f - g)
        direct = (p.mu2 * hk_gamma_norm(self.grid.spectral(f), 3, 0.1)
                  + p.mu1 * hk_gamma_norm(self.grid.spectral(g), 3, 0.1)
                  + hk_gamma_norm(self.grid.spectral((f - g) / p.sigma), 0, 0.1))
        energy = energy_E(state, 3, p, math.pi)
        self.assertLess(abs(energy - direct) / direct, 1e-10)

    def test_energy_needs_k_at_least_three(self):
        zero = np.zeros(self.grid.n)
        with self.assertRaises(InvalidParameterError):
            energy_E(self.state(zero, zero), 2, self.params, math.pi)

    def test_regime_indicator_zero(self):
        zero = np.zeros(self.grid.n)
        self.assertEqual(regime_indicator(self.state(zero, zero), self.params, math.pi), 0.0)

    def test_norm_report_row(self):
        h = 1e-3 * np.exp(-(self.x / 0.5) ** 2)
        report = norm_report(self.state(h, 0.5 * h), self.params, 3, math.pi)
        row = report.csv_row()
        self.assertEqual(len(row), len(CSV_COLUMNS))
        self.assertEqual(row[0], 0.0)
        self.assertAlmostEqual(report.min_distance, 0.2, places=12)
        for value in (report.energy, report.hk_h, report.diss_k, report.regime_w):
            self.assertGreater(value, 0.0)
        self.assertIsNotNone(report.strip_estimate)

    def test_norm_report_zero_state_has_no_strip_estimate(self):
        zero = np.zeros(self.grid.n)
        report = norm_report(self.state(zero, zero), self.params, 3, math.pi)
        self.assertIsNone(report.strip_estimate)
        self.assertTrue(math.isnan(report.csv_row()[CSV_COLUMNS.index("strip_estimate")]))


class TestStripEstimate(unittest.TestCase):

    def test_synthetic_exponential_spectrum(self):
        n, a = 64, 0.3
        modes = np.fft.fftfreq(n, d=1.0 / n)
        coeffs = n * np.exp(-a * np.abs(modes)).astype(complex)
        estimate = strip_width_estimate(SpectralField(coeffs, math.pi))
        self.assertLess(abs(estimate - a) / a, 0.02)

    def test_single_mode_is_undefined(self):
        grid = Grid1D(math.pi, 64)
        self.assertIsNone(strip_width_estimate(grid.spectral(np.cos(3 * grid.nodes))))

    def test_gaussian_estimate_grows_with_resolution(self):
        estimates = []
        for n in (16, 32, 64):
            grid = Grid1D(2 * math.pi, n)
            estimates.append(strip_width_estimate(grid.spectral(np.exp(-grid.nodes ** 2))))
        self.assertLess(estimates[0], estimates[1])
        self.assertLess(estimates[1], estimates[2])

    def test_tail_ratio(self):
        grid = Grid1D(math.pi, 64)
        self.assertEqual(spectral_tail_ratio(grid.spectral(np.zeros(64))), 0.0)
        self.assertLess(spectral_tail_ratio(grid.spectral(np.cos(grid.nodes))), 1e-12)
        self.assertAlmostEqual(
            spectral_tail_ratio(grid.spectral(np.cos(grid.nodes) + np.cos(30 * grid.nodes))), 1.0)

    def test_rounding_noise_has_no_tail(self):
        grid = Grid1D(math.pi, 128)
        noise = 1e-19 * np.random.default_rng(5).standard_normal(grid.n)
        self.assertEqual(spectral_tail_ratio(grid.spectral(noise)), 0.0)
        self.assertGreater(spectral_tail_ratio(grid.spectral(noise), floor=0.0), 0.1)


if __name__ == '__main__':
    unittest.main(verbosity=2)
