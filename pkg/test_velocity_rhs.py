import math
import unittest

import numpy as np

from errors import CollisionError, KernelDomainError
from geometry_state import Grid1D, HThetaState, InterfaceState, make_params
from velocity_rhs import (
    compute_velocity,
    linear_velocity_response,
    linearized_symbol,
    rhs_fg,
    rhs_htheta,
    rhs_twophase,
    symbol_kernel,
    twophase_rate,
)


def bumps(x):
    f = 1e-2 * np.exp(-(x / 0.5) ** 2)
    g = -5e-3 * np.exp(-(x / 0.7) ** 2)
    return f, g


class TestVelocity(unittest.TestCase):

    def setUp(self):
        self.params = make_params(0, 1, 2, 0.1)
        self.grid = Grid1D(math.pi, 64)
        self.x = self.grid.nodes

    def test_flat_interfaces_do_not_move(self):
        zero = np.zeros(self.grid.n)
        velocity = compute_velocity(InterfaceState(zero, zero, 0.1), self.params, self.grid)
        np.testing.assert_array_equal(velocity.u_plus, 0.0)
        np.testing.assert_array_equal(velocity.u_minus, 0.0)

    def test_constant_shift(self):
        const = np.full(self.grid.n, 0.03)
        velocity = compute_velocity(InterfaceState(const, const, 0.1), self.params, self.grid)
        np.testing.assert_allclose(velocity.u_plus, 0.0, atol=1e-13)
        np.testing.assert_allclose(velocity.u_minus, 0.0, atol=1e-13)

    def test_first_order_response(self):
        eps, k = 1e-6, 2.0
        up_per_g, um_per_f = linear_velocity_response(k, self.params, self.grid)
        mode = eps * np.cos(k * self.x)
        zero = np.zeros(self.grid.n)
        u_plus = compute_velocity(InterfaceState(zero, mode, 0.1), self.params, self.grid).u_plus
        u_minus = compute_velocity(InterfaceState(mode, zero, 0.1), self.params, self.grid).u_minus
        np.testing.assert_allclose(u_plus, up_per_g * eps * np.sin(k * self.x),
                                   atol=1e-4 * abs(up_per_g) * eps)
        np.testing.assert_allclose(u_minus, um_per_f * eps * np.sin(k * self.x),
                                   atol=1e-4 * abs(um_per_f) * eps)

    def test_collision_detected(self):
        f = np.zeros(self.grid.n)
        g = np.zeros(self.grid.n)
        g[10] = 0.25
        state = InterfaceState(f, g, 0.1)
        with self.assertRaises(CollisionError) as ctx:
            compute_velocity(state, self.params, self.grid)
        self.assertLess(ctx.exception.gap, 0.0)
        with self.assertRaises(CollisionError):
            rhs_fg(state, self.params, self.grid)

    def test_spectral_accuracy(self):
        reference_grid = Grid1D(math.pi, 256)
        f, g = bumps(reference_grid.nodes)
        reference = compute_velocity(InterfaceState(f, g, 0.1), self.params, reference_grid).u_plus
        errors = []
        for n in (32, 64):
            grid = Grid1D(math.pi, n)
            f, g = bumps(grid.nodes)
            u_plus = compute_velocity(InterfaceState(f, g, 0.1), self.params, grid).u_plus
            errors.append(np.max(np.abs(u_plus - reference[::256 // n])))
        self.assertLess(errors[1], errors[0] / 10.0)


class TestRightHandSides(unittest.TestCase):

    def setUp(self):
        self.params = make_params(0, 0.8, 2, 0.1)
        self.grid = Grid1D(math.pi, 64)
        self.x = self.grid.nodes

    def test_zero_state(self):
        zero = np.zeros(self.grid.n)
        rhs = rhs_fg(InterfaceState(zero, zero, 0.1), self.params, self.grid)
        np.testing.assert_array_equal(rhs.first, 0.0)
        np.testing.assert_array_equal(rhs.second, 0.0)
        htheta = rhs_htheta(HThetaState.from_fields(zero, zero, self.params, 0.1),
                            self.params, self.grid)
        np.testing.assert_array_equal(htheta.first, 0.0)
        np.testing.assert_array_equal(htheta.second, 0.0)

    def test_even_data_gives_even_rhs(self):
        f, g = bumps(self.x)
        rhs = rhs_fg(InterfaceState(f, g, 0.1), self.params, self.grid)
        mirror = (-np.arange(self.grid.n)) % self.grid.n
        for field in (rhs.first, rhs.second):
            scale = np.max(np.abs(field))
            np.testing.assert_allclose(field[mirror], field, atol=1e-10 * scale)

    def test_translation_equivariance(self):
        f, g = bumps(self.x)
        rhs = rhs_fg(InterfaceState(f, g, 0.1), self.params, self.grid)
        shifted = rhs_fg(InterfaceState(np.roll(f, 1), np.roll(g, 1), 0.1), self.params, self.grid)
        for base, moved in ((rhs.first, shifted.first), (rhs.second, shifted.second)):
            scale = np.max(np.abs(base))
            np.testing.assert_allclose(moved, np.roll(base, 1), atol=1e-12 * scale)

    def test_systems_agree(self):
        rng = np.random.default_rng(9)
        f, g = bumps(self.x)
        f = f * (1 + 0.1 * rng.standard_normal())
        g = g + 2e-3 * np.exp(-((self.x - 0.4) / 0.6) ** 2)
        p = self.params
        fg = rhs_fg(InterfaceState(f, g, 0.1), p, self.grid)
        htheta = rhs_htheta(HThetaState.from_fields(p.mu2 * f + p.mu1 * g, f - g, p, 0.1), p, self.grid)
        scale = max(np.max(np.abs(fg.first)), np.max(np.abs(fg.second)))
        np.testing.assert_allclose(htheta.first, p.mu2 * fg.first + p.mu1 * fg.second,
                                   atol=1e-10 * scale)
        np.testing.assert_allclose(htheta.second, fg.first - fg.second, atol=1e-10 * scale)

    def test_equal_interfaces_still_open_the_gap(self):
        f, _ = bumps(self.x)
        p = self.params
        fg = rhs_fg(InterfaceState(f, f, 0.1), p, self.grid)
        htheta = rhs_htheta(HThetaState.from_fields(f, np.zeros(self.grid.n), p, 0.1), p, self.grid)
        self.assertGreater(np.max(np.abs(htheta.second)), 0.0)
        np.testing.assert_allclose(htheta.second, fg.first - fg.second,
                                   atol=1e-10 * np.max(np.abs(fg.first)))

    def test_threads_do_not_change_the_result(self):
        f, g = bumps(self.x)
        serial = rhs_fg(InterfaceState(f, g, 0.1), self.params, self.grid, workers=1)
        threaded = rhs_fg(InterfaceState(f, g, 0.1), self.params, self.grid, workers=4)
        np.testing.assert_array_equal(serial.first, threaded.first)
        np.testing.assert_array_equal(serial.second, threaded.second)

    def test_mean_is_second_order(self):
        f, g = bumps(self.x)
        rhs = rhs_fg(InterfaceState(1e-4 * f, 1e-4 * g, 0.1), self.params, self.grid)
        self.assertLess(abs(np.mean(rhs.first)), 1e-4 * np.max(np.abs(rhs.first)))


class TestTwoPhase(unittest.TestCase):

    def setUp(self):
        self.grid = Grid1D(math.pi, 128)
        self.x = self.grid.nodes

    def test_flat_and_constant(self):
        np.testing.assert_array_equal(rhs_twophase(np.zeros(self.grid.n), 2.0, self.grid), 0.0)
        np.testing.assert_allclose(rhs_twophase(np.full(self.grid.n, 0.2), 2.0, self.grid), 0.0,
                                   atol=1e-13)

    def test_single_mode_decay(self):
        eps, k = 1e-6, 3.0
        rate = twophase_rate(k, 2.0, grid=self.grid)
        rhs = rhs_twophase(eps * np.cos(k * self.x), 2.0, self.grid)
        np.testing.assert_allclose(rhs, rate * eps * np.cos(k * self.x), atol=1e-9 * abs(rate) * eps)

    def test_whole_line_rate(self):
        self.assertAlmostEqual(twophase_rate(3.0, 2.0), -3.0, places=14)
        self.assertAlmostEqual(twophase_rate(-3.0, 2.0), -3.0, places=14)


class TestLinearSymbol(unittest.TestCase):

    def test_zero_wavenumber_rejected(self):
        with self.assertRaises(KernelDomainError):
            linearized_symbol(0.0, make_params(0, 1, 2, 0.1))

    def test_equal_weights_closed_form(self):
        xi, sigma = 3.0, 0.1
        symbol = linearized_symbol(xi, make_params(0, 1, 2, sigma))
        decay = math.exp(-2 * sigma * xi)
        expected = [-xi * (1 + decay) / 2, -xi * (1 - decay) / 2]
        np.testing.assert_allclose(symbol.eigenvalues, expected, rtol=1e-12)

    def test_thin_layer_limit(self):
        symbol = linearized_symbol(2.0, make_params(0, 1, 2, 1e-9))
        np.testing.assert_allclose(symbol.eigenvalues, [-2.0, 0.0], atol=1e-7)

    def test_wide_layer_decouples(self):
        symbol = linearized_symbol(50.0, make_params(0, 0.5, 2, 0.9))
        np.testing.assert_allclose(symbol.eigenvalues, [-0.75 * 50, -0.25 * 50], rtol=1e-12)

    def test_even_in_wavenumber(self):
        params = make_params(0, 0.7, 2, 0.05)
        np.testing.assert_allclose(linearized_symbol(-4.0, params).eigenvalues,
                                   linearized_symbol(4.0, params).eigenvalues, rtol=1e-14)

    def test_eigenvectors(self):
        symbol = linearized_symbol(2.0, make_params(0, 0.3, 2, 0.2))
        for value, vector in zip(symbol.eigenvalues, symbol.eigenvectors.T):
            np.testing.assert_allclose(symbol.matrix @ vector, value * vector, atol=1e-12)

    def test_truncated_and_grid_symbols(self):
        grid = Grid1D(math.pi, 1024)
        for a in (0.0, 0.2):
            truncated = symbol_kernel(3.0, a, half_length=math.pi)
            self.assertAlmostEqual(symbol_kernel(3.0, a, grid=grid), truncated, places=4)
        self.assertAlmostEqual(symbol_kernel(3.0, 0.2), math.pi * math.exp(-0.6), places=14)


if __name__ == '__main__':
    unittest.main(verbosity=2)
