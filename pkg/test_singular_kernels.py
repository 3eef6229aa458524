import math
import unittest

import numpy as np
from hypothesis import assume, given, settings, strategies as st

from errors import KernelDomainError
from geometry_state import make_params
from singular_kernels import (
    KernelArgs,
    SplittingPolynomials,
    eval_antisym,
    eval_antisym_derivative,
    eval_D0,
    eval_decomposition,
    eval_Kf_ef,
    eval_Kg_eg,
    eval_P,
    eval_P_derivative,
    positivity_margin,
    product_difference_bound,
    symmetric_coefficients,
)


def flat(dx, sigma=0.5):
    return KernelArgs(dx=dx, f_x=0.0, f_x1=0.0, g_x=0.0, g_x1=0.0, sigma=sigma)


def wavy(x1=-0.3, dx=0.7, sigma=0.3):
    """Small analytic interfaces sampled at (x1 + dx, x1)."""
    return KernelArgs.from_functions(
        x1 + dx, x1,
        lambda x: 0.04 * np.sin(x) + 0.01 * np.cos(3 * x),
        lambda x: -0.03 * np.cos(2 * x),
        lambda x: 0.04 * np.cos(x) - 0.03 * np.sin(3 * x),
        lambda x: 0.06 * np.sin(2 * x),
        sigma,
    )


def printed_coefficients(w1, w2, w3):
    p, q = 1 + w2, 1 + w3
    d = w2 - w3
    c = np.zeros(8)
    c[0] = p ** 4 * q ** 4
    c[1] = 4 * w1 * d * p ** 3 * q ** 3
    c[2] = 0.5 * (5 - 3 * w1 ** 2) * p ** 2 * q ** 2 * (p ** 2 + q ** 2) + 8 * w1 ** 2 * p ** 2 * q ** 2 * d ** 2
    c[3] = w1 * d * (-(10 + 26 * w1 ** 2) * p ** 2 * q ** 2
                     + 4 * (1 + w1 ** 2) * p * q * (p ** 3 - q ** 3) / d)
    c[6] = (1.5 * (1 + w1 ** 2) ** 2 * (1 - 3 * w1 ** 2) * (p ** 2 + q ** 2)
            + 8 * w1 ** 2 * (1 + w1 ** 2) ** 2 * d ** 2)
    c[7] = -2 * w1 * d * (1 + w1 ** 2) ** 3
    return c


class TestVelocityKernels(unittest.TestCase):

    def test_pure_inverse_kernel(self):
        self.assertAlmostEqual(eval_P(11, flat(2.0)), 0.5)

    def test_gap_kernel_constants(self):
        self.assertAlmostEqual(eval_P(12, flat(1.0, sigma=0.5)), 0.5)

    def test_swap_relation(self):
        rng = np.random.default_rng(0)
        args = KernelArgs(dx=rng.uniform(0.1, 2.0, 1000), f_x=rng.normal(0, 0.05, 1000),
                          f_x1=rng.normal(0, 0.05, 1000), g_x=rng.normal(0, 0.05, 1000),
                          g_x1=rng.normal(0, 0.05, 1000), sigma=0.2)
        np.testing.assert_allclose(eval_P(12, args), -eval_P(21, args.swapped()), rtol=1e-14)

    def test_coincident_points_rejected(self):
        with self.assertRaises(KernelDomainError):
            eval_P(11, flat(0.0))
        with self.assertRaises(KernelDomainError):
            eval_decomposition(flat(np.array([1.0, 0.0])))
        with self.assertRaises(KernelDomainError):
            eval_antisym(flat(0.0))

    def test_unknown_index_rejected(self):
        with self.assertRaises(KernelDomainError):
            eval_P(13, flat(1.0))


class TestDecomposition(unittest.TestCase):

    def test_flat_interface(self):
        dec = eval_decomposition(flat(1.5))
        self.assertAlmostEqual(dec.K11, 1 / 2.25)
        self.assertEqual(dec.J11, 0.0)

    def test_cancellation_at_gap_width(self):
        self.assertEqual(eval_decomposition(flat(1.0, sigma=0.5)).K12, 0.0)

    def test_tilde_pairs_describe_the_same_derivative(self):
        args = wavy()
        dec = eval_decomposition(args)
        self.assertAlmostEqual(dec.K12 + dec.J12, dec.K12_tilde + dec.J12_tilde, places=12)
        self.assertAlmostEqual(dec.K21 + dec.J21, dec.K21_tilde + dec.J21_tilde, places=12)

    def test_matches_direct_derivative(self):
        dec = eval_decomposition(wavy())
        pieces = {11: dec.K11 + dec.J11, 22: dec.K22 + dec.J22,
                  12: dec.K12 + dec.J12, 21: dec.K21 + dec.J21}
        for which, value in pieces.items():
            self.assertAlmostEqual(value, eval_P_derivative(which, wavy()), places=12)

    def test_finite_difference_of_p11(self):
        rho = 1e-5
        forward = eval_P(11, wavy(x1=-0.3 + rho, dx=0.7 - rho))
        backward = eval_P(11, wavy(x1=-0.3 - rho, dx=0.7 + rho))
        dec = eval_decomposition(wavy())
        self.assertAlmostEqual((forward - backward) / (2 * rho), dec.K11 + dec.J11, places=7)

    def test_to_dict_lists_all_pieces(self):
        self.assertEqual(len(eval_decomposition(flat(1.0)).to_dict()), 12)


class TestSymmetricKernels(unittest.TestCase):

    def test_unperturbed_value(self):
        k_f, e_f = eval_Kf_ef(flat(1.0, sigma=0.5))
        self.assertAlmostEqual(k_f, 1.0, places=14)
        self.assertEqual(e_f, 0.0)

    def test_zero_gap_perturbation_has_no_error_term(self):
        args = KernelArgs(dx=0.8, f_x=0.3, f_x1=-0.1, g_x=0.3, g_x1=-0.1, sigma=0.25)
        self.assertEqual(eval_Kf_ef(args)[1], 0.0)
        self.assertEqual(eval_Kg_eg(args)[1], 0.0)

    def test_steep_secant_gives_negative_kernel(self):
        args = KernelArgs(dx=1.0, f_x=1.0, f_x1=0.0, g_x=1.0, g_x1=0.0, sigma=0.5)
        k_f, _ = eval_Kf_ef(args)
        self.assertAlmostEqual(k_f, -0.02, places=14)
        self.assertAlmostEqual(eval_decomposition(args).symmetric_f, -0.02, places=14)

    def test_identity_at_small_slopes(self):
        args = wavy()
        dec = eval_decomposition(args)
        k_f, e_f = eval_Kf_ef(args)
        k_g, e_g = eval_Kg_eg(args)
        self.assertLess(abs(k_f + e_f - dec.symmetric_f) / abs(dec.symmetric_f), 1e-10)
        self.assertLess(abs(k_g + e_g - dec.symmetric_g) / abs(dec.symmetric_g), 1e-10)

    def test_base_polynomials(self):
        self.assertEqual(SplittingPolynomials.F0(1.0, 1.0), 16.0)
        self.assertEqual(SplittingPolynomials.G0(1.0, 1.0), 16.0)
        for dx in (0.1, 1.0, 3.0):
            self.assertAlmostEqual(SplittingPolynomials.F(dx, 0.7) / SplittingPolynomials.F0(dx, 0.7), 1.0,
                                   places=12)
            self.assertAlmostEqual(SplittingPolynomials.G(dx, 0.7) / SplittingPolynomials.G0(dx, 0.7), 1.0,
                                   places=12)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
    def test_printed_coefficients(self, w1, w2, w3):
        assume(abs(w2 - w3) > 1e-3)
        ours = SplittingPolynomials.coefficients(w1, w2, w3)
        printed = printed_coefficients(w1, w2, w3)
        for i in (0, 1, 2, 3, 6, 7):
            self.assertLess(abs(ours[i] - printed[i]), 1e-9 * max(1.0, abs(printed[i])), msg=f"c{i}")

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 3.0), st.floats(0.05, 1.0), st.floats(-0.3, 0.3),
           st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
    def test_expansion_matches_numerator(self, dx, two_sigma, w1, w2, w3):
        expansion = SplittingPolynomials.expansion(dx, two_sigma, w1, w2, w3)
        direct = (SplittingPolynomials.F(dx, two_sigma, w1, w2, w3)
                  + w1 * dx * two_sigma * (w2 - w3) * SplittingPolynomials.E(dx, two_sigma, w1, w2, w3))
        self.assertLess(abs(expansion - direct), 1e-9 * max(abs(direct), 1e-300))


class TestDissipationKernels(unittest.TestCase):

    def setUp(self):
        self.params = make_params(0, 1, 2, 0.5)

    def test_values_at_gap_width(self):
        d11, d22 = eval_D0(1.0, self.params)
        self.assertAlmostEqual(d11, 0.5, places=14)
        self.assertAlmostEqual(d22, 2.0, places=14)

    def test_far_field_limit(self):
        dx = 1e4
        _, d22 = eval_D0(dx, self.params)
        self.assertAlmostEqual(d22 * dx ** 4 / 1.0, 6.0, places=4)

    def test_sandwich_minimum(self):
        dx = 1.0 / math.sqrt(3.0)
        d11, _ = eval_D0(dx, self.params)
        self.assertAlmostEqual(dx * dx * d11, 7.0 / 16.0, places=14)
        scan = np.geomspace(1e-3, 1e3, 2001)
        scaled = scan ** 2 * eval_D0(scan, self.params)[0]
        self.assertGreaterEqual(scaled.min(), 7.0 / 16.0 - 1e-12)
        self.assertLessEqual(scaled.max(), 1.0 + 1e-12)

    def test_singular_at_zero(self):
        with self.assertRaises(KernelDomainError):
            eval_D0(0.0, self.params)

    def test_quadratic_form_reduces_to_dissipation_kernels(self):
        params = make_params(0, 0.6, 2, 0.2)
        args = flat(np.array([0.05, 0.4, 2.0]), sigma=0.2)
        d11, _, d22 = symmetric_coefficients(args, params)
        d011, d022 = eval_D0(args.dx, params)
        np.testing.assert_allclose(d11, d011, rtol=1e-12)
        np.testing.assert_allclose(d22, d022, rtol=1e-12)

    def test_positivity_for_flat_interfaces(self):
        params = make_params(0, 0.6, 2, 0.2)
        rng = np.random.default_rng(2)
        dx = np.geomspace(4e-3, 40.0, 200)
        a = rng.standard_normal(200) + 1j * rng.standard_normal(200)
        b = rng.standard_normal(200) + 1j * rng.standard_normal(200)
        self.assertTrue(np.all(positivity_margin(flat(dx, sigma=0.2), params, a, b) >= 0.0))


class TestAntisymmetricKernel(unittest.TestCase):

    def test_constant_interfaces(self):
        args = KernelArgs(dx=0.5, f_x=0.1, f_x1=0.1, g_x=-0.2, g_x1=-0.2, sigma=0.3)
        self.assertEqual(eval_antisym(args), 0.0)

    def test_opposite_jumps(self):
        args = KernelArgs(dx=0.5, f_x=0.5, f_x1=0.25, g_x=-0.25, g_x1=0.0, sigma=0.3)
        self.assertEqual(eval_antisym(args), 0.0)

    def test_matches_direct_subtraction(self):
        args = wavy()
        direct = eval_P(12, args) - eval_P(21, args)
        self.assertLess(abs(eval_antisym(args) - direct) / abs(eval_P(12, args)), 1e-12)

    def test_derivative_by_finite_differences(self):
        rho = 1e-5
        forward = eval_antisym(wavy(x1=-0.3 + rho, dx=0.7 - rho))
        backward = eval_antisym(wavy(x1=-0.3 - rho, dx=0.7 + rho))
        self.assertAlmostEqual((forward - backward) / (2 * rho),
                               eval_antisym_derivative(wavy()), places=7)


class TestProductDifference(unittest.TestCase):

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
    def test_bound_holds(self, length, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal(length) + 1j * rng.standard_normal(length)
        b = rng.standard_normal(length) + 1j * rng.standard_normal(length)
        lhs, rhs = product_difference_bound(a, b)
        self.assertLessEqual(lhs, rhs * (1 + 1e-12))

    def test_equal_tuples(self):
        a = np.array([1 + 1j, 2.0, -0.5j])
        lhs, rhs = product_difference_bound(a, a)
        self.assertEqual(lhs, 0.0)
        self.assertEqual(rhs, 0.0)


if __name__ == '__main__':
    unittest.main(verbosity=2)
