"""
Singular Kernels
Closed-form evaluation of the interaction kernels of the three-phase problem
and of every expression built from them in the energy estimates:

- P11, P12, P21, P22 (velocity kernels, 1/Delta x type singularity)
- the derivative decompositions K_ij + J_ij = d/dx1 P_ij and tilde variants
- the symmetric rational kernels K_f, K_g with error terms e_f, e_g
- the unperturbed dissipation kernels D0_11, D0_22
- the antisymmetric combination P12 - P21 and its x1-derivative
- the symmetric quadratic form and the product-difference inequality

Everything is vectorized: KernelArgs fields may be scalars or broadcastable
numpy arrays. Notation: a = Delta x = x - x1, s = 2 sigma,
u = s + theta(x1), v = s + theta(x).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial

from errors import KernelDomainError

logger = logging.getLogger(__name__)

KERNEL_NAMES = (11, 12, 21, 22)


@dataclass(frozen=True)
class KernelArgs:
    """
    Field data at one (or a batch of) (x, x1) pairs.

    Slopes are taken at x1, the integration variable.
    """
    dx: Union[float, np.ndarray]
    f_x: Union[float, np.ndarray]
    f_x1: Union[float, np.ndarray]
    g_x: Union[float, np.ndarray]
    g_x1: Union[float, np.ndarray]
    df_x1: Union[float, np.ndarray] = 0.0
    dg_x1: Union[float, np.ndarray] = 0.0
    sigma: float = 0.5

    @classmethod
    def from_functions(cls, x, x1, f, g, df, dg, sigma: float) -> "KernelArgs":
        """Sample callables f, g (and their derivatives) at x and x1."""
        x = np.asarray(x, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        return cls(x - x1, f(x), f(x1), g(x), g(x1), df(x1), dg(x1), sigma)

    @property
    def two_sigma(self) -> float:
        return 2.0 * self.sigma

    @property
    def delta_f(self):
        return self.f_x - self.f_x1

    @property
    def delta_g(self):
        return self.g_x - self.g_x1

    @property
    def theta_x(self):
        return self.f_x - self.g_x

    @property
    def theta_x1(self):
        return self.f_x1 - self.g_x1

    @property
    def dtheta_x1(self):
        return self.df_x1 - self.dg_x1

    def swapped(self, df_x=0.0, dg_x=0.0) -> "KernelArgs":
        """Same configuration with x and x1 exchanged (slopes at the new x1 supplied)."""
        return KernelArgs(-np.asarray(self.dx), self.f_x1, self.f_x, self.g_x1, self.g_x,
                          df_x, dg_x, self.sigma)

    def require_offset(self) -> None:
        if np.any(np.asarray(self.dx) == 0.0):
            raise KernelDomainError("kernel evaluated at coincident points (dx = 0)")


@dataclass(frozen=True)
class KernelDecomposition:
    """The twelve pieces with K + J = d/dx1 of the matching P kernel."""
    K11: np.ndarray
    J11: np.ndarray
    K22: np.ndarray
    J22: np.ndarray
    K12: np.ndarray
    J12: np.ndarray
    K21: np.ndarray
    J21: np.ndarray
    K12_tilde: np.ndarray
    J12_tilde: np.ndarray
    K21_tilde: np.ndarray
    J21_tilde: np.ndarray

    @property
    def symmetric_f(self):
        """K11 - K12/2 - K21/2"""
        return self.K11 - 0.5 * self.K12 - 0.5 * self.K21

    @property
    def symmetric_g(self):
        """K22 - K~12/2 - K~21/2"""
        return self.K22 - 0.5 * self.K12_tilde - 0.5 * self.K21_tilde

    def to_dict(self) -> Dict:
        return {name: np.asarray(value).tolist() for name, value in asdict(self).items()}


def eval_P(which: int, args: KernelArgs):
    """
    Velocity kernel P_ij at (x, x1).

    Args:
        which: One of 11, 12, 21, 22
        args: Field values at x and x1

    Returns:
        P11 = a/(a^2 + Df^2), P12 = a/(a^2 + (s + f(x) - g(x1))^2),
        P21 = a/(a^2 + (s + f(x1) - g(x))^2), P22 = a/(a^2 + Dg^2)
    """
    args.require_offset()
    a = np.asarray(args.dx, dtype=float)
    s = args.two_sigma
    if which == 11:
        d = args.delta_f
    elif which == 12:
        d = s + args.f_x - args.g_x1
    elif which == 21:
        d = s + args.f_x1 - args.g_x
    elif which == 22:
        d = args.delta_g
    else:
        raise KernelDomainError(f"unknown kernel index {which}, expected one of {KERNEL_NAMES}")
    return a / (a * a + d * d)


def eval_P_derivative(which: int, args: KernelArgs):
    """Direct d/dx1 P_ij, used to cross-check the decompositions."""
    args.require_offset()
    a = np.asarray(args.dx, dtype=float)
    s = args.two_sigma
    if which == 11:
        d, slope = args.delta_f, args.df_x1
        return (a * a - d * d + 2.0 * a * d * slope) / (a * a + d * d) ** 2
    if which == 22:
        d, slope = args.delta_g, args.dg_x1
        return (a * a - d * d + 2.0 * a * d * slope) / (a * a + d * d) ** 2
    if which == 12:
        d = s + args.f_x - args.g_x1
        return (a * a - d * d + 2.0 * a * d * args.dg_x1) / (a * a + d * d) ** 2
    if which == 21:
        d = s + args.f_x1 - args.g_x
        return (a * a - d * d - 2.0 * a * d * args.df_x1) / (a * a + d * d) ** 2
    raise KernelDomainError(f"unknown kernel index {which}, expected one of {KERNEL_NAMES}")


def eval_decomposition(args: KernelArgs) -> KernelDecomposition:
    """All twelve K/J pieces by their closed forms."""
    args.require_offset()
    a = np.asarray(args.dx, dtype=float)
    a2 = a * a
    b = args.delta_f
    c = args.delta_g
    s = args.two_sigma
    u = s + args.theta_x1
    v = s + args.theta_x
    fp, gp, tp = args.df_x1, args.dg_x1, args.dtheta_x1

    d11 = a2 + b * b
    d22 = a2 + c * c
    d12 = a2 + (b + u) ** 2
    d21 = a2 + (b - v) ** 2
    d12t = a2 + (c + v) ** 2
    d21t = a2 + (c - u) ** 2

    return KernelDecomposition(
        K11=1.0 / d11,
        J11=2.0 * b * (fp * a - b) / d11 ** 2,
        K22=1.0 / d22,
        J22=2.0 * c * (gp * a - c) / d22 ** 2,
        K12=(a2 + b * b - u * u) / d12 ** 2,
        J12=(2.0 * (b + u) * (fp * a - b) - 2.0 * a * tp * (b + u)) / d12 ** 2,
        K21=(a2 + b * b - v * v) / d21 ** 2,
        J21=2.0 * (b - v) * (fp * a - b) / d21 ** 2,
        K12_tilde=(a2 + c * c - v * v) / d12t ** 2,
        J12_tilde=2.0 * (c + v) * (gp * a - c) / d12t ** 2,
        K21_tilde=(a2 + c * c - u * u) / d21t ** 2,
        J21_tilde=(2.0 * (c - u) * (gp * a - c) + 2.0 * a * tp * (c - u)) / d21t ** 2,
    )


def _split_F(P, b, u, v):
    X = P + u ** 2
    Y = P + v ** 2
    XX = X ** 2 + 4 * b ** 2 * u ** 2
    YY = Y ** 2 + 4 * b ** 2 * v ** 2
    return (XX * YY - 16 * b ** 2 * u * v * X * Y
            - 0.5 * P * (P - u ** 2) * YY - 0.5 * P * (P - v ** 2) * XX)


def _split_E(P, b, u, v):
    X = P + u ** 2
    Y = P + v ** 2
    return (-4 * (P - u * v) * (X * Y - 4 * b ** 2 * u * v)
            + 2 * P * (P ** 2 + P * (u + v) ** 2 - u ** 2 * v ** 2))


def _split_G(P, b, u, v):
    X = P + u ** 2
    Y = P + v ** 2
    return P * (X + 2 * b * u) ** 2 * (Y - 2 * b * v) ** 2


class SplittingPolynomials:
    """
    The rational pieces of K11 - K12/2 - K21/2 = (F + Df Dtheta E)/G.

    Arguments are dx, two_sigma and the slope-type ratios
    w1 = Df/dx, w2 = theta(x)/(2 sigma), w3 = theta(x1)/(2 sigma).
    """

    @staticmethod
    def _reduced(dx, two_sigma, w1, w2, w3):
        dx = np.asarray(dx, dtype=float)
        P = dx * dx * (1.0 + np.asarray(w1) ** 2)
        b = np.asarray(w1) * dx
        u = two_sigma * (1.0 + np.asarray(w3))
        v = two_sigma * (1.0 + np.asarray(w2))
        return P, b, u, v

    @classmethod
    def F(cls, dx, two_sigma, w1=0.0, w2=0.0, w3=0.0):
        return _split_F(*cls._reduced(dx, two_sigma, w1, w2, w3))

    @classmethod
    def E(cls, dx, two_sigma, w1=0.0, w2=0.0, w3=0.0):
        return _split_E(*cls._reduced(dx, two_sigma, w1, w2, w3))

    @classmethod
    def G(cls, dx, two_sigma, w1=0.0, w2=0.0, w3=0.0):
        return _split_G(*cls._reduced(dx, two_sigma, w1, w2, w3))

    @staticmethod
    def F0(dx, two_sigma):
        a2 = np.asarray(dx, dtype=float) ** 2
        s2 = two_sigma ** 2
        return s2 ** 4 + 5 * a2 * s2 ** 3 + 7 * a2 ** 2 * s2 ** 2 + 3 * a2 ** 3 * s2

    @staticmethod
    def G0(dx, two_sigma):
        a2 = np.asarray(dx, dtype=float) ** 2
        return a2 * (a2 + two_sigma ** 2) ** 4

    @staticmethod
    def coefficients(w1: float, w2: float, w3: float) -> np.ndarray:
        """
        c0..c7 with F + Df Dtheta E = sum_i c_i dx^i (2 sigma)^(8 - i).

        Even coefficients come from F(dx, 1), odd ones from
        w1 (w2 - w3) times the even coefficients of E(dx, 1).
        """
        a = Polynomial([0.0, 1.0])
        P = (1.0 + w1 ** 2) * a ** 2
        b = w1 * a
        u = 1.0 + w3
        v = 1.0 + w2
        f_coef = _split_F(P, b, u, v).coef
        e_coef = _split_E(P, b, u, v).coef

        def at(coef, i):
            return coef[i] if i < len(coef) else 0.0

        c = np.zeros(8)
        for j in range(4):
            c[2 * j] = at(f_coef, 2 * j)
            c[2 * j + 1] = w1 * (w2 - w3) * at(e_coef, 2 * j)
        return c

    @classmethod
    def expansion(cls, dx, two_sigma, w1: float, w2: float, w3: float):
        c = cls.coefficients(w1, w2, w3)
        dx = np.asarray(dx, dtype=float)
        return sum(c[i] * dx ** i * two_sigma ** (8 - i) for i in range(8))


def _ratio(numerator, denominator):
    denominator = np.asarray(denominator, dtype=float)
    if np.any(denominator == 0.0):
        raise KernelDomainError("singular configuration: G vanishes")
    return numerator / denominator


def eval_Kf_ef(args: KernelArgs):
    """
    Symmetric kernel K_f = F/G and error term e_f = Df Dtheta E/G.

    K_f + e_f equals K11 - K12/2 - K21/2 identically.
    """
    args.require_offset()
    a = np.asarray(args.dx, dtype=float)
    s = args.two_sigma
    w1 = args.delta_f / a
    P, b, u, v = SplittingPolynomials._reduced(a, s, w1, args.theta_x / s, args.theta_x1 / s)
    G = _split_G(P, b, u, v)
    K_f = _ratio(_split_F(P, b, u, v), G)
    e_f = _ratio(args.delta_f * (args.theta_x - args.theta_x1) * _split_E(P, b, u, v), G)
    return K_f, e_f


def eval_Kg_eg(args: KernelArgs):
    """Twin of eval_Kf_ef: Df -> Dg and theta(x) <-> theta(x1)."""
    args.require_offset()
    a = np.asarray(args.dx, dtype=float)
    s = args.two_sigma
    w1 = args.delta_g / a
    P, b, u, v = SplittingPolynomials._reduced(a, s, w1, args.theta_x1 / s, args.theta_x / s)
    G = _split_G(P, b, u, v)
    K_g = _ratio(_split_F(P, b, u, v), G)
    e_g = _ratio(-args.delta_g * (args.theta_x - args.theta_x1) * _split_E(P, b, u, v), G)
    return K_g, e_g


def eval_D0(dx, params) -> Tuple:
    """
    Unperturbed dissipation kernels.

    D0_11 = (mu1^2 + mu2^2)/dx^2 + 2 mu1 mu2 (dx^2 - s^2)/(dx^2 + s^2)^2
    D0_22 = 2 F0/G0
    """
    dx = np.asarray(dx, dtype=float)
    if np.any(dx == 0.0):
        raise KernelDomainError("D0 kernels are singular at dx = 0")
    s = 2.0 * params.sigma
    a2 = dx * dx
    mu1, mu2 = params.mu1, params.mu2
    d11 = (mu1 ** 2 + mu2 ** 2) / a2 + 2.0 * mu1 * mu2 * (a2 - s * s) / (a2 + s * s) ** 2
    d22 = 2.0 * SplittingPolynomials.F0(dx, s) / SplittingPolynomials.G0(dx, s)
    return d11, d22


def eval_antisym(args: KernelArgs):
    """P12 - P21 = -a (u + v)(Df + Dg) / ((a^2 + (Df + u)^2)(a^2 + (v - Df)^2))."""
    args.require_offset()
    a = np.asarray(args.dx, dtype=float)
    b, c = args.delta_f, args.delta_g
    s = args.two_sigma
    u = s + args.theta_x1
    v = s + args.theta_x
    d1 = a * a + (b + u) ** 2
    d2 = a * a + (v - b) ** 2
    return -a * (u + v) * (b + c) / (d1 * d2)


def eval_antisym_derivative(args: KernelArgs):
    """
    d/dx1 (P12 - P21) in closed form.

    The grouping follows the standard quotient-rule split: one term from
    differentiating the numerator, one from each denominator factor.
    """
    args.require_offset()
    a = np.asarray(args.dx, dtype=float)
    b, c = args.delta_f, args.delta_g
    s = args.two_sigma
    u = s + args.theta_x1
    v = s + args.theta_x
    fp, gp, tp = args.df_x1, args.dg_x1, args.dtheta_x1
    d1 = a * a + (b + u) ** 2
    d2 = a * a + (v - b) ** 2
    base = d1 * d2
    numerator_part = ((u + v) * (a * (fp + gp) + b + c) - a * (b + c) * tp) / base
    denominator_part = -a * (u + v) * (b + c) / base * (
        (2.0 * a + 2.0 * gp * (b + u)) / d1 + (2.0 * a + 2.0 * fp * (b - v)) / d2
    )
    return numerator_part + denominator_part


def symmetric_coefficients(args: KernelArgs, params):
    """
    (D11, D12, D22) of the symmetric quadratic form

        Q = D11/2 |A|^2 + mu1 mu2 D12 Re(A conj B) + mu1^2 mu2^2 D22/2 |B|^2

    obtained by writing the symmetric part of the energy in h, theta variables.
    """
    dec = eval_decomposition(args)
    mu1, mu2 = params.mu1, params.mu2
    d11 = (mu2 ** 2 * dec.K11
           + 0.5 * mu1 * mu2 * (dec.K12 + dec.K21 + dec.K12_tilde + dec.K21_tilde)
           + mu1 ** 2 * dec.K22)
    d12 = mu2 * dec.symmetric_f - mu1 * dec.symmetric_g
    d22 = dec.symmetric_f + dec.symmetric_g
    return d11, d12, d22


def quadratic_form(args: KernelArgs, params, a, b):
    d11, d12, d22 = symmetric_coefficients(args, params)
    mu12 = params.mu1 * params.mu2
    a = np.asarray(a)
    b = np.asarray(b)
    return (0.5 * d11 * np.abs(a) ** 2
            + mu12 * d12 * np.real(a * np.conj(b))
            + 0.5 * mu12 ** 2 * d22 * np.abs(b) ** 2)


def positivity_margin(args: KernelArgs, params, a, b, margin: float = 0.1):
    """Q - margin (D0_11 |A|^2 + mu1^2 mu2^2 D0_22 |B|^2); non-negative in the small-slope regime."""
    d011, d022 = eval_D0(args.dx, params)
    mu12 = params.mu1 * params.mu2
    floor = d011 * np.abs(a) ** 2 + mu12 ** 2 * d022 * np.abs(b) ** 2
    return quadratic_form(args, params, a, b) - margin * floor


def product_difference_bound(a, b):
    """
    Both sides of |prod a_j - prod b_j| <= prod m_j * sum |a_j - b_j|/m_j,
    m_j = max(|a_j|, |b_j|), over the last axis of complex arrays a, b.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    lhs = np.abs(np.prod(a, axis=-1) - np.prod(b, axis=-1))
    m = np.maximum(np.abs(a), np.abs(b))
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(m > 0.0, np.abs(a - b) / m, 0.0)
    rhs = np.prod(m, axis=-1) * np.sum(terms, axis=-1)
    return lhs, rhs
