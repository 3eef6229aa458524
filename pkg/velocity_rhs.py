"""
Velocity and Right-Hand Sides
Principal-value quadrature of the interface velocities u+, u- and of the
(f, g), (h, theta) and two-phase evolution right-hand sides, plus the
linearized Fourier symbol used as the small-amplitude oracle.

Quadrature: midpoint rule on the half-offset grid alpha_j = (j + 1/2) dx,
|alpha| < L, with the values at x - alpha read from the half-node
trigonometric interpolant. Terms at +alpha and -alpha are accumulated as
a pair, so odd integrands cancel exactly for flat data.

The inner loops are numba kernels over an index range [start, stop).
They release the GIL, so chunks of the x-loop run in a thread pool.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numba import njit
from scipy.integrate import quad
from scipy.special import sici

from errors import CollisionError, KernelDomainError
from geometry_state import (
    Grid1D,
    HThetaState,
    InterfaceState,
    PhysicalParams,
)

logger = logging.getLogger(__name__)

# Kernel slots in the moment array
K11, K12, K21, K22 = 0, 1, 2, 3


@dataclass(frozen=True)
class VelocityField:
    u_plus: np.ndarray
    u_minus: np.ndarray


@dataclass(frozen=True)
class RhsPair:
    """Time derivatives of (f, g) or (h, theta), depending on ``variables``."""
    first: np.ndarray
    second: np.ndarray
    variables: str = "fg"


@dataclass(frozen=True)
class LinearSymbol:
    """Generator M(xi) of the linearized (f, g) system, eigenpairs sorted ascending."""
    xi: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@njit(cache=True, nogil=True)
def _pv_moments(f, g, f_half, g_half, weights_half, two_sigma, dx, start, stop, out):
    # out[kernel, 0, i] = sum P_k dx; out[kernel, w + 1, i] = sum P_k W_w(x - alpha) dx
    n = f.shape[0]
    m = weights_half.shape[0]
    half = n // 2
    pm = np.empty(4)
    pp = np.empty(4)
    for i in range(start, stop):
        fi = f[i]
        gi = g[i]
        for k in range(4):
            for w in range(m + 1):
                out[k, w, i] = 0.0
        for j in range(half):
            alpha = (j + 0.5) * dx
            a2 = alpha * alpha
            im = (i - j - 1) % n
            ip = (i + j) % n
            fm = f_half[im]
            gm = g_half[im]
            fp = f_half[ip]
            gp = g_half[ip]

            d = fi - fm
            pm[0] = alpha / (a2 + d * d)
            d = fi - fp
            pp[0] = -alpha / (a2 + d * d)
            d = two_sigma + fi - gm
            pm[1] = alpha / (a2 + d * d)
            d = two_sigma + fi - gp
            pp[1] = -alpha / (a2 + d * d)
            d = two_sigma + fm - gi
            pm[2] = alpha / (a2 + d * d)
            d = two_sigma + fp - gi
            pp[2] = -alpha / (a2 + d * d)
            d = gi - gm
            pm[3] = alpha / (a2 + d * d)
            d = gi - gp
            pp[3] = -alpha / (a2 + d * d)

            for k in range(4):
                out[k, 0, i] += pm[k] + pp[k]
                for w in range(m):
                    out[k, w + 1, i] += pm[k] * weights_half[w, im] + pp[k] * weights_half[w, ip]
        for k in range(4):
            for w in range(m + 1):
                out[k, w, i] *= dx


@njit(cache=True, nogil=True)
def _pv_twophase(f, f_half, w, w_half, dx, start, stop, out):
    # out[i] = sum alpha (w(x) - w(x - alpha)) / (alpha^2 + (f(x) - f(x - alpha))^2) dx
    n = f.shape[0]
    half = n // 2
    for i in range(start, stop):
        fi = f[i]
        wi = w[i]
        total = 0.0
        for j in range(half):
            alpha = (j + 0.5) * dx
            a2 = alpha * alpha
            im = (i - j - 1) % n
            ip = (i + j) % n
            d = fi - f_half[im]
            total += alpha * (wi - w_half[im]) / (a2 + d * d)
            d = fi - f_half[ip]
            total -= alpha * (wi - w_half[ip]) / (a2 + d * d)
        out[i] = total * dx


def _run_chunked(kernel, n: int, workers: int, *args) -> None:
    """Call kernel(*args, start, stop, out) over the x-range, chunked across threads."""
    *inputs, out = args
    if workers <= 1 or n < 2 * workers:
        kernel(*inputs, 0, n, out)
        return
    bounds = np.linspace(0, n, workers + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_chunk = {
            executor.submit(kernel, *inputs, int(lo), int(hi), out): (int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        }
        for future in as_completed(future_to_chunk):
            future.result()


def half_node_values(values, grid: Grid1D) -> np.ndarray:
    """Trigonometric interpolant of the samples evaluated at x_i + dx/2."""
    return grid.spectral(values).shifted(grid.quad_offset).values()


def spectral_derivative(values, grid: Grid1D, dealias: bool = True) -> np.ndarray:
    return grid.spectral(values).derivative(dealias=dealias).values()


def pv_moments(f, g, weights, params: PhysicalParams, grid: Grid1D,
               workers: int = 1) -> np.ndarray:
    """
    Principal-value moments of the four kernels.

    Args:
        f, g: Interface samples on the grid
        weights: (m, n) fields W_w whose values at x - alpha multiply the kernels
        params: Physical parameters (sigma)
        grid: Computational grid
        workers: Threads for the x-loop

    Returns:
        Array (4, m + 1, n): slot 0 holds PV int P_k, slot w + 1 holds PV int P_k W_w(x - alpha)
    """
    f = np.ascontiguousarray(f, dtype=float)
    g = np.ascontiguousarray(g, dtype=float)
    weights = np.asarray(weights, dtype=float).reshape(-1, grid.n)
    weights_half = np.zeros_like(weights)
    for row, values in enumerate(weights):
        weights_half[row] = half_node_values(values, grid)
    out = np.zeros((4, weights.shape[0] + 1, grid.n))
    _run_chunked(_pv_moments, grid.n, workers,
                 f, g, half_node_values(f, grid), half_node_values(g, grid),
                 weights_half, 2.0 * params.sigma, grid.dx, out)
    return out


def _check_gap(f, g, params: PhysicalParams) -> None:
    gap = float(2.0 * params.sigma + np.min(f - g))
    if gap <= 0.0:
        raise CollisionError(f"interfaces touch: gap {gap:.3e}", gap=gap)


def _velocity_from_moments(moments: np.ndarray, params: PhysicalParams) -> VelocityField:
    c = params.delta_rho
    u_plus = -c * (params.mu2 * moments[K11, 0] + params.mu1 * moments[K12, 0])
    u_minus = -c * (params.mu2 * moments[K21, 0] + params.mu1 * moments[K22, 0])
    return VelocityField(u_plus, u_minus)


def compute_velocity(state: InterfaceState, params: PhysicalParams, grid: Grid1D,
                     workers: int = 1) -> VelocityField:
    """u+ = -mu2 drho PV int P11 - mu1 drho PV int P12, and the u- twin with P21, P22."""
    _check_gap(state.f, state.g, params)
    moments = pv_moments(state.f, state.g, [], params, grid, workers)
    return _velocity_from_moments(moments, params)


def rhs_fg(state: InterfaceState, params: PhysicalParams, grid: Grid1D,
           workers: int = 1, dealias: bool = True) -> RhsPair:
    """
    Nonlinear right-hand sides of the (f, g) system, transport moved right:

        df/dt = -u+ f_x - drho (mu2 PV int P11 f_x(x - a) + mu1 PV int P12 g_x(x - a))
        dg/dt = -u- g_x - drho (mu2 PV int P21 f_x(x - a) + mu1 PV int P22 g_x(x - a))
    """
    _check_gap(state.f, state.g, params)
    f_x = spectral_derivative(state.f, grid, dealias)
    g_x = spectral_derivative(state.g, grid, dealias)
    moments = pv_moments(state.f, state.g, [f_x, g_x], params, grid, workers)
    velocity = _velocity_from_moments(moments, params)
    c = params.delta_rho
    mu1, mu2 = params.mu1, params.mu2
    df = -velocity.u_plus * f_x - c * (mu2 * moments[K11, 1] + mu1 * moments[K12, 2])
    dg = -velocity.u_minus * g_x - c * (mu2 * moments[K21, 1] + mu1 * moments[K22, 2])
    return RhsPair(df, dg, "fg")


def rhs_htheta(state: HThetaState, params: PhysicalParams, grid: Grid1D,
               workers: int = 1, dealias: bool = True) -> RhsPair:
    """
    Right-hand sides of the (h, theta) system in its kernel-combination form.

    The kernels are evaluated on f = h + mu1 theta, g = h - mu2 theta and
    integrated against h_x and theta_x at x - alpha.
    """
    mu1, mu2 = params.mu1, params.mu2
    f = state.h + mu1 * state.theta
    g = state.h - mu2 * state.theta
    _check_gap(f, g, params)
    h_x = spectral_derivative(state.h, grid, dealias)
    t_x = spectral_derivative(state.theta, grid, dealias)
    moments = pv_moments(f, g, [h_x, t_x], params, grid, workers)
    velocity = _velocity_from_moments(moments, params)
    u_p, u_m = velocity.u_plus, velocity.u_minus
    c = params.delta_rho
    mu12 = mu1 * mu2

    m11h, m12h, m21h, m22h = (moments[k, 1] for k in (K11, K12, K21, K22))
    m11t, m12t, m21t, m22t = (moments[k, 2] for k in (K11, K12, K21, K22))

    dh = (-(mu2 * u_p + mu1 * u_m) * h_x - mu12 * (u_p - u_m) * t_x
          - c * (mu2 ** 2 * m11h + mu12 * m12h + mu12 * m21h + mu1 ** 2 * m22h)
          - mu12 * c * (mu2 * (m11t - m12t) - mu1 * (m22t - m21t)))
    dtheta = (-(u_p - u_m) * h_x - (mu1 * u_p + mu2 * u_m) * t_x
              - c * (mu2 * (m11h - m21h) - mu1 * (m22h - m12h))
              - mu12 * c * (m11t + m22t - m12t - m21t))
    return RhsPair(dh, dtheta, "htheta")


def rhs_twophase(f, delta_rho_total: float, grid: Grid1D, workers: int = 1,
                 dealias: bool = True) -> np.ndarray:
    """df/dt = (drho_total / 2pi) PV int alpha (f_x(x) - f_x(x - alpha)) / (alpha^2 + Df^2) dalpha."""
    f = np.ascontiguousarray(f, dtype=float)
    f_x = np.ascontiguousarray(spectral_derivative(f, grid, dealias))
    out = np.zeros(grid.n)
    _run_chunked(_pv_twophase, grid.n, workers,
                 f, half_node_values(f, grid), f_x, half_node_values(f_x, grid), grid.dx, out)
    return delta_rho_total / (2.0 * math.pi) * out


def symbol_kernel(xi: float, a: float, half_length: Optional[float] = None,
                  grid: Optional[Grid1D] = None) -> float:
    """
    S_a(xi) = PV int alpha sin(xi alpha) / (alpha^2 + a^2) dalpha in one of three forms:
    the whole line (default), truncated at |alpha| < L, or the midpoint sum of the grid.
    """
    if grid is not None:
        alpha = (np.arange(grid.n // 2) + 0.5) * grid.dx
        return float(2.0 * grid.dx * np.sum(alpha * np.sin(xi * alpha) / (alpha ** 2 + a ** 2)))
    sign = math.copysign(1.0, xi)
    k = abs(xi)
    if half_length is None:
        return sign * math.pi * math.exp(-a * k)
    if a == 0.0:
        return sign * 2.0 * float(sici(k * half_length)[0])
    value, _ = quad(lambda alpha: alpha / (alpha ** 2 + a ** 2), 0.0, half_length,
                    weight="sin", wvar=k, limit=200)
    return sign * 2.0 * value


def linearized_symbol(xi: float, params: PhysicalParams, half_length: Optional[float] = None,
                      grid: Optional[Grid1D] = None) -> LinearSymbol:
    """
    Fourier generator of the (f, g) system linearized at f = g = 0:

        M(xi) = -drho xi [[mu2 S_0, mu1 S_2sigma], [mu2 S_2sigma, mu1 S_0]]

    On the whole line S_a = pi sign(xi) e^{-a|xi|}, so at sigma = 0 the
    eigenvalues are {-(rho2 - rho0)|xi|/2, 0}.

    Raises:
        KernelDomainError: for xi = 0
    """
    if xi == 0.0:
        raise KernelDomainError("linearized symbol undefined at xi = 0")
    s0 = symbol_kernel(xi, 0.0, half_length, grid)
    ss = symbol_kernel(xi, 2.0 * params.sigma, half_length, grid)
    mu1, mu2 = params.mu1, params.mu2
    matrix = -params.delta_rho * xi * np.array([[mu2 * s0, mu1 * ss], [mu2 * ss, mu1 * s0]])
    values, vectors = np.linalg.eig(matrix)
    order = np.argsort(values.real)
    return LinearSymbol(
        xi=float(xi),
        matrix=matrix,
        eigenvalues=values.real[order],
        eigenvectors=vectors.real[:, order],
    )


def twophase_rate(xi: float, delta_rho_total: float, half_length: Optional[float] = None,
                  grid: Optional[Grid1D] = None) -> float:
    """Linear decay rate of the two-phase equation: -(drho_total/2pi) xi S_0(xi)."""
    return -delta_rho_total / (2.0 * math.pi) * xi * symbol_kernel(xi, 0.0, half_length, grid)


def linear_velocity_response(k: float, params: PhysicalParams, grid: Grid1D) -> Tuple[float, float]:
    """
    First-order velocity response of the discrete scheme to a single mode.

    With T = sum_j dx 2 s alpha_j sin(k alpha_j)/(alpha_j^2 + s^2)^2, s = 2 sigma:
    g = eps cos(kx), f = 0 gives u+ ~ -mu1 drho T eps sin(kx);
    f = eps cos(kx), g = 0 gives u- ~ +mu2 drho T eps sin(kx).

    Returns:
        (coefficient of eps sin(kx) in u+ per g-mode, the same in u- per f-mode)
    """
    s = 2.0 * params.sigma
    alpha = grid.alpha_nodes
    total = float(np.sum(grid.dx * 2.0 * s * alpha * np.sin(k * alpha) / (alpha ** 2 + s ** 2) ** 2))
    return -params.mu1 * params.delta_rho * total, params.mu2 * params.delta_rho * total
