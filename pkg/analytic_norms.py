"""
Analytic Strip Norms
Fourier-side machinery for functions that extend analytically to the strip
|Im x| < gamma: H^k_gamma and L^inf_gamma norms, Lambda^{1/2} seminorms,
the dissipation functional Diss_k, the monitored energy E(t) and an
empirical strip-width estimator.

Conventions used throughout:
    f_hat(xi) = integral f(x) e^{-i xi x} dx, realised as dx * fft(samples)
    ||f||^2_{L^2} = (1/2pi) integral |f_hat(xi)|^2 dxi
    strip norms add the two boundary lines x + i*gamma and x - i*gamma,
    which becomes the Fourier weight e^{2 gamma xi} + e^{-2 gamma xi}.

The computational interval [-L, L) is treated as periodic, so every norm
is the periodised analogue of its line integral.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import InvalidParameterError, ResolutionLossError

logger = logging.getLogger(__name__)

# cosh(2 gamma xi) overflows double precision a little above exp(709)
WEIGHT_EXPONENT_LIMIT = 700.0

# Coefficients below this normalised amplitude are treated as rounding noise
STRIP_NOISE_FLOOR = 1e-13

CSV_COLUMNS = (
    "t", "gamma", "E", "hk_h", "hk_theta", "hk_theta1", "linf_dxh",
    "linf_dxtheta", "diss_k", "min_distance", "strip_estimate",
    "lambda_half_h", "lambda_half_theta", "regime_w",
)
CSV_VERSION = "v1"


@dataclass(frozen=True)
class SpectralField:
    """
    Discrete Fourier coefficients of a real grid field on [-L, L).

    ``coeffs`` is the unnormalised ``numpy.fft.fft`` of the samples, so the
    line transform is ``dx * coeffs`` up to a unimodular phase that never
    enters a norm.
    """
    coeffs: np.ndarray
    half_length: float

    @classmethod
    def from_values(cls, values, half_length: float) -> "SpectralField":
        samples = np.asarray(values, dtype=float)
        return cls(np.fft.fft(samples), float(half_length))

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def dxi(self) -> float:
        return math.pi / self.half_length

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def mode_index(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    def line_transform(self) -> np.ndarray:
        return self.dx * self.coeffs

    def values(self) -> np.ndarray:
        return np.fft.ifft(self.coeffs).real

    def amplitudes(self) -> np.ndarray:
        """Normalised amplitudes |coeffs|/n (a unit cosine gives 1/2 per mode)."""
        return np.abs(self.coeffs) / self.n

    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with |m| < n/3."""
        return (np.abs(self.mode_index) < self.n / 3.0).astype(float)

    def _without_nyquist(self, coeffs: np.ndarray) -> np.ndarray:
        if self.n % 2 == 0:
            coeffs = coeffs.copy()
            coeffs[self.n // 2] = 0.0
        return coeffs

    def derivative(self, order: int = 1, dealias: bool = False) -> "SpectralField":
        coeffs = self.coeffs * (1j * self.wavenumbers) ** order
        if order % 2 == 1:
            coeffs = self._without_nyquist(coeffs)
        if dealias:
            coeffs = coeffs * self.dealias_mask()
        return SpectralField(coeffs, self.half_length)

    def shifted(self, offset: float) -> "SpectralField":
        """Trigonometric interpolant evaluated at x + offset on the same nodes."""
        coeffs = self._without_nyquist(self.coeffs * np.exp(1j * self.wavenumbers * offset))
        return SpectralField(coeffs, self.half_length)

    def filtered(self, noise_floor: float) -> "SpectralField":
        if noise_floor <= 0.0:
            return self
        magnitude = np.abs(self.coeffs)
        peak = magnitude.max() if magnitude.size else 0.0
        if peak == 0.0:
            return self
        keep = magnitude >= noise_floor * peak
        return SpectralField(np.where(keep, self.coeffs, 0.0), self.half_length)

    def boundary_traces(self, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
        """Samples of f(x + i*gamma) and f(x - i*gamma) on the grid nodes."""
        _check_weight(gamma, self)
        coeffs = self._without_nyquist(self.coeffs)
        xi = self.wavenumbers
        upper = np.fft.ifft(coeffs * np.exp(-gamma * xi))
        lower = np.fft.ifft(coeffs * np.exp(gamma * xi))
        return upper, lower


@dataclass(frozen=True)
class NormReport:
    """One monitoring row: every strip norm of a snapshot (squared where noted)."""
    t: float
    gamma: float
    energy: float
    hk_h: float            # ||h||^2_{H^k_gamma}
    hk_theta: float        # ||theta||^2_{H^k_gamma}
    hk_theta1: float       # ||theta/sigma||^2_{H^{k-3}_gamma}
    linf_dxh: float
    linf_dxtheta: float
    diss_k: float
    min_distance: float
    strip_estimate: Optional[float]
    lambda_half_h: float
    lambda_half_theta: float
    regime_w: float

    def to_dict(self) -> Dict:
        return asdict(self)

    def csv_row(self) -> List[float]:
        strip = float("nan") if self.strip_estimate is None else self.strip_estimate
        return [
            self.t, self.gamma, self.energy, self.hk_h, self.hk_theta,
            self.hk_theta1, self.linf_dxh, self.linf_dxtheta, self.diss_k,
            self.min_distance, strip, self.lambda_half_h,
            self.lambda_half_theta, self.regime_w,
        ]


def _check_weight(gamma: float, field: SpectralField) -> None:
    if gamma < 0.0:
        raise InvalidParameterError(f"strip width must be non-negative, got {gamma}")
    xi_max = float(np.abs(field.wavenumbers).max())
    exponent = 2.0 * gamma * xi_max
    if exponent > WEIGHT_EXPONENT_LIMIT:
        raise ResolutionLossError(
            f"cosh weight overflow: 2*gamma*|xi|max = {exponent:.1f} > {WEIGHT_EXPONENT_LIMIT}",
            {"gamma": gamma, "xi_max": xi_max, "exponent": exponent},
        )


def _strip_weight(xi: np.ndarray, gamma: float) -> np.ndarray:
    return 2.0 * np.cosh(2.0 * gamma * xi)


def hk_gamma_norm(field: SpectralField, k: int, gamma: float,
                  squared: bool = True, noise_floor: float = 0.0) -> float:
    """
    H^k norm over the two boundary lines of the strip.

    Args:
        field: Spectral coefficients of a real field
        k: Highest derivative order (k >= 0)
        gamma: Strip half-width (>= 0)
        squared: Return ||f||^2 (default) or ||f||
        noise_floor: Drop coefficients below this fraction of the peak first

    Returns:
        sum_{j<=k} (1/2pi) sum_m |xi|^{2j} |f_hat|^2 2cosh(2 gamma xi) dxi

    Raises:
        ResolutionLossError: if 2*gamma*|xi|max exceeds the overflow guard
    """
    if k < 0:
        raise InvalidParameterError(f"derivative order must be >= 0, got {k}")
    _check_weight(gamma, field)
    fld = field.filtered(noise_floor)
    xi = fld.wavenumbers
    power = np.abs(fld.line_transform()) ** 2
    sobolev = np.zeros_like(xi)
    for j in range(k + 1):
        sobolev += xi ** (2 * j)
    total = float(np.sum(sobolev * power * _strip_weight(xi, gamma)) * fld.dxi / (2.0 * np.pi))
    return total if squared else math.sqrt(total)


def linf_gamma_norm(field: SpectralField, gamma: float, noise_floor: float = 0.0) -> float:
    """Max of |f(x +/- i*gamma)| over the grid nodes of both boundary lines."""
    upper, lower = field.filtered(noise_floor).boundary_traces(gamma)
    if upper.size == 0:
        return 0.0
    return float(max(np.abs(upper).max(), np.abs(lower).max()))


def lambda_half_norm(field: SpectralField, gamma: float = 0.0, k: int = 0,
                     noise_floor: float = 0.0) -> float:
    """Squared ||Lambda^{1/2} d^k f||_{L^2_gamma}."""
    _check_weight(gamma, field)
    fld = field.filtered(noise_floor)
    xi = fld.wavenumbers
    power = np.abs(fld.line_transform()) ** 2
    weight = np.abs(xi) ** (2 * k + 1) * _strip_weight(xi, gamma)
    return float(np.sum(weight * power) * fld.dxi / (2.0 * np.pi))


def apply_lambda(field: SpectralField) -> SpectralField:
    """Lambda = |xi|, the square root of -d^2/dx^2."""
    return SpectralField(field.coeffs * np.abs(field.wavenumbers), field.half_length)


def dissipation_weight(xi, sigma: float):
    """
    |xi| - (1 - exp(-2 sigma |xi|)) / (2 sigma), written as |xi| * g(2 sigma |xi|)
    with g(u) = (u - 1 + e^{-u}) / u and a series branch for small u.
    """
    axi = np.abs(np.asarray(xi, dtype=float))
    u = 2.0 * sigma * axi
    with np.errstate(invalid="ignore", divide="ignore"):
        series = u * (0.5 - u * (1.0 / 6.0 - u * (1.0 / 24.0 - u / 120.0)))
        closed = (u + np.expm1(-u)) / u
    weight = axi * np.where(u < 1e-3, series, closed)
    return weight if weight.ndim else float(weight)


def diss_blocks(h: SpectralField, theta: SpectralField, k: int, gamma: float,
                params, noise_floor: float = 0.0) -> Tuple[float, float]:
    """
    The two squared blocks of Diss_k on the Fourier side.

    Returns:
        (h_block, theta_block) where h_block is the D^0_11 double integral of
        |Delta d^k h|^2 and theta_block is the (2 sigma)^2/(a^2 (a^2 + (2 sigma)^2))
        double integral of |Delta d^k theta|^2, both over the two strip lines.
    """
    _check_weight(gamma, h)
    h = h.filtered(noise_floor)
    theta = theta.filtered(noise_floor)
    xi = h.wavenumbers
    axi = np.abs(xi)
    mu1, mu2 = params.mu1, params.mu2
    two_sigma = 2.0 * params.sigma
    cosh = np.cosh(2.0 * gamma * xi)

    h_weight = 2.0 * np.pi * axi ** (2 * k + 1) * (
        (mu1 ** 2 + mu2 ** 2) + 2.0 * mu1 * mu2 * np.exp(-two_sigma * axi))
    h_block = np.sum(h_weight * np.abs(h.line_transform()) ** 2 * 2.0 * cosh)

    theta_weight = 4.0 * np.pi * axi ** (2 * k) * dissipation_weight(xi, params.sigma)
    theta_block = np.sum(theta_weight * np.abs(theta.line_transform()) ** 2 * cosh)

    scale = h.dxi / (2.0 * np.pi)
    return float(h_block * scale), float(theta_block * scale)


def diss_k(h: SpectralField, theta: SpectralField, k: int, gamma: float,
           params, noise_floor: float = 0.0) -> float:
    """Diss_k = (h_block + mu1^2 mu2^2 theta_block)^{1/2}."""
    h_block, theta_block = diss_blocks(h, theta, k, gamma, params, noise_floor)
    return math.sqrt(h_block + (params.mu1 * params.mu2) ** 2 * theta_block)


def periodic_inverse_square(alpha, half_length: float):
    """sum_p 1/(alpha + 2Lp)^2."""
    c = np.pi / (2.0 * half_length)
    return c ** 2 / np.sin(c * np.asarray(alpha, dtype=float)) ** 2


def periodic_shifted_inverse_square(alpha, a: float, half_length: float):
    """sum_p ((alpha + 2Lp)^2 - a^2) / ((alpha + 2Lp)^2 + a^2)^2."""
    c = np.pi / (2.0 * half_length)
    z = c * (np.asarray(alpha, dtype=float) + 1j * a)
    return (c ** 2 / np.sin(z) ** 2).real


def periodic_lorentzian(alpha, a: float, half_length: float):
    """sum_p 1 / ((alpha + 2Lp)^2 + a^2)."""
    c = np.pi / (2.0 * half_length)
    z = c * (np.asarray(alpha, dtype=float) - 1j * a)
    return (c * np.cos(z) / np.sin(z)).imag / a


def diss_blocks_real_space(h_values, theta_values, k: int, params,
                           half_length: float) -> Tuple[float, float]:
    """
    O(n^2) real-space evaluation of the Diss_k blocks at gamma = 0.

    Independent of the Fourier weights: it integrates the kernels themselves
    (periodised over [-L, L)) against |v(x) - v(x - a)|^2 on the half-offset
    alpha grid, with v(x - a) read from the half-shifted interpolant.
    """
    h_field = SpectralField.from_values(h_values, half_length)
    theta_field = SpectralField.from_values(theta_values, half_length)
    if k > 0:
        h_field = h_field.derivative(k)
        theta_field = theta_field.derivative(k)

    n = h_field.n
    dx = h_field.dx
    offsets = np.arange(-n // 2, n // 2)
    alpha = (offsets + 0.5) * dx
    rows = np.arange(n)[:, None]
    lookup = (rows - offsets[None, :] - 1) % n

    two_sigma = 2.0 * params.sigma
    mu1, mu2 = params.mu1, params.mu2
    kernel_h = ((mu1 ** 2 + mu2 ** 2) * periodic_inverse_square(alpha, half_length)
                + 2.0 * mu1 * mu2 * periodic_shifted_inverse_square(alpha, two_sigma, half_length))
    kernel_theta = (periodic_inverse_square(alpha, half_length)
                    - periodic_lorentzian(alpha, two_sigma, half_length))

    blocks = []
    for field, kernel in ((h_field, kernel_h), (theta_field, kernel_theta)):
        v = field.values()
        v_half = field.shifted(0.5 * dx).values()
        jump = (v[:, None] - v_half[lookup]) ** 2
        # two boundary lines coincide at gamma = 0
        blocks.append(float(2.0 * dx * dx * np.sum(kernel[None, :] * jump)))
    return blocks[0], blocks[1]


def spectral_tail_ratio(field: SpectralField, floor: float = STRIP_NOISE_FLOOR) -> float:
    """
    Peak amplitude in the top third of the spectrum relative to the overall peak.

    A field whose normalised peak is at or below ``floor`` is rounding noise
    and has no tail.
    """
    amplitude = field.amplitudes()
    peak = amplitude.max() if amplitude.size else 0.0
    if peak <= floor:
        return 0.0
    tail = np.abs(field.mode_index) >= field.n / 3.0
    return float(amplitude[tail].max() / peak) if tail.any() else 0.0


def strip_width_estimate(field: SpectralField, floor: float = STRIP_NOISE_FLOOR) -> Optional[float]:
    """
    Empirical analyticity radius: minus the least-squares slope of log|f_hat|
    against xi over positive modes above ``floor``.

    Returns None when fewer than three modes carry signal (no decay band).
    """
    amplitude = field.amplitudes()
    xi = field.wavenumbers
    band = (xi > 0.0) & (amplitude > floor)
    if np.count_nonzero(band) < 3:
        return None
    slope, _ = np.polyfit(xi[band], np.log(amplitude[band]), 1)
    return float(-slope)


def energy_E(state, k: int, params, half_length: float, noise_floor: float = 0.0) -> float:
    """
    E = ||h||^2_{H^k_gamma} + mu1 mu2 ||theta||^2_{H^k_gamma} + ||theta1||^2_{H^{k-3}_gamma}.

    ``state`` is an HThetaState (anything with h, theta, theta1, gamma).
    """
    if k < 3:
        raise InvalidParameterError(f"energy needs k >= 3, got {k}")
    gamma = state.gamma
    h = SpectralField.from_values(state.h, half_length)
    theta = SpectralField.from_values(state.theta, half_length)
    theta1 = SpectralField.from_values(state.theta1, half_length)
    return (hk_gamma_norm(h, k, gamma, noise_floor=noise_floor)
            + params.mu1 * params.mu2 * hk_gamma_norm(theta, k, gamma, noise_floor=noise_floor)
            + hk_gamma_norm(theta1, k - 3, gamma, noise_floor=noise_floor))


def regime_indicator(state, params, half_length: float, noise_floor: float = 0.0) -> float:
    """||df||_{L^inf_gamma} + ||dg||_{L^inf_gamma} + ||theta||_{L^inf_gamma}/sigma."""
    h = np.asarray(state.h, dtype=float)
    theta = np.asarray(state.theta, dtype=float)
    f = h + params.mu1 * theta
    g = h - params.mu2 * theta
    gamma = state.gamma
    df = SpectralField.from_values(f, half_length).derivative()
    dg = SpectralField.from_values(g, half_length).derivative()
    theta_field = SpectralField.from_values(theta, half_length)
    return (linf_gamma_norm(df, gamma, noise_floor)
            + linf_gamma_norm(dg, gamma, noise_floor)
            + linf_gamma_norm(theta_field, gamma, noise_floor) / params.sigma)


def norm_report(state, params, k: int, half_length: float,
                noise_floor: float = STRIP_NOISE_FLOOR) -> NormReport:
    """Evaluate every monitored quantity of one (h, theta) snapshot."""
    gamma = state.gamma
    h = SpectralField.from_values(state.h, half_length)
    theta = SpectralField.from_values(state.theta, half_length)
    theta1 = SpectralField.from_values(state.theta1, half_length)

    hk_h = hk_gamma_norm(h, k, gamma, noise_floor=noise_floor)
    hk_theta = hk_gamma_norm(theta, k, gamma, noise_floor=noise_floor)
    hk_theta1 = hk_gamma_norm(theta1, max(k - 3, 0), gamma, noise_floor=noise_floor)
    energy = hk_h + params.mu1 * params.mu2 * hk_theta + hk_theta1

    strip = strip_width_estimate(h)
    if strip is None:
        strip = strip_width_estimate(theta)

    return NormReport(
        t=float(state.t),
        gamma=float(gamma),
        energy=energy,
        hk_h=hk_h,
        hk_theta=hk_theta,
        hk_theta1=hk_theta1,
        linf_dxh=linf_gamma_norm(h.derivative(), gamma, noise_floor),
        linf_dxtheta=linf_gamma_norm(theta.derivative(), gamma, noise_floor),
        diss_k=diss_k(h, theta, k, gamma, params, noise_floor),
        min_distance=float(2.0 * params.sigma + np.min(state.theta)),
        strip_estimate=strip,
        lambda_half_h=lambda_half_norm(h, gamma, k, noise_floor),
        lambda_half_theta=lambda_half_norm(theta, gamma, k, noise_floor),
        regime_w=regime_indicator(state, params, half_length, noise_floor),
    )
