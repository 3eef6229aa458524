"""
Geometry and State
Physical parameters, the computational grid, the (f, g) <-> (h, theta)
change of variables, initial-data construction and the interface gap.

The upper interface is y = sigma + f(x), the lower one y = -sigma + g(x).
Every type here is an immutable value; operations are pure functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np

from analytic_norms import SpectralField, hk_gamma_norm
from errors import InvalidInitialDataError, InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TOLERANCE = 1e-12
# Profiles must have decayed on |x| >= TAIL_FRACTION * L
TAIL_FRACTION = 0.75


@dataclass(frozen=True)
class PhysicalParams:
    """Densities rho0 < rho1 < rho2, the half-gap sigma and the derived constants."""
    rho0: float
    rho1: float
    rho2: float
    sigma: float
    delta_rho: float = field(init=False)
    mu1: float = field(init=False)
    mu2: float = field(init=False)

    def __post_init__(self):
        if not (self.rho0 < self.rho1 < self.rho2):
            raise InvalidParameterError(
                f"densities must satisfy rho0 < rho1 < rho2, got "
                f"({self.rho0}, {self.rho1}, {self.rho2})"
            )
        if not (0.0 < self.sigma < 1.0):
            raise InvalidParameterError(f"sigma must lie in (0, 1), got {self.sigma}")
        jump = self.rho2 - self.rho0
        object.__setattr__(self, "delta_rho", jump / (2.0 * math.pi))
        object.__setattr__(self, "mu1", (self.rho2 - self.rho1) / jump)
        object.__setattr__(self, "mu2", (self.rho1 - self.rho0) / jump)

    def to_dict(self) -> Dict:
        return asdict(self)


def make_params(rho0: float, rho1: float, rho2: float, sigma: float) -> PhysicalParams:
    """Build validated physical parameters (raises InvalidParameterError)."""
    return PhysicalParams(float(rho0), float(rho1), float(rho2), float(sigma))


@dataclass(frozen=True)
class Grid1D:
    """
    Uniform periodic grid on [-L, L) with n nodes (n a power of two).

    The alpha-quadrature grid sits half a step off the nodes,
    alpha_j = (j + 1/2) dx for j in [-n/2, n/2), so alpha = 0 is never sampled.
    """
    half_length: float
    n: int

    def __post_init__(self):
        if not self.half_length > 0.0:
            raise InvalidParameterError(f"half_length must be positive, got {self.half_length}")
        if self.n < 4 or self.n & (self.n - 1):
            raise InvalidParameterError(f"n must be a power of two >= 4, got {self.n}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def quad_offset(self) -> float:
        return 0.5 * self.dx

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n)

    @property
    def alpha_offsets(self) -> np.ndarray:
        return np.arange(-(self.n // 2), self.n // 2)

    @property
    def alpha_nodes(self) -> np.ndarray:
        return (self.alpha_offsets + 0.5) * self.dx

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def mode_wavenumber(self, m: int) -> float:
        return math.pi * m / self.half_length

    def spectral(self, values) -> SpectralField:
        return SpectralField.from_values(values, self.half_length)

    def to_dict(self) -> Dict:
        return {"half_length": self.half_length, "n": self.n}


def _as_samples(values) -> np.ndarray:
    return np.array(values, dtype=float, copy=True)


@dataclass(frozen=True)
class InterfaceState:
    """Sampled perturbations f, g of the two interfaces at time t with strip width gamma."""
    f: np.ndarray
    g: np.ndarray
    gamma: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "f", _as_samples(self.f))
        object.__setattr__(self, "g", _as_samples(self.g))
        if self.f.shape != self.g.shape or self.f.ndim != 1:
            raise InvalidInitialDataError(
                f"f and g must be 1-D samples of equal length, got {self.f.shape} and {self.g.shape}"
            )

    def validate(self, params: PhysicalParams, grid: Optional[Grid1D] = None,
                 tail_tolerance: Optional[float] = None) -> "InterfaceState":
        """
        Check the standing assumptions.

        Raises:
            InvalidInitialDataError: on touching interfaces, non-finite samples
                or (when a tolerance is given) data that has not decayed near +/-L
        """
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.g))):
            raise InvalidInitialDataError("interface samples contain NaN or Inf")
        if grid is not None and self.f.shape[0] != grid.n:
            raise InvalidInitialDataError(f"expected {grid.n} samples, got {self.f.shape[0]}")
        gap = min_distance(self, params)
        if gap <= 0.0:
            raise InvalidInitialDataError(f"interfaces touch: 2*sigma + min(f - g) = {gap:.3e}")
        if tail_tolerance is not None and grid is not None:
            tail = np.abs(grid.nodes) >= TAIL_FRACTION * grid.half_length
            worst = float(max(np.abs(self.f[tail]).max(), np.abs(self.g[tail]).max()))
            if worst > tail_tolerance:
                raise InvalidInitialDataError(
                    f"profile has not decayed near the boundary: {worst:.3e} > {tail_tolerance:.1e}"
                )
        return self

    def to_dict(self) -> Dict:
        return {"f": self.f.tolist(), "g": self.g.tolist(), "gamma": self.gamma, "t": self.t}


@dataclass(frozen=True)
class HThetaState:
    """h = mu2 f + mu1 g, theta = f - g, theta1 = theta / sigma."""
    h: np.ndarray
    theta: np.ndarray
    theta1: np.ndarray
    gamma: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h", _as_samples(self.h))
        object.__setattr__(self, "theta", _as_samples(self.theta))
        object.__setattr__(self, "theta1", _as_samples(self.theta1))

    @classmethod
    def from_fields(cls, h, theta, params: PhysicalParams, gamma: float,
                    t: float = 0.0) -> "HThetaState":
        theta = _as_samples(theta)
        return cls(h, theta, theta / params.sigma, gamma, t)

    def to_dict(self) -> Dict:
        return {
            "h": self.h.tolist(),
            "theta": self.theta.tolist(),
            "gamma": self.gamma,
            "t": self.t,
        }


def to_htheta(state: InterfaceState, params: PhysicalParams) -> HThetaState:
    theta = state.f - state.g
    return HThetaState(
        h=params.mu2 * state.f + params.mu1 * state.g,
        theta=theta,
        theta1=theta / params.sigma,
        gamma=state.gamma,
        t=state.t,
    )


def from_htheta(state: HThetaState, params: PhysicalParams) -> InterfaceState:
    return InterfaceState(
        f=state.h + params.mu1 * state.theta,
        g=state.h - params.mu2 * state.theta,
        gamma=state.gamma,
        t=state.t,
    )


def min_distance(state: Union[InterfaceState, HThetaState], params: PhysicalParams) -> float:
    """Vertical gap 2*sigma + min(f - g) between the two interfaces."""
    theta = state.theta if isinstance(state, HThetaState) else state.f - state.g
    return float(2.0 * params.sigma + np.min(theta))


class ProfileKind(Enum):
    """Initial profile families"""
    ZERO = "zero"
    GAUSSIAN = "gaussian"           # A exp(-((x - c)/w)^2)
    COSINE_BUMP = "cosine_bump"     # A (1 + cos(pi (x - c)/w))/2 on |x - c| < w
    MODE = "mode"                   # A cos(pi m x / L), linear checks only

    @classmethod
    def from_string(cls, value: str) -> "ProfileKind":
        for kind in cls:
            if kind.value == value:
                return kind
        raise InvalidParameterError(f"unknown profile kind: {value!r}")


@dataclass(frozen=True)
class ProfileSpec:
    kind: ProfileKind = ProfileKind.ZERO
    amplitude: float = 0.0
    width: float = 0.5
    center: float = 0.0
    mode: int = 0

    @classmethod
    def from_dict(cls, data: Dict) -> "ProfileSpec":
        return cls(
            kind=ProfileKind.from_string(data.get("kind", "zero")),
            amplitude=float(data.get("amplitude", 0.0)),
            width=float(data.get("width", 0.5)),
            center=float(data.get("center", 0.0)),
            mode=int(data.get("mode", 0)),
        )

    def sample(self, x: np.ndarray, half_length: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is ProfileKind.ZERO or self.amplitude == 0.0:
            return np.zeros_like(x)
        if self.kind is ProfileKind.GAUSSIAN:
            return self.amplitude * np.exp(-((x - self.center) / self.width) ** 2)
        if self.kind is ProfileKind.COSINE_BUMP:
            r = (x - self.center) / self.width
            return np.where(np.abs(r) < 1.0, 0.5 * self.amplitude * (1.0 + np.cos(np.pi * r)), 0.0)
        return self.amplitude * np.cos(math.pi * self.mode * x / half_length)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


@dataclass(frozen=True)
class InitialDataSpec:
    """
    Initial data for both interfaces.

    When ``theta1`` is given the gap is prescribed in rescaled form,
    g0 = f0 - sigma * theta1(x), and ``g`` is ignored.
    """
    f: ProfileSpec = field(default_factory=ProfileSpec)
    g: ProfileSpec = field(default_factory=ProfileSpec)
    gamma0: float = 0.1
    k: int = 3
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    theta1: Optional[ProfileSpec] = None

    def has_modes(self) -> bool:
        profiles = [self.f, self.g] + ([self.theta1] if self.theta1 else [])
        return any(p.kind is ProfileKind.MODE for p in profiles)


@dataclass(frozen=True)
class InitialProfile:
    """Constructed initial state plus the quantities entering the smallness conditions."""
    state: InterfaceState
    htheta: HThetaState
    energy_norm: float      # ||h0||^2_{H^k} + mu1 mu2 ||theta0||^2_{H^k}
    gap_ratio: float        # ||theta0||_{H^{k-3}} / sigma
    k: int

    def to_dict(self) -> Dict:
        return {"energy_norm": self.energy_norm, "gap_ratio": self.gap_ratio, "k": self.k,
                "gamma0": self.state.gamma}


@dataclass(frozen=True)
class SmallnessReport:
    energy_norm: float
    gap_ratio: float
    eps0: float
    eps1: float

    @property
    def energy_ok(self) -> bool:
        return self.energy_norm <= self.eps0 ** 2

    @property
    def gap_ok(self) -> bool:
        return self.gap_ratio <= self.eps1

    @property
    def passed(self) -> bool:
        return self.energy_ok and self.gap_ok

    def to_dict(self) -> Dict:
        data = asdict(self)
        data.update(energy_ok=self.energy_ok, gap_ok=self.gap_ok, passed=self.passed)
        return data


def init_profile(spec: InitialDataSpec, grid: Grid1D, params: PhysicalParams) -> InitialProfile:
    """
    Sample the initial interfaces and report the smallness quantities.

    Args:
        spec: Profile family, amplitudes, gamma0 and the norm order k
        grid: Computational grid
        params: Physical parameters (sigma enters the gap and theta1)

    Returns:
        InitialProfile with the InterfaceState and its reported norms

    Raises:
        InvalidInitialDataError: if the interfaces touch or a localized
            profile is still above the tail tolerance near +/-L
    """
    if spec.k < 3:
        raise InvalidParameterError(f"norm order k must be >= 3, got {spec.k}")
    x = grid.nodes
    f0 = spec.f.sample(x, grid.half_length)
    if spec.theta1 is not None:
        g0 = f0 - params.sigma * spec.theta1.sample(x, grid.half_length)
    else:
        g0 = spec.g.sample(x, grid.half_length)

    tolerance = None if spec.has_modes() else spec.tail_tolerance
    state = InterfaceState(f0, g0, spec.gamma0, 0.0).validate(params, grid, tolerance)
    htheta = to_htheta(state, params)

    h_field = grid.spectral(htheta.h)
    theta_field = grid.spectral(htheta.theta)
    energy = (hk_gamma_norm(h_field, spec.k, spec.gamma0)
              + params.mu1 * params.mu2 * hk_gamma_norm(theta_field, spec.k, spec.gamma0))
    gap = hk_gamma_norm(theta_field, spec.k - 3, spec.gamma0, squared=False) / params.sigma

    logger.debug("initial data: energy=%.3e gap_ratio=%.3e gap=%.3e",
                 energy, gap, min_distance(state, params))
    return InitialProfile(state=state, htheta=htheta, energy_norm=energy, gap_ratio=gap, k=spec.k)


def check_smallness(profile: InitialProfile, eps0: float, eps1: float) -> SmallnessReport:
    """Evaluate ||h0||^2 + mu1 mu2 ||theta0||^2 <= eps0^2 and ||theta0||_{H^{k-3}} <= sigma eps1."""
    return SmallnessReport(profile.energy_norm, profile.gap_ratio, float(eps0), float(eps1))
