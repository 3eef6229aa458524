"""
Time Evolution
Explicit time integration of the (h, theta) system together with the
strip-width ODE, stop conditions, norm monitoring and snapshot I/O.

The integrated vector is [h, theta, gamma]; every Runge-Kutta stage
re-evaluates the L^inf_gamma forcing of the width equation at the stage
state, so gamma moves with the same stages as the interfaces.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from analytic_norms import (
    STRIP_NOISE_FLOOR,
    NormReport,
    hk_gamma_norm,
    energy_E,
    linf_gamma_norm,
    norm_report,
    spectral_tail_ratio,
)
from errors import (
    CollisionError,
    InvalidParameterError,
    MuskatError,
    NonFiniteStateError,
    ResolutionLossError,
    WidthCollapseError,
)
from geometry_state import (
    Grid1D,
    HThetaState,
    InterfaceState,
    PhysicalParams,
    min_distance,
    to_htheta,
)
from velocity_rhs import rhs_htheta

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT_VERSION = 1


class TerminationReason(Enum):
    """Why a trajectory stopped"""
    HORIZON = "horizon"
    RESOLUTION_LOSS = "resolution_loss"
    COLLISION = "collision"
    WIDTH_COLLAPSE = "width_collapse"
    NAN = "nan"

    @classmethod
    def from_error(cls, error: Exception) -> "TerminationReason":
        if isinstance(error, CollisionError):
            return cls.COLLISION
        if isinstance(error, ResolutionLossError):
            return cls.RESOLUTION_LOSS
        if isinstance(error, WidthCollapseError):
            return cls.WIDTH_COLLAPSE
        return cls.NAN


class Integrator(Enum):
    RK4 = "rk4"
    EULER = "euler"

    @classmethod
    def from_string(cls, value: str) -> "Integrator":
        for item in cls:
            if item.value == value.lower():
                return item
        raise InvalidParameterError(f"unknown integrator: {value!r}")


def rk4_step(state, t, dt, rhs):
    """Take one step using 4th order Runge-Kutta."""
    k1 = rhs(t, state)
    k2 = rhs(t + dt / 2, state + dt / 2 * k1)
    k3 = rhs(t + dt / 2, state + dt / 2 * k2)
    k4 = rhs(t + dt, state + dt * k3)
    return state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def euler_step(state, t, dt, rhs):
    """Take one step using forward Euler."""
    return state + dt * rhs(t, state)


STEPPERS = {Integrator.RK4: rk4_step, Integrator.EULER: euler_step}


@dataclass(frozen=True)
class StepperConfig:
    """
    Time-stepping and stop-condition settings.

    dt is either fixed or cfl * dx / delta_rho; in both cases it is shrunk
    slightly so that an integer number of steps lands exactly on the horizon.
    """
    horizon: float = 0.5
    dt: Optional[float] = None
    cfl: float = 0.2
    integrator: Integrator = Integrator.RK4
    c2: float = 1.0
    gamma0: float = 0.1
    k: int = 3
    report_every: int = 10
    tail_threshold: float = 1e-6
    collision_factor: float = 0.5
    gamma_floor: float = 1e-3
    noise_floor: float = STRIP_NOISE_FLOOR
    workers: int = 1

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0.0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if not self.cfl > 0.0:
            raise InvalidParameterError(f"cfl must be positive, got {self.cfl}")
        if not self.c2 > 0.0:
            raise InvalidParameterError(f"C2 must be positive, got {self.c2}")
        if not self.gamma0 > 0.0:
            raise InvalidParameterError(f"gamma0 must be positive, got {self.gamma0}")
        if self.horizon < 0.0:
            raise InvalidParameterError(f"horizon must be non-negative, got {self.horizon}")
        if self.report_every < 1:
            raise InvalidParameterError("report_every must be >= 1")

    def time_step(self, params: PhysicalParams, grid: Grid1D):
        """Return (dt, n_steps) with n_steps * dt == horizon."""
        base = self.dt if self.dt is not None else self.cfl * grid.dx / params.delta_rho
        if self.horizon == 0.0:
            return base, 0
        n_steps = max(1, math.ceil(self.horizon / base - 1e-12))
        return self.horizon / n_steps, n_steps

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["integrator"] = self.integrator.value
        return data


@dataclass
class Trajectory:
    """Snapshots with their norm reports, and how the run ended."""
    snapshots: List[HThetaState] = field(default_factory=list)
    reports: List[NormReport] = field(default_factory=list)
    termination: TerminationReason = TerminationReason.HORIZON
    lifespan: float = 0.0
    message: str = ""
    steps: int = 0
    dt: float = 0.0

    @property
    def final(self) -> HThetaState:
        return self.snapshots[-1]

    def to_dict(self) -> Dict:
        final = self.reports[-1].to_dict() if self.reports else {}
        return {
            "termination": self.termination.value,
            "lifespan": self.lifespan,
            "message": self.message,
            "steps": self.steps,
            "dt": self.dt,
            "final_norms": final,
        }


def width_rhs(gamma: float, forcing: float, c2: float) -> float:
    """gamma' = -C2 forcing / (2 tanh(2 gamma))."""
    if gamma <= 0.0:
        raise WidthCollapseError(f"strip width collapsed: gamma = {gamma:.3e}")
    return -c2 * forcing / (2.0 * math.tanh(2.0 * gamma))


def width_closed_form(gamma0: float, forcing: float, c2: float, t: float) -> float:
    """Exact width for constant forcing: cosh(2 gamma(t)) = cosh(2 gamma0) exp(-C2 forcing t)."""
    value = math.cosh(2.0 * gamma0) * math.exp(-c2 * forcing * t)
    if value <= 1.0:
        raise WidthCollapseError(f"strip width reaches zero before t = {t}")
    return 0.5 * math.acosh(value)


def width_forcing(state: HThetaState, grid: Grid1D,
                  noise_floor: float = STRIP_NOISE_FLOOR) -> float:
    """||h_x||_{L^inf_gamma} + ||theta_x||_{L^inf_gamma}."""
    dh = grid.spectral(state.h).derivative()
    dtheta = grid.spectral(state.theta).derivative()
    return (linf_gamma_norm(dh, state.gamma, noise_floor)
            + linf_gamma_norm(dtheta, state.gamma, noise_floor))


def gamma_rhs(state: HThetaState, params: PhysicalParams, grid: Grid1D, c2: float = 1.0,
              noise_floor: float = STRIP_NOISE_FLOOR) -> float:
    """Right-hand side of the strip-width equation at the given state."""
    if state.gamma <= 0.0:
        raise WidthCollapseError(f"strip width collapsed: gamma = {state.gamma:.3e}")
    return width_rhs(state.gamma, width_forcing(state, grid, noise_floor), c2)


def pack(state: HThetaState) -> np.ndarray:
    return np.concatenate([state.h, state.theta, [state.gamma]])


def unpack(y: np.ndarray, params: PhysicalParams, t: float) -> HThetaState:
    n = (y.shape[0] - 1) // 2
    return HThetaState.from_fields(y[:n], y[n:2 * n], params, float(y[2 * n]), t)


def system_rhs(params: PhysicalParams, grid: Grid1D, cfg: StepperConfig) -> Callable:
    """rhs(t, y) for the packed [h, theta, gamma] vector."""
    def rhs(t, y):
        state = unpack(y, params, t)
        pair = rhs_htheta(state, params, grid, workers=cfg.workers)
        dgamma = gamma_rhs(state, params, grid, cfg.c2, cfg.noise_floor)
        return np.concatenate([pair.first, pair.second, [dgamma]])
    return rhs


def check_integrity(state: HThetaState, params: PhysicalParams, cfg: StepperConfig) -> None:
    """Raise on non-finite values or on interfaces closer than the collision threshold."""
    if not (np.all(np.isfinite(state.h)) and np.all(np.isfinite(state.theta))
            and math.isfinite(state.gamma)):
        raise NonFiniteStateError(f"non-finite state at t = {state.t:.4g}")
    gap = min_distance(state, params)
    if gap < cfg.collision_factor * params.sigma:
        raise CollisionError(
            f"gap {gap:.3e} below {cfg.collision_factor} * sigma at t = {state.t:.4g}", gap=gap)


def check_state(state: HThetaState, params: PhysicalParams, grid: Grid1D,
                cfg: StepperConfig) -> None:
    """Raise the stop-condition error tripped by ``state``, if any."""
    check_integrity(state, params, cfg)
    if state.gamma <= cfg.gamma_floor:
        raise WidthCollapseError(f"gamma {state.gamma:.3e} reached floor {cfg.gamma_floor}")
    for name, values in (("h", state.h), ("theta", state.theta)):
        ratio = spectral_tail_ratio(grid.spectral(values), cfg.noise_floor)
        if ratio > cfg.tail_threshold:
            raise ResolutionLossError(
                f"spectral tail of {name} at {ratio:.2e} > {cfg.tail_threshold:.0e}",
                {"field": name, "tail_ratio": ratio, "t": state.t},
            )


def step(state: HThetaState, cfg: StepperConfig, params: PhysicalParams, grid: Grid1D,
         dt: Optional[float] = None) -> HThetaState:
    """
    Advance (h, theta, gamma) by one step of the configured integrator.

    The result is checked for finiteness and collision only; width collapse
    and resolution loss are left to ``run``.

    Raises:
        NonFiniteStateError: the step produced NaN or infinite values
        CollisionError: the interfaces came closer than ``cfg.collision_factor * sigma``
    """
    dt = dt if dt is not None else cfg.time_step(params, grid)[0]
    stepper = STEPPERS[cfg.integrator]
    y = stepper(pack(state), state.t, dt, system_rhs(params, grid, cfg))
    advanced = unpack(y, params, state.t + dt)
    check_integrity(advanced, params, cfg)
    return advanced


def run(initial: Union[HThetaState, InterfaceState], cfg: StepperConfig,
        params: PhysicalParams, grid: Grid1D,
        on_report: Optional[Callable[[NormReport], None]] = None) -> Trajectory:
    """
    Integrate until the horizon or the first stop condition.

    Args:
        initial: Starting state in either variable set
        cfg: Stepper settings and thresholds
        params: Physical parameters
        grid: Computational grid
        on_report: Called with every NormReport as it is produced

    Returns:
        Trajectory; stop conditions become termination reasons, never exceptions
    """
    state = initial if isinstance(initial, HThetaState) else to_htheta(initial, params)
    dt, n_steps = cfg.time_step(params, grid)
    traj = Trajectory(dt=dt, lifespan=state.t)
    stepper = STEPPERS[cfg.integrator]
    rhs = system_rhs(params, grid, cfg)
    t0 = state.t

    def record(snapshot: HThetaState):
        report = norm_report(snapshot, params, cfg.k, grid.half_length, cfg.noise_floor)
        traj.snapshots.append(snapshot)
        traj.reports.append(report)
        if on_report is not None:
            on_report(report)

    logger.info("evolving sigma=%.4g n=%d: %d steps of dt=%.3e (%s)",
                params.sigma, grid.n, n_steps, dt, cfg.integrator.value)
    try:
        check_state(state, params, grid, cfg)
        record(state)
        y = pack(state)
        for index in range(1, n_steps + 1):
            y = stepper(y, state.t, dt, rhs)
            candidate = unpack(y, params, t0 + index * dt)
            if not np.all(np.isfinite(y)):
                raise NonFiniteStateError(f"non-finite state at t = {candidate.t:.4g}")
            state = candidate
            traj.steps = index
            traj.lifespan = state.t
            check_state(state, params, grid, cfg)
            if index % cfg.report_every == 0 or index == n_steps:
                record(state)
    except MuskatError as error:
        traj.termination = TerminationReason.from_error(error)
        traj.message = str(error)
        if traj.termination is not TerminationReason.NAN and (
                not traj.snapshots or traj.snapshots[-1] is not state):
            try:
                record(state)
            except MuskatError:
                pass
        logger.warning("✗ sigma=%.4g stopped at t=%.4g: %s (%s)", params.sigma,
                       traj.lifespan, traj.termination.value, error)
        return traj

    logger.info("✓ sigma=%.4g reached horizon t=%.4g", params.sigma, traj.lifespan)
    return traj


@dataclass(frozen=True)
class BootstrapReport:
    """Sup-in-time ratios of the monitored quantities against their initial values."""
    energy_ratio: float          # sup [||h||^2 + mu1 mu2 ||theta||^2] / initial
    full_energy_ratio: float     # sup E(t) / E(0)
    theta_ratio_initial: float   # ||theta0||_{H^{k-3}} / sigma
    theta_ratio_sup: float       # sup_t ||theta||_{H^{k-3}_gamma} / sigma
    theta_ratio_growth: float    # theta_ratio_sup / theta_ratio_initial
    min_gap_over_sigma: float
    gamma_min: float
    gamma_above_floor: bool

    def to_dict(self) -> Dict:
        return asdict(self)


def _ratio(value: float, reference: float) -> float:
    if reference == 0.0:
        return 1.0 if value == 0.0 else math.inf
    return value / reference


def bootstrap_monitor(traj: Trajectory, params: PhysicalParams, grid: Grid1D, k: int,
                      gamma_floor: float = 1e-3,
                      noise_floor: float = STRIP_NOISE_FLOOR) -> BootstrapReport:
    """
    Recompute the bootstrap quantities of a finished trajectory at order k.

    Zero-over-zero ratios are defined as 1.
    """
    if not traj.snapshots:
        raise InvalidParameterError("bootstrap_monitor needs a nonempty trajectory")
    energies, full, thetas, gaps, gammas = [], [], [], [], []
    for snapshot in traj.snapshots:
        h = grid.spectral(snapshot.h)
        theta = grid.spectral(snapshot.theta)
        energies.append(hk_gamma_norm(h, k, snapshot.gamma, noise_floor=noise_floor)
                        + params.mu1 * params.mu2
                        * hk_gamma_norm(theta, k, snapshot.gamma, noise_floor=noise_floor))
        full.append(energy_E(snapshot, k, params, grid.half_length, noise_floor))
        thetas.append(hk_gamma_norm(theta, k - 3, snapshot.gamma, squared=False,
                                    noise_floor=noise_floor) / params.sigma)
        gaps.append(min_distance(snapshot, params) / params.sigma)
        gammas.append(snapshot.gamma)

    theta_sup = max(thetas)
    return BootstrapReport(
        energy_ratio=_ratio(max(energies), energies[0]),
        full_energy_ratio=_ratio(max(full), full[0]),
        theta_ratio_initial=thetas[0],
        theta_ratio_sup=theta_sup,
        theta_ratio_growth=_ratio(theta_sup, thetas[0]),
        min_gap_over_sigma=min(gaps),
        gamma_min=min(gammas),
        gamma_above_floor=min(gammas) > gamma_floor,
    )


def convergence_order(initial: HThetaState, cfg: StepperConfig, params: PhysicalParams,
                      grid: Grid1D, dt: float, horizon: float) -> float:
    """
    Observed order from dt-halving: log2(|y_dt - y_dt/2| / |y_dt/2 - y_dt/4|)
    measured on (h, theta) at the common horizon.
    """
    finals = []
    for refinement in (1, 2, 4):
        step_dt = dt / refinement
        state = initial
        for _ in range(int(round(horizon / dt)) * refinement):
            state = step(state, cfg, params, grid, step_dt)
        finals.append(np.concatenate([state.h, state.theta]))
    coarse = np.max(np.abs(finals[0] - finals[1]))
    fine = np.max(np.abs(finals[1] - finals[2]))
    if fine == 0.0:
        return math.inf if coarse > 0.0 else 0.0
    return math.log2(coarse / fine)


def save_snapshots(traj: Trajectory, path: Union[str, Path], config_hash: str = "") -> Path:
    """Write snapshots as JSON (``.json``) or NumPy archive (``.npz``), format version 1."""
    path = Path(path)
    if path.suffix == ".npz":
        np.savez(
            path,
            format_version=SNAPSHOT_FORMAT_VERSION,
            config_hash=config_hash,
            t=np.array([s.t for s in traj.snapshots]),
            gamma=np.array([s.gamma for s in traj.snapshots]),
            h=np.array([s.h for s in traj.snapshots]),
            theta=np.array([s.theta for s in traj.snapshots]),
        )
        return path
    document = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "config_hash": config_hash,
        "snapshots": [s.to_dict() for s in traj.snapshots],
    }
    path.write_text(json.dumps(document, indent=2))
    return path


def load_snapshots(path: Union[str, Path], params: PhysicalParams) -> List[HThetaState]:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as archive:
            version = int(archive["format_version"])
            rows = list(zip(archive["t"], archive["gamma"], archive["h"], archive["theta"]))
    else:
        document = json.loads(path.read_text())
        version = int(document.get("format_version", -1))
        rows = [(s["t"], s["gamma"], s["h"], s["theta"]) for s in document["snapshots"]]
    if version != SNAPSHOT_FORMAT_VERSION:
        raise InvalidParameterError(f"unsupported snapshot format version {version}")
    return [HThetaState.from_fields(h, theta, params, float(gamma), float(t))
            for t, gamma, h, theta in rows]
