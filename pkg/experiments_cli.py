"""
Muskat Lab - Experiment Commands
Command-line front end: single runs, the sigma sweep, the two-phase limit
comparison, the linear-rate check, kernel certification and plotting.

Usage:
    python experiments_cli.py simulate --config configs/demo.json
    python experiments_cli.py sweep --config configs/sweep.json --threads 4
    python experiments_cli.py twophase --config configs/twophase.json
    python experiments_cli.py linear --config configs/linear.json
    python experiments_cli.py verify --config configs/verify.json --seed 7
    python experiments_cli.py plot runs/demo_simulate/norms.csv

Exit codes: 0 pass, 1 assertion failure, 2 configuration (or input) error.
"""

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from analytic_norms import CSV_COLUMNS, CSV_VERSION, NormReport
from errors import (
    ConfigError,
    InvalidInitialDataError,
    InvalidParameterError,
    MuskatError,
    NonFiniteStateError,
    PlotError,
)
from evolution import (
    STEPPERS,
    StepperConfig,
    TerminationReason,
    Trajectory,
    bootstrap_monitor,
    run,
    save_snapshots,
)
from geometry_state import (
    Grid1D,
    InterfaceState,
    PhysicalParams,
    check_smallness,
    init_profile,
    make_params,
)
from kernel_suites import SUITES, overall_pass, run_suites
from plots import render
from run_config import (
    RunConfig,
    check_linear,
    check_sigma_list,
    check_twophase,
    from_document,
    load_config,
    resolve_output_dir,
)
from velocity_rhs import linearized_symbol, rhs_twophase

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

SWEEP_COLUMNS = (
    "sigma", "n", "lifespan", "reached_horizon", "termination", "theta_ratio_initial",
    "theta_ratio_sup", "theta_ratio_growth", "energy_ratio", "min_gap_over_sigma",
    "gamma_min", "passed",
)
TWOPHASE_COLUMNS = ("sigma", "n", "max_diff", "reached_horizon", "termination", "lifespan")
LINEAR_COLUMNS = (
    "k", "mode", "sigma", "rate_1", "rate_2", "expected_1", "expected_2",
    "rel_error", "grid_rel_error", "second_harmonic", "passed",
)


@dataclass
class CommandResult:
    command: str
    passed: bool
    out_dir: Path
    summary: Dict = field(default_factory=dict)


# ----------------------------------------------------------------------------
# Artifact writers
# ----------------------------------------------------------------------------

def _jsonable(value):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, document: Dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(document), indent=2), encoding="utf-8")
    return path


def csv_header(kind: str, config_hash: str) -> str:
    return f"# muskat-lab {kind} {CSV_VERSION} config={config_hash}"


def write_table(path: Path, kind: str, config_hash: str, columns: Sequence[str],
                rows: List[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(csv_header(kind, config_hash) + "\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        writer.writerows(rows)
    return path


class NormsCsvWriter:
    """Streams NormReport rows to norms.csv as the trajectory produces them."""

    def __init__(self, path: Path, config_hash: str):
        self.path = Path(path)
        self.config_hash = config_hash
        self._handle = None
        self._writer = None

    def __enter__(self) -> "NormsCsvWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "w", newline="", encoding="utf-8")
        self._handle.write(csv_header("norms", self.config_hash) + "\n")
        self._writer = csv.writer(self._handle)
        self._writer.writerow(CSV_COLUMNS)
        return self

    def __call__(self, report: NormReport) -> None:
        self._writer.writerow(report.csv_row())
        self._handle.flush()

    def __exit__(self, *exc_info) -> None:
        self._handle.close()


def _bootstrap(traj: Trajectory, config: RunConfig, params: PhysicalParams, grid: Grid1D):
    if not traj.snapshots:
        return None
    try:
        return bootstrap_monitor(traj, params, grid, config.monitor.k,
                                 config.monitor.gamma_floor, config.monitor.noise_floor)
    except MuskatError as e:
        logger.warning("⚠ bootstrap quantities unavailable: %s", e)
        return None


# ----------------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------------

def cmd_simulate(config: RunConfig, out_dir: Path, threads: int = 1) -> CommandResult:
    """
    Run one trajectory and write norms.csv, snapshots and summary.json.

    The run passes when it reaches the horizon; any other termination is
    recorded in the summary and reported as an assertion failure.
    """
    params = config.params.to_params()
    grid = config.grid.to_grid()
    cfg = config.stepper_config(workers=threads)
    profile = init_profile(config.initial_spec(), grid, params)
    digest = config.config_hash

    smallness = None
    if config.monitor.eps0 is not None and config.monitor.eps1 is not None:
        smallness = check_smallness(profile, config.monitor.eps0, config.monitor.eps1)
        marker = "✓" if smallness.passed else "⚠"
        logger.info("%s smallness: energy %.3e (eps0^2 = %.3e), gap ratio %.3e (eps1 = %.3e)",
                    marker, smallness.energy_norm, smallness.eps0 ** 2,
                    smallness.gap_ratio, smallness.eps1)

    with NormsCsvWriter(out_dir / "norms.csv", digest) as writer:
        traj = run(profile.state, cfg, params, grid, on_report=writer)
    if config.output.snapshots:
        save_snapshots(traj, out_dir / f"snapshots.{config.output.snapshot_format}", digest)

    boot = _bootstrap(traj, config, params, grid)
    passed = traj.termination is TerminationReason.HORIZON
    summary = {
        "command": "simulate",
        "name": config.name,
        "config_hash": digest,
        "seed": config.seed,
        "passed": passed,
        "horizon": cfg.horizon,
        "params": params.to_dict(),
        "grid": grid.to_dict(),
        "stepper": cfg.to_dict(),
        "initial": profile.to_dict(),
        "smallness": smallness.to_dict() if smallness else None,
        "bootstrap": boot.to_dict() if boot else None,
        **traj.to_dict(),
    }
    write_json(out_dir / "summary.json", summary)
    return CommandResult("simulate", passed, out_dir, summary)


# ----------------------------------------------------------------------------
# sweep
# ----------------------------------------------------------------------------

def next_power_of_two(value: float) -> int:
    return 1 << max(2, math.ceil(math.log2(max(value, 1.0))))


def sweep_resolution(sigma: float, half_length: float, n_base: int, max_n: int) -> int:
    """
    Grid size for one sweep row: sigma >= 4 dx, i.e. n >= 8L/sigma, rounded up
    to a power of two, never below n_base and capped at max_n.
    """
    n = max(n_base, next_power_of_two(8.0 * half_length / sigma))
    if n > max_n:
        logger.warning("⚠ sigma=%.4g wants n=%d, capped at %d (kernel under-resolved)",
                       sigma, n, max_n)
        n = max_n
    return n


def sweep_initial_state(config: RunConfig, sigma: float, reference_sigma: float,
                        grid: Grid1D, params: PhysicalParams) -> InterfaceState:
    """
    Initial data with ||theta0||/sigma held fixed across the sweep.

    A theta1 profile already prescribes the rescaled gap; otherwise the gap
    f0 - g0 of the profile block is taken at reference_sigma and scaled by
    sigma / reference_sigma.
    """
    spec = config.initial_spec()
    if spec.theta1 is not None or spec.f == spec.g:
        return init_profile(spec, grid, params).state
    x = grid.nodes
    f0 = spec.f.sample(x, grid.half_length)
    theta = (sigma / reference_sigma) * (f0 - spec.g.sample(x, grid.half_length))
    tolerance = None if spec.has_modes() else spec.tail_tolerance
    return InterfaceState(f0, f0 - theta, spec.gamma0, 0.0).validate(params, grid, tolerance)


@dataclass
class SweepRow:
    sigma: float
    n: int
    lifespan: float
    reached_horizon: bool
    termination: str
    theta_ratio_initial: float = math.nan
    theta_ratio_sup: float = math.nan
    theta_ratio_growth: float = math.nan
    energy_ratio: float = math.nan
    min_gap_over_sigma: float = math.nan
    gamma_min: float = math.nan
    passed: bool = False
    message: str = ""

    def csv_row(self) -> List:
        return [getattr(self, name) for name in SWEEP_COLUMNS]

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class SweepSummary:
    """One row per requested sigma, in request order."""
    rows: List[SweepRow]
    horizon: float
    theta_ratio_bound: float

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(row.passed for row in self.rows)

    def to_dict(self) -> Dict:
        return {
            "horizon": self.horizon,
            "theta_ratio_bound": self.theta_ratio_bound,
            "passed": self.passed,
            "rows": [row.to_dict() for row in self.rows],
        }


def _sweep_row(config: RunConfig, sigma: float, params: PhysicalParams, grid: Grid1D,
               state: InterfaceState, cfg: StepperConfig, row_dir: Path) -> SweepRow:
    with NormsCsvWriter(row_dir / "norms.csv", config.config_hash) as writer:
        traj = run(state, cfg, params, grid, on_report=writer)
    reached = traj.termination is TerminationReason.HORIZON
    row = SweepRow(sigma=sigma, n=grid.n, lifespan=traj.lifespan, reached_horizon=reached,
                   termination=traj.termination.value, message=traj.message)
    boot = _bootstrap(traj, config, params, grid)
    if boot is not None:
        row.theta_ratio_initial = boot.theta_ratio_initial
        row.theta_ratio_sup = boot.theta_ratio_sup
        row.theta_ratio_growth = boot.theta_ratio_growth
        row.energy_ratio = boot.energy_ratio
        row.min_gap_over_sigma = boot.min_gap_over_sigma
        row.gamma_min = boot.gamma_min
        row.passed = reached and boot.theta_ratio_growth <= config.sweep.theta_ratio_bound
    if config.output.snapshots:
        save_snapshots(traj, row_dir / f"snapshots.{config.output.snapshot_format}",
                       config.config_hash)
    return row


def cmd_sigma_sweep(config: RunConfig, out_dir: Path, threads: int = 1) -> CommandResult:
    """
    Run the same small data at every sigma of the list and check that each
    run reaches the horizon with sup_t ||theta||/sigma within the configured
    factor of its initial value.
    """
    sigmas = config.params.sigma_list
    check_sigma_list(sigmas)
    n_base = config.sweep.n_base or config.grid.n
    cfg = config.stepper_config(workers=1)

    # initial data is built up front so configuration problems surface before any run
    jobs = []
    for sigma in sigmas:
        params = config.params.to_params(sigma)
        grid = config.grid.to_grid(sweep_resolution(sigma, config.grid.half_length,
                                                    n_base, config.sweep.max_n))
        state = sweep_initial_state(config, sigma, sigmas[0], grid, params)
        jobs.append((sigma, params, grid, state))

    rows: Dict[float, SweepRow] = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        future_to_sigma = {
            executor.submit(_sweep_row, config, sigma, params, grid, state, cfg,
                            out_dir / f"sigma_{sigma:g}"): sigma
            for sigma, params, grid, state in jobs
        }
        for future in as_completed(future_to_sigma):
            sigma = future_to_sigma[future]
            row = future.result()
            rows[sigma] = row
            marker = "✓" if row.passed else "✗"
            logger.info("%s sigma=%.4g n=%d: %s at t=%.4g, theta ratio x%.3f",
                        marker, sigma, row.n, row.termination, row.lifespan,
                        row.theta_ratio_growth)

    summary = SweepSummary([rows[s] for s in sigmas], cfg.horizon, config.sweep.theta_ratio_bound)
    digest = config.config_hash
    write_table(out_dir / "sweep.csv", "sweep", digest, SWEEP_COLUMNS,
                [row.csv_row() for row in summary.rows])
    document = {"command": "sweep", "name": config.name, "config_hash": digest,
                "seed": config.seed, **summary.to_dict()}
    write_json(out_dir / "summary.json", document)
    return CommandResult("sweep", summary.passed, out_dir, document)


# ----------------------------------------------------------------------------
# twophase
# ----------------------------------------------------------------------------

def evolve_twophase(f0: np.ndarray, delta_rho_total: float, grid: Grid1D,
                    cfg: StepperConfig, dt: float, n_steps: int) -> Dict[int, np.ndarray]:
    """Two-phase Muskat profiles at the report steps of the matching three-phase run."""
    stepper = STEPPERS[cfg.integrator]

    def rhs(t, y):
        return rhs_twophase(y, delta_rho_total, grid, cfg.workers)

    y = np.array(f0, dtype=float)
    profiles = {0: y.copy()}
    for index in range(1, n_steps + 1):
        y = stepper(y, (index - 1) * dt, dt, rhs)
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError(f"two-phase profile non-finite at step {index}")
        if index % cfg.report_every == 0 or index == n_steps:
            profiles[index] = y.copy()
    return profiles


@dataclass
class TwoPhaseRow:
    sigma: float
    n: int
    max_diff: float
    reached_horizon: bool
    termination: str
    lifespan: float

    def csv_row(self) -> List:
        return [getattr(self, name) for name in TWOPHASE_COLUMNS]

    def to_dict(self) -> Dict:
        return asdict(self)


def _twophase_row(sigma: float, params: PhysicalParams, grid: Grid1D,
                  state: InterfaceState, cfg: StepperConfig) -> TwoPhaseRow:
    dt, n_steps = cfg.time_step(params, grid)
    reference = evolve_twophase(state.f, params.rho2 - params.rho0, grid, cfg, dt, n_steps)
    traj = run(state, cfg, params, grid)
    diff = 0.0
    for snapshot in traj.snapshots:
        index = int(round(snapshot.t / dt))
        if index in reference:
            f_sigma = snapshot.h + params.mu1 * snapshot.theta
            diff = max(diff, float(np.max(np.abs(f_sigma - reference[index]))))
    return TwoPhaseRow(sigma, grid.n, diff, traj.termination is TerminationReason.HORIZON,
                       traj.termination.value, traj.lifespan)


def differences_decreasing(diffs: Sequence[float], strict: bool = True) -> bool:
    """Along a decreasing sigma list the differences must shrink (all-zero passes)."""
    if all(d == 0.0 for d in diffs):
        return True
    if strict:
        return all(b < a for a, b in zip(diffs, diffs[1:]))
    return all(b <= a for a, b in zip(diffs, diffs[1:]))


def cmd_twophase_limit(config: RunConfig, out_dir: Path, threads: int = 1) -> CommandResult:
    """
    Compare three-phase runs with f0 = g0 against the two-phase equation with
    density jump rho2 - rho0 started from the same f0.
    """
    check_twophase(config)
    sigmas = config.params.sigma_list
    n_base = config.sweep.n_base or config.grid.n
    cfg = config.stepper_config(workers=1)

    jobs = []
    for sigma in sigmas:
        params = config.params.to_params(sigma)
        grid = config.grid.to_grid(sweep_resolution(sigma, config.grid.half_length,
                                                    n_base, config.sweep.max_n))
        jobs.append((sigma, params, grid, init_profile(config.initial_spec(), grid, params).state))

    rows: Dict[float, TwoPhaseRow] = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        future_to_sigma = {
            executor.submit(_twophase_row, sigma, params, grid, state, cfg): sigma
            for sigma, params, grid, state in jobs
        }
        for future in as_completed(future_to_sigma):
            sigma = future_to_sigma[future]
            rows[sigma] = future.result()
            logger.info("sigma=%.4g: sup_t |f_sigma - f_2p| = %.3e (%s)", sigma,
                        rows[sigma].max_diff, rows[sigma].termination)

    ordered = [rows[s] for s in sigmas]
    monotone = differences_decreasing([row.max_diff for row in ordered], config.twophase.strict)
    passed = monotone and all(row.reached_horizon for row in ordered)
    logger.info("%s two-phase differences %s in sigma", "✓" if monotone else "✗",
                "decrease" if monotone else "do not decrease")

    digest = config.config_hash
    write_table(out_dir / "twophase.csv", "twophase", digest, TWOPHASE_COLUMNS,
                [row.csv_row() for row in ordered])
    document = {"command": "twophase", "name": config.name, "config_hash": digest,
                "seed": config.seed, "passed": passed, "decreasing": monotone,
                "rows": [row.to_dict() for row in ordered]}
    write_json(out_dir / "summary.json", document)
    return CommandResult("twophase", passed, out_dir, document)


# ----------------------------------------------------------------------------
# linear
# ----------------------------------------------------------------------------

@dataclass
class LinearCase:
    k: float
    mode: int
    sigma: float
    rates: Tuple[float, float] = (math.nan, math.nan)
    expected: Tuple[float, float] = (math.nan, math.nan)
    rel_error: float = math.nan
    grid_rel_error: float = math.nan
    second_harmonic: float = math.nan
    passed: bool = False
    vacuous: bool = False
    message: str = ""

    def csv_row(self) -> List:
        return [self.k, self.mode, self.sigma, *self.rates, *self.expected,
                self.rel_error, self.grid_rel_error, self.second_harmonic, self.passed]

    def to_dict(self) -> Dict:
        return asdict(self)


def fit_rates(times: np.ndarray, projections: np.ndarray) -> np.ndarray:
    """Least-squares slope of log|c_j(t)| for each eigen-combination (columns)."""
    logs = np.log(np.abs(projections))
    return np.array([np.polyfit(times, logs[:, j], 1)[0] for j in range(logs.shape[1])])


def _rate_error(rates: np.ndarray, eigenvalues: np.ndarray) -> float:
    # scaled by the larger rate: the theta-mode rate vanishes as sigma -> 0
    return float(np.max(np.abs(rates - eigenvalues)) / np.max(np.abs(eigenvalues)))


def _linear_case(config: RunConfig, k: float, mode: int, sigma: float,
                 cfg: StepperConfig) -> LinearCase:
    case = LinearCase(k=k, mode=mode, sigma=sigma)
    amplitude = config.linear.amplitude
    if amplitude == 0.0:
        case.passed, case.vacuous = True, True
        case.message = "zero amplitude"
        return case
    if amplitude > config.linear.max_amplitude:
        logger.warning("⚠ amplitude %.1e above %.1e: expect nonlinear contamination",
                       amplitude, config.linear.max_amplitude)

    params = make_params(config.params.rho0, config.params.rho1, config.params.rho2, sigma)
    grid = config.grid.to_grid()
    f0 = amplitude * np.cos(k * grid.nodes)
    state = InterfaceState(f0, np.zeros(grid.n), cfg.gamma0, 0.0).validate(params, grid)
    _, n_steps = cfg.time_step(params, grid)
    cfg = dataclasses.replace(cfg, report_every=max(1, n_steps // (config.linear.samples - 1)))
    traj = run(state, cfg, params, grid)
    if traj.termination is not TerminationReason.HORIZON:
        case.message = f"run stopped: {traj.termination.value}"
        return case

    truncated = linearized_symbol(k, params, half_length=grid.half_length)
    discrete = linearized_symbol(k, params, grid=grid)
    times = np.array([s.t for s in traj.snapshots])
    coefficients = []
    harmonics = []
    for snapshot in traj.snapshots:
        f_hat = np.fft.fft(snapshot.h + params.mu1 * snapshot.theta)
        g_hat = np.fft.fft(snapshot.h - params.mu2 * snapshot.theta)
        coefficients.append([f_hat[mode], g_hat[mode]])
        if 2 * mode < grid.n / 3:
            base = abs(f_hat[mode]) + abs(g_hat[mode])
            harmonics.append((abs(f_hat[2 * mode]) + abs(g_hat[2 * mode])) / base)
    projections = np.linalg.solve(discrete.eigenvectors, np.array(coefficients).T).T
    rates = fit_rates(times, projections)

    case.rates = (float(rates[0]), float(rates[1]))
    case.expected = (float(truncated.eigenvalues[0]), float(truncated.eigenvalues[1]))
    case.rel_error = _rate_error(rates, truncated.eigenvalues)
    case.grid_rel_error = _rate_error(rates, discrete.eigenvalues)
    case.second_harmonic = max(harmonics) if harmonics else math.nan
    tolerance = config.linear.tolerance
    clean = not harmonics or case.second_harmonic <= tolerance
    if not clean:
        logger.warning("⚠ k=%g sigma=%g: second harmonic at %.2e of the mode (nonlinear)",
                       k, sigma, case.second_harmonic)
    case.passed = case.rel_error <= tolerance and clean
    return case


def cmd_linear_check(config: RunConfig, out_dir: Path, threads: int = 1) -> CommandResult:
    """
    Fit the decay rates of the two eigen-combinations of (f_hat(k), g_hat(k))
    for every (k, sigma) pair and compare them with the truncated linear symbol.
    """
    modes = check_linear(config)
    cfg = config.stepper_config(workers=1, horizon=config.linear.horizon)
    cases = [(k, m, sigma) for k, m in zip(config.linear.wavenumbers, modes)
             for sigma in config.linear.sigmas]

    results: Dict[Tuple[float, float], LinearCase] = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        future_to_case = {
            executor.submit(_linear_case, config, k, m, sigma, cfg): (k, sigma)
            for k, m, sigma in cases
        }
        for future in as_completed(future_to_case):
            key = future_to_case[future]
            case = future.result()
            results[key] = case
            logger.info("%s k=%g sigma=%g: rel error %.2e (grid %.2e)",
                        "✓" if case.passed else "✗", case.k, case.sigma,
                        case.rel_error, case.grid_rel_error)

    ordered = [results[(k, sigma)] for k, _, sigma in cases]
    passed = all(case.passed for case in ordered)
    digest = config.config_hash
    write_table(out_dir / "linear.csv", "linear", digest, LINEAR_COLUMNS,
                [case.csv_row() for case in ordered])
    document = {"command": "linear", "name": config.name, "config_hash": digest,
                "seed": config.seed, "passed": passed, "tolerance": config.linear.tolerance,
                "cases": [case.to_dict() for case in ordered]}
    write_json(out_dir / "summary.json", document)
    return CommandResult("linear", passed, out_dir, document)


# ----------------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------------

def cmd_verify_kernels(config: RunConfig, out_dir: Path, threads: int = 1) -> CommandResult:
    """Run the kernel identity and positivity suites and write certification.json."""
    names = list(config.verify.suites) or None
    unknown = [name for name in names or [] if name not in SUITES]
    if unknown:
        raise ConfigError(f"unknown verification suites: {', '.join(unknown)}",
                          [f"verify/suites: {name}" for name in unknown])
    settings = config.verify.to_settings(config.seed)
    records = run_suites(settings, max_workers=max(1, threads), names=names)
    passed = overall_pass(records)
    document = {
        "command": "verify",
        "name": config.name,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "settings": asdict(settings),
        "passed": passed,
        "records": [record.to_dict() for record in records],
    }
    write_json(out_dir / "certification.json", document)
    write_json(out_dir / "summary.json", {key: document[key] for key in
                                          ("command", "name", "config_hash", "seed", "passed")})
    return CommandResult("verify", passed, out_dir, document)


# ----------------------------------------------------------------------------
# plot
# ----------------------------------------------------------------------------

def cmd_plot(paths: Sequence[Path], out_dir: Optional[Path] = None) -> CommandResult:
    """Render every artifact CSV to SVG (next to the CSV unless out_dir is given)."""
    written = []
    for path in paths:
        written.extend(render(path, out_dir))
    return CommandResult("plot", True, out_dir or Path(paths[0]).parent,
                         {"written": [str(p) for p in written]})


COMMANDS: Dict[str, Tuple[Callable, str]] = {
    "simulate": (cmd_simulate, "run one trajectory"),
    "sweep": (cmd_sigma_sweep, "sigma sweep of lifespan and rescaled gap"),
    "twophase": (cmd_twophase_limit, "compare with the two-phase Muskat equation"),
    "linear": (cmd_linear_check, "small-amplitude decay rates vs the linear symbol"),
    "verify": (cmd_verify_kernels, "kernel identity and positivity certification"),
}


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _threads(value: str) -> int:
    threads = int(value)
    if threads < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return threads


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="muskat-lab",
                                     description="Three-phase Muskat simulator and verification lab")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="JSON run configuration")
    common.add_argument("--out", help="output root (overrides MUSKAT_OUTPUT_DIR)")
    common.add_argument("--threads", type=_threads, default=1, help="worker threads")
    common.add_argument("--seed", type=_seed, help="override the configured seed")

    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=help_text)
    plot = subparsers.add_parser("plot", help="render artifact CSVs to SVG")
    plot.add_argument("paths", nargs="+", type=Path, help="norms.csv or sweep.csv files")
    plot.add_argument("--out", help="directory for the SVG files")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    load_dotenv()

    try:
        if args.command == "plot":
            result = cmd_plot(args.paths, Path(args.out) if args.out else None)
        else:
            config = load_config(args.config)
            if args.seed is not None:
                config = from_document({**config.document, "seed": args.seed})
            out_dir = resolve_output_dir(config, args.out) / f"{config.name}_{args.command}"
            command, _ = COMMANDS[args.command]
            logger.info("%s %s (config %s) -> %s", args.command, config.name,
                        config.config_hash, out_dir)
            result = command(config, out_dir, args.threads)
    except (ConfigError, InvalidParameterError, InvalidInitialDataError, PlotError) as e:
        logger.error("✗ %s", e)
        for line in getattr(e, "diagnostics", []):
            logger.error("    %s", line)
        return EXIT_CONFIG
    except Exception:
        logger.exception("✗ %s crashed", args.command)
        raise

    if result.passed:
        logger.info("✓ %s passed", result.command)
        return EXIT_PASS
    logger.error("✗ %s failed (see %s)", result.command, result.out_dir)
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
