"""
Run Configuration
Loads a JSON run configuration, validates it against the published schema
(configs/run_config.schema.json), applies the semantic checks the schema
cannot express, and maps it onto frozen dataclasses.

The only environment setting is MUSKAT_OUTPUT_DIR, which overrides the
output directory named in the file (a --out flag overrides both).
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import jsonschema
from dotenv import load_dotenv

from errors import ConfigError
from evolution import Integrator, StepperConfig
from geometry_state import (
    DEFAULT_TAIL_TOLERANCE,
    Grid1D,
    InitialDataSpec,
    PhysicalParams,
    ProfileKind,
    ProfileSpec,
    make_params,
)
from kernel_suites import VerifySettings

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).resolve().parent / "configs" / "run_config.schema.json"
OUTPUT_ENV = "MUSKAT_OUTPUT_DIR"


@dataclass(frozen=True)
class ParamsBlock:
    rho0: float
    rho1: float
    rho2: float
    sigma: Optional[float] = None
    sigmas: Tuple[float, ...] = ()

    @property
    def sigma_list(self) -> List[float]:
        if self.sigmas:
            return list(self.sigmas)
        return [self.sigma] if self.sigma is not None else []

    def to_params(self, sigma: Optional[float] = None) -> PhysicalParams:
        value = sigma if sigma is not None else (self.sigma if self.sigma is not None else self.sigma_list[0])
        return make_params(self.rho0, self.rho1, self.rho2, value)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class GridBlock:
    n: int
    half_length: float = math.pi

    def to_grid(self, n: Optional[int] = None) -> Grid1D:
        return Grid1D(self.half_length, n or self.n)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class ProfileBlock:
    f: ProfileSpec = field(default_factory=ProfileSpec)
    g: ProfileSpec = field(default_factory=ProfileSpec)
    theta1: Optional[ProfileSpec] = None

    def to_dict(self) -> Dict:
        data = {"f": self.f.to_dict(), "g": self.g.to_dict()}
        if self.theta1 is not None:
            data["theta1"] = self.theta1.to_dict()
        return data


@dataclass(frozen=True)
class StepperBlock:
    horizon: float = 0.5
    dt: Optional[float] = None
    cfl: float = 0.2
    integrator: str = "rk4"
    c2: float = 1.0
    gamma0: float = 0.1

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class MonitorBlock:
    k: int = 3
    report_every: int = 10
    tail_threshold: float = 1e-6
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    collision_factor: float = 0.5
    gamma_floor: float = 1e-3
    noise_floor: float = 1e-13
    eps0: Optional[float] = None
    eps1: Optional[float] = None

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "runs"
    snapshot_format: str = "json"
    snapshots: bool = True

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class SweepBlock:
    theta_ratio_bound: float = 2.0
    n_base: Optional[int] = None
    max_n: int = 4096

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class TwoPhaseBlock:
    strict: bool = True

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class LinearBlock:
    wavenumbers: Tuple[float, ...] = (1.0, 2.0, 4.0)
    sigmas: Tuple[float, ...] = (0.05, 0.2)
    amplitude: float = 1e-6
    max_amplitude: float = 1e-5
    horizon: float = 0.5
    samples: int = 11
    tolerance: float = 1e-3

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class VerifyBlock:
    samples: int = 100_000
    derivative_samples: int = 2_000
    w0: float = 1e-2
    tolerance: float = 1e-10
    derivative_tolerance: float = 1e-6
    margin: float = 0.1
    suites: Tuple[str, ...] = ()

    def to_settings(self, seed: int) -> VerifySettings:
        return VerifySettings(
            samples=self.samples,
            derivative_samples=self.derivative_samples,
            w0=self.w0,
            tolerance=self.tolerance,
            derivative_tolerance=self.derivative_tolerance,
            margin=self.margin,
            seed=seed,
        )

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration and the canonical document it came from."""
    params: ParamsBlock
    grid: GridBlock
    profile: ProfileBlock = field(default_factory=ProfileBlock)
    stepper: StepperBlock = field(default_factory=StepperBlock)
    monitor: MonitorBlock = field(default_factory=MonitorBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    twophase: TwoPhaseBlock = field(default_factory=TwoPhaseBlock)
    linear: LinearBlock = field(default_factory=LinearBlock)
    verify: VerifyBlock = field(default_factory=VerifyBlock)
    name: str = "run"
    seed: int = 0
    document: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.document)

    def stepper_config(self, workers: int = 1, horizon: Optional[float] = None,
                       dt: Optional[float] = None) -> StepperConfig:
        return StepperConfig(
            horizon=self.stepper.horizon if horizon is None else horizon,
            dt=self.stepper.dt if dt is None else dt,
            cfl=self.stepper.cfl,
            integrator=Integrator.from_string(self.stepper.integrator),
            c2=self.stepper.c2,
            gamma0=self.stepper.gamma0,
            k=self.monitor.k,
            report_every=self.monitor.report_every,
            tail_threshold=self.monitor.tail_threshold,
            collision_factor=self.monitor.collision_factor,
            gamma_floor=self.monitor.gamma_floor,
            noise_floor=self.monitor.noise_floor,
            workers=workers,
        )

    def initial_spec(self) -> InitialDataSpec:
        return InitialDataSpec(
            f=self.profile.f,
            g=self.profile.g,
            gamma0=self.stepper.gamma0,
            k=self.monitor.k,
            tail_tolerance=self.monitor.tail_tolerance,
            theta1=self.profile.theta1,
        )

    def to_dict(self) -> Dict:
        return dict(self.document)


def config_hash(document: Dict[str, Any]) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON (sorted keys, no whitespace)."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_schema() -> Dict[str, Any]:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as handle:
        return json.load(handle)


def validate_document(document: Dict[str, Any]) -> None:
    """Schema validation; every violation is collected into ConfigError.diagnostics."""
    validator = jsonschema.Draft7Validator(load_schema())
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        diagnostics = [
            f"{'/'.join(str(p) for p in error.absolute_path) or '<root>'}: {error.message}"
            for error in errors
        ]
        raise ConfigError(f"configuration failed schema validation ({len(errors)} errors)",
                          diagnostics)


def _profile(data: Optional[Dict]) -> Optional[ProfileSpec]:
    return ProfileSpec.from_dict(data) if data is not None else None


def from_document(document: Dict[str, Any]) -> RunConfig:
    """Validate and map a parsed JSON document onto RunConfig."""
    validate_document(document)
    params = document["params"]
    if "sigma" not in params and "sigmas" not in params:
        raise ConfigError("params needs sigma or sigmas", ["params: missing sigma"])
    profile = document.get("profile", {})
    linear = dict(document.get("linear", {}))
    verify = dict(document.get("verify", {}))
    for key in ("wavenumbers", "sigmas"):
        if key in linear:
            linear[key] = tuple(linear[key])
    if "suites" in verify:
        verify["suites"] = tuple(verify["suites"])

    config = RunConfig(
        params=ParamsBlock(
            rho0=params["rho0"], rho1=params["rho1"], rho2=params["rho2"],
            sigma=params.get("sigma"), sigmas=tuple(params.get("sigmas", ())),
        ),
        grid=GridBlock(**document["grid"]),
        profile=ProfileBlock(
            f=_profile(profile.get("f")) or ProfileSpec(),
            g=_profile(profile.get("g")) or ProfileSpec(),
            theta1=_profile(profile.get("theta1")),
        ),
        stepper=StepperBlock(**document.get("stepper", {})),
        monitor=MonitorBlock(**document.get("monitor", {})),
        output=OutputBlock(**document.get("output", {})),
        sweep=SweepBlock(**document.get("sweep", {})),
        twophase=TwoPhaseBlock(**document.get("twophase", {})),
        linear=LinearBlock(**linear),
        verify=VerifyBlock(**verify),
        name=document.get("name", "run"),
        seed=document.get("seed", 0),
        document=document,
    )
    try:
        config.params.to_params()
    except ValueError as e:
        raise ConfigError(str(e), [f"params: {e}"]) from e
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Read, validate and map a run configuration file.

    Raises:
        ConfigError: unreadable file, invalid JSON, or schema/semantic violations
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}", [str(e)]) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON", [f"line {e.lineno}: {e.msg}"]) from e
    config = from_document(document)
    logger.debug("loaded config %s (hash %s)", path, config.config_hash)
    return config


def check_sigma_list(sigmas: List[float]) -> None:
    if not sigmas:
        raise ConfigError("sigma list is empty", ["params/sigmas: empty"])
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise ConfigError("sigma list must be strictly decreasing",
                          [f"params/sigmas: {sigmas}"])


def check_twophase(config: RunConfig) -> None:
    """The two-phase comparison starts both interfaces from the same profile."""
    check_sigma_list(config.params.sigma_list)
    theta1 = config.profile.theta1
    same = config.profile.f == config.profile.g and (
        theta1 is None or theta1.kind is ProfileKind.ZERO or theta1.amplitude == 0.0)
    if not same:
        raise ConfigError("two-phase comparison requires f0 = g0",
                          ["profile: f and g differ (or theta1 is nonzero)"])


def check_linear(config: RunConfig) -> List[int]:
    """Each wavenumber must be a grid mode k = pi m / L; returns the mode numbers m."""
    modes = []
    for k in config.linear.wavenumbers:
        m = k * config.grid.half_length / math.pi
        if abs(m - round(m)) > 1e-9:
            raise ConfigError(f"wavenumber {k} is not a grid mode (m = {m:.6g})",
                              [f"linear/wavenumbers: {k}"])
        modes.append(int(round(m)))
    if max(modes) >= config.grid.n // 3:
        raise ConfigError("linear-check modes must lie below the dealiasing cutoff n/3",
                          [f"linear/wavenumbers: max mode {max(modes)}"])
    return modes


def resolve_output_dir(config: RunConfig, cli_out: Optional[str] = None) -> Path:
    """--out beats MUSKAT_OUTPUT_DIR beats output.directory."""
    load_dotenv()
    if cli_out:
        return Path(cli_out)
    env_dir = os.getenv(OUTPUT_ENV)
    if env_dir:
        return Path(env_dir)
    return Path(config.output.directory)
