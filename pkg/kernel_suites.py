"""
Kernel Verification Suites
Brute-force certification of the closed-form kernel identities over random
configurations drawn from the small-slope regime.

Each suite returns a SuiteRecord {identity, samples, max_rel_err, pass,
regime}. Suites run concurrently; every suite owns an independent random
stream spawned from the run seed, so results do not depend on scheduling.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from analytic_norms import dissipation_weight
from singular_kernels import (
    KernelArgs,
    eval_antisym,
    eval_antisym_derivative,
    eval_decomposition,
    eval_D0,
    eval_Kf_ef,
    eval_Kg_eg,
    eval_P,
    positivity_margin,
    product_difference_bound,
)

logger = logging.getLogger(__name__)

# Above this w0 the positivity statement is no longer expected to hold
REGIME_W0_LIMIT = 0.1

SANDWICH_LOWER = 7.0 / 16.0
SANDWICH_UPPER = 1.0

# Allowed shortfall of the observed central-difference order below 2
ORDER_TOLERANCE = 0.2


@dataclass
class VerifySettings:
    """Sample counts and tolerances for one certification run."""
    samples: int = 100_000
    derivative_samples: int = 2_000
    w0: float = 1e-2
    tolerance: float = 1e-10
    derivative_tolerance: float = 1e-6
    derivative_step: float = 1e-4
    min_order: float = 2.0 - ORDER_TOLERANCE
    margin: float = 0.1
    seed: int = 0


@dataclass
class SuiteRecord:
    identity: str
    samples: int
    max_rel_err: float
    passed: bool
    tolerance: float
    regime: str = "in_regime"
    detail: Optional[Dict] = None

    def to_dict(self) -> Dict:
        data = {
            "identity": self.identity,
            "samples": self.samples,
            "max_rel_err": self.max_rel_err,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "regime": self.regime,
        }
        if self.detail:
            data["detail"] = self.detail
        return data


@dataclass(frozen=True)
class SampledParams:
    """Per-sample density weights, shaped like the configuration arrays."""
    mu1: np.ndarray
    mu2: np.ndarray
    sigma: np.ndarray


def relative_error(lhs, rhs, scale=None) -> np.ndarray:
    """|lhs - rhs| / max(|lhs|, |rhs|), or / scale when given; 0 where both vanish."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if scale is None:
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
    diff = np.abs(lhs - rhs)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0.0, diff / scale, diff)


def _max(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.max()) if values.size else 0.0


def sample_configurations(rng: np.random.Generator, count: int, w0: float,
                          sigma_range=(0.01, 0.5), ratio_decades: float = 2.0) -> KernelArgs:
    """
    Random (x, x1) configurations in the small-slope regime.

    sigma ~ U(sigma_range); dx = +/- 2 sigma 10^U(-d, d); secant slopes of f
    and g and their slopes at x1 in [-w0, w0]; theta at both points within
    w0 sigma. The secant slope of g is drawn from the sub-interval that keeps
    theta(x) = theta(x1) + (s_f - s_g) dx inside the band.
    """
    sigma = rng.uniform(*sigma_range, count)
    sign = rng.choice([-1.0, 1.0], count)
    dx = sign * 2.0 * sigma * 10.0 ** rng.uniform(-ratio_decades, ratio_decades, count)

    band = w0 * sigma
    theta_x1 = rng.uniform(-band, band)
    slope_f = rng.uniform(-w0, w0, count)
    q_hi = (band - theta_x1) / dx
    q_lo = (-band - theta_x1) / dx
    lo = np.maximum(-w0, slope_f - np.maximum(q_hi, q_lo))
    hi = np.minimum(w0, slope_f - np.minimum(q_hi, q_lo))
    slope_g = rng.uniform(lo, hi)

    offset = rng.uniform(-band, band)
    f_x1 = offset
    g_x1 = offset - theta_x1
    return KernelArgs(
        dx=dx,
        f_x=f_x1 + slope_f * dx,
        f_x1=f_x1,
        g_x=g_x1 + slope_g * dx,
        g_x1=g_x1,
        df_x1=rng.uniform(-w0, w0, count),
        dg_x1=rng.uniform(-w0, w0, count),
        sigma=sigma,
    )


def sample_params(rng: np.random.Generator, count: int, sigma) -> SampledParams:
    mu1 = rng.uniform(0.1, 0.9, count)
    return SampledParams(mu1=mu1, mu2=1.0 - mu1, sigma=np.asarray(sigma))


class SinusoidField:
    """Smooth test field sum_i A_i sin(k_i x + phi_i), one row of modes per sample."""

    def __init__(self, amplitude: np.ndarray, wavenumber: np.ndarray, phase: np.ndarray):
        self.amplitude = amplitude
        self.wavenumber = wavenumber
        self.phase = phase

    @classmethod
    def random(cls, rng: np.random.Generator, count: int, scale, modes: int = 3) -> "SinusoidField":
        scale = np.reshape(np.asarray(scale, dtype=float), (-1, 1))
        return cls(
            amplitude=scale * rng.uniform(-1.0, 1.0, (count, modes)),
            wavenumber=rng.uniform(0.5, 3.0, (count, modes)),
            phase=rng.uniform(0.0, 2.0 * np.pi, (count, modes)),
        )

    def __call__(self, x):
        x = np.reshape(np.asarray(x, dtype=float), (-1, 1))
        return np.sum(self.amplitude * np.sin(self.wavenumber * x + self.phase), axis=1)

    def derivative(self, x):
        x = np.reshape(np.asarray(x, dtype=float), (-1, 1))
        return np.sum(self.amplitude * self.wavenumber * np.cos(self.wavenumber * x + self.phase), axis=1)


def _splitting_suite(name: str, evaluator: Callable, settings: VerifySettings,
                 rng: np.random.Generator) -> SuiteRecord:
    args = sample_configurations(rng, settings.samples, settings.w0)
    dec = eval_decomposition(args)
    kernel, error_term = evaluator(args)
    lhs = dec.symmetric_f if evaluator is eval_Kf_ef else dec.symmetric_g
    err = _max(relative_error(lhs, kernel + error_term))
    return SuiteRecord(name, settings.samples, err, err <= settings.tolerance, settings.tolerance)


def splitting_f_suite(settings: VerifySettings, rng) -> SuiteRecord:
    return _splitting_suite("splitting_Kf_ef", eval_Kf_ef, settings, rng)


def splitting_g_suite(settings: VerifySettings, rng) -> SuiteRecord:
    return _splitting_suite("splitting_Kg_eg", eval_Kg_eg, settings, rng)


def antisym_suite(settings: VerifySettings, rng) -> SuiteRecord:
    """Closed-form P12 - P21 against direct subtraction, scaled by the kernel size."""
    args = sample_configurations(rng, settings.samples, settings.w0)
    p12 = eval_P(12, args)
    p21 = eval_P(21, args)
    scale = np.maximum(np.abs(p12), np.abs(p21))
    err = _max(relative_error(eval_antisym(args), p12 - p21, scale))
    tolerance = min(settings.tolerance, 1e-12)
    return SuiteRecord("antisym_closed_form", settings.samples, err, err <= tolerance, tolerance)


def swap_suite(settings: VerifySettings, rng) -> SuiteRecord:
    """P12(x, x1) = -P21(x1, x)."""
    args = sample_configurations(rng, settings.samples, settings.w0)
    direct = eval_P(12, args)
    swapped = -eval_P(21, args.swapped())
    err = _max(relative_error(direct, swapped))
    return SuiteRecord("P12_P21_swap", settings.samples, err, err <= settings.tolerance,
                       settings.tolerance)


def _derivative_targets(args: KernelArgs) -> Dict[str, np.ndarray]:
    dec = eval_decomposition(args)
    return {
        "P11": dec.K11 + dec.J11,
        "P22": dec.K22 + dec.J22,
        "P12": dec.K12 + dec.J12,
        "P12_tilde": dec.K12_tilde + dec.J12_tilde,
        "P21": dec.K21 + dec.J21,
        "P21_tilde": dec.K21_tilde + dec.J21_tilde,
        "P12-P21": eval_antisym_derivative(args),
    }


def _kernel_value(name: str, args: KernelArgs) -> np.ndarray:
    if name == "P12-P21":
        return eval_antisym(args)
    return eval_P(int(name[1:3]), args)


def derivative_suite(settings: VerifySettings, rng) -> List[SuiteRecord]:
    """
    Finite-difference check of every K + J = d/dx1 P decomposition.

    Central differences in x1 at steps rho and rho/2 are Richardson-combined
    and compared to the closed form; errors are scaled by dx^2, the natural
    size of d/dx1 P. The observed order of the plain central difference is
    measured at a coarser step where truncation dominates rounding. It must reach
    second order up to ``ORDER_TOLERANCE``.
    """
    count = settings.derivative_samples
    sigma = rng.uniform(0.01, 0.5, count)
    x1 = rng.uniform(-np.pi, np.pi, count)
    dx = rng.choice([-1.0, 1.0], count) * rng.uniform(0.05, 5.0, count)
    x = x1 + dx
    f = SinusoidField.random(rng, count, 0.1 * sigma)
    g = SinusoidField.random(rng, count, 0.1 * sigma)

    def args_at(shift):
        return KernelArgs.from_functions(x, x1 + shift, f, g, f.derivative, g.derivative, sigma)

    def central(name, rho):
        return (_kernel_value(name, args_at(rho)) - _kernel_value(name, args_at(-rho))) / (2.0 * rho)

    targets = _derivative_targets(args_at(0.0))
    rho = settings.derivative_step
    rho_order = 10.0 * rho
    scale = dx * dx
    records = []
    for name, exact in targets.items():
        richardson = (4.0 * central(name, 0.5 * rho) - central(name, rho)) / 3.0
        err = _max(np.abs(richardson - exact) * scale)
        coarse = _max(np.abs(central(name, rho_order) - exact) * scale)
        fine = _max(np.abs(central(name, 0.5 * rho_order) - exact) * scale)
        order = math.log2(coarse / fine) if fine > 0.0 and coarse > 0.0 else float("inf")
        passed = err <= settings.derivative_tolerance and order >= settings.min_order
        records.append(SuiteRecord(
            f"derivative_{name}", count, err, passed, settings.derivative_tolerance,
            detail={"observed_order": order},
        ))
    return records


def positivity_suite(settings: VerifySettings, rng) -> SuiteRecord:
    """Q >= margin (D0_11 |A|^2 + mu1^2 mu2^2 D0_22 |B|^2) on random complex pairs."""
    count = settings.samples
    args = sample_configurations(rng, count, settings.w0)
    params = sample_params(rng, count, args.sigma)
    a = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    b = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    excess = positivity_margin(args, params, a, b, settings.margin)
    d011, d022 = eval_D0(args.dx, params)
    floor = d011 * np.abs(a) ** 2 + (params.mu1 * params.mu2) ** 2 * d022 * np.abs(b) ** 2
    violation = _max(np.maximum(0.0, -excess) / floor)
    regime = "in_regime" if settings.w0 <= REGIME_W0_LIMIT else "out_of_regime"
    return SuiteRecord("positivity_quadratic_form", count, violation, violation == 0.0, 0.0, regime,
                       detail={"min_excess_ratio": float(np.min(excess / floor)) if count else 0.0})


def sandwich_suite(settings: VerifySettings, rng) -> SuiteRecord:
    """dx^2 D0_11 stays in [7/16, 1]."""
    count = settings.samples
    args = sample_configurations(rng, count, settings.w0)
    params = sample_params(rng, count, args.sigma)
    d011, _ = eval_D0(args.dx, params)
    scaled = np.asarray(args.dx) ** 2 * d011
    slack = 1e-12
    violation = _max(np.maximum(SANDWICH_LOWER - scaled, 0.0) + np.maximum(scaled - SANDWICH_UPPER, 0.0))
    return SuiteRecord("D0_11_sandwich", count, violation, violation <= slack, slack)


def product_suite(settings: VerifySettings, rng) -> SuiteRecord:
    """|prod a - prod b| <= prod m sum |a - b|/m on complex tuples of length 1..8."""
    count = settings.samples
    lengths = rng.integers(1, 9, count)
    worst = 0.0
    for length in range(1, 9):
        rows = int(np.count_nonzero(lengths == length))
        if rows == 0:
            continue
        a = rng.standard_normal((rows, length)) + 1j * rng.standard_normal((rows, length))
        b = a + 0.1 * (rng.standard_normal((rows, length)) + 1j * rng.standard_normal((rows, length)))
        lhs, rhs = product_difference_bound(a, b)
        excess = np.maximum(lhs - rhs, 0.0) / np.maximum(rhs, np.finfo(float).tiny)
        worst = max(worst, _max(excess))
    slack = 1e-12
    return SuiteRecord("product_difference", count, worst, worst <= slack, slack)


def weight_suite(settings: VerifySettings, rng=None, points: int = 100) -> SuiteRecord:
    """Dissipation weight lies in [0, min(|xi|, sigma xi^2)] on a (xi, sigma) grid."""
    xi, sigma = np.meshgrid(np.logspace(-4, 4, points), np.logspace(-4, -1e-3, points))
    weight = dissipation_weight(xi, sigma)
    bound = np.minimum(xi, sigma * xi * xi)
    slack = 1e-12
    over = np.maximum(weight - bound, 0.0) / bound
    under = np.maximum(-weight, 0.0) / bound
    violation = _max(np.maximum(over, under))
    return SuiteRecord("dissipation_weight_bounds", xi.size, violation, violation <= slack, slack)


SUITES = {
    "splitting_Kf_ef": splitting_f_suite,
    "splitting_Kg_eg": splitting_g_suite,
    "antisym_closed_form": antisym_suite,
    "P12_P21_swap": swap_suite,
    "derivatives": derivative_suite,
    "positivity_quadratic_form": positivity_suite,
    "D0_11_sandwich": sandwich_suite,
    "product_difference": product_suite,
    "dissipation_weight_bounds": weight_suite,
}


def run_suites(settings: VerifySettings, max_workers: int = 4,
               names: Optional[List[str]] = None) -> List[SuiteRecord]:
    """
    Run the certification suites in a thread pool.

    Args:
        settings: Sample counts, w0, tolerances, seed
        max_workers: Concurrent suites
        names: Subset of SUITES to run (default: all)

    Returns:
        Records sorted by identity name
    """
    names = list(names or SUITES)
    streams = np.random.SeedSequence(settings.seed).spawn(len(names))
    if settings.samples == 0:
        logger.warning("⚠ zero samples requested: suites pass vacuously")
        return [SuiteRecord(name, 0, 0.0, True, settings.tolerance) for name in sorted(names)]

    records: List[SuiteRecord] = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_suite = {
            executor.submit(SUITES[name], settings, np.random.default_rng(stream)): name
            for name, stream in zip(names, streams)
        }
        for future in as_completed(future_to_suite):
            name = future_to_suite[future]
            result = future.result()
            batch = result if isinstance(result, list) else [result]
            for record in batch:
                marker = "✓" if record.passed else "✗"
                logger.info("%s %s: max_rel_err=%.2e (%s)", marker, record.identity,
                            record.max_rel_err, record.regime)
            records.extend(batch)
            logger.debug("suite %s finished", name)
    return sorted(records, key=lambda r: r.identity)


def overall_pass(records: List[SuiteRecord]) -> bool:
    """All in-regime records pass; out-of-regime records are informational."""
    return all(r.passed for r in records if r.regime != "out_of_regime")
