"""
Brute-force validators for the kernels and the likelihood integral.

These are slow paths kept in the library so `latent-rt check` can run them on
an installed build. Each one reaches its answer by a route disjoint from the
kernel it checks: sampling instead of quadrature, simulation instead of the
Joe correction, and 2-D Simpson integration of the explicit bivariate
density instead of the Drezner-Wesolowsky series. Randomness is drawn from
the ORACLE_STREAM namespace, never the simulator's.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from latent_rt.core.errors import ConfigurationError, InsufficientSamplesError, InvalidParameterError
from latent_rt.services import probability
from latent_rt.services.likelihood import _check_inputs, gh_rule, log_likelihood, subject_log_terms
from latent_rt.services.model_core import CovariateDesign, ModelSpec, Parameters, RandomEffectsCov
from latent_rt.services.parallel import ordered_map
from latent_rt.services.simulator import ORACLE_STREAM, Dataset, SubjectData, simulate_dataset, stream

logger = logging.getLogger(__name__)

MIN_MC_SAMPLES = 1000
MIN_ECDF_SAMPLES = 100_000
MIN_EVENT_SAMPLES = 100
MIN_RESOLUTION = 200
RECTANGLE_LOWER = -8.0


@dataclass(frozen=True)
class OracleReport:
    name: str
    statistic: float
    threshold: float
    passed: bool
    n_samples: int

    @classmethod
    def judge(cls, name: str, statistic: float, threshold: float, n_samples: int) -> "OracleReport":
        statistic = float(statistic)
        return cls(name, statistic, float(threshold), bool(statistic <= threshold), int(n_samples))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class MCEstimate:
    """Monte-Carlo log-likelihood with its delta-method standard error."""
    estimate: float
    se: float
    n_samples: int


# --- Monte-Carlo likelihood ---

def mc_log_likelihood(dataset: Dataset, params: Parameters, n_samples: int = 100_000, seed: int = 0,
                      chunk_size: int = 50_000, threads: Optional[int] = None) -> MCEstimate:
    """
    Marginal log-likelihood by plain Monte Carlo over the random effects.

    Subject k averages exp(log-integrand) over n_samples draws b = L z from
    stream (seed, ORACLE_STREAM, k), drawn chunk by chunk; the log of the mean
    and the log of the mean square are accumulated with log-sum-exp. The
    delta-method variance of log(mean) is (mean(e^2l) / mean(e^l)^2 - 1) / N,
    summed over subjects.

    Raises:
        ConfigurationError: If n_samples < 1000.
    """
    if int(n_samples) < MIN_MC_SAMPLES:
        raise ConfigurationError(f"Monte-Carlo likelihood needs at least {MIN_MC_SAMPLES} samples, got {n_samples}")
    spec = dataset.spec
    if spec.q == 0:
        return MCEstimate(log_likelihood(dataset, params, threads=threads), 0.0, 0)
    _check_inputs(dataset, params)
    n_samples = int(n_samples)
    lower = params.sigma_b.cholesky()
    q1 = spec.q1

    def one(subject: SubjectData) -> Tuple[float, float]:
        rng = stream(seed, ORACLE_STREAM, subject.index)
        sums, squares = [], []
        remaining = n_samples
        while remaining:
            size = min(chunk_size, remaining)
            b = rng.standard_normal((size, spec.q)) @ lower.T
            terms, _ = subject_log_terms(subject, params, b[:, :q1], b[:, q1:], spec.dt)
            sums.append(logsumexp(terms))
            squares.append(logsumexp(2.0 * terms))
            remaining -= size
        log_mean = float(logsumexp(sums)) - math.log(n_samples)
        log_mean_sq = float(logsumexp(squares)) - math.log(n_samples)
        ratio = math.exp(log_mean_sq - 2.0 * log_mean)
        return log_mean, max(ratio - 1.0, 0.0) / n_samples

    results = ordered_map(one, list(dataset.subjects), threads)
    estimate = math.fsum(r[0] for r in results)
    se = math.sqrt(math.fsum(r[1] for r in results))
    logger.debug("Monte-Carlo log-likelihood %.10g (se %.3g, %d draws per subject)", estimate, se, n_samples)
    return MCEstimate(estimate, se, n_samples)


# --- Conditional CDF by simulation ---

def empirical_conditional_cdf(eta1: float, eta2: float, a1: float, a2: float, rho: float, r_grid: Any,
                              n_samples: int = 1_000_000, seed: int = 0) -> np.ndarray:
    """
    Empirical P(log R <= r | Y < a1 or Y > a2) at each grid point, from
    n_samples simulated pairs (Y, log R) with unit variances and correlation rho.

    Raises:
        ConfigurationError: If n_samples < 1e5.
        InsufficientSamplesError: If fewer than 100 pairs fall in the event.
    """
    if int(n_samples) < MIN_ECDF_SAMPLES:
        raise ConfigurationError(f"empirical CDF needs at least {MIN_ECDF_SAMPLES} samples, got {n_samples}")
    if not -1.0 < rho < 1.0:
        raise InvalidParameterError(f"rho must lie in (-1, 1), got {rho}")
    rng = stream(seed, ORACLE_STREAM, 0)
    z = rng.standard_normal((int(n_samples), 2))
    y = eta1 + z[:, 0]
    log_r = eta2 + rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1]
    kept = np.sort(log_r[(y < a1) | (y > a2)])
    if kept.size < MIN_EVENT_SAMPLES:
        raise InsufficientSamplesError(
            f"only {kept.size} of {n_samples} samples fall in the crossing event; need {MIN_EVENT_SAMPLES}"
        )
    return np.searchsorted(kept, np.asarray(r_grid, dtype=float), side="right") / kept.size


# --- Bivariate normal rectangle ---

def integrate_bvn_rectangle(z1: float, z2: float, rho: float, resolution: int = 400) -> float:
    """
    P(Z1 <= z1, Z2 <= z2) by composite Simpson integration of the bivariate
    normal density over (-8, z1] x (-8, z2], upper limits capped at 8.

    Raises:
        ConfigurationError: If resolution < 200.
        InvalidParameterError: If |rho| >= 1.
    """
    if int(resolution) < MIN_RESOLUTION:
        raise ConfigurationError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    if not -1.0 < rho < 1.0:
        raise InvalidParameterError(f"rho must lie in (-1, 1), got {rho}")
    hi1, hi2 = min(z1, -RECTANGLE_LOWER), min(z2, -RECTANGLE_LOWER)
    if hi1 <= RECTANGLE_LOWER or hi2 <= RECTANGLE_LOWER:
        return 0.0
    # Simpson wants an even number of intervals
    points = int(resolution) + (1 if int(resolution) % 2 == 0 else 2)
    x = np.linspace(RECTANGLE_LOWER, hi1, points)
    y = np.linspace(RECTANGLE_LOWER, hi2, points)
    xx, yy = np.meshgrid(x, y, indexing="ij")
    det = 1.0 - rho * rho
    density = np.exp(-(xx * xx - 2.0 * rho * xx * yy + yy * yy) / (2.0 * det)) / (2.0 * np.pi * math.sqrt(det))
    inner = integrate.simpson(density, x=y, axis=1)
    return float(integrate.simpson(inner, x=x))


# --- Reference problem ---

def reference_problem(seed: int = 2024) -> Tuple[Dataset, Parameters]:
    """
    Small dataset used by the full check and the tests: m=20, n=3, p=1,
    intercept-only designs with q1=q2=1 and Sigma_B=[[0.25, 0.1], [0.1, 0.25]].
    """
    spec = ModelSpec(m=20, n=3, p=1, q1=1, q2=1)
    params = Parameters(
        beta1=(np.array([0.5]),), beta2=(np.array([1.0]),), a1=-1.0, a2=1.5,
        sigma_b=RandomEffectsCov.from_matrix([[0.25, 0.1], [0.1, 0.25]], q1=1), rho=0.4,
    )
    design = CovariateDesign.intercept_only(spec.m)
    return simulate_dataset(spec, params, design, seed), params


# --- Check suite ---

def _quick_checks() -> List[OracleReport]:
    reports = []
    z = np.linspace(-8.0, 8.0, 161)
    symmetry = np.max(np.abs(probability.normal_cdf(z) + probability.normal_cdf(-z) - 1.0))
    reports.append(OracleReport.judge("normal_cdf_symmetry", symmetry, 1e-14, z.size))
    reports.append(OracleReport.judge("normal_cdf_at_zero", abs(probability.normal_cdf(0.0) - 0.5), 1e-15, 1))

    rng = stream(0, ORACLE_STREAM, 0)
    eta1 = rng.normal(0.0, 2.0, 1000)
    a1 = rng.normal(-1.0, 1.0, 1000)
    a2 = a1 + rng.uniform(0.1, 3.0, 1000)
    p_low = np.clip(probability.normal_cdf(a1 - eta1), probability.P_CLAMP, 1.0 - probability.P_CLAMP)
    p_high = np.clip(probability.normal_cdf(eta1 - a2), probability.P_CLAMP, 1.0 - probability.P_CLAMP)
    cp = probability.CrossingProbs(p_low, p_high, p_low + p_high, a1 - eta1, a2 - eta1)
    p = p_low + p_high
    identity = np.max(np.abs(np.asarray(probability.omega11(cp)) - p * (1.0 - p)))
    reports.append(OracleReport.judge("omega11_identity", identity, 1e-14, eta1.size))

    r_star = rng.normal(0.0, 2.0, 1000)
    om21 = np.asarray(probability.omega21(r_star, eta1, 0.0, -1.0, 1.0, 0.0))
    reports.append(OracleReport.judge("omega21_zero_at_rho0", np.max(np.abs(om21)), 0.0, r_star.size))

    worst = 0.0
    cases = [(e1, e2, rho) for e1 in (-1.0, 0.0, 1.0, 2.0, 3.0) for e2 in (0.0, 1.5) for rho in (-0.5, 0.5)]
    for e1, e2, rho in cases:
        mass, _ = integrate.quad(
            lambda r: float(probability.joe_conditional_density(r, e1, e2, -1.0, 1.5, rho)),
            -np.inf, np.inf, epsabs=1e-11, epsrel=1e-11, limit=200,
        )
        worst = max(worst, abs(mass - 1.0))
    reports.append(OracleReport.judge("joe_density_normalization", worst, 1e-6, len(cases)))

    arcsine = abs(float(probability.bivariate_normal_cdf(0.0, 0.0, 0.5)) - 1.0 / 3.0)
    reports.append(OracleReport.judge("bvn_arcsine", arcsine, 1e-6, 1))
    return reports


def _full_checks(threads: Optional[int] = None) -> List[OracleReport]:
    reports = []
    grid = np.linspace(-2.0, 2.0, 5)
    worst = 0.0
    for rho in (-0.8, 0.0, 0.8):
        for z1 in grid:
            for z2 in grid:
                kernel = float(probability.bivariate_normal_cdf(z1, z2, rho))
                worst = max(worst, abs(kernel - integrate_bvn_rectangle(z1, z2, rho)))
    reports.append(OracleReport.judge("bvn_vs_rectangle", worst, 1e-6, grid.size ** 2 * 3))

    r_grid = np.linspace(-3.0, 3.0, 25)
    for rho in (-0.5, 0.0, 0.5):
        empirical = empirical_conditional_cdf(0.0, 0.0, -1.0, 1.0, rho, r_grid, n_samples=1_000_000, seed=1)
        joe = np.asarray(probability.joe_conditional_cdf(r_grid, 0.0, 0.0, -1.0, 1.0, rho))
        reports.append(OracleReport.judge(f"joe_vs_empirical_rho={rho:+.1f}",
                                          np.max(np.abs(joe - empirical)), 3e-3, 1_000_000))

    dataset, params = reference_problem()
    ll20 = log_likelihood(dataset, params, gh_rule(20, 2), threads)
    ll30 = log_likelihood(dataset, params, gh_rule(30, 2), threads)
    mc = mc_log_likelihood(dataset, params, n_samples=1_000_000, seed=7, threads=threads)
    reports.append(OracleReport.judge("gh_vs_mc_likelihood", abs(ll20 - mc.estimate) / mc.se, 3.0, mc.n_samples))
    reports.append(OracleReport.judge("gh_order_convergence", abs(ll20 - ll30) / abs(ll20), 1e-6, 30))
    return reports


def run_checks(level: str = "quick", threads: Optional[int] = None) -> List[OracleReport]:
    """
    Runs the oracle suite. quick covers the kernel identities; full adds the
    bivariate CDF grid, the simulated conditional CDFs and the likelihood
    integrator comparisons.
    """
    if level not in ("quick", "full"):
        raise ConfigurationError(f"check level must be 'quick' or 'full', got {level!r}")
    reports = _quick_checks()
    if level == "full":
        reports.extend(_full_checks(threads))
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.warning("Oracle checks failed: %s", ", ".join(failed))
    else:
        logger.info("All %d oracle checks passed (%s)", len(reports), level)
    return reports
