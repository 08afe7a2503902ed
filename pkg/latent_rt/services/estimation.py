"""
Maximum-likelihood estimation with a Nelder-Mead simplex on the unconstrained
parameter vector.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from latent_rt.core.errors import (
    ConfigurationError,
    DegenerateConditioningError,
    InvalidParameterError,
    LatentRTError,
    NumericalFailureError,
    OptimizationError,
    RankDeficientDesignWarning,
)
from latent_rt.services.likelihood import DEFAULT_ORDER, gh_rule, log_likelihood
from latent_rt.services.model_core import (
    ModelSpec,
    ParamLayout,
    Parameters,
    RandomEffectsCov,
    UnconstrainedParams,
)
from latent_rt.services.simulator import Dataset

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


# --- Nelder-Mead ---

@dataclass(frozen=True)
class NelderMeadConfig:
    """
    Simplex coefficients, stopping rule and initial simplex.

    The run stops when the simplex diameter (max-norm distance of every vertex
    to the best one) is at most xatol and the spread of vertex values is at
    most fatol, or after max_evals evaluations (default 20000 per dimension).
    The budget is never exceeded except by the dim + 1 evaluations of the
    initial simplex.
    Initial steps are max(step_abs, step_rel * |x0_i|) along each axis.
    """
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    xatol: float = 1e-6
    fatol: float = 1e-8
    max_evals: Optional[int] = None
    step_abs: float = 0.05
    step_rel: float = 0.1
    record_trace: bool = True


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_evals: int
    n_iter: int
    n_nonfinite: int
    diameter: float
    f_spread: float
    trace: List[Tuple[float, float]] = field(default_factory=list)


def initial_steps(x0: np.ndarray, config: NelderMeadConfig) -> np.ndarray:
    return np.maximum(config.step_abs, config.step_rel * np.abs(np.asarray(x0, dtype=float)))


def nelder_mead(objective: Objective, x0: Any, config: Optional[NelderMeadConfig] = None,
                steps: Optional[np.ndarray] = None) -> NelderMeadResult:
    """
    Minimizes objective with the Nelder-Mead simplex method.

    Vertices are kept sorted by value with ties broken by vertex position, so
    the run is deterministic given (x0, config). A non-finite value at a trial
    point counts as +inf and the point is never accepted over a finite one.

    Args:
        objective: Function of a real vector.
        x0: Start point.
        config: Coefficients and tolerances.
        steps: Per-axis steps of the initial simplex; defaults to initial_steps.

    Raises:
        OptimizationError: If objective is not finite at x0.
    """
    config = config or NelderMeadConfig()
    x0 = np.asarray(x0, dtype=float).reshape(-1).copy()
    dim = x0.size
    max_evals = config.max_evals or 20000 * max(dim, 1)
    n_evals = 0
    n_nonfinite = 0

    def f(x: np.ndarray) -> float:
        nonlocal n_evals, n_nonfinite
        n_evals += 1
        value = float(objective(x))
        if not math.isfinite(value):
            n_nonfinite += 1
            return math.inf
        return value

    f0 = f(x0)
    if not math.isfinite(f0):
        raise OptimizationError("objective is not finite at the start point", theta=x0)
    if dim == 0:
        return NelderMeadResult(x0, f0, True, n_evals, 0, n_nonfinite, 0.0, 0.0, [(f0, 0.0)])

    steps = initial_steps(x0, config) if steps is None else np.asarray(steps, dtype=float)
    simplex = np.vstack([x0, x0 + np.diag(steps)])
    fvals = np.array([f0] + [f(v) for v in simplex[1:]])

    trace: List[Tuple[float, float]] = []
    converged = False
    n_iter = 0
    while True:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        diameter = float(np.max(np.abs(simplex[1:] - simplex[0])))
        spread = float(fvals[-1] - fvals[0]) if math.isfinite(fvals[-1]) else math.inf
        if config.record_trace:
            trace.append((float(fvals[0]), diameter))
        if diameter <= config.xatol and spread <= config.fatol:
            converged = True
            break
        if n_evals >= max_evals:
            break
        n_iter += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + config.reflection * (centroid - worst)
        fr = f(xr)
        # Once the budget is spent the reflection is the last trial point
        spent = n_evals >= max_evals
        if fr < fvals[0] and not spent:
            xe = centroid + config.expansion * (xr - centroid)
            fe = f(xe)
            simplex[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fvals[-2] or (spent and fr < fvals[-1]):
            simplex[-1], fvals[-1] = xr, fr
            continue
        if spent:
            continue
        if fr < fvals[-1]:
            # Outside contraction
            xc = centroid + config.contraction * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            # Inside contraction
            xc = centroid + config.contraction * (worst - centroid)
            fc = f(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        for v in range(1, dim + 1):
            if n_evals >= max_evals:
                break
            simplex[v] = simplex[0] + config.shrink * (simplex[v] - simplex[0])
            fvals[v] = f(simplex[v])

    return NelderMeadResult(
        x=simplex[0].copy(), fun=float(fvals[0]), converged=converged, n_evals=n_evals,
        n_iter=n_iter, n_nonfinite=n_nonfinite, diameter=diameter, f_spread=spread, trace=trace,
    )


# --- Standard errors ---

@dataclass
class HessianReport:
    """Central-difference Hessian and the standard errors it implies; se is None when it cannot be inverted."""
    hessian: np.ndarray
    se: Optional[np.ndarray]
    singular: bool
    message: str = ""


SINGULAR_RTOL = 1e-10


def numerical_hessian_se(objective: Objective, theta_hat: Any, step: float = 1e-4) -> HessianReport:
    """
    Standard errors sqrt(diag(H^-1)) from a central-difference Hessian H of
    objective (a negative log-likelihood) at theta_hat.

    The step along axis i is step * max(1, |theta_i|). A Hessian that is not
    finite or not positive definite yields se=None with singular=True.
    """
    x = np.asarray(theta_hat, dtype=float).reshape(-1)
    d = x.size
    h = step * np.maximum(1.0, np.abs(x))
    f0 = float(objective(x))
    hessian = np.zeros((d, d))

    def at(*moves: Tuple[int, float]) -> float:
        y = x.copy()
        for axis, sign in moves:
            y[axis] += sign * h[axis]
        return float(objective(y))

    for i in range(d):
        hessian[i, i] = (at((i, 1)) - 2.0 * f0 + at((i, -1))) / h[i] ** 2
        for j in range(i):
            value = (at((i, 1), (j, 1)) - at((i, 1), (j, -1))
                     - at((i, -1), (j, 1)) + at((i, -1), (j, -1))) / (4.0 * h[i] * h[j])
            hessian[i, j] = hessian[j, i] = value

    if not np.all(np.isfinite(hessian)):
        return HessianReport(hessian, None, True, "Hessian has non-finite entries")
    eig = np.linalg.eigvalsh(hessian) if d else np.zeros(0)
    if d and eig.min() <= SINGULAR_RTOL * max(np.abs(eig).max(), np.finfo(float).tiny):
        logger.warning("Hessian is singular or indefinite (smallest eigenvalue %.3g); no standard errors", eig.min())
        return HessianReport(hessian, None, True, f"smallest eigenvalue {eig.min():.3g}")
    covariance = np.linalg.inv(hessian) if d else np.zeros((0, 0))
    return HessianReport(hessian, np.sqrt(np.diag(covariance)), False)


# --- Starting values ---

def _least_squares(design: np.ndarray, response: np.ndarray, label: str) -> np.ndarray:
    d = design.shape[1]
    if d == 0:
        return np.zeros(0)
    coef, _, rank, _ = np.linalg.lstsq(design, response, rcond=None)
    if rank < d or response.size < d:
        message = f"{label}: design has rank {rank} < {d}; starting from zero coefficients"
        logger.warning(message)
        warnings.warn(message, RankDeficientDesignWarning, stacklevel=3)
        return np.zeros(d)
    return coef


def initial_guess(dataset: Dataset, spec: Optional[ModelSpec] = None) -> Parameters:
    """
    Starting values: pooled least squares for the fixed effects, the 10th and
    90th percentiles of the increments for the boundaries, Sigma_B = 0.1 I and
    rho = 0.

    Raises:
        ConfigurationError: If the dataset is empty.
    """
    spec = spec or dataset.spec
    if spec.m == 0 or not dataset.subjects:
        raise ConfigurationError("cannot start an estimate from an empty dataset")
    ys = np.stack([s.y for s in dataset.subjects])
    rs = np.stack([s.r_star for s in dataset.subjects])
    beta1, beta2 = [], []
    for j in range(spec.p):
        x1 = np.repeat(dataset.design.v1[j], spec.n, axis=0)
        x2 = np.repeat(dataset.design.v2[j], spec.n, axis=0)
        y_j = ys[:, :, j].ravel()
        r_j = rs[:, :, j].ravel()
        keep = np.isfinite(r_j)
        beta1.append(_least_squares(spec.dt * x1, y_j, f"beta1[{j}]"))
        beta2.append(_least_squares(x2[keep], r_j[keep], f"beta2[{j}]"))
    a1, a2 = (float(v) for v in np.percentile(ys, [10.0, 90.0]))
    if not a2 > a1:
        a2 = a1 + 1.0
    return Parameters(
        beta1=tuple(beta1), beta2=tuple(beta2), a1=a1, a2=a2,
        sigma_b=RandomEffectsCov.identity(spec.q1, spec.q2, scale=0.1), rho=0.0,
    )


# --- Fitting ---

@dataclass(frozen=True)
class FitConfig:
    """
    Estimation settings. Restarts begin at the best point with a fresh simplex
    whose steps are scaled by 1 + restart_jitter * U(-1, 1), U drawn from a
    generator seeded with seed.
    """
    nelder_mead: NelderMeadConfig = field(default_factory=NelderMeadConfig)
    restarts: int = 2
    seed: int = 0
    restart_jitter: float = 0.25
    estimate_rho: bool = True
    estimate_sigma12: bool = True
    hessian_se: bool = False
    hessian_step: float = 1e-4
    quad_order: int = DEFAULT_ORDER
    mode: str = "gauss-hermite"
    mc_samples: int = 100_000
    mc_seed: int = 0
    threads: Optional[int] = None


@dataclass
class FitResult:
    params_hat: Parameters
    theta_hat: UnconstrainedParams
    loglik: float
    n_evals: int
    converged: bool
    restarts_used: int
    se: Optional[np.ndarray] = None
    trace: Optional[List[Tuple[float, float]]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params_hat": self.params_hat.to_dict(),
            "theta_hat": self.theta_hat.theta.tolist(),
            "loglik": self.loglik,
            "n_evals": self.n_evals,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "se": None if self.se is None else self.se.tolist(),
            "trace": None if self.trace is None else [list(t) for t in self.trace],
        }


def make_objective(dataset: Dataset, layout: ParamLayout, config: FitConfig) -> Objective:
    """Negative log-likelihood as a function of theta; likelihood errors propagate."""
    spec = dataset.spec
    if config.mode == "gauss-hermite":
        rule = gh_rule(config.quad_order, spec.q) if spec.q else None

        def negative_log_likelihood(theta: np.ndarray) -> float:
            return -log_likelihood(dataset, layout.unpack(theta), rule, config.threads)
    elif config.mode == "monte-carlo":
        from latent_rt.services.oracle import mc_log_likelihood

        def negative_log_likelihood(theta: np.ndarray) -> float:
            estimate = mc_log_likelihood(dataset, layout.unpack(theta), config.mc_samples,
                                         config.mc_seed, threads=config.threads)
            return -estimate.estimate
    else:
        raise ConfigurationError(f"unknown integration mode {config.mode!r}")
    return negative_log_likelihood


def _rejecting(objective: Objective) -> Objective:
    """Turns likelihood failures at trial points into +inf."""
    def wrapped(theta: np.ndarray) -> float:
        try:
            return objective(theta)
        except (DegenerateConditioningError, NumericalFailureError, InvalidParameterError) as e:
            logger.debug("Rejected trial point: %s", e)
            return math.inf
    return wrapped


def fit(dataset: Dataset, spec: Optional[ModelSpec] = None, config: Optional[FitConfig] = None,
        init: Optional[Parameters] = None) -> FitResult:
    """
    Maximizes the marginal log-likelihood.

    Runs Nelder-Mead on the negative log-likelihood from pack(init or
    initial_guess), then up to config.restarts restarts from the best point;
    a restart that improves by no more than fatol after a converged run ends
    the sequence. converged reflects the final run.

    Raises:
        OptimizationError: If the likelihood fails at the start point (theta attached).
    """
    spec = spec or dataset.spec
    config = config or FitConfig()
    nm = config.nelder_mead
    start = init or initial_guess(dataset, spec)
    start.check_against(spec)
    layout = ParamLayout.for_spec(spec, config.estimate_rho, config.estimate_sigma12, fixed_rho=start.rho)
    theta0 = layout.pack(start).theta

    strict = make_objective(dataset, layout, config)
    try:
        strict(theta0)
    except LatentRTError as e:
        raise OptimizationError(f"likelihood failed at the start point: {e}", theta=theta0) from e
    objective = _rejecting(strict)

    rng = np.random.default_rng(config.seed)
    result = nelder_mead(objective, theta0, nm)
    n_evals = result.n_evals
    trace = list(result.trace)
    logger.info("Nelder-Mead run 1: -loglik=%.10g after %d evaluations (converged=%s)",
                result.fun, result.n_evals, result.converged)

    restarts_used = 0
    for _ in range(config.restarts):
        jitter = 1.0 + config.restart_jitter * rng.uniform(-1.0, 1.0, size=theta0.size)
        previous = result
        result = nelder_mead(objective, previous.x, nm, steps=initial_steps(previous.x, nm) * jitter)
        restarts_used += 1
        n_evals += result.n_evals
        trace.extend(result.trace)
        logger.info("Nelder-Mead restart %d: -loglik=%.10g after %d evaluations (converged=%s)",
                    restarts_used, result.fun, result.n_evals, result.converged)
        if previous.converged and result.converged and previous.fun - result.fun <= nm.fatol:
            break

    se = None
    if config.hessian_se:
        report = numerical_hessian_se(objective, result.x, config.hessian_step)
        se = report.se

    return FitResult(
        params_hat=layout.unpack(result.x),
        theta_hat=UnconstrainedParams(theta=result.x, layout=layout),
        loglik=-result.fun,
        n_evals=n_evals,
        converged=result.converged,
        restarts_used=restarts_used,
        se=se,
        trace=trace if nm.record_trace else None,
    )
