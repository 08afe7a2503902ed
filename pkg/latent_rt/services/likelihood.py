"""
Marginal log-likelihood of the joint model.

Given the random effects, every cell (i, j) contributes the Joe density of its
log reaction time conditioned on the crossing event times the probability of
that event. The random effects are integrated out per subject by a
tensor-product Gauss-Hermite rule mapped through the Cholesky factor of
Sigma_B, and the subject terms are combined in log space.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from latent_rt.core.errors import (
    ConfigurationError,
    DegenerateConditioningError,
    NumericalFailureError,
)
from latent_rt.services.model_core import Parameters
from latent_rt.services.parallel import ordered_map
from latent_rt.services.probability import (
    OMEGA11_FLOOR,
    crossing_probs,
    joe_conditional_log_density,
    omega11,
)
from latent_rt.services.simulator import Dataset, SubjectData

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 15
MAX_ORDER = 100
# Largest q1 + q2 integrated by tensor Gauss-Hermite (15^4 = 50625 points)
MAX_GH_DIM = 4


@dataclass(frozen=True)
class QuadratureRule:
    """
    Gauss-Hermite rule for the weight exp(-x^2) (physicists' convention),
    applied as a tensor product over dim dimensions.
    """
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    dim: int = 1

    def with_dim(self, dim: int) -> "QuadratureRule":
        return QuadratureRule(self.order, self.nodes, self.weights, dim)

    def tensor(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Tensor-product points of shape (N, dim) and log weights normalized so
        they sum to one (product weights divided by pi^(dim/2)).
        """
        if self.dim == 0:
            return np.zeros((1, 0)), np.zeros(1)
        log_w = np.log(self.weights / np.sqrt(np.pi))
        grids = np.meshgrid(*([self.nodes] * self.dim), indexing="ij")
        weight_grids = np.meshgrid(*([log_w] * self.dim), indexing="ij")
        points = np.stack([g.ravel() for g in grids], axis=1)
        log_weights = np.sum([g.ravel() for g in weight_grids], axis=0)
        return points, log_weights


def gh_rule(order: int, dim: int = 1) -> QuadratureRule:
    """
    Gauss-Hermite nodes and weights, exact for polynomials up to degree
    2 * order - 1 against exp(-x^2).

    Raises:
        ConfigurationError: If order is outside 1..100.
    """
    if not 1 <= int(order) <= MAX_ORDER:
        raise ConfigurationError(f"quadrature order must lie in 1..{MAX_ORDER}, got {order}")
    nodes, weights = hermgauss(int(order))
    return QuadratureRule(order=int(order), nodes=nodes, weights=weights, dim=int(dim))


@dataclass(frozen=True)
class LikelihoodEvaluation:
    loglik: float
    per_subject: np.ndarray
    clamp_events: int
    quadrature_order: Optional[int]


def subject_log_terms(subject: SubjectData, params: Parameters, b1s: np.ndarray, b2s: np.ndarray,
                      dt: float = 1.0) -> Tuple[np.ndarray, int]:
    """
    Log-integrand of one subject at N random-effect points.

    Args:
        subject: The subject's observations and covariates.
        params: Model parameters.
        b1s: (N, q1) values of b(1).
        b2s: (N, q2) values of b(2).
        dt: Time increment.

    Returns:
        The (N,) log-integrand values and the number of clamped crossing
        probabilities.

    Raises:
        DegenerateConditioningError: With the subject and cell attached.
    """
    cov = subject.covariates
    fixed1, fixed2 = cov.fixed_parts(params.beta1, params.beta2)
    eta1 = (dt * (fixed1 + b1s @ cov.u1.T))[:, None, :]
    eta2 = (fixed2 + b2s @ cov.u2.T)[:, None, :]
    cp = crossing_probs(params.a1, params.a2, eta1)
    try:
        log_density = joe_conditional_log_density(
            subject.r_star[None, :, :], eta1, eta2, params.a1, params.a2, params.rho, cp=cp,
        )
    except DegenerateConditioningError as e:
        shape = (eta1.shape[0],) + subject.r_star.shape
        degenerate = np.broadcast_to(np.asarray(omega11(cp)) < OMEGA11_FLOOR, shape)
        _, i, j = np.argwhere(degenerate)[0]
        raise e.at(subject=subject.index, time_index=int(i) + 1, outcome=int(j) + 1) from e
    terms = np.asarray(log_density) + np.log(np.asarray(cp.p_event))
    # Sorted before summing so any cell order gives the same bits
    flat = np.sort(terms.reshape(terms.shape[0], -1), axis=1)
    return flat.sum(axis=1), cp.n_clamped


def subject_log_integrand(subject: SubjectData, params: Parameters, b: np.ndarray, dt: float = 1.0) -> float:
    """
    Log of the subject's integrand at one point b = (b(1), b(2)):

        sum over cells of log joe_conditional_density + log p_event
    """
    q1 = params.sigma_b.q1
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != q1 + params.sigma_b.q2:
        raise ConfigurationError(f"random-effects point has length {b.size}, expected {q1 + params.sigma_b.q2}")
    values, _ = subject_log_terms(subject, params, b[None, :q1], b[None, q1:], dt)
    return float(values[0])


def _check_inputs(dataset: Dataset, params: Parameters) -> None:
    params.check_against(dataset.spec)
    for s in dataset.subjects:
        if np.any(np.isnan(s.r_star)):
            raise ConfigurationError(
                f"subject {s.index} has censored reaction times; the likelihood needs r_star in every cell"
            )


def evaluate_log_likelihood(dataset: Dataset, params: Parameters, rule: Optional[QuadratureRule] = None,
                            threads: Optional[int] = None) -> LikelihoodEvaluation:
    """
    Gauss-Hermite marginal log-likelihood with per-subject terms and clamp count.

    Args:
        dataset: Observations.
        params: Parameters at which to evaluate.
        rule: Quadrature rule of dimension q1 + q2; defaults to order 15.
            Ignored when the model has no random effects.
        threads: Worker threads for subject terms.

    Raises:
        ConfigurationError: If the rule dimension does not match q1 + q2.
        NumericalFailureError: If a subject term is not finite.
    """
    _check_inputs(dataset, params)
    spec = dataset.spec
    q1 = spec.q1
    if spec.q == 0:
        points, log_w = np.zeros((1, 0)), np.zeros(1)
        order = None
    else:
        rule = rule or gh_rule(DEFAULT_ORDER, spec.q)
        if rule.dim != spec.q:
            raise ConfigurationError(f"quadrature rule has dimension {rule.dim}, model has q1+q2={spec.q}")
        nodes, log_w = rule.tensor()
        points = np.sqrt(2.0) * nodes @ params.sigma_b.cholesky().T
        order = rule.order
    b1s, b2s = points[:, :q1], points[:, q1:]

    def one(subject: SubjectData) -> Tuple[float, int]:
        terms, clamps = subject_log_terms(subject, params, b1s, b2s, spec.dt)
        value = float(logsumexp(log_w + terms))
        if not math.isfinite(value):
            raise NumericalFailureError("log-likelihood term is not finite", subject=subject.index)
        return value, clamps

    results = ordered_map(one, list(dataset.subjects), threads)
    per_subject = np.array([r[0] for r in results])
    clamp_events = sum(r[1] for r in results)
    loglik = math.fsum(per_subject)
    logger.debug("log-likelihood %.10g over %d subjects (%d clamp events)", loglik, spec.m, clamp_events)
    return LikelihoodEvaluation(loglik=loglik, per_subject=per_subject,
                                clamp_events=clamp_events, quadrature_order=order)


def log_likelihood(dataset: Dataset, params: Parameters, rule: Optional[QuadratureRule] = None,
                   threads: Optional[int] = None) -> float:
    """Marginal log-likelihood; see evaluate_log_likelihood."""
    return evaluate_log_likelihood(dataset, params, rule, threads).loglik
