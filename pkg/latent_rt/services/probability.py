"""
Scalar and bivariate normal kernels plus the Joe approximation of the
conditional distribution of a log reaction time given a crossing event.

Every function broadcasts over numpy arrays and returns a float for scalar
input. Conditional variances of the increment and the log reaction time are
both one; rho is always a scalar.
"""
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr

from latent_rt.core.errors import DegenerateConditioningError, InvalidParameterError
from latent_rt.services.model_core import RandomEffectsCov

P_CLAMP = 1e-12
OMEGA11_FLOOR = 1e-24
LOG_FLOOR = 1e-300

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_TWO_PI = 2.0 * np.pi

# Arguments beyond this bound change bivariate probabilities by less than 1e-88
# and keep every exponential in the Genz recursion finite.
BVN_Z_BOUND = 20.0

# Gauss-Legendre half-rules (3, 6 and 10 points) used by Genz's BVNU
_GL_X = (
    np.array([-0.9324695142031522, -0.6612093864662647, -0.2386191860831970]),
    np.array([-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
              -0.5873179542866171, -0.3678314989981802, -0.1252334085114692]),
    np.array([-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
              -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
              -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
              -0.07652652113349733]),
)
_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
              0.2031674267230659, 0.2334925365383547, 0.2491470458134029]),
    np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
              0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
              0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
              0.1527533871307259]),
)


def _out(x: np.ndarray) -> Any:
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not abs(rho) < 1:
        raise InvalidParameterError(f"correlation must lie in (-1, 1), got {rho}")
    return rho


# --- Univariate kernels ---

def normal_cdf(z: Any) -> Any:
    """Standard normal CDF, Phi."""
    return _out(ndtr(np.asarray(z, dtype=float)))


def normal_pdf(z: Any) -> Any:
    z = np.asarray(z, dtype=float)
    return _out(np.exp(-0.5 * z * z - _LOG_SQRT_2PI))


def normal_logpdf(z: Any) -> Any:
    z = np.asarray(z, dtype=float)
    return _out(-0.5 * z * z - _LOG_SQRT_2PI)


# --- Bivariate normal CDF ---

def bivariate_normal_cdf(z1: Any, z2: Any, rho: float) -> Any:
    """
    P(Z1 <= z1, Z2 <= z2) for a standard bivariate normal with correlation rho.

    Vectorized port of Genz's BVNU (Drezner-Wesolowsky with Gauss-Legendre
    rules of 3, 6 or 10 points chosen by |rho|), accurate to roughly double
    precision in absolute terms.

    Raises:
        InvalidParameterError: If |rho| >= 1.
    """
    rho = _check_rho(rho)
    z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=float), np.asarray(z2, dtype=float))
    h = -np.clip(z1, -BVN_Z_BOUND, BVN_Z_BOUND)
    k = -np.clip(z2, -BVN_Z_BOUND, BVN_Z_BOUND)
    hk = h * k

    if abs(rho) < 0.3:
        ng = 0
    elif abs(rho) < 0.75:
        ng = 1
    else:
        ng = 2
    xs_nodes, ws = _GL_X[ng], _GL_W[ng]

    if abs(rho) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = np.arcsin(rho)
        bvn = np.zeros_like(hk)
        for x, w in zip(xs_nodes, ws):
            for sign in (1.0, -1.0):
                sn = np.sin(asr * (sign * x + 1.0) / 2.0)
                bvn = bvn + w * np.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / (2.0 * _TWO_PI) + ndtr(-h) * ndtr(-k)
    else:
        if rho < 0:
            k = -k
            hk = -hk
        as_ = (1.0 - rho) * (1.0 + rho)
        a = np.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        bvn = a * np.exp(-(bs / as_ + hk) / 2.0) * (
            1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
        )
        b = np.sqrt(bs)
        tail = (np.exp(-hk / 2.0) * np.sqrt(_TWO_PI) * ndtr(-b / a) * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0))
        bvn = bvn - np.where(hk > -160.0, tail, 0.0)
        a = a / 2.0
        for x, w in zip(xs_nodes, ws):
            xs = (a * (x + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            bvn = bvn + a * w * (
                np.exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs
                - np.exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs))
            )
            xs = as_ * (1.0 - x) ** 2 / 4.0
            rs = np.sqrt(1.0 - xs)
            bvn = bvn + a * w * np.exp(-(bs / xs + hk) / 2.0) * (
                np.exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
                - (1.0 + c * xs * (1.0 + d * xs))
            )
        bvn = -bvn / _TWO_PI
        if rho > 0:
            bvn = bvn + ndtr(-np.maximum(h, k))
        else:
            bvn = -bvn + np.maximum(0.0, ndtr(-h) - ndtr(-k))
    return _out(np.clip(bvn, 0.0, 1.0))


# --- Crossing probabilities ---

@dataclass(frozen=True)
class CrossingProbs:
    """
    Probabilities of the two halves of the crossing event {Y < a1 or Y > a2}.

    p_low and p_high are clamped to [P_CLAMP, 1 - P_CLAMP]; n_clamped counts
    the entries the clamp changed.
    """
    p_low: np.ndarray
    p_high: np.ndarray
    p_event: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    n_clamped: int = 0


def crossing_probs(a1: float, a2: float, eta1: Any, sd: float = 1.0) -> CrossingProbs:
    """
    Computes P(Y < a1) and P(Y > a2) for Y ~ N(eta1, sd^2).

    Args:
        a1: Lower decision boundary.
        a2: Upper decision boundary, a2 > a1.
        eta1: Conditional mean of the increment given b(1); array or scalar.
        sd: Conditional standard deviation of the increment.

    Raises:
        InvalidParameterError: If sd <= 0 or a1 >= a2.
    """
    if not sd > 0:
        raise InvalidParameterError(f"standard deviation must be positive, got {sd}")
    if not a1 < a2:
        raise InvalidParameterError(f"boundaries must satisfy a1 < a2, got a1={a1}, a2={a2}")
    eta1 = np.asarray(eta1, dtype=float)
    m1 = (a1 - eta1) / sd
    m2 = (a2 - eta1) / sd
    raw_low = ndtr(m1)
    raw_high = ndtr(-m2)
    p_low = np.clip(raw_low, P_CLAMP, 1.0 - P_CLAMP)
    p_high = np.clip(raw_high, P_CLAMP, 1.0 - P_CLAMP)
    n_clamped = int(np.count_nonzero(p_low != raw_low) + np.count_nonzero(p_high != raw_high))
    return CrossingProbs(
        p_low=_out(p_low), p_high=_out(p_high), p_event=_out(p_low + p_high),
        m1=_out(m1), m2=_out(m2), n_clamped=n_clamped,
    )


def omega11(cp: CrossingProbs) -> Any:
    """Variance of the crossing indicator, written as the two-part expansion."""
    p_low = np.asarray(cp.p_low)
    p_high = np.asarray(cp.p_high)
    return _out(p_low + p_high - p_low ** 2 - p_high ** 2 - 2.0 * p_low * p_high)


def _require_conditioning(om11: np.ndarray) -> None:
    bad = np.asarray(om11) < OMEGA11_FLOOR
    if np.any(bad):
        value = float(np.asarray(om11)[bad].flat[0])
        raise DegenerateConditioningError(
            f"crossing event has numerically zero variance (omega11={value:.3g})"
        )


def event_prob_given_log_rt(r_star: Any, eta1: Any, eta2: Any, a1: float, a2: float, rho: float) -> Any:
    """P(Y < a1 or Y > a2 | log R = r_star), with Y | log R normal (mean eta1 + rho (r* - eta2), var 1 - rho^2)."""
    rho = _check_rho(rho)
    mean = np.asarray(eta1, dtype=float) + rho * (np.asarray(r_star, dtype=float) - np.asarray(eta2, dtype=float))
    sd = np.sqrt(1.0 - rho * rho)
    return _out(ndtr((a1 - mean) / sd) + ndtr((mean - a2) / sd))


def omega21(r_star: Any, eta1: Any, eta2: Any, a1: float, a2: float, rho: float,
            cp: Optional[CrossingProbs] = None) -> Any:
    """
    Covariance between 1{log R <= r*} and the crossing indicator.

    The joint term P(log R <= r*, Y < a1 or Y > a2) is split into the lower
    and upper rectangles; with rho = 0 the joint factorizes and the result is
    exactly zero.
    """
    rho = _check_rho(rho)
    s = np.asarray(r_star, dtype=float) - np.asarray(eta2, dtype=float)
    eta1 = np.asarray(eta1, dtype=float)
    shape = np.broadcast_shapes(s.shape, eta1.shape)
    if rho == 0.0:
        return _out(np.zeros(shape))
    cp = cp or crossing_probs(a1, a2, eta1)
    phi_s = ndtr(s)
    joint = (bivariate_normal_cdf(s, a1 - eta1, rho)
             + (phi_s - bivariate_normal_cdf(s, a2 - eta1, rho)))
    return _out(np.broadcast_to(joint - phi_s * np.asarray(cp.p_event), shape))


def joe_conditional_cdf(r_star: Any, eta1: Any, eta2: Any, a1: float, a2: float, rho: float) -> Any:
    """
    Joe approximation of P(log R <= r* | crossing event, b):

        Phi(r* - eta2) + omega21 * (1 - p_event) / omega11

    clamped to [0, 1].

    Raises:
        DegenerateConditioningError: If omega11 < 1e-24.
    """
    rho = _check_rho(rho)
    cp = crossing_probs(a1, a2, eta1)
    om11 = np.asarray(omega11(cp))
    _require_conditioning(om11)
    om21 = np.asarray(omega21(r_star, eta1, eta2, a1, a2, rho, cp=cp))
    s = np.asarray(r_star, dtype=float) - np.asarray(eta2, dtype=float)
    cdf = ndtr(s) + om21 * (1.0 - np.asarray(cp.p_event)) / om11
    return _out(np.clip(cdf, 0.0, 1.0))


def joe_conditional_log_density(r_star: Any, eta1: Any, eta2: Any, a1: float, a2: float, rho: float,
                                cp: Optional[CrossingProbs] = None) -> Any:
    """
    Log of the r*-derivative of joe_conditional_cdf:

        log phi(r* - eta2) + log[1 + (P(event | r*) - p_event) (1 - p_event) / omega11]

    evaluated without forming phi, so far tails stay finite.

    Raises:
        DegenerateConditioningError: If omega11 < 1e-24.
    """
    rho = _check_rho(rho)
    cp = cp or crossing_probs(a1, a2, eta1)
    om11 = np.asarray(omega11(cp))
    _require_conditioning(om11)
    s = np.asarray(r_star, dtype=float) - np.asarray(eta2, dtype=float)
    shape = np.broadcast_shapes(s.shape, np.shape(eta1))
    log_phi = np.broadcast_to(-0.5 * s * s - _LOG_SQRT_2PI, shape)
    if rho == 0.0:
        return _out(np.array(log_phi))
    p_event = np.asarray(cp.p_event)
    cond = np.asarray(event_prob_given_log_rt(r_star, eta1, eta2, a1, a2, rho))
    bracket = 1.0 + (cond - p_event) * (1.0 - p_event) / om11
    return _out(log_phi + np.log(np.maximum(bracket, LOG_FLOOR)))


def joe_conditional_density(r_star: Any, eta1: Any, eta2: Any, a1: float, a2: float, rho: float) -> Any:
    """Density of log R given the crossing event under the Joe approximation; never negative."""
    return _out(np.exp(joe_conditional_log_density(r_star, eta1, eta2, a1, a2, rho)))


# --- Random-effects density ---

def mvn_logpdf(b: Any, sigma_b: RandomEffectsCov) -> Any:
    """Log N(b; 0, Sigma_B) through the Cholesky factor; b has shape (..., q1 + q2)."""
    lower = sigma_b.cholesky()
    q = lower.shape[0]
    b = np.asarray(b, dtype=float)
    if b.shape[-1:] != (q,) and not (q == 0 and b.size == 0):
        raise InvalidParameterError(f"random-effects point must have length {q}")
    if q == 0:
        return _out(np.zeros(b.shape[:-1]))
    flat = b.reshape(-1, q)
    z = solve_triangular(lower, flat.T, lower=True)
    log_det = np.sum(np.log(np.diag(lower)))
    log_pdf = -0.5 * np.sum(z * z, axis=0) - log_det - q * _LOG_SQRT_2PI
    return _out(log_pdf.reshape(b.shape[:-1]))


def mvn_density(b: Any, sigma_b: RandomEffectsCov) -> Any:
    return _out(np.exp(mvn_logpdf(b, sigma_b)))
