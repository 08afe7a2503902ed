"""
Model types, linear predictors and the unconstrained parameterization used by
the optimizer.

Residual covariances are fixed to the identity, so the free parameters are the
fixed effects, the two decision boundaries, the random-effects covariance and
the residual cross-correlation between an increment and its log reaction time.
"""
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from latent_rt.core.errors import ConfigurationError, InvalidParameterError

# Bounds applied by unpack so every finite theta maps to valid parameters
LOG_DIAG_BOUND = 15.0
OFFDIAG_BOUND = 1e3
LOG_GAP_BOUND = 50.0
ATANH_RHO_BOUND = 8.0


# --- Dimensions and covariates ---

@dataclass(frozen=True)
class ModelSpec:
    """
    Dimensions of a joint increment / log reaction-time model.

    d1 and d2 hold the length of the V(1) and V(2) covariate vectors of each
    outcome; they default to a single (intercept) column per outcome.
    """
    m: int
    n: int
    p: int
    q1: int
    q2: int
    dt: float = 1.0
    d1: Tuple[int, ...] = ()
    d2: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.m < 0 or self.n < 1 or self.p < 1 or self.q1 < 0 or self.q2 < 0:
            raise ConfigurationError(
                f"invalid dimensions m={self.m}, n={self.n}, p={self.p}, q1={self.q1}, q2={self.q2}"
            )
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ConfigurationError(f"dt must be a positive real, got {self.dt}")
        d1 = tuple(int(d) for d in self.d1) or (1,) * self.p
        d2 = tuple(int(d) for d in self.d2) or (1,) * self.p
        if len(d1) != self.p or len(d2) != self.p or min(d1 + d2) < 0:
            raise ConfigurationError(f"d1={d1} and d2={d2} must list p={self.p} non-negative lengths")
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", d2)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def q(self) -> int:
        return self.q1 + self.q2


@dataclass(frozen=True)
class SubjectCovariates:
    """One subject's slice of a CovariateDesign, with U rows already selected."""
    v1: Tuple[np.ndarray, ...]
    u1: np.ndarray
    v2: Tuple[np.ndarray, ...]
    u2: np.ndarray

    @property
    def p(self) -> int:
        return len(self.v1)

    def fixed_parts(self, beta1: Sequence[np.ndarray], beta2: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """Returns the fixed-effect parts V(1)'beta(1) and V(2)'beta(2) per outcome."""
        fixed1 = np.array([float(v @ b) for v, b in zip(self.v1, beta1)])
        fixed2 = np.array([float(v @ b) for v, b in zip(self.v2, beta2)])
        return fixed1, fixed2


def _as_index(index: Sequence[int]) -> Tuple[int, ...]:
    return tuple(int(i) for i in index)


@dataclass(frozen=True)
class CovariateDesign:
    """
    Covariates per (subject, outcome).

    v1[j] is an (m, d1_j) matrix whose row k is V(1)_jk; u1_index[j] lists the
    q1 columns of v1[j] that form U(1)_jk. The (2) fields mirror this for the
    reaction-time model.
    """
    v1: Tuple[np.ndarray, ...]
    u1_index: Tuple[Tuple[int, ...], ...]
    v2: Tuple[np.ndarray, ...]
    u2_index: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        v1 = tuple(np.atleast_2d(np.asarray(v, dtype=float)) for v in self.v1)
        v2 = tuple(np.atleast_2d(np.asarray(v, dtype=float)) for v in self.v2)
        u1 = tuple(_as_index(u) for u in self.u1_index)
        u2 = tuple(_as_index(u) for u in self.u2_index)
        if not (len(v1) == len(v2) == len(u1) == len(u2)) or not v1:
            raise ConfigurationError("v1, u1_index, v2 and u2_index must each hold one entry per outcome")
        if len({v.shape[0] for v in v1 + v2}) != 1:
            raise ConfigurationError("every covariate matrix must have one row per subject")
        for name, mats, indices in (("u1_index", v1, u1), ("u2_index", v2, u2)):
            if len({len(u) for u in indices}) != 1:
                raise ConfigurationError(f"{name} must select the same number of columns for every outcome")
            for j, (mat, idx) in enumerate(zip(mats, indices)):
                if len(set(idx)) != len(idx):
                    raise ConfigurationError(f"{name}[{j}] contains duplicates: {idx}")
                if any(i < 0 or i >= mat.shape[1] for i in idx):
                    raise ConfigurationError(f"{name}[{j}]={idx} addresses columns outside 0..{mat.shape[1] - 1}")
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)
        object.__setattr__(self, "u1_index", u1)
        object.__setattr__(self, "u2_index", u2)

    @classmethod
    def shared(cls, m: int, v1: Sequence[Sequence[float]], u1_index: Sequence[Sequence[int]],
               v2: Sequence[Sequence[float]], u2_index: Sequence[Sequence[int]]) -> "CovariateDesign":
        """Builds a design where every subject has the same covariate vectors."""
        def tile(rows):
            return tuple(np.tile(np.asarray(r, dtype=float).reshape(1, -1), (m, 1)) for r in rows)
        return cls(tile(v1), tuple(u1_index), tile(v2), tuple(u2_index))

    @classmethod
    def intercept_only(cls, m: int, p: int = 1, q1: int = 1, q2: int = 1) -> "CovariateDesign":
        """Constant-1 covariate per outcome; random intercepts when q1 or q2 is 1."""
        if q1 > 1 or q2 > 1:
            raise ConfigurationError("an intercept-only design supports at most one random effect per block")
        return cls.shared(m, [[1.0]] * p, [tuple(range(q1))] * p, [[1.0]] * p, [tuple(range(q2))] * p)

    @property
    def m(self) -> int:
        return self.v1[0].shape[0]

    @property
    def p(self) -> int:
        return len(self.v1)

    @property
    def q1(self) -> int:
        return len(self.u1_index[0])

    @property
    def q2(self) -> int:
        return len(self.u2_index[0])

    @property
    def d1(self) -> Tuple[int, ...]:
        return tuple(v.shape[1] for v in self.v1)

    @property
    def d2(self) -> Tuple[int, ...]:
        return tuple(v.shape[1] for v in self.v2)

    def validate(self, spec: ModelSpec) -> None:
        """Raises ConfigurationError unless the design matches spec."""
        got = (self.m, self.p, self.q1, self.q2, self.d1, self.d2)
        want = (spec.m, spec.p, spec.q1, spec.q2, spec.d1, spec.d2)
        if got != want:
            raise ConfigurationError(f"design (m, p, q1, q2, d1, d2)={got} does not match spec {want}")

    def subject(self, k: int) -> SubjectCovariates:
        v1 = tuple(v[k] for v in self.v1)
        v2 = tuple(v[k] for v in self.v2)
        u1 = np.array([v[list(idx)] for v, idx in zip(v1, self.u1_index)]).reshape(self.p, self.q1)
        u2 = np.array([v[list(idx)] for v, idx in zip(v2, self.u2_index)]).reshape(self.p, self.q2)
        return SubjectCovariates(v1=v1, u1=u1, v2=v2, u2=u2)

    def take(self, rows: Sequence[int]) -> "CovariateDesign":
        """Design restricted to (and reordered by) the given subject rows."""
        rows = list(rows)
        return CovariateDesign(
            tuple(v[rows] for v in self.v1), self.u1_index,
            tuple(v[rows] for v in self.v2), self.u2_index,
        )


def _linear_predictor(values: np.ndarray, index: Tuple[int, ...], beta: Any, b: Any) -> float:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if beta.shape != values.shape:
        raise ConfigurationError(f"beta has length {beta.size}, covariate vector has {values.size}")
    if b.size != len(index):
        raise ConfigurationError(f"random effect has length {b.size}, design selects {len(index)} columns")
    return float(values @ beta + values[list(index)] @ b)


def linear_predictor_1(design: CovariateDesign, j: int, k: int, beta1_j: Any, b1: Any) -> float:
    """
    Drift of outcome j for subject k: V(1)_jk' beta(1)_j + U(1)_jk' b(1).

    Raises:
        ConfigurationError: If beta1_j or b1 does not fit the design.
    """
    return _linear_predictor(design.v1[j][k], design.u1_index[j], beta1_j, b1)


def linear_predictor_2(design: CovariateDesign, j: int, k: int, beta2_j: Any, b2: Any) -> float:
    """Mean log reaction time of outcome j for subject k: V(2)_jk' beta(2)_j + U(2)_jk' b(2)."""
    return _linear_predictor(design.v2[j][k], design.u2_index[j], beta2_j, b2)


# --- Parameters ---

def _cholesky(matrix: np.ndarray, what: str) -> np.ndarray:
    if matrix.size == 0:
        return np.zeros_like(matrix)
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as e:
        raise InvalidParameterError(f"{what} is not positive definite") from e


def _checked_factor(lower: Any, full: np.ndarray) -> np.ndarray:
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    if lower.size == 0:
        lower = np.zeros((0, 0))
    if lower.shape != full.shape:
        raise InvalidParameterError(f"Cholesky factor has shape {lower.shape}, Sigma_B is {full.shape}")
    if not np.all(np.isfinite(lower)) or np.any(np.triu(lower, 1) != 0):
        raise InvalidParameterError("Cholesky factor must be finite and lower triangular")
    if np.any(np.diag(lower) <= 0):
        raise InvalidParameterError("Cholesky factor needs a positive diagonal")
    product = lower @ lower.T
    scale = float(np.max(np.abs(full))) if full.size else 0.0
    if not np.allclose(0.5 * (product + product.T), full, rtol=0.0, atol=1e-10 * scale):
        raise InvalidParameterError("Cholesky factor does not reproduce Sigma_B")
    return lower


@dataclass(frozen=True)
class RandomEffectsCov:
    """
    Block covariance of (b(1), b(2)):

        Sigma_B = [[sigma1,    sigma12],
                   [sigma12',  sigma2 ]]

    factor, when given, is a lower Cholesky factor of Sigma_B that cholesky()
    returns instead of refactorizing.
    """
    sigma1: np.ndarray
    sigma2: np.ndarray
    sigma12: np.ndarray
    factor: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        s1 = np.asarray(self.sigma1, dtype=float).reshape(-1)
        s2 = np.asarray(self.sigma2, dtype=float).reshape(-1)
        q1 = int(round(np.sqrt(s1.size)))
        q2 = int(round(np.sqrt(s2.size)))
        if q1 * q1 != s1.size or q2 * q2 != s2.size:
            raise InvalidParameterError("sigma1 and sigma2 must be square")
        s1, s2 = s1.reshape(q1, q1), s2.reshape(q2, q2)
        s12 = np.asarray(self.sigma12, dtype=float)
        if s12.size != q1 * q2:
            raise InvalidParameterError(f"sigma12 must be {q1}x{q2}")
        s12 = s12.reshape(q1, q2)
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "sigma12", s12)
        full = self.matrix
        if not np.all(np.isfinite(full)):
            raise InvalidParameterError("Sigma_B has non-finite entries")
        if not np.allclose(full, full.T, rtol=1e-10, atol=1e-12):
            raise InvalidParameterError("Sigma_B is not symmetric")
        if self.factor is None:
            _cholesky(full, "Sigma_B")
        else:
            object.__setattr__(self, "factor", _checked_factor(self.factor, full))

    @classmethod
    def from_matrix(cls, matrix: Any, q1: int) -> "RandomEffectsCov":
        full = np.atleast_2d(np.asarray(matrix, dtype=float))
        if full.size == 0:
            full = np.zeros((0, 0))
        return cls(full[:q1, :q1], full[q1:, q1:], full[:q1, q1:])

    @classmethod
    def from_factor(cls, lower: Any, q1: int) -> "RandomEffectsCov":
        """Builds Sigma_B = L L' and keeps L as its Cholesky factor."""
        lower = np.atleast_2d(np.asarray(lower, dtype=float))
        if lower.size == 0:
            lower = np.zeros((0, 0))
        full = lower @ lower.T
        full = 0.5 * (full + full.T)
        return cls(full[:q1, :q1], full[q1:, q1:], full[:q1, q1:], factor=lower)

    @classmethod
    def identity(cls, q1: int, q2: int, scale: float = 1.0) -> "RandomEffectsCov":
        return cls.from_matrix(scale * np.eye(q1 + q2), q1)

    @property
    def q1(self) -> int:
        return self.sigma1.shape[0]

    @property
    def q2(self) -> int:
        return self.sigma2.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        q1, q2 = self.sigma1.shape[0], self.sigma2.shape[0]
        full = np.zeros((q1 + q2, q1 + q2))
        full[:q1, :q1] = self.sigma1
        full[q1:, q1:] = self.sigma2
        full[:q1, q1:] = self.sigma12
        full[q1:, :q1] = self.sigma12.T
        return full

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of Sigma_B."""
        if self.factor is not None:
            return self.factor
        return _cholesky(self.matrix, "Sigma_B")


def _as_vectors(values: Any, what: str) -> Tuple[np.ndarray, ...]:
    try:
        return tuple(np.asarray(v, dtype=float).reshape(-1) for v in values)
    except (TypeError, ValueError) as e:
        raise InvalidParameterError(f"{what} must be a list of numeric vectors") from e


@dataclass(frozen=True)
class Parameters:
    """Fixed effects, decision boundaries a1 < a2, Sigma_B and residual correlation rho."""
    beta1: Tuple[np.ndarray, ...]
    beta2: Tuple[np.ndarray, ...]
    a1: float
    a2: float
    sigma_b: RandomEffectsCov
    rho: float = 0.0

    def __post_init__(self):
        beta1 = _as_vectors(self.beta1, "beta1")
        beta2 = _as_vectors(self.beta2, "beta2")
        if len(beta1) != len(beta2):
            raise InvalidParameterError("beta1 and beta2 must have one vector per outcome")
        if not all(np.all(np.isfinite(b)) for b in beta1 + beta2):
            raise InvalidParameterError("fixed effects must be finite")
        a1, a2, rho = float(self.a1), float(self.a2), float(self.rho)
        if not (np.isfinite(a1) and np.isfinite(a2)) or not a1 < a2:
            raise InvalidParameterError(f"boundaries must satisfy a1 < a2, got a1={a1}, a2={a2}")
        if not abs(rho) < 1:
            raise InvalidParameterError(f"rho must lie in (-1, 1), got {rho}")
        object.__setattr__(self, "beta1", beta1)
        object.__setattr__(self, "beta2", beta2)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "rho", rho)

    @property
    def p(self) -> int:
        return len(self.beta1)

    def check_against(self, spec: ModelSpec) -> None:
        """Raises ConfigurationError unless every block has the dimensions spec expects."""
        got = (self.p, tuple(b.size for b in self.beta1), tuple(b.size for b in self.beta2),
               self.sigma_b.q1, self.sigma_b.q2)
        want = (spec.p, spec.d1, spec.d2, spec.q1, spec.q2)
        if got != want:
            raise ConfigurationError(f"parameters (p, d1, d2, q1, q2)={got} do not match spec {want}")

    def replace(self, **changes: Any) -> "Parameters":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Plain-JSON form, the same shape as the run config's params section."""
        return {
            "beta1": [b.tolist() for b in self.beta1],
            "beta2": [b.tolist() for b in self.beta2],
            "a1": self.a1,
            "a2": self.a2,
            "sigma1": self.sigma_b.sigma1.tolist(),
            "sigma2": self.sigma_b.sigma2.tolist(),
            "sigma12": self.sigma_b.sigma12.tolist(),
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Parameters":
        q1 = len(data.get("sigma1") or [])
        q2 = len(data.get("sigma2") or [])
        sigma12 = np.asarray(data.get("sigma12") or np.zeros((q1, q2)), dtype=float).reshape(q1, q2)
        return cls(
            beta1=tuple(data["beta1"]),
            beta2=tuple(data["beta2"]),
            a1=data["a1"],
            a2=data["a2"],
            sigma_b=RandomEffectsCov(
                np.asarray(data.get("sigma1") or np.zeros((0, 0)), dtype=float).reshape(q1, q1),
                np.asarray(data.get("sigma2") or np.zeros((0, 0)), dtype=float).reshape(q2, q2),
                sigma12,
            ),
            rho=data.get("rho", 0.0),
        )


# --- Unconstrained parameterization ---

def _tril_size(q: int) -> int:
    return q * (q + 1) // 2


def _log_cholesky_vector(lower: np.ndarray) -> np.ndarray:
    """Row-major lower-triangle entries of a Cholesky factor, diagonal on the log scale."""
    q = lower.shape[0]
    rows, cols = np.tril_indices(q)
    entries = lower[rows, cols].copy()
    diag = rows == cols
    entries[diag] = np.log(entries[diag])
    return entries


def _lower_from_vector(entries: np.ndarray, q: int) -> np.ndarray:
    rows, cols = np.tril_indices(q)
    diag = rows == cols
    values = np.clip(entries, -OFFDIAG_BOUND, OFFDIAG_BOUND)
    values[diag] = np.exp(np.clip(entries[diag], -LOG_DIAG_BOUND, LOG_DIAG_BOUND))
    lower = np.zeros((q, q))
    lower[rows, cols] = values
    return lower


def build_sigma_b(chol_params: Any, q1: Optional[int] = None) -> RandomEffectsCov:
    """
    Builds Sigma_B = L L' from log-Cholesky entries.

    Args:
        chol_params: Row-major lower-triangle entries of L, diagonal on the log
            scale; length (q1+q2)(q1+q2+1)/2.
        q1: Size of the b(1) block; defaults to the whole matrix.

    Returns:
        A RandomEffectsCov that is symmetric positive definite by construction.
    """
    entries = np.asarray(chol_params, dtype=float).reshape(-1)
    q = int(round((np.sqrt(8 * entries.size + 1) - 1) / 2))
    if _tril_size(q) != entries.size:
        raise ConfigurationError(f"{entries.size} entries do not form a lower triangle")
    return RandomEffectsCov.from_factor(_lower_from_vector(entries, q), q if q1 is None else q1)


@dataclass(frozen=True)
class ParamLayout:
    """
    Which blocks of the parameters are free on the unconstrained scale.

    With estimate_sigma12 off (or when q1*q2 = 0) sigma1 and sigma2 get separate
    log-Cholesky blocks and sigma12 is held at zero. With estimate_rho off, rho
    is held at fixed_rho.
    """
    d1: Tuple[int, ...]
    d2: Tuple[int, ...]
    q1: int
    q2: int
    estimate_rho: bool = True
    estimate_sigma12: bool = True
    fixed_rho: float = 0.0

    @classmethod
    def for_spec(cls, spec: ModelSpec, estimate_rho: bool = True, estimate_sigma12: bool = True,
                 fixed_rho: float = 0.0) -> "ParamLayout":
        return cls(spec.d1, spec.d2, spec.q1, spec.q2, estimate_rho, estimate_sigma12, fixed_rho)

    @classmethod
    def for_params(cls, params: Parameters) -> "ParamLayout":
        return cls(
            tuple(b.size for b in params.beta1), tuple(b.size for b in params.beta2),
            params.sigma_b.q1, params.sigma_b.q2,
        )

    @property
    def joint_sigma(self) -> bool:
        return self.estimate_sigma12 and self.q1 > 0 and self.q2 > 0

    @property
    def n_chol(self) -> int:
        if self.joint_sigma:
            return _tril_size(self.q1 + self.q2)
        return _tril_size(self.q1) + _tril_size(self.q2)

    @property
    def size(self) -> int:
        return sum(self.d1) + sum(self.d2) + 2 + self.n_chol + int(self.estimate_rho)

    def names(self) -> Tuple[str, ...]:
        names: List[str] = []
        for label, dims in (("beta1", self.d1), ("beta2", self.d2)):
            for j, d in enumerate(dims):
                names.extend(f"{label}[{j}][{c}]" for c in range(d))
        names.extend(["a1", "log_gap"])
        blocks = [("L", self.q1 + self.q2)] if self.joint_sigma else [("L1", self.q1), ("L2", self.q2)]
        for label, q in blocks:
            for r, c in zip(*np.tril_indices(q)):
                names.append(f"log_{label}[{r},{c}]" if r == c else f"{label}[{r},{c}]")
        if self.estimate_rho:
            names.append("atanh_rho")
        return tuple(names)

    def pack(self, params: Parameters) -> "UnconstrainedParams":
        """Maps valid parameters to the flat unconstrained vector theta."""
        pieces = [np.concatenate([*params.beta1, *params.beta2, np.zeros(0)])]
        pieces.append(np.array([params.a1, np.log(params.a2 - params.a1)]))
        sb = params.sigma_b
        if self.joint_sigma:
            pieces.append(_log_cholesky_vector(sb.cholesky()))
        elif sb.factor is not None and not np.any(sb.sigma12):
            pieces.append(_log_cholesky_vector(sb.factor[:self.q1, :self.q1]))
            pieces.append(_log_cholesky_vector(sb.factor[self.q1:, self.q1:]))
        else:
            pieces.append(_log_cholesky_vector(_cholesky(sb.sigma1, "sigma1")))
            pieces.append(_log_cholesky_vector(_cholesky(sb.sigma2, "sigma2")))
        if self.estimate_rho:
            pieces.append(np.array([np.arctanh(params.rho)]))
        theta = np.concatenate(pieces)
        if theta.size != self.size:
            raise ConfigurationError(f"parameters pack to {theta.size} entries, layout expects {self.size}")
        return UnconstrainedParams(theta=theta, layout=self)

    def unpack(self, theta: Any) -> Parameters:
        """
        Maps any finite theta back to valid parameters.

        Raises:
            InvalidParameterError: If theta has non-finite entries.
            ConfigurationError: If theta has the wrong length.
        """
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.size:
            raise ConfigurationError(f"theta has {theta.size} entries, layout expects {self.size}")
        if not np.all(np.isfinite(theta)):
            raise InvalidParameterError(f"theta has non-finite entries: {theta.tolist()}")
        pos = 0

        def take(count: int) -> np.ndarray:
            nonlocal pos
            chunk = theta[pos:pos + count]
            pos += count
            return chunk

        beta1 = tuple(take(d).copy() for d in self.d1)
        beta2 = tuple(take(d).copy() for d in self.d2)
        a1, log_gap = take(2)
        a2 = a1 + np.exp(np.clip(log_gap, -LOG_GAP_BOUND, LOG_GAP_BOUND))
        if not (np.isfinite(a2) and a2 > a1):
            a2 = np.nextafter(a1, np.inf)
        q = self.q1 + self.q2
        if self.joint_sigma:
            lower = _lower_from_vector(take(_tril_size(q)), q)
        else:
            lower = np.zeros((q, q))
            lower[:self.q1, :self.q1] = _lower_from_vector(take(_tril_size(self.q1)), self.q1)
            lower[self.q1:, self.q1:] = _lower_from_vector(take(_tril_size(self.q2)), self.q2)
        if self.estimate_rho:
            rho = float(np.tanh(np.clip(take(1)[0], -ATANH_RHO_BOUND, ATANH_RHO_BOUND)))
        else:
            rho = self.fixed_rho
        return Parameters(
            beta1=beta1, beta2=beta2, a1=float(a1), a2=float(a2),
            sigma_b=RandomEffectsCov.from_factor(lower, self.q1), rho=rho,
        )


@dataclass(frozen=True)
class UnconstrainedParams:
    """Flat optimizer vector together with the layout that reads it."""
    theta: np.ndarray
    layout: ParamLayout

    @property
    def names(self) -> Tuple[str, ...]:
        return self.layout.names()


def pack(params: Parameters, layout: Optional[ParamLayout] = None) -> UnconstrainedParams:
    """Packs params with the full layout (every block free) unless one is given."""
    return (layout or ParamLayout.for_params(params)).pack(params)


def unpack(theta: Union[UnconstrainedParams, Any], layout: Optional[ParamLayout] = None) -> Parameters:
    if isinstance(theta, UnconstrainedParams):
        return (layout or theta.layout).unpack(theta.theta)
    if layout is None:
        raise ConfigurationError("unpacking a bare vector needs a ParamLayout")
    return layout.unpack(theta)
