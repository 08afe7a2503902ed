"""
Synthetic datasets from the joint model: random effects, increments, latent
paths, crossing indicators and log reaction times.

Randomness comes from numpy's PCG64 seeded through SeedSequence spawn keys
(seed, stream namespace, subject index), so each subject has its own
reproducible stream that does not depend on m or on iteration order.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from latent_rt.core.errors import ConfigurationError
from latent_rt.services.model_core import (
    CovariateDesign,
    ModelSpec,
    Parameters,
    RandomEffectsCov,
    SubjectCovariates,
)
from latent_rt.services.parallel import ordered_map

logger = logging.getLogger(__name__)

# Stream namespaces; the oracle module draws from its own
SIMULATOR_STREAM = 0
ORACLE_STREAM = 1


def stream(seed: int, namespace: int, index: int = 0) -> np.random.Generator:
    """Independent PCG64 generator for one (seed, namespace, index) triple."""
    if int(seed) < 0:
        raise ConfigurationError(f"seed must be a non-negative integer, got {seed}")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(namespace), int(index)))
    return np.random.Generator(np.random.PCG64(seq))


# --- Types ---

@dataclass(frozen=True)
class RandomEffects:
    b1: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class SubjectData:
    """
    Observations of one subject.

    y, r_star and crossed are (n, p) arrays indexed [i, j]. r_star holds NaN
    for cells censored by the censor-noncrossed option.
    """
    y: np.ndarray
    r_star: np.ndarray
    crossed: np.ndarray
    covariates: SubjectCovariates
    index: int = 0
    random_effects: Optional[RandomEffects] = None

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class LatentPath:
    """Levels X_j(t_i), i = 0..n, with X(t_0) = 0."""
    x: np.ndarray


@dataclass(frozen=True)
class Dataset:
    spec: ModelSpec
    design: CovariateDesign
    subjects: Tuple[SubjectData, ...]

    def __post_init__(self):
        self.design.validate(self.spec)
        if len(self.subjects) != self.spec.m:
            raise ConfigurationError(f"dataset holds {len(self.subjects)} subjects, spec says m={self.spec.m}")
        for s in self.subjects:
            if s.y.shape != (self.spec.n, self.spec.p):
                raise ConfigurationError(f"subject {s.index} has shape {s.y.shape}, expected {(self.spec.n, self.spec.p)}")

    def __len__(self) -> int:
        return len(self.subjects)

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Subset (or reordering) of subjects as a dataset of its own."""
        rows = list(rows)
        spec = ModelSpec(len(rows), self.spec.n, self.spec.p, self.spec.q1, self.spec.q2,
                         self.spec.dt, self.spec.d1, self.spec.d2)
        return Dataset(spec, self.design.take(rows), tuple(self.subjects[r] for r in rows))


# --- Operations ---

def draw_random_effects(sigma_b: RandomEffectsCov, rng: np.random.Generator) -> RandomEffects:
    """
    Draws (b(1), b(2)) ~ N(0, Sigma_B) as L z with L the Cholesky factor.

    Raises:
        InvalidParameterError: If Sigma_B is not positive definite.
    """
    lower = sigma_b.cholesky()
    z = rng.standard_normal(lower.shape[0])
    b = lower @ z
    return RandomEffects(b1=b[:sigma_b.q1], b2=b[sigma_b.q1:])


def simulate_subject(spec: ModelSpec, params: Parameters, covariates: SubjectCovariates,
                     rng: np.random.Generator, index: int = 0,
                     censor_noncrossed: bool = False) -> SubjectData:
    """
    Simulates one subject.

    Each cell draws one correlated pair (eps1, eps2) with unit variances and
    correlation rho; eps1 drives the increment y = dt * mu + eps1 and eps2 the
    log reaction time r* = eta2 + eps2. Reaction times are generated for every
    cell; censor_noncrossed blanks them (NaN) where no crossing occurred.
    """
    effects = draw_random_effects(params.sigma_b, rng)
    fixed1, fixed2 = covariates.fixed_parts(params.beta1, params.beta2)
    mu = fixed1 + covariates.u1 @ effects.b1
    eta2 = fixed2 + covariates.u2 @ effects.b2

    z = rng.standard_normal((spec.n, spec.p, 2))
    eps1 = z[..., 0]
    eps2 = params.rho * z[..., 0] + np.sqrt(1.0 - params.rho ** 2) * z[..., 1]

    y = spec.dt * mu + eps1
    r_star = eta2 + eps2
    crossed = (y < params.a1) | (y > params.a2)
    if censor_noncrossed:
        r_star = np.where(crossed, r_star, np.nan)
    return SubjectData(y=y, r_star=r_star, crossed=crossed, covariates=covariates,
                       index=index, random_effects=effects)


def cumulative_path(subject: SubjectData) -> LatentPath:
    """Prefix sums of the increments, starting from a zero row."""
    x = np.vstack([np.zeros((1, subject.p)), np.cumsum(subject.y, axis=0)])
    return LatentPath(x=x)


def simulate_dataset(spec: ModelSpec, params: Parameters, design: CovariateDesign, seed: int,
                     censor_noncrossed: bool = False, threads: Optional[int] = None) -> Dataset:
    """
    Simulates m independent subjects; subject k uses stream (seed, SIMULATOR_STREAM, k).

    Raises:
        ConfigurationError: If design or params do not match spec.
    """
    design.validate(spec)
    params.check_against(spec)

    def one(k: int) -> SubjectData:
        return simulate_subject(spec, params, design.subject(k), stream(seed, SIMULATOR_STREAM, k),
                                index=k, censor_noncrossed=censor_noncrossed)

    subjects = ordered_map(one, list(range(spec.m)), threads)
    logger.info("Simulated %d subjects (n=%d, p=%d) with seed %d", spec.m, spec.n, spec.p, seed)
    return Dataset(spec=spec, design=design, subjects=tuple(subjects))
