from typing import Any, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

from latent_rt.core.config import settings
from latent_rt.core.errors import ConfigurationError
from latent_rt.services.estimation import FitConfig, NelderMeadConfig
from latent_rt.services.model_core import CovariateDesign, ModelSpec, Parameters


class _Section(BaseModel):
    # Unknown keys are rejected in every section of a run config
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    """Dimensions of the joint model."""
    m: int = Field(..., ge=0, description="Number of subjects.", examples=[300])
    n: int = Field(..., ge=1, description="Time points per subject.", examples=[10])
    p: int = Field(1, ge=1, description="Number of outcomes.")
    q1: int = Field(1, ge=0, description="Random effects in the increment model.")
    q2: int = Field(1, ge=0, description="Random effects in the reaction-time model.")
    dt: float = Field(1.0, gt=0, description="Time increment between consecutive points.")


class DesignSection(_Section):
    """
    Covariates per outcome. An entry of v1 / v2 is either one flat vector
    shared by every subject or a list of m rows, one per subject. Omitted
    blocks default to an intercept with random intercepts selected by
    u1_index / u2_index.
    """
    v1: Optional[List[Any]] = Field(None, examples=[[[1.0]]])
    u1_index: Optional[List[List[int]]] = Field(None, examples=[[[0]]])
    v2: Optional[List[Any]] = Field(None, examples=[[[1.0]]])
    u2_index: Optional[List[List[int]]] = Field(None, examples=[[[0]]])

    def indices(self, model: ModelSection) -> Tuple[Tuple[Tuple[int, ...], ...], Tuple[Tuple[int, ...], ...]]:
        u1 = self.u1_index if self.u1_index is not None else [list(range(model.q1))] * model.p
        u2 = self.u2_index if self.u2_index is not None else [list(range(model.q2))] * model.p
        return tuple(tuple(u) for u in u1), tuple(tuple(u) for u in u2)

    def build(self, model: ModelSection) -> CovariateDesign:
        """Expands the section to an (m, d) matrix per outcome and block."""
        u1, u2 = self.indices(model)
        return CovariateDesign(self._matrices(self.v1, "v1", model), u1, self._matrices(self.v2, "v2", model), u2)

    @staticmethod
    def _matrices(entries: Optional[Sequence[Any]], name: str, model: ModelSection) -> Tuple[np.ndarray, ...]:
        entries = entries if entries is not None else [[1.0]] * model.p
        if len(entries) != model.p:
            raise ConfigurationError(f"design.{name} lists {len(entries)} outcomes, model has p={model.p}")
        mats = []
        for j, entry in enumerate(entries):
            values = np.asarray(entry, dtype=float)
            if values.ndim == 1:
                values = np.tile(values.reshape(1, -1), (model.m, 1))
            elif values.ndim != 2 or values.shape[0] != model.m:
                raise ConfigurationError(f"design.{name}[{j}] must be a vector or have m={model.m} rows")
            mats.append(values)
        return tuple(mats)


class ParamsSection(_Section):
    """Model parameters; also the shape of the truth sidecar and of params_hat."""
    beta1: List[List[float]] = Field(..., examples=[[[0.5]]])
    beta2: List[List[float]] = Field(..., examples=[[[1.0]]])
    a1: float = Field(..., examples=[-1.0])
    a2: float = Field(..., examples=[1.5])
    sigma1: List[List[float]] = Field(default_factory=list, examples=[[[0.25]]])
    sigma2: List[List[float]] = Field(default_factory=list, examples=[[[0.25]]])
    sigma12: Optional[List[List[float]]] = Field(None, examples=[[[0.1]]])
    rho: float = Field(0.0, gt=-1.0, lt=1.0, examples=[0.4])

    @field_validator("a2")
    @classmethod
    def _boundaries_ordered(cls, a2: float, info: ValidationInfo) -> float:
        a1 = info.data.get("a1")
        if a1 is not None and not a2 > a1:
            raise ValueError(f"a2 must exceed a1 (a1={a1}, a2={a2})")
        return a2

    def to_parameters(self) -> Parameters:
        return Parameters.from_dict(self.model_dump())

    @classmethod
    def from_parameters(cls, params: Parameters) -> "ParamsSection":
        return cls(**params.to_dict())


class QuadratureSection(_Section):
    order: int = Field(default_factory=lambda: settings.quad_order, ge=1, le=100,
                       description="Gauss-Hermite points per random-effect dimension.")
    mode: Literal["gauss-hermite", "monte-carlo"] = "gauss-hermite"
    mc_samples: int = Field(default_factory=lambda: settings.mc_samples, ge=1_000,
                            description="Draws per subject in monte-carlo mode.")
    mc_seed: int = Field(0, ge=0)


class OptimizerSection(_Section):
    xatol: float = Field(1e-6, gt=0)
    fatol: float = Field(1e-8, gt=0)
    max_evals: Optional[int] = Field(None, ge=1, description="Defaults to 20000 per free parameter.")
    restarts: int = Field(2, ge=0)
    seed: int = Field(0, ge=0, description="Seeds the restart jitter.")
    estimate_rho: bool = True
    estimate_sigma12: bool = True
    hessian_se: bool = False
    hessian_step: float = Field(1e-4, gt=0)
    record_trace: bool = True


class SimulationSection(_Section):
    seed: int = Field(0, ge=0)
    censor_noncrossed: bool = False


class IOSection(_Section):
    data: Optional[str] = None
    out: Optional[str] = None


class RunConfig(_Section):
    """Run configuration read by the CLI and accepted by the HTTP API."""
    model: ModelSection
    design: DesignSection = Field(default_factory=DesignSection)
    params: Optional[ParamsSection] = None
    quadrature: QuadratureSection = Field(default_factory=QuadratureSection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    io: IOSection = Field(default_factory=IOSection)

    def build_design(self) -> CovariateDesign:
        return self.design.build(self.model)

    def build_spec(self, design: CovariateDesign) -> ModelSpec:
        return ModelSpec(self.model.m, self.model.n, self.model.p, self.model.q1, self.model.q2,
                         self.model.dt, design.d1, design.d2)

    def build_params(self) -> Parameters:
        if self.params is None:
            raise ConfigurationError("this workflow needs a params section in the run config")
        return self.params.to_parameters()

    def fit_config(self, threads: Optional[int] = None) -> FitConfig:
        opt, quad = self.optimizer, self.quadrature
        return FitConfig(
            nelder_mead=NelderMeadConfig(xatol=opt.xatol, fatol=opt.fatol, max_evals=opt.max_evals,
                                         record_trace=opt.record_trace),
            restarts=opt.restarts, seed=opt.seed,
            estimate_rho=opt.estimate_rho, estimate_sigma12=opt.estimate_sigma12,
            hessian_se=opt.hessian_se, hessian_step=opt.hessian_step,
            quad_order=quad.order, mode=quad.mode, mc_samples=quad.mc_samples, mc_seed=quad.mc_seed,
            threads=threads,
        )


# --- Result bodies ---

class LoglikResponse(BaseModel):
    loglik: float
    quadrature_order: Optional[int] = Field(None, description="Absent in monte-carlo mode or without random effects.")
    clamp_events: int
    mc_se: Optional[float] = Field(None, description="Monte-Carlo standard error, monte-carlo mode only.")


class FitResultModel(BaseModel):
    params_hat: ParamsSection
    theta_hat: List[float]
    loglik: float
    n_evals: int
    converged: bool
    restarts_used: int
    se: Optional[List[float]] = None
    trace: Optional[List[List[float]]] = None


class OracleReportModel(BaseModel):
    name: str
    statistic: float
    threshold: float
    passed: bool
    n_samples: int


# --- HTTP request bodies ---

class LoglikRequest(BaseModel):
    config: RunConfig
    data_csv: str = Field(..., description="Dataset in the CSV format written by `latent-rt simulate`.")


class FitRequest(BaseModel):
    config: RunConfig
    data_csv: str = Field(..., description="Dataset in the CSV format written by `latent-rt simulate`.")
    init: Optional[ParamsSection] = Field(None, description="Start point; defaults to the least-squares guess.")
