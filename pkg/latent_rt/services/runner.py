"""
Workflows shared by the command line and the HTTP API: simulate, loglik and
fit, each driven by one RunConfig. The check workflow needs no config and
calls oracle.run_checks directly.
"""
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from latent_rt.core.config import settings
from latent_rt.core.errors import ConfigurationError
from latent_rt.schemas.models import ParamsSection, RunConfig
from latent_rt.services.dataset_io import read_dataset_csv, write_dataset_csv
from latent_rt.services.estimation import FitResult, fit
from latent_rt.services.likelihood import MAX_GH_DIM, evaluate_log_likelihood, gh_rule
from latent_rt.services.model_core import Parameters
from latent_rt.services.oracle import mc_log_likelihood
from latent_rt.services.simulator import Dataset, simulate_dataset

logger = logging.getLogger(__name__)

TRUTH_SUFFIX = ".truth.json"


def truth_path(out: Union[str, Path]) -> Path:
    """Sidecar holding the generating parameters of a simulated CSV."""
    out = Path(out)
    return out.with_name(out.name + TRUTH_SUFFIX)


def dump_json(payload: Any) -> str:
    return json.dumps(payload, indent=2) + "\n"


def read_parameters(path: Union[str, Path]) -> Parameters:
    """Reads parameters in the params-section shape (e.g. a truth sidecar)."""
    return ParamsSection.model_validate_json(Path(path).read_text(encoding="utf-8")).to_parameters()


class WorkflowRunner:
    """
    Runs the workflows of one RunConfig.

    Args:
        config: Validated run configuration.
        threads: Worker threads for likelihood and oracle reductions;
            defaults to settings.threads.
    """

    def __init__(self, config: RunConfig, threads: Optional[int] = None):
        self.config = config
        self.threads = threads or settings.threads

    # --- Data ---

    def simulate(self, out: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
                 censor_noncrossed: Optional[bool] = None) -> Tuple[Dataset, Path, Path]:
        """Simulates the configured model, writes the CSV and its truth sidecar."""
        out = out or self.config.io.out
        if not out:
            raise ConfigurationError("simulate needs an output path (--out or io.out)")
        sim = self.config.simulation
        seed = sim.seed if seed is None else seed
        censor = sim.censor_noncrossed if censor_noncrossed is None else censor_noncrossed
        design = self.config.build_design()
        spec = self.config.build_spec(design)
        params = self.config.build_params()
        dataset = simulate_dataset(spec, params, design, seed, censor_noncrossed=censor, threads=self.threads)
        csv_path = write_dataset_csv(dataset, out)
        sidecar = truth_path(csv_path)
        sidecar.write_text(dump_json(params.to_dict()), encoding="utf-8")
        return dataset, csv_path, sidecar

    def load(self, source: Optional[Union[str, Path]] = None, text: Optional[str] = None) -> Dataset:
        """
        Reads a dataset from a CSV path or CSV text and checks it against the
        configured model dimensions (m is taken from the data).
        """
        if text is None:
            source = source or self.config.io.data
            if not source:
                raise ConfigurationError("no dataset given (--data or io.data)")
        u1, u2 = self.config.design.indices(self.config.model)
        dataset = read_dataset_csv(io.StringIO(text) if text is not None else source, self.config.model.dt, u1, u2)
        model, spec = self.config.model, dataset.spec
        if spec.m and (spec.n, spec.p, spec.q1, spec.q2) != (model.n, model.p, model.q1, model.q2):
            raise ConfigurationError(
                f"data has (n, p, q1, q2)={(spec.n, spec.p, spec.q1, spec.q2)}, "
                f"config has {(model.n, model.p, model.q1, model.q2)}"
            )
        return dataset

    def _check_integration(self, dataset: Dataset) -> None:
        q = dataset.spec.q
        if self.config.quadrature.mode == "gauss-hermite" and q > MAX_GH_DIM:
            raise ConfigurationError(
                f"q1+q2={q} exceeds {MAX_GH_DIM} dimensions for tensor Gauss-Hermite; "
                "set quadrature.mode to monte-carlo"
            )

    # --- Workflows ---

    def loglik(self, dataset: Dataset, params: Optional[Parameters] = None) -> Dict[str, Any]:
        """Log-likelihood at the configured (or given) parameters with evaluation metadata."""
        params = params or self.config.build_params()
        self._check_integration(dataset)
        quad = self.config.quadrature
        if quad.mode == "monte-carlo":
            estimate = mc_log_likelihood(dataset, params, quad.mc_samples, quad.mc_seed, threads=self.threads)
            return {"loglik": estimate.estimate, "quadrature_order": None, "clamp_events": 0,
                    "mc_se": estimate.se}
        rule = gh_rule(quad.order, dataset.spec.q) if dataset.spec.q else None
        evaluation = evaluate_log_likelihood(dataset, params, rule, self.threads)
        logger.info("Log-likelihood %.10g (order %s, %d clamp events)",
                    evaluation.loglik, evaluation.quadrature_order, evaluation.clamp_events)
        return {
            "loglik": evaluation.loglik,
            "quadrature_order": evaluation.quadrature_order,
            "clamp_events": evaluation.clamp_events,
        }

    def fit(self, dataset: Dataset, init: Optional[Parameters] = None) -> FitResult:
        self._check_integration(dataset)
        result = fit(dataset, dataset.spec, self.config.fit_config(self.threads), init=init)
        logger.info("Fit finished: loglik=%.10g, converged=%s, %d evaluations",
                    result.loglik, result.converged, result.n_evals)
        return result
