import json
import logging

import numpy as np
import pytest

from latent_rt.services.model_core import CovariateDesign, ModelSpec, Parameters, RandomEffectsCov
from latent_rt.services.oracle import reference_problem
from latent_rt.services.simulator import simulate_dataset


@pytest.fixture
def reference_params() -> Parameters:
    """Intercept-only truth of the recovery study."""
    return Parameters(
        beta1=(np.array([0.5]),), beta2=(np.array([1.0]),), a1=-1.0, a2=1.5,
        sigma_b=RandomEffectsCov.from_matrix([[0.25, 0.1], [0.1, 0.25]], q1=1), rho=0.4,
    )


@pytest.fixture
def reference_data():
    """(dataset, params) with m=20, n=3, p=1, q1=q2=1."""
    return reference_problem()


@pytest.fixture
def small_dataset(reference_params):
    spec = ModelSpec(m=8, n=4, p=1, q1=1, q2=1)
    design = CovariateDesign.intercept_only(spec.m)
    return simulate_dataset(spec, reference_params, design, seed=11)


@pytest.fixture
def two_outcome_setup():
    """p=2 with a covariate slope on each block and random intercepts."""
    m = 6
    rng = np.random.default_rng(3)
    slopes = rng.normal(size=(m, 1))
    v = np.hstack([np.ones((m, 1)), slopes])
    design = CovariateDesign((v, v), ((0,), (0,)), (v, np.ones((m, 1))), ((0,), (0,)))
    spec = ModelSpec(m=m, n=3, p=2, q1=1, q2=1, dt=0.5, d1=design.d1, d2=design.d2)
    params = Parameters(
        beta1=(np.array([0.2, -0.3]), np.array([0.1, 0.4])),
        beta2=(np.array([0.8, 0.1]), np.array([1.2])),
        a1=-0.8, a2=0.9,
        sigma_b=RandomEffectsCov.from_matrix([[0.3, 0.05], [0.05, 0.2]], q1=1),
        rho=-0.3,
    )
    return spec, design, params


@pytest.fixture
def config_dict():
    return {
        "model": {"m": 12, "n": 3, "p": 1, "q1": 1, "q2": 1, "dt": 1.0},
        "params": {
            "beta1": [[0.5]], "beta2": [[1.0]], "a1": -1.0, "a2": 1.5,
            "sigma1": [[0.25]], "sigma2": [[0.25]], "sigma12": [[0.1]], "rho": 0.4,
        },
        "quadrature": {"order": 8},
        "optimizer": {"max_evals": 60, "restarts": 0},
    }


@pytest.fixture
def config_file(tmp_path, config_dict):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config_dict), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def _detach_log_handlers():
    # configure_logging binds a handler to the stderr of the test that created it
    yield
    logger = logging.getLogger("latent_rt")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
