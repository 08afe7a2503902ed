import math

import numpy as np
import pytest

from latent_rt.core.errors import ConfigurationError, OptimizationError, RankDeficientDesignWarning
from latent_rt.services.estimation import (
    FitConfig,
    NelderMeadConfig,
    fit,
    initial_guess,
    nelder_mead,
    numerical_hessian_se,
)
from latent_rt.services.likelihood import gh_rule, log_likelihood
from latent_rt.services.model_core import CovariateDesign, ModelSpec, Parameters, RandomEffectsCov
from latent_rt.services.simulator import simulate_dataset


def rosenbrock(x):
    return 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2


# --- Nelder-Mead ---

def test_quadratic_bowl():
    center = np.array([1.0, -2.0, 0.5])
    result = nelder_mead(lambda x: float(np.sum((x - center) ** 2)), np.zeros(3),
                         NelderMeadConfig(xatol=1e-10, fatol=1e-16))
    assert result.converged
    assert result.x == pytest.approx(center, abs=1e-8)


def test_rosenbrock():
    result = nelder_mead(rosenbrock, [-1.2, 1.0], NelderMeadConfig(xatol=1e-9, fatol=1e-14))
    assert result.converged
    assert result.x == pytest.approx([1.0, 1.0], abs=1e-6)


def test_nonsmooth_minimum():
    result = nelder_mead(lambda x: abs(float(x[0])), [0.7], NelderMeadConfig(xatol=1e-9))
    assert result.converged
    assert abs(result.x[0]) <= 1e-8


def test_best_value_never_increases():
    result = nelder_mead(rosenbrock, [-1.2, 1.0])
    best = [value for value, _ in result.trace]
    assert all(b <= a for a, b in zip(best, best[1:]))
    assert result.fun == best[-1]


def test_start_point_must_be_finite():
    with pytest.raises(OptimizationError) as info:
        nelder_mead(lambda x: math.nan, [0.1, 0.2])
    assert info.value.theta == [0.1, 0.2]


def test_nonfinite_region_is_never_accepted():
    def walled(x):
        return (x[0] - 1.0) ** 2 if x[0] <= 0.3 else math.nan

    result = nelder_mead(walled, [0.0])
    assert result.converged
    assert result.n_nonfinite > 0
    assert result.x[0] <= 0.3
    assert result.x[0] == pytest.approx(0.3, abs=1e-5)


def test_badly_scaled_objective():
    scales = np.array([1e3, 1.0, 1e-2])
    result = nelder_mead(lambda x: float(np.sum(scales * (x - 1.0) ** 2)), np.zeros(3),
                         NelderMeadConfig(xatol=1e-8, fatol=math.inf))
    assert result.converged
    assert result.x == pytest.approx(np.ones(3), abs=1e-5)


def test_same_input_same_run():
    first = nelder_mead(rosenbrock, [-1.2, 1.0])
    second = nelder_mead(rosenbrock, [-1.2, 1.0])
    assert np.array_equal(first.x, second.x)
    assert first.n_evals == second.n_evals


def test_evaluation_budget_stops_the_run():
    result = nelder_mead(rosenbrock, [-1.2, 1.0], NelderMeadConfig(max_evals=10))
    assert not result.converged
    assert result.n_evals < 20


@pytest.mark.parametrize("objective, x0", [
    (rosenbrock, [-1.2, 1.0]),
    (lambda x: float(np.sum(np.abs(x - 0.3))), [0.0, 0.0, 0.0, 0.0]),
    (lambda x: (x[0] - 1.0) ** 2 if x[0] <= 0.3 else math.nan, [0.0]),
])
def test_evaluation_budget_is_never_exceeded(objective, x0):
    calls = []

    def counted(x):
        calls.append(1)
        return objective(x)

    for budget in range(1, 80):
        calls.clear()
        result = nelder_mead(counted, x0, NelderMeadConfig(max_evals=budget, xatol=1e-14, fatol=1e-16))
        assert result.n_evals == len(calls)
        assert result.n_evals <= max(budget, len(x0) + 1), budget


def test_zero_dimensional_problem():
    result = nelder_mead(lambda x: 4.0, np.zeros(0))
    assert result.converged
    assert result.fun == 4.0
    assert result.x.size == 0


# --- Standard errors ---

def test_hessian_of_a_quadratic():
    a = np.array([[3.0, 1.0], [1.0, 2.0]])
    report = numerical_hessian_se(lambda x: 0.5 * float(x @ a @ x), [0.3, -0.2])
    assert not report.singular
    assert report.hessian == pytest.approx(a, rel=1e-6)
    assert report.se == pytest.approx(np.sqrt([0.4, 0.6]), rel=1e-6)


def test_standard_error_of_a_normal_mean():
    rng = np.random.default_rng(5)
    sample = rng.normal(3.0, 2.0, size=400)

    def nll(theta):
        return float(np.sum((sample - theta[0]) ** 2) / (2.0 * 4.0))

    report = numerical_hessian_se(nll, [sample.mean()])
    assert report.se[0] == pytest.approx(0.1, rel=1e-5)


def test_singular_hessian_has_no_standard_errors():
    report = numerical_hessian_se(lambda x: float(x[0] ** 2), [0.0, 0.0])
    assert report.singular
    assert report.se is None


# --- Starting values ---

def test_intercept_start_is_the_mean_increment(small_dataset):
    guess = initial_guess(small_dataset)
    ys = np.concatenate([s.y.ravel() for s in small_dataset.subjects])
    rs = np.concatenate([s.r_star.ravel() for s in small_dataset.subjects])
    assert guess.beta1[0][0] == pytest.approx(ys.mean(), rel=1e-12)
    assert guess.beta2[0][0] == pytest.approx(rs.mean(), rel=1e-12)
    assert guess.a1 < guess.a2
    assert guess.rho == 0.0
    assert guess.sigma_b.matrix == pytest.approx(0.1 * np.eye(2))


def test_rank_deficient_design_starts_from_zero(reference_params):
    m = 30
    design = CovariateDesign.shared(m, [[1.0, 1.0]], [(0,)], [[1.0]], [(0,)])
    spec = ModelSpec(m=m, n=3, p=1, q1=1, q2=1, d1=design.d1, d2=design.d2)
    params = reference_params.replace(beta1=(np.array([0.5, 0.0]),))
    dataset = simulate_dataset(spec, params, design, seed=4)
    with pytest.warns(RankDeficientDesignWarning):
        guess = initial_guess(dataset)
    assert np.array_equal(guess.beta1[0], np.zeros(2))


def test_empty_covariate_block():
    m = 10
    design = CovariateDesign.shared(m, [[]], [()], [[1.0]], [(0,)])
    spec = ModelSpec(m=m, n=3, p=1, q1=0, q2=1, d1=design.d1, d2=design.d2)
    params = Parameters(beta1=(np.zeros(0),), beta2=(np.array([1.0]),), a1=-1.0, a2=1.0,
                        sigma_b=RandomEffectsCov.identity(0, 1, scale=0.2), rho=0.0)
    guess = initial_guess(simulate_dataset(spec, params, design, seed=8))
    assert guess.beta1[0].size == 0


def test_start_is_consistent(reference_params):
    m = 2000
    spec = ModelSpec(m=m, n=3, p=1, q1=1, q2=1)
    dataset = simulate_dataset(spec, reference_params, CovariateDesign.intercept_only(m), seed=21)
    guess = initial_guess(dataset)
    assert guess.beta1[0][0] == pytest.approx(0.5, abs=0.07)
    assert guess.beta2[0][0] == pytest.approx(1.0, abs=0.07)


def test_empty_dataset_has_no_start(reference_params):
    spec = ModelSpec(m=0, n=3, p=1, q1=1, q2=1)
    dataset = simulate_dataset(spec, reference_params, CovariateDesign.intercept_only(0), seed=0)
    with pytest.raises(ConfigurationError):
        initial_guess(dataset)


# --- Fitting ---

def _quick(max_evals, restarts=0, **kwargs):
    return FitConfig(nelder_mead=NelderMeadConfig(max_evals=max_evals), restarts=restarts,
                     quad_order=8, **kwargs)


def test_exhausted_budget_is_not_converged(small_dataset):
    result = fit(small_dataset, config=_quick(1, restarts=2))
    assert not result.converged
    assert result.restarts_used == 2
    assert math.isfinite(result.loglik)


def test_fit_never_ends_below_its_start(small_dataset, reference_params):
    result = fit(small_dataset, config=_quick(150), init=reference_params)
    truth = log_likelihood(small_dataset, reference_params, gh_rule(8, 2))
    assert result.loglik >= truth - 1e-8
    assert result.theta_hat.theta.size == 8
    assert result.params_hat.a1 < result.params_hat.a2


def test_failure_at_the_start_reports_theta(reference_params):
    spec = ModelSpec(m=6, n=3, p=1, q1=1, q2=1)
    dataset = simulate_dataset(spec, reference_params, CovariateDesign.intercept_only(6), seed=2,
                               censor_noncrossed=True)
    assert any(np.isnan(s.r_star).any() for s in dataset.subjects)
    with pytest.raises(OptimizationError) as info:
        fit(dataset, config=_quick(20))
    assert info.value.theta is not None
    assert len(info.value.theta) == 8


def test_fit_is_independent_of_thread_count(small_dataset):
    one = fit(small_dataset, config=_quick(80, threads=1))
    many = fit(small_dataset, config=_quick(80, threads=4))
    assert np.array_equal(one.theta_hat.theta, many.theta_hat.theta)
    assert one.loglik == many.loglik


def test_fixed_rho_is_held(small_dataset, reference_params):
    result = fit(small_dataset, config=_quick(60, estimate_rho=False), init=reference_params)
    assert result.params_hat.rho == pytest.approx(reference_params.rho, abs=1e-12)
    assert result.theta_hat.theta.size == 7


def test_unknown_integration_mode(small_dataset):
    with pytest.raises(ConfigurationError):
        fit(small_dataset, config=FitConfig(mode="simpson"))
