import numpy as np
import pytest

from latent_rt.core.errors import ConfigurationError, InvalidParameterError
from latent_rt.services.model_core import CovariateDesign, ModelSpec, Parameters, RandomEffectsCov
from latent_rt.services.probability import normal_cdf
from latent_rt.services.simulator import (
    SIMULATOR_STREAM,
    cumulative_path,
    draw_random_effects,
    simulate_dataset,
    simulate_subject,
    stream,
)


def _fixed_params(mu=2.0, a1=-1.0, a2=1.5, rho=0.0):
    return Parameters(beta1=([mu],), beta2=([1.0],), a1=a1, a2=a2,
                      sigma_b=RandomEffectsCov.identity(0, 0), rho=rho)


def _no_effects_dataset(m, n, params, seed=5, dt=1.0):
    spec = ModelSpec(m=m, n=n, p=1, q1=0, q2=0, dt=dt)
    return simulate_dataset(spec, params, CovariateDesign.intercept_only(m, q1=0, q2=0), seed)


# --- Random effects ---

def test_draw_random_effects_empty():
    effects = draw_random_effects(RandomEffectsCov.identity(0, 0), stream(1, SIMULATOR_STREAM))
    assert effects.b1.shape == (0,) and effects.b2.shape == (0,)


def test_draw_random_effects_is_reproducible():
    sigma = RandomEffectsCov.identity(1, 1)
    first = draw_random_effects(sigma, stream(9, SIMULATOR_STREAM, 3))
    second = draw_random_effects(sigma, stream(9, SIMULATOR_STREAM, 3))
    assert first.b1.tobytes() == second.b1.tobytes()
    assert first.b2.tobytes() == second.b2.tobytes()


def test_draw_random_effects_variance():
    sigma = RandomEffectsCov.from_matrix([[4.0]], q1=1)
    rng = stream(2, SIMULATOR_STREAM)
    draws = np.array([draw_random_effects(sigma, rng).b1[0] for _ in range(20_000)])
    se = 4.0 * np.sqrt(2.0 / draws.size)
    assert abs(draws.var(ddof=1) - 4.0) < 4 * se


def test_draw_random_effects_rejects_non_pd():
    # Bypass validation to hand the sampler an indefinite matrix
    sigma = RandomEffectsCov.identity(1, 1)
    object.__setattr__(sigma, "sigma12", np.array([[2.0]]))
    with pytest.raises(InvalidParameterError):
        draw_random_effects(sigma, stream(0, SIMULATOR_STREAM))


def test_stream_rejects_negative_seed():
    with pytest.raises(ConfigurationError):
        stream(-1, SIMULATOR_STREAM)


# --- Subjects ---

def test_far_boundaries_never_cross():
    spec = ModelSpec(m=1, n=50, p=1, q1=0, q2=0)
    params = _fixed_params(mu=0.0, a1=-1e10, a2=1e10)
    design = CovariateDesign.intercept_only(1, q1=0, q2=0)
    subject = simulate_subject(spec, params, design.subject(0), stream(0, SIMULATOR_STREAM))
    assert not subject.crossed.any()


def test_crossed_matches_boundaries(small_dataset, reference_params):
    for s in small_dataset.subjects:
        expected = (s.y < reference_params.a1) | (s.y > reference_params.a2)
        np.testing.assert_array_equal(s.crossed, expected)
        assert np.all(np.isfinite(s.r_star))


def test_increment_moments_and_independence():
    dataset = _no_effects_dataset(10_000, 10, _fixed_params(mu=2.0, rho=0.0))
    y = np.concatenate([s.y.ravel() for s in dataset.subjects])
    r = np.concatenate([s.r_star.ravel() for s in dataset.subjects])
    n = y.size
    assert abs(y.mean() - 2.0) < 3 / np.sqrt(n)
    assert abs(y.var() - 1.0) < 3 * np.sqrt(2.0 / n)
    corr = np.corrcoef(y - 2.0, r - 1.0)[0, 1]
    assert abs(corr) < 3 / np.sqrt(n)


def test_dt_scales_the_drift():
    dataset = _no_effects_dataset(5_000, 20, _fixed_params(mu=2.0), dt=0.5)
    y = np.concatenate([s.y.ravel() for s in dataset.subjects])
    assert abs(y.mean() - 1.0) < 3 / np.sqrt(y.size)


def test_crossing_frequency():
    params = _fixed_params(mu=0.3, rho=0.6)
    dataset = _no_effects_dataset(10_000, 10, params)
    crossed = np.concatenate([s.crossed.ravel() for s in dataset.subjects])
    expected = normal_cdf(params.a1 - 0.3) + 1.0 - normal_cdf(params.a2 - 0.3)
    se = np.sqrt(expected * (1 - expected) / crossed.size)
    assert abs(crossed.mean() - expected) < 3 * se


def test_residual_correlation():
    dataset = _no_effects_dataset(10_000, 10, _fixed_params(mu=0.0, rho=0.5))
    y = np.concatenate([s.y.ravel() for s in dataset.subjects])
    r = np.concatenate([s.r_star.ravel() for s in dataset.subjects])
    # Fisher z standard error
    assert abs(np.arctanh(np.corrcoef(y, r)[0, 1]) - np.arctanh(0.5)) < 4 / np.sqrt(y.size - 3)


def test_censor_noncrossed_blanks_reaction_times(reference_params):
    spec = ModelSpec(m=10, n=5, p=1, q1=1, q2=1)
    dataset = simulate_dataset(spec, reference_params, CovariateDesign.intercept_only(10), 4,
                               censor_noncrossed=True)
    for s in dataset.subjects:
        np.testing.assert_array_equal(np.isnan(s.r_star), ~s.crossed)


# --- Paths ---

def test_cumulative_path_examples(small_dataset):
    subject = small_dataset.subjects[0]
    zero = subject.__class__(y=np.zeros((3, 1)), r_star=np.zeros((3, 1)), crossed=np.zeros((3, 1), bool),
                             covariates=subject.covariates)
    np.testing.assert_array_equal(cumulative_path(zero).x, np.zeros((4, 1)))
    counted = subject.__class__(y=np.array([[1.0], [2.0], [3.0]]), r_star=np.zeros((3, 1)),
                                crossed=np.zeros((3, 1), bool), covariates=subject.covariates)
    np.testing.assert_array_equal(cumulative_path(counted).x, [[0.0], [1.0], [3.0], [6.0]])


def test_cumulative_path_differences_recover_increments(small_dataset):
    for s in small_dataset.subjects:
        x = cumulative_path(s).x
        np.testing.assert_array_equal(x[0], 0.0)
        np.testing.assert_allclose(np.diff(x, axis=0), s.y, rtol=1e-12, atol=1e-12)


# --- Datasets ---

def test_empty_dataset(reference_params):
    spec = ModelSpec(m=0, n=3, p=1, q1=1, q2=1)
    dataset = simulate_dataset(spec, reference_params, CovariateDesign.intercept_only(0), 1)
    assert len(dataset) == 0


def test_same_seed_same_dataset(reference_params):
    spec = ModelSpec(m=7, n=4, p=1, q1=1, q2=1)
    design = CovariateDesign.intercept_only(7)
    first = simulate_dataset(spec, reference_params, design, 123)
    second = simulate_dataset(spec, reference_params, design, 123, threads=4)
    for a, b in zip(first.subjects, second.subjects):
        assert a.y.tobytes() == b.y.tobytes()
        assert a.r_star.tobytes() == b.r_star.tobytes()


def test_subject_streams_do_not_depend_on_m(reference_params):
    small = simulate_dataset(ModelSpec(m=2, n=4, p=1, q1=1, q2=1), reference_params,
                             CovariateDesign.intercept_only(2), 77)
    large = simulate_dataset(ModelSpec(m=9, n=4, p=1, q1=1, q2=1), reference_params,
                             CovariateDesign.intercept_only(9), 77)
    np.testing.assert_array_equal(small.subjects[1].y, large.subjects[1].y)


def test_subject_effects_follow_sigma1(reference_params):
    m = 10_000
    dataset = simulate_dataset(ModelSpec(m=m, n=1, p=1, q1=1, q2=1), reference_params,
                               CovariateDesign.intercept_only(m), 8)
    b1 = np.array([s.random_effects.b1[0] for s in dataset.subjects])
    assert abs(b1.var(ddof=1) - 0.25) < 4 * 0.25 * np.sqrt(2.0 / m)


def test_multi_outcome_shapes(two_outcome_setup):
    spec, design, params = two_outcome_setup
    dataset = simulate_dataset(spec, params, design, 2)
    assert all(s.y.shape == (3, 2) for s in dataset.subjects)


def test_mismatched_design_is_rejected(reference_params):
    spec = ModelSpec(m=3, n=2, p=1, q1=1, q2=1)
    with pytest.raises(ConfigurationError):
        simulate_dataset(spec, reference_params, CovariateDesign.intercept_only(4), 1)
