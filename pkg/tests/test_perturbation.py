import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import mc_censored_variance
from sparse_bandit.perturbation import (
    PerturbationSpec,
    censor_context,
    censored_variance,
    censored_variance_direct,
    g_lower_bound,
    perturbed_diversity_lambda0,
    sample_perturbation,
)

HALF_RECTIFIED = 0.5 - 1.0 / (2.0 * math.pi)


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(np.ones(2), sigma1=0.0)
    with pytest.raises(ValueError):
        PerturbationSpec(np.array([1.0, -1.0]), sigma1=1.0)
    with pytest.raises(ValueError):
        PerturbationSpec(np.ones(2))
    with pytest.raises(ValueError):
        PerturbationSpec(np.ones(2), covariance=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        PerturbationSpec(np.ones(2), covariance=np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_default_energy_cap_is_norm_of_bounds():
    spec = PerturbationSpec.isotropic(0.1, 4)
    assert spec.energy_cap == pytest.approx(2 * 1.4)


def test_vanishing_sigma_gives_near_zero_sample():
    spec = PerturbationSpec.isotropic(1e-12, 5)
    assert np.abs(sample_perturbation(spec, np.random.default_rng(0))).max() < 1e-10


def test_isotropic_sample_variance():
    spec = PerturbationSpec.isotropic(1.0, 4)
    rng = np.random.default_rng(1)
    e = np.stack([sample_perturbation(spec, rng) for _ in range(250_000)])
    # 10^6 scalar draws in total
    np.testing.assert_allclose(e.var(axis=0), 1.0, rtol=0.01)


def test_general_covariance_sample():
    spec = PerturbationSpec(np.full(2, 10.0), covariance=np.diag([1.0, 4.0]))
    rng = np.random.default_rng(2)
    e = np.stack([sample_perturbation(spec, rng) for _ in range(200_000)])
    cov = np.cov(e.T)
    np.testing.assert_allclose(np.diag(cov), [1.0, 4.0], rtol=0.02)
    assert abs(cov[0, 1]) < 0.02 * 2.0


@pytest.mark.parametrize("mu,e,expected", [(0.5, 0.3, 0.8), (0.9, 0.5, 1.0), (-0.9, -0.4, -1.0)])
def test_censor_examples(mu, e, expected):
    out = censor_context(np.array([mu]), np.array([e]), np.array([1.0]))
    assert out[0] == pytest.approx(expected)


def test_censor_rejects_out_of_box_mean():
    with pytest.raises(ValueError, match=r"\[1\]"):
        censor_context(np.array([0.2, 1.5]), np.zeros(2), np.ones(2))



@given(st.data())
def test_censoring_bound_and_interior_identity(data):
    q = np.array(data.draw(st.lists(st.floats(0.01, 5), min_size=3, max_size=3)))
    mu = np.array([data.draw(st.floats(-float(b), float(b))) for b in q])
    e = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=3, max_size=3)))
    x = censor_context(mu, e, q)
    assert np.all(np.abs(x) <= q)
    inside = np.abs(mu + e) <= q
    np.testing.assert_array_equal(x[inside], (mu + e)[inside])


def test_variance_degenerate_interval():
    assert censored_variance(0.0, 0.0, 1.0) == 0.0


def test_variance_wide_symmetric_interval():
    s = 0.7
    assert censored_variance(-8 * s, 8 * s, s) == pytest.approx(s * s, rel=1e-4)


def test_variance_one_sided_closed_form():
    assert censored_variance(0.0, 10.0, 1.0) == pytest.approx(HALF_RECTIFIED, abs=1e-6)
    assert censored_variance(0.0, math.inf, 1.0) == pytest.approx(HALF_RECTIFIED, abs=1e-12)


def test_variance_rejects_bad_intervals():
    with pytest.raises(ValueError):
        censored_variance(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        censored_variance(0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        censored_variance(-1.0, 1.0, 0.0)


@settings(max_examples=60)
@given(st.floats(-6, 0), st.floats(0, 6), st.floats(0.05, 3))
def test_variance_agrees_with_raw_moments_and_is_dominated(a, b, s):
    v = censored_variance(a * s, b * s, s)
    assert v == pytest.approx(censored_variance_direct(a * s, b * s, s), rel=1e-9, abs=1e-12 * s * s)
    assert 0.0 <= v <= s * s * (1 + 1e-12)


def test_variance_matches_monte_carlo_grid():
    rng = np.random.default_rng(3)
    for a, b, s in [(-1, 1, 1), (0, 2, 1), (-0.3, 0.1, 0.2), (-2, 0.5, 1.5), (0, 0.2, 0.1)]:
        emp, se = mc_censored_variance(a, b, s, 1_000_000, rng)
        assert abs(censored_variance(a, b, s) - emp) <= 3 * se


@pytest.mark.parametrize("L", [1.0, 2.0, 4.0])
def test_endpoint_minimality(L):
    s = 1.0
    grid = np.linspace(-L, 0.0, 201)
    vals = np.array([censored_variance(a, a + L, s) for a in grid])
    assert vals.min() >= min(vals[0], vals[-1]) - 1e-12
    rng = np.random.default_rng(int(L))
    emp_end, se_end = mc_censored_variance(0.0, L, s, 1_000_000, rng)
    emp_mid, se_mid = mc_censored_variance(-L / 2, L / 2, s, 1_000_000, rng)
    assert emp_end < emp_mid + 3 * math.hypot(se_end, se_mid)


def test_one_sided_variance_non_decreasing():
    vals = [censored_variance(0.0, b, 1.0) for b in np.linspace(0, 8, 161)]
    assert np.all(np.diff(vals) >= -1e-14)


def test_g_lower_bound_examples():
    assert g_lower_bound(10.0, 1.0) == pytest.approx(HALF_RECTIFIED, abs=1e-6)
    assert g_lower_bound(1.0, 1.0) < g_lower_bound(2.0, 1.0)
    assert g_lower_bound(0.3, 0.3) > 0


def test_g_lower_bound_matches_monte_carlo():
    rng = np.random.default_rng(4)
    for q in (1.0, 2.0):
        emp, se = mc_censored_variance(0.0, 2 * q, 1.0, 1_000_000, rng)
        assert abs(g_lower_bound(q, 1.0) - emp) <= 3 * se


def test_g_lower_bound_warns_below_sigma():
    with pytest.warns(UserWarning):
        v = g_lower_bound(0.5, 1.0)
    assert v > 0


def test_lambda0():
    assert perturbed_diversity_lambda0(PerturbationSpec(np.array([10.0, 12.0]), sigma1=1.0)) == \
        pytest.approx(HALF_RECTIFIED, abs=1e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spec = PerturbationSpec(np.full(3, 0.1), sigma1=0.1)
        assert perturbed_diversity_lambda0(spec) == censored_variance(0.0, 0.2, 0.1)
    with pytest.raises(NotImplementedError):
        perturbed_diversity_lambda0(PerturbationSpec(np.ones(2), covariance=np.eye(2)))


@given(st.floats(0.05, 3), st.floats(1.0, 20))
def test_lambda0_at_most_sigma_squared(s, ratio):
    spec = PerturbationSpec.isotropic(s, 3, q=ratio * s)
    assert perturbed_diversity_lambda0(spec) <= s * s
