import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_bandit.environment import (
    BanditInstance,
    ContextStrategy,
    RoundContexts,
    apply_perturbed_adversary,
    best_arm,
    generate_raw_contexts,
    realize_reward,
)
from sparse_bandit.perturbation import PerturbationSpec, censored_variance
from sparse_bandit.streams import Purpose, StreamFactory


def instance(d=3, m=3, theta=None, sigma=0.0):
    theta = np.eye(d)[0] if theta is None else theta
    return BanditInstance(np.asarray(theta, float), m=m, reward_noise_sigma=sigma)


def test_random_instance_invariants():
    inst = BanditInstance.random(50, 7, 5, 0.1, np.random.default_rng(0))
    assert inst.k == 7 and np.count_nonzero(inst.theta_star) == 7
    np.testing.assert_array_equal(inst.support, np.flatnonzero(inst.theta_star))
    assert np.linalg.norm(inst.theta_star) == pytest.approx(1.0)
    raw = BanditInstance.random(50, 7, 5, 0.1, np.random.default_rng(0), normalize=False)
    assert np.all((np.abs(raw.theta_star[raw.support]) >= 0.5) & (np.abs(raw.theta_star[raw.support]) <= 1))
    pos = BanditInstance.random(50, 7, 5, 0.1, np.random.default_rng(0), signs="positive")
    assert np.all(pos.theta_star[pos.support] > 0)


@pytest.mark.parametrize("d,k,m", [(5, 0, 3), (5, 6, 3), (5, 2, 1)])
def test_random_instance_rejects_bad_sizes(d, k, m):
    with pytest.raises(ValueError):
        BanditInstance.random(d, k, m, 0.0, np.random.default_rng(0))


def test_uniform01_contexts_in_unit_box():
    raw = generate_raw_contexts(ContextStrategy("uniform01"), instance(), 1, StreamFactory(0))
    assert raw.shape == (3, 3)
    assert np.all((raw >= 0) & (raw <= 1))


def test_fixed_pool_single_vector():
    v = np.array([0.1, 0.2, 0.3])
    raw = generate_raw_contexts(ContextStrategy("fixed_pool", pool=[v]), instance(), 4, StreamFactory(0))
    np.testing.assert_array_equal(raw, np.tile(v, (3, 1)))


def test_fixed_pool_cycles_and_exhausts():
    pool = np.arange(12, dtype=float).reshape(4, 3) / 12
    strat = ContextStrategy("fixed_pool", pool=pool)
    r2 = generate_raw_contexts(strat, instance(), 2, StreamFactory(0))
    np.testing.assert_array_equal(r2, pool[[3, 0, 1]])
    with pytest.raises(ValueError, match="exhausted"):
        generate_raw_contexts(ContextStrategy("fixed_pool", pool=pool, replay=False),
                              instance(), 2, StreamFactory(0))


def test_drawn_pool_is_static_within_episode():
    strat = ContextStrategy("fixed_pool")
    a = generate_raw_contexts(strat, instance(), 1, StreamFactory(5))
    b = generate_raw_contexts(strat, instance(), 7, StreamFactory(5))
    np.testing.assert_array_equal(a, b)
    assert np.all((a >= 0) & (a <= 1))


def test_low_diversity_arms_are_close():
    raw = generate_raw_contexts(ContextStrategy("low_diversity", offset_scale=0.01),
                                instance(d=20, m=4), 3, StreamFactory(1))
    assert np.abs(raw - raw[0]).max() <= 0.02 + 1e-12


@pytest.mark.parametrize("kind", ["uniform01", "fixed_pool", "low_diversity"])
def test_raw_contexts_deterministic(kind):
    s = ContextStrategy(kind)
    a = generate_raw_contexts(s, instance(), 5, StreamFactory(9, 2))
    b = generate_raw_contexts(s, instance(), 5, StreamFactory(9, 2))
    np.testing.assert_array_equal(a, b)


def test_round_must_be_positive():
    with pytest.raises(ValueError):
        generate_raw_contexts(ContextStrategy(), instance(), 0, StreamFactory(0))


def test_vanishing_perturbation_keeps_raw():
    raw = np.full((2, 3), 0.4)
    ctx = apply_perturbed_adversary(raw, PerturbationSpec.isotropic(1e-12, 3), 1, StreamFactory(0))
    np.testing.assert_allclose(ctx.perturbed, raw, atol=1e-10)


def test_perturbed_contexts_respect_bounds():
    spec = PerturbationSpec.isotropic(2.0, 6, q=1.5)
    raw = np.random.default_rng(0).uniform(0, 1, (5, 6))
    ctx = apply_perturbed_adversary(raw, spec, 1, StreamFactory(0))
    assert np.all(np.abs(ctx.perturbed) <= 1.5)
    assert np.all(np.linalg.norm(ctx.perturbed, axis=1) <= spec.energy_cap + 1e-12)


def test_perturbation_variance_matches_formula():
    s, q, mu = 0.5, 0.8, 0.3
    spec = PerturbationSpec.isotropic(s, 1, q=q)
    streams = StreamFactory(3)
    raw = np.array([[mu]])
    dev = np.array([apply_perturbed_adversary(raw, spec, t, streams).perturbed[0, 0] - mu
                    for t in range(1, 100_001)])
    pred = censored_variance(-q - mu, q - mu, s)
    m4 = np.mean((dev - dev.mean()) ** 4)
    se = np.sqrt((m4 - dev.var() ** 2) / dev.size)
    assert abs(dev.var(ddof=1) - pred) <= 3 * se


def test_realize_reward_noiseless():
    inst = instance()
    rng = np.random.default_rng(0)
    assert realize_reward(np.eye(3)[0], inst, rng) == 1.0
    assert realize_reward(np.eye(3)[1], inst, rng) == 0.0


def test_realize_reward_mean():
    x = np.array([0.3, 0.5, 0.2])
    inst = instance(theta=[1.0, -2.0, 0.5], sigma=1.0)
    rng = np.random.default_rng(1)
    draws = np.array([realize_reward(x, inst, rng) for _ in range(100_000)])
    assert abs(draws.mean() - x @ inst.theta_star) <= 3 / np.sqrt(1e5)


def test_realize_reward_dimension_mismatch():
    with pytest.raises(ValueError):
        realize_reward(np.ones(2), instance(), np.random.default_rng(0))


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_noiseless_reward_is_linear(a, b):
    inst = instance(theta=[0.3, -1.2, 2.0])
    rng = np.random.default_rng(0)
    a, b = np.array(a), np.array(b)
    lhs = realize_reward(a + b, inst, rng)
    rhs = realize_reward(a, inst, rng) + realize_reward(b, inst, rng)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def ctx(rows):
    rows = np.asarray(rows, float)
    return RoundContexts(raw=rows, perturbed=rows)


def test_best_arm_examples():
    x = ctx([[0.1, 0, 0], [0.9, 0, 0], [0.5, 0, 0]])
    assert best_arm(x, instance()) == (1, pytest.approx(0.9))
    assert best_arm(ctx(np.ones((3, 3))), instance())[0] == 0
    assert best_arm(x, instance(theta=np.zeros(3))) == (0, 0.0)


@given(st.integers(0, 1000), st.floats(1e-3, 1e3))
def test_best_arm_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    x = ctx(rng.uniform(0, 1, (5, 4)))
    theta = rng.standard_normal(4)
    assert best_arm(x, instance(4, 5, theta))[0] == best_arm(x, instance(4, 5, c * theta))[0]


def test_perturbations_ignore_the_learner():
    spec = PerturbationSpec.isotropic(0.3, 4)
    raw = np.full((3, 4), 0.5)
    a = apply_perturbed_adversary(raw, spec, 7, StreamFactory(11, 1)).perturbed
    # touching other streams in between must not shift the draws
    f = StreamFactory(11, 1)
    f.generator(Purpose.REWARD_NOISE, 7, 0).standard_normal(100)
    b = apply_perturbed_adversary(raw, spec, 7, f).perturbed
    np.testing.assert_array_equal(a, b)
