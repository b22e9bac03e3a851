"""Trajectory sampling, batch-means estimation, and potential estimation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mdp
from mvmdp import (
    DeterministicPolicy,
    PathSample,
    RandomizedPolicy,
    ValidationError,
    estimate_metrics,
    estimate_potential,
    evaluate,
    sample_random_policy,
    simulate_path,
)


class TestSimulatePath:
    def test_shapes_and_start_state(self):
        rng = np.random.default_rng(0)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        path = simulate_path(m, d, 500, seed=1, start_state=1)
        assert path.states.shape == (500,)
        assert path.actions.shape == (500,)
        assert path.rewards.shape == (500,)
        assert path.states[0] == 1
        assert np.all((0 <= path.states) & (path.states < m.num_states))

    def test_rewards_and_actions_follow_the_policy(self):
        rng = np.random.default_rng(2)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        path = simulate_path(m, d, 300, seed=3)
        assert np.array_equal(path.actions, d.action[path.states])
        assert np.array_equal(path.rewards, m.reward[path.states, path.actions])

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(4)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        a = simulate_path(m, d, 200, seed=9)
        b = simulate_path(m, d, 200, seed=9)
        c = simulate_path(m, d, 200, seed=10)
        assert np.array_equal(a.states, b.states)
        assert not np.array_equal(a.states, c.states)

    def test_randomized_policy_uses_its_distribution(self):
        rng = np.random.default_rng(5)
        m = random_mdp(rng)
        theta_rows = np.full((m.num_states, m.num_actions), 1.0 / m.num_actions)
        theta = RandomizedPolicy(theta_rows)
        path = simulate_path(m, theta, 4000, seed=6)
        counts = np.bincount(path.actions, minlength=m.num_actions)
        assert np.all(counts > 0)
        frac = counts / counts.sum()
        assert np.allclose(frac, 1.0 / m.num_actions, atol=0.05)

    def test_empirical_frequencies_approach_stationary(self):
        rng = np.random.default_rng(7)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        rep = evaluate(m, d)
        path = simulate_path(m, d, 60_000, seed=8)
        freq = np.bincount(path.states, minlength=m.num_states) / len(path.states)
        assert np.allclose(freq, rep.pi, atol=0.02)

    def test_validation(self):
        rng = np.random.default_rng(9)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        with pytest.raises(ValidationError, match="length"):
            simulate_path(m, d, 0)
        with pytest.raises(ValidationError, match="start_state"):
            simulate_path(m, d, 10, start_state=m.num_states)
        with pytest.raises(ValidationError, match="cannot simulate"):
            simulate_path(m, object(), 10)


class TestEstimateMetrics:
    def test_constant_rewards_are_exact_with_zero_half_widths(self):
        est = estimate_metrics(np.full(1000, 2.5), beta=0.4)
        assert est.j_mean_hat == 2.5
        assert est.j_var_hat == 0.0
        assert est.j_combined_hat == 2.5
        assert est.half_width_mean == 0.0
        assert est.half_width_var == 0.0
        assert est.half_width_combined == 0.0

    def test_accepts_path_sample(self):
        rng = np.random.default_rng(10)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        path = simulate_path(m, d, 900, seed=11)
        est1 = estimate_metrics(path, m.beta)
        est2 = estimate_metrics(path.rewards, m.beta)
        assert est1.j_mean_hat == est2.j_mean_hat
        assert est1.half_width_var == est2.half_width_var

    def test_point_estimates_match_numpy(self):
        rewards = np.random.default_rng(12).normal(size=500)
        est = estimate_metrics(rewards, beta=0.3)
        assert est.j_mean_hat == pytest.approx(rewards.mean())
        assert est.j_var_hat == pytest.approx(((rewards - rewards.mean()) ** 2).mean())
        assert est.j_combined_hat == pytest.approx(est.j_mean_hat - 0.3 * est.j_var_hat)

    def test_half_width_shrinks_with_horizon(self):
        rng = np.random.default_rng(13)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        short = estimate_metrics(simulate_path(m, d, 2_000, seed=14), m.beta)
        long = estimate_metrics(simulate_path(m, d, 200_000, seed=14), m.beta)
        assert long.half_width_mean < short.half_width_mean

    def test_covers_analytic_value_on_long_paths(self):
        rng = np.random.default_rng(15)
        m = random_mdp(rng)
        d = sample_random_policy(m, rng)
        rep = evaluate(m, d)
        est = estimate_metrics(simulate_path(m, d, 300_000, seed=16), m.beta)
        assert abs(est.j_mean_hat - rep.j_mean) <= 3 * est.half_width_mean
        assert abs(est.j_var_hat - rep.j_var) <= 3 * est.half_width_var
        assert abs(est.j_combined_hat - rep.j_combined) <= 3 * est.half_width_combined

    def test_too_short_path_rejected(self):
        with pytest.raises(ValidationError, match=">= 2"):
            estimate_metrics(np.array([1.0]), beta=0.5)
        with pytest.raises(ValidationError, match="beta"):
            estimate_metrics(np.ones(10), beta=0.0)

    def test_short_paths_use_fewer_batches(self):
        est = estimate_metrics(np.arange(7, dtype=float), beta=1.0)
        assert est.horizon == 7
        assert est.half_width_mean > 0


class TestEstimatePotential:
    def test_reference_state_is_exactly_zero(self, two_state_hand_model):
        d = DeterministicPolicy(np.zeros(2, dtype=int))
        pe = estimate_potential(two_state_hand_model, d, state=0, seed=1)
        assert pe.value == 0.0
        assert pe.std_error == 0.0

    def test_hand_model_agrees_with_exact_potential(self, two_state_hand_model):
        d = DeterministicPolicy(np.zeros(2, dtype=int))
        pe = estimate_potential(
            two_state_hand_model, d, state=1, truncation=200, num_replications=4000, seed=2
        )
        assert abs(pe.value - (-1.0)) <= 3 * pe.std_error
        assert pe.state == 1
        assert pe.num_replications == 4000

    def test_reproducible_in_seed(self, two_state_hand_model):
        d = DeterministicPolicy(np.zeros(2, dtype=int))
        a = estimate_potential(two_state_hand_model, d, state=1, num_replications=500, seed=3)
        b = estimate_potential(two_state_hand_model, d, state=1, num_replications=500, seed=3)
        assert a.value == b.value
        assert a.std_error == b.std_error

    def test_random_model_within_error_bars(self):
        rng = np.random.default_rng(17)
        m = random_mdp(rng, max_states=4, max_actions=3)
        d = sample_random_policy(m, rng)
        rep = evaluate(m, d)
        for s in range(1, m.num_states):
            pe = estimate_potential(m, d, state=s, truncation=400, num_replications=6000, seed=s)
            assert abs(pe.value - rep.potential[s]) <= 4 * max(pe.std_error, 1e-3)


@settings(deadline=None, max_examples=15)
@given(st.integers(0, 10**6))
def test_path_state_support_matches_reachability(seed):
    rng = np.random.default_rng(seed)
    m = random_mdp(rng)
    d = sample_random_policy(m, rng)
    path = simulate_path(m, d, 3000, seed=seed)
    # dirichlet chains are irreducible, so every state appears on a long path
    assert len(np.unique(path.states)) == m.num_states


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 10**6), st.integers(2, 200))
def test_estimate_metrics_identity_holds(seed, T):
    rewards = np.random.default_rng(seed).normal(size=T)
    est = estimate_metrics(rewards, beta=0.7)
    assert est.j_combined_hat == pytest.approx(est.j_mean_hat - 0.7 * est.j_var_hat)
    assert est.half_width_mean >= 0.0
