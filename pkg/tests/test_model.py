"""Model container, policies, induced chains, structure checks, and I/O."""
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mdp
from mvmdp import (
    DeterministicPolicy,
    FeasibilityError,
    MdpModel,
    MixedPolicy,
    ModelIOError,
    RandomizedPolicy,
    ValidationError,
    check_ergodicity,
    closed_class_count,
    induced_chain,
    induced_chain_mixed,
    induced_chain_randomized,
    is_irreducible,
    load_model,
    load_policy,
    model_from_dict,
    model_to_dict,
    sample_random_policy,
    save_model,
    save_policy,
)


def small_model(**overrides):
    kw = dict(
        num_states=2,
        num_actions=2,
        feasible=((0, 1), (0, 1)),
        kernel=np.array(
            [[[0.2, 0.8], [0.7, 0.3]], [[0.5, 0.5], [0.1, 0.9]]]
        ),
        reward=np.array([[1.0, 2.0], [0.5, -1.0]]),
        beta=0.5,
    )
    kw.update(overrides)
    return MdpModel(**kw)


class TestModelValidation:
    def test_valid_model_builds(self):
        m = small_model()
        assert m.num_states == 2
        assert m.kernel.dtype == np.float64

    def test_arrays_are_frozen(self):
        m = small_model()
        with pytest.raises(ValueError):
            m.kernel[0, 0, 0] = 0.5
        with pytest.raises(ValueError):
            m.reward[0, 0] = 0.0

    def test_bad_row_sum_names_the_pair(self):
        k = np.array([[[0.2, 0.7], [0.7, 0.3]], [[0.5, 0.5], [0.1, 0.9]]])
        with pytest.raises(ValidationError, match=r"row 0,0 sums to"):
            small_model(kernel=k)

    def test_negative_kernel_entry(self):
        k = np.array([[[-0.1, 1.1], [0.7, 0.3]], [[0.5, 0.5], [0.1, 0.9]]])
        with pytest.raises(ValidationError, match="negative"):
            small_model(kernel=k)

    def test_beta_must_be_positive(self):
        with pytest.raises(ValidationError, match="beta"):
            small_model(beta=0.0)
        with pytest.raises(ValidationError, match="beta"):
            small_model(beta=-1.0)

    def test_empty_feasible_set_rejected(self):
        with pytest.raises(ValidationError, match="no feasible action"):
            small_model(feasible=((0, 1), ()))

    def test_out_of_range_action_rejected(self):
        with pytest.raises(ValidationError, match="outside"):
            small_model(feasible=((0, 2), (0, 1)))

    def test_duplicate_action_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            small_model(feasible=((0, 0), (0, 1)))

    def test_nonfinite_reward_rejected(self):
        r = np.array([[1.0, np.nan], [0.5, -1.0]])
        with pytest.raises(ValidationError, match="finite"):
            small_model(reward=r)

    def test_shape_mismatches(self):
        with pytest.raises(ValidationError, match="kernel shape"):
            small_model(kernel=np.ones((2, 2)))
        with pytest.raises(ValidationError, match="reward shape"):
            small_model(reward=np.ones(2))

    def test_feasible_mask_and_policy_count(self):
        m = small_model(feasible=((0,), (0, 1)))
        mask = m.feasible_mask()
        assert mask.tolist() == [[True, False], [True, True]]
        assert m.num_policies() == 2


class TestPolicies:
    def test_deterministic_validate(self):
        m = small_model(feasible=((0,), (0, 1)))
        DeterministicPolicy(np.array([0, 1])).validate_for(m)
        with pytest.raises(FeasibilityError, match="infeasible at state 0"):
            DeterministicPolicy(np.array([1, 1])).validate_for(m)
        with pytest.raises(ValidationError):
            DeterministicPolicy(np.array([0])).validate_for(m)

    def test_deterministic_eq_hash(self):
        a = DeterministicPolicy(np.array([0, 1]))
        b = DeterministicPolicy(np.array([0, 1]))
        c = DeterministicPolicy(np.array([1, 1]))
        assert a == b and hash(a) == hash(b)
        assert a != c
        assert len({a, b, c}) == 2

    def test_as_randomized_is_one_hot(self):
        m = small_model()
        d = DeterministicPolicy(np.array([1, 0]))
        theta = d.as_randomized(m).theta
        assert np.array_equal(theta, [[0.0, 1.0], [1.0, 0.0]])

    def test_randomized_validate(self):
        m = small_model(feasible=((0,), (0, 1)))
        RandomizedPolicy(np.array([[1.0, 0.0], [0.3, 0.7]])).validate_for(m)
        with pytest.raises(FeasibilityError):
            RandomizedPolicy(np.array([[0.9, 0.1], [0.3, 0.7]])).validate_for(m)
        with pytest.raises(ValidationError, match="sums to"):
            RandomizedPolicy(np.array([[0.9, 0.0], [0.3, 0.7]])).validate_for(m)
        with pytest.raises(ValidationError, match="negative"):
            RandomizedPolicy(np.array([[1.1, -0.1], [0.3, 0.7]])).validate_for(m)

    def test_mixed_delta_range(self):
        base = DeterministicPolicy(np.array([0, 0]))
        alt = DeterministicPolicy(np.array([1, 1]))
        MixedPolicy(base, alt, 0.25)
        with pytest.raises(ValidationError, match="delta"):
            MixedPolicy(base, alt, 1.5)
        with pytest.raises(ValidationError, match="delta"):
            MixedPolicy(base, alt, -0.1)


class TestInducedChains:
    def test_deterministic_rows_come_from_kernel(self):
        m = small_model()
        d = DeterministicPolicy(np.array([1, 0]))
        P, r = induced_chain(m, d)
        assert np.array_equal(P[0], m.kernel[0, 1])
        assert np.array_equal(P[1], m.kernel[1, 0])
        assert r.tolist() == [2.0, 0.5]

    def test_randomized_mixes_rows_and_moments(self):
        m = small_model()
        theta = RandomizedPolicy(np.array([[0.5, 0.5], [0.2, 0.8]]))
        P, r_mean, r_m2 = induced_chain_randomized(m, theta)
        assert np.allclose(P[0], 0.5 * m.kernel[0, 0] + 0.5 * m.kernel[0, 1])
        assert r_mean[0] == pytest.approx(1.5)
        assert r_m2[0] == pytest.approx(0.5 * 1.0 + 0.5 * 4.0)
        assert r_m2[1] == pytest.approx(0.2 * 0.25 + 0.8 * 1.0)

    def test_one_hot_randomized_matches_deterministic(self):
        m = small_model()
        d = DeterministicPolicy(np.array([0, 1]))
        Pd, rd = induced_chain(m, d)
        Pt, rm, _ = induced_chain_randomized(m, d.as_randomized(m))
        assert np.allclose(Pd, Pt)
        assert np.allclose(rd, rm)

    def test_mixed_endpoints(self):
        m = small_model()
        base = DeterministicPolicy(np.array([0, 0]))
        alt = DeterministicPolicy(np.array([1, 1]))
        P0, r0 = induced_chain_mixed(m, MixedPolicy(base, alt, 0.0))
        P1, r1 = induced_chain_mixed(m, MixedPolicy(base, alt, 1.0))
        Pb, rb = induced_chain(m, base)
        Pa, ra = induced_chain(m, alt)
        assert np.allclose(P0, Pb) and np.allclose(r0, rb)
        assert np.allclose(P1, Pa) and np.allclose(r1, ra)

    def test_mixed_interpolates_linearly(self):
        m = small_model()
        base = DeterministicPolicy(np.array([0, 0]))
        alt = DeterministicPolicy(np.array([1, 1]))
        Pm, rm = induced_chain_mixed(m, MixedPolicy(base, alt, 0.3))
        Pb, rb = induced_chain(m, base)
        Pa, ra = induced_chain(m, alt)
        assert np.allclose(Pm, Pb + 0.3 * (Pa - Pb))
        assert np.allclose(rm, rb + 0.3 * (ra - rb))


class TestStructure:
    def test_closed_class_counts(self):
        assert closed_class_count(np.eye(3)) == 3
        cycle = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        assert closed_class_count(cycle) == 1
        absorbing = np.array([[1.0, 0.0], [0.5, 0.5]])
        assert closed_class_count(absorbing) == 1
        two_blocks = np.array(
            [
                [0.5, 0.5, 0.0, 0.0],
                [0.5, 0.5, 0.0, 0.0],
                [0.0, 0.0, 0.5, 0.5],
                [0.0, 0.0, 0.5, 0.5],
            ]
        )
        assert closed_class_count(two_blocks) == 2

    def test_is_irreducible(self):
        assert is_irreducible(np.array([[0.5, 0.5], [0.5, 0.5]]))
        assert not is_irreducible(np.array([[1.0, 0.0], [0.5, 0.5]]))

    def test_check_ergodicity_enumerates_small_models(self):
        m = small_model()
        report = check_ergodicity(m)
        assert report.mode == "enumeration"
        assert report.policies_checked == 4
        assert report.all_irreducible

    def test_check_ergodicity_flags_violations(self):
        k = np.array([[[1.0, 0.0], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]])
        m = small_model(kernel=k)
        report = check_ergodicity(m)
        assert report.union_irreducible
        assert len(report.violations) == 2
        assert not report.all_irreducible
        assert all(p.action[0] == 0 for p in report.violations)

    def test_check_ergodicity_samples_large_models(self, wind_model):
        report = check_ergodicity(wind_model, sample_size=50, seed=0)
        assert report.mode == "sampling"
        assert report.policies_checked == 50
        assert report.union_irreducible

    def test_sample_random_policy_feasible_and_irreducible(self):
        m = small_model(feasible=((0,), (0, 1)))
        rng = np.random.default_rng(3)
        for _ in range(20):
            d = sample_random_policy(m, rng)
            d.validate_for(m)
            P, _ = induced_chain(m, d)
            assert is_irreducible(P)

    def test_sample_random_policy_gives_up_when_impossible(self):
        m = small_model(
            kernel=np.stack([np.stack([np.eye(2)[i]] * 2) for i in range(2)])
        )
        with pytest.raises(ValidationError, match="no irreducible policy"):
            sample_random_policy(m, np.random.default_rng(0), max_tries=10)

    def test_sample_is_reproducible(self):
        m = small_model()
        a = sample_random_policy(m, np.random.default_rng(11))
        b = sample_random_policy(m, np.random.default_rng(11))
        assert a == b


class TestModelIO:
    def test_round_trip_exact(self, tmp_path):
        m = small_model(feasible=((0,), (0, 1)))
        path = tmp_path / "m.json"
        save_model(m, str(path))
        back = load_model(str(path))
        assert back.num_states == m.num_states
        assert back.feasible == m.feasible
        assert np.array_equal(back.kernel[0, 0], m.kernel[0, 0])
        assert np.array_equal(back.reward[1], m.reward[1])
        assert back.beta == m.beta

    def test_dict_round_trip_preserves_bits(self):
        m = random_mdp(np.random.default_rng(8))
        back = model_from_dict(model_to_dict(m))
        for i, acts in enumerate(m.feasible):
            for a in acts:
                assert np.array_equal(back.kernel[i, a], m.kernel[i, a])
                assert back.reward[i, a] == m.reward[i, a]

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(ModelIOError, match="cannot read"):
            load_model(str(tmp_path / "absent.json"))

    def test_bad_json_reports_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{broken")
        with pytest.raises(ModelIOError, match=r"line 1"):
            load_model(str(p))

    def test_missing_field_is_validation_error(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"num_states": 2}))
        with pytest.raises(ValidationError, match="missing"):
            load_model(str(p))

    def test_missing_kernel_entry(self, tmp_path):
        m = small_model()
        data = model_to_dict(m)
        del data["kernel"]["1,1"]
        with pytest.raises(ValidationError, match="1,1"):
            model_from_dict(data)

    def test_policy_round_trips(self, tmp_path):
        d = DeterministicPolicy(np.array([1, 0]))
        pd = tmp_path / "d.json"
        save_policy(d, str(pd))
        assert load_policy(str(pd)) == d

        theta = RandomizedPolicy(np.array([[0.25, 0.75], [1.0, 0.0]]))
        pt = tmp_path / "t.json"
        save_policy(theta, str(pt))
        back = load_policy(str(pt))
        assert isinstance(back, RandomizedPolicy)
        assert np.array_equal(back.theta, theta.theta)

    def test_policy_file_without_keys(self, tmp_path):
        p = tmp_path / "p.json"
        p.write_text(json.dumps({"weights": [1, 2]}))
        with pytest.raises(ValidationError, match="neither"):
            load_policy(str(p))


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 10**6))
def test_random_models_are_valid_and_round_trip(seed):
    m = random_mdp(np.random.default_rng(seed))
    assert np.allclose(m.kernel.sum(axis=2), 1.0, atol=1e-9)
    back = model_from_dict(model_to_dict(m))
    assert np.array_equal(back.kernel, m.kernel)
    assert np.array_equal(back.reward, m.reward)


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 10**6), st.floats(0.0, 1.0))
def test_mixed_chain_rows_are_stochastic(seed, delta):
    rng = np.random.default_rng(seed)
    m = random_mdp(rng)
    base = sample_random_policy(m, rng, require_irreducible=False)
    alt = sample_random_policy(m, rng, require_irreducible=False)
    P, _ = induced_chain_mixed(m, MixedPolicy(base, alt, delta))
    assert np.all(P >= -1e-15)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
