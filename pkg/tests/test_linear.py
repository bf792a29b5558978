import math

import numpy as np
import pytest

from tailbandits.env import LinearInstance, NoiseModel, basis_actions
from tailbandits.errors import BanditInputError, NumericalDriftError
from tailbandits.linear import (
    LinearBonusSpec,
    LinearState,
    radl_eval,
    refresh_inverse,
    run_linear_episode,
    run_linear_replicates,
    ucbl_select,
    ucbl_update,
)


def test_radius_vanishes_at_zero():
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2)
    assert radl_eval(spec, 0.0, 10) == 0.0


def test_radius_saturated_min():
    spec = LinearBonusSpec(1e9, 1.0, 0.5, 0.0, dim=4)
    assert radl_eval(spec, 1.0, 1) == pytest.approx(3.0)


def test_radius_fixed_time_value():
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2, horizon=100)
    assert radl_eval(spec, 0.1, 50) == pytest.approx(0.9472, abs=1e-4)


def test_radius_accepts_arrays():
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2)
    values = radl_eval(spec, np.array([0.0, 0.1, 0.4]), 20)
    assert values.shape == (3,)
    assert values[0] == 0.0 and values[1] < values[2]


def test_spec_validation():
    with pytest.raises(BanditInputError):
        LinearBonusSpec(1.0, 1.0, 0.3, 0.5, dim=2)
    with pytest.raises(BanditInputError):
        LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=4, horizon=3)


def test_fresh_state_picks_first_action():
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2)
    assert ucbl_select(LinearState.initial(2), spec, basis_actions(2)) == 0


def test_dominant_estimate_is_exploited():
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2)
    state = LinearState.initial(2)
    state.estimate = np.array([1.0, 0.0])
    assert ucbl_select(state, spec, basis_actions(2)) == 0


def test_hand_evaluated_indices():
    spec = LinearBonusSpec(1e9, 1.0, 0.5, 0.0, dim=2)
    state = LinearState.initial(2)
    state.estimate = np.array([0.2, 0.0])
    state.vinv = np.diag([1.0, 0.25])
    # e1: 0.2 + 1 + sqrt(2) against e2: 0 + 0.5 + sqrt(0.5)
    assert ucbl_select(state, spec, basis_actions(2)) == 0


def test_empty_action_set_rejected():
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2)
    with pytest.raises(BanditInputError):
        ucbl_select(LinearState.initial(2), spec, [])


def test_rank_one_update_of_identity():
    state = ucbl_update(LinearState.initial(2), (1.0, 0.0), 0.0)
    assert np.allclose(state.vinv, np.diag([0.5, 1.0]))


def test_zero_action_is_a_no_op():
    state = ucbl_update(LinearState.initial(2), (0.0, 0.0), 3.0)
    assert np.array_equal(state.vinv, np.eye(2))
    assert np.array_equal(state.xty, np.zeros(2))


def test_two_updates_solve_the_ridge_system():
    state = LinearState.initial(2)
    ucbl_update(state, (1.0, 0.0), 1.0)
    ucbl_update(state, (0.0, 1.0), 2.0)
    assert state.estimate == pytest.approx([0.5, 1.0])


def test_running_inverse_tracks_direct_solve():
    rng = np.random.default_rng(0)
    state = LinearState.initial(3, refresh_every=50)
    for _ in range(240):
        a = rng.normal(size=3)
        ucbl_update(state, a / np.linalg.norm(a), float(rng.normal()))
    assert np.allclose(state.vinv, np.linalg.inv(state.gram), atol=1e-9)
    assert np.allclose(state.vinv, state.vinv.T)


def test_drift_is_detected():
    state = LinearState.initial(2)
    ucbl_update(state, (1.0, 0.0), 1.0)
    state.vinv = state.vinv + 1e-3
    with pytest.raises(NumericalDriftError):
        refresh_inverse(state)


def test_zero_parameter_has_zero_regret():
    instance = LinearInstance((0.0, 0.0), basis_actions(2), NoiseModel("gaussian", 1.0))
    result = run_linear_episode(instance, LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2), 200, seed=4)
    assert result.pseudo_regret == 0.0


def test_episode_is_deterministic(basis_two):
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2, horizon=300)
    assert run_linear_episode(basis_two, spec, 300, seed=8) == run_linear_episode(basis_two, spec, 300, seed=8)


def test_basis_actions_reduce_to_k_armed_regret(basis_two):
    # theta = (0.5, 0.3): only the second basis vector loses 0.2 per pull
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2)
    for seed in range(20):
        result = run_linear_episode(basis_two, spec, 400, seed=seed)
        assert result.pseudo_regret == pytest.approx(result.pull_counts[1] * 0.2, rel=1e-12, abs=1e-12)
        assert result.empirical_regret == result.pseudo_regret - result.noise_sum


def test_elliptical_potential_budget(basis_two):
    T, d = 1000, 2
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=d)
    for seed in range(10):
        assert run_linear_episode(basis_two, spec, T, seed=seed).potential <= 2 * d * math.log(T)


def test_cyclic_rotation_episode():
    instance = LinearInstance((0.5, 0.3, 0.1), basis_actions(3), NoiseModel("gaussian", 0.2), rotation="cyclic")
    result = run_linear_episode(instance, LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=3), 300, seed=1)
    assert sum(result.pull_counts) == 300
    assert 0.0 <= result.pseudo_regret <= 300 * 0.4


def test_dimension_mismatch_rejected(basis_two):
    with pytest.raises(BanditInputError):
        run_linear_episode(basis_two, LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=3), 10)


def test_replicates_keep_seed_order(basis_two):
    spec = LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2)
    results = run_linear_replicates(basis_two, spec, 100, [5, 6, 7])
    assert [r.seed for r in results] == [5, 6, 7]
    assert results[1] == run_linear_episode(basis_two, spec, 100, seed=6)


def test_regret_sums_per_round_losses_on_a_general_action_set():
    # means 0.5, 0.3 and 0.48: losses 0, 0.2 and 0.02 per pull
    instance = LinearInstance((0.5, 0.3), ((1.0, 0.0), (0.0, 1.0), (0.6, 0.6)), NoiseModel("gaussian", 0.3))
    result = run_linear_episode(instance, LinearBonusSpec(1.0, 1.0, 0.5, 0.5, dim=2), 300, seed=2)
    expected = 0.2 * result.pull_counts[1] + 0.02 * result.pull_counts[2]
    assert result.pseudo_regret == pytest.approx(expected, rel=1e-9)
