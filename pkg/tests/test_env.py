import math

import numpy as np
import pytest

from tailbandits.env import (
    BanditInstance,
    BaselineSchedule,
    LinearInstance,
    NoiseModel,
    baseline_from_config,
    basis_actions,
    draw_reward,
    linear_instance_from_config,
    linear_mean,
    parse_action_set,
    sample_noise,
    sample_reward,
)
from tailbandits.errors import BanditInputError
from tailbandits.sim import make_stream


def test_rademacher_zero_scale_is_zero():
    assert sample_noise(NoiseModel("rademacher", 0.0), make_stream(1)) == 0.0


def test_rademacher_two_point_support():
    draws = NoiseModel("rademacher", 0.5).sample_array(make_stream(2), 1000)
    assert set(draws.tolist()) == {-0.5, 0.5}


def test_uniform_stays_in_range():
    sigma = 0.4
    draws = NoiseModel("uniform", sigma).sample_array(make_stream(3), 10_000)
    assert np.all(np.abs(draws) <= sigma * math.sqrt(3))


def test_gaussian_draw_is_reproducible():
    model = NoiseModel("gaussian", 1.0)
    first = sample_noise(model, make_stream(42))
    assert sample_noise(model, make_stream(42)) == first
    assert sample_noise(model, make_stream(43)) != first


@pytest.mark.parametrize("kind", ["gaussian", "rademacher", "uniform"])
def test_noise_mean_vanishes(kind):
    n, sigma = 100_000, 0.7
    draws = NoiseModel(kind, sigma).sample_array(make_stream(5), n)
    assert abs(draws.mean()) < 5 * sigma / math.sqrt(n)


def test_negative_sigma_rejected():
    with pytest.raises(BanditInputError):
        NoiseModel("gaussian", -1.0)


def test_noiseless_reward_is_the_mean():
    instance = BanditInstance((0.5, 0.3), NoiseModel("gaussian", 0.0))
    assert sample_reward(instance, 0, 1, None, make_stream(0)) == 0.5


def test_constant_baseline_shifts_reward():
    instance = BanditInstance((0.5, 0.3), NoiseModel("gaussian", 0.0))
    baseline = BaselineSchedule(bound=1.0, kind="constant", value=0.2)
    assert sample_reward(instance, 1, 4, baseline, make_stream(0)) == pytest.approx(0.5)


def test_rademacher_reward_support():
    instance = BanditInstance((0.5, 0.3), NoiseModel("rademacher", 0.1))
    reward, noise = draw_reward(instance, 0, 1, None, make_stream(9))
    assert reward == pytest.approx(0.5 + noise)
    assert min(abs(reward - 0.4), abs(reward - 0.6)) < 1e-12


def test_reward_arm_out_of_range():
    instance = BanditInstance((0.5, 0.3))
    with pytest.raises(BanditInputError):
        sample_reward(instance, 2, 1, None, make_stream(0))


def test_instance_validation():
    with pytest.raises(BanditInputError):
        BanditInstance((0.5,))
    with pytest.raises(BanditInputError):
        BanditInstance((0.5, 1.2))


def test_instance_gaps():
    instance = BanditInstance((0.2, 0.7, 0.7))
    assert instance.gaps.tolist() == pytest.approx([0.5, 0.0, 0.0])
    assert instance.optimal_arms == (1, 2)


@pytest.mark.parametrize("config", [
    {"bound": 1.0, "kind": "zero"},
    {"bound": 1.0, "kind": "constant", "value": 0.3},
    {"bound": 1.0, "kind": "sinusoid", "amplitude": 0.8, "period": 7},
    {"bound": 2.0, "kind": "random_walk", "step": 0.5, "seed": 4},
    {"bound": 1.0, "kind": "piecewise", "pieces": ((1, 0.1), (10, 0.9))},
])
def test_baseline_stays_in_range(config):
    values = BaselineSchedule(**config).values(200)
    assert values.shape == (200,)
    assert values.min() >= 0.0 and values.max() <= config["bound"]
    assert not values.flags.writeable


def test_piecewise_holds_values():
    schedule = BaselineSchedule(bound=1.0, kind="piecewise", pieces=((1, 0.1), (10, 0.9)))
    assert schedule.value_at(9) == 0.1
    assert schedule.value_at(10) == 0.9


def test_random_walk_depends_only_on_its_seed():
    a = BaselineSchedule(bound=1.0, kind="random_walk", seed=1).values(100)
    b = BaselineSchedule(bound=1.0, kind="random_walk", seed=1).values(100)
    c = BaselineSchedule(bound=1.0, kind="random_walk", seed=2).values(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_baseline_validation():
    with pytest.raises(BanditInputError):
        BaselineSchedule(bound=0.5, kind="constant", value=0.8)
    with pytest.raises(BanditInputError):
        BaselineSchedule(bound=1.0, kind="piecewise", pieces=((2, 0.1),))


@pytest.mark.parametrize("theta, action, expected", [
    ((1.0, 0.0), (0.0, 1.0), 0.0),
    ((1.0, 0.0), (1.0, 0.0), 1.0),
    ((0.6, 0.8), (0.6, 0.8), 1.0),
])
def test_linear_mean(theta, action, expected):
    instance = LinearInstance(theta, (action, (0.0, 0.0)))
    assert linear_mean(instance, action) == pytest.approx(expected)


def test_linear_mean_rejects_unknown_action():
    instance = LinearInstance((1.0, 0.0), basis_actions(2))
    with pytest.raises(BanditInputError):
        linear_mean(instance, (0.5, 0.5))


def test_linear_instance_validation():
    with pytest.raises(BanditInputError):
        LinearInstance((1.5, 0.0), basis_actions(2))
    with pytest.raises(BanditInputError):
        LinearInstance((0.5, 0.0), ((1.0, 1.0),))
    with pytest.raises(BanditInputError):
        LinearInstance((0.5, 0.0), ())


def test_cyclic_rotation_rolls_coordinates():
    instance = LinearInstance((0.5, 0.3, 0.1), basis_actions(3), rotation="cyclic")
    assert instance.cycle == 3
    assert instance.action_matrix(2)[0].tolist() == [0.0, 1.0, 0.0]
    assert instance.means(1).tolist() == pytest.approx([0.5, 0.3, 0.1])
    assert instance.uniform_gap == pytest.approx(0.2)


def test_basis_preset():
    assert parse_action_set("basis(3)") == basis_actions(3)
    with pytest.raises(BanditInputError):
        parse_action_set("simplex(3)")


def test_linear_instance_from_config_defaults_to_basis():
    instance = linear_instance_from_config({"theta": [0.5, 0.3], "noise": {"sigma": 0.2}})
    assert instance.actions == basis_actions(2)
    assert instance.noise.sigma == 0.2
    assert instance.uniform_gap == pytest.approx(0.2)


@pytest.mark.parametrize("kind", ["gaussian", "rademacher", "uniform"])
def test_noise_tail_is_subgaussian(kind):
    sigma, n = 0.7, 1_000_000
    draws = NoiseModel(kind, sigma).sample_array(make_stream(13), n)
    for x in (sigma, 2 * sigma, 3 * sigma):
        p = float(np.mean(draws > x))
        assert p <= 1.05 * math.exp(-x * x / (2 * sigma * sigma)) + 3 * math.sqrt(p * (1 - p) / n)


def test_sinusoid_from_config_varies():
    values = baseline_from_config({"kind": "sinusoid", "bound": 1.0}).values(100)
    assert values.max() - values.min() > 0.9
    assert values.min() >= 0.0 and values.max() <= 1.0


@pytest.mark.parametrize("period", [0.5, 1, 2])
def test_sinusoid_rejects_degenerate_periods(period):
    with pytest.raises(BanditInputError):
        BaselineSchedule(bound=1.0, kind="sinusoid", amplitude=0.5, period=period)


@pytest.mark.parametrize("config", [
    {"bound": 1.0, "kind": "sinusoid", "amplitude": 0.4, "period": 9},
    {"bound": 1.0, "kind": "random_walk", "step": 0.05, "seed": 3},
])
def test_value_at_matches_the_schedule(config):
    schedule = BaselineSchedule(**config)
    full = schedule.values(3000)
    for t in (1, 2, 1024, 1025, 2049, 3000):
        assert schedule.value_at(t) == pytest.approx(full[t - 1], rel=1e-12, abs=1e-15)


def test_random_walk_prefix_does_not_depend_on_horizon():
    schedule = BaselineSchedule(bound=1.0, kind="random_walk", seed=8)
    assert np.array_equal(schedule.values(1500), schedule.values(5000)[:1500])
