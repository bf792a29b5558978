import math

import numpy as np
import pytest

from tailbandits.errors import BanditInputError
from tailbandits.stats import (
    FitMode,
    estimate_tail,
    empty_tail,
    fit_exponent,
    ks_distance,
    pooled_se,
    summarize,
    wilson_interval,
)


def test_counting_exceedances():
    samples = [0.0] * 750 + [2.0] * 250
    curve = estimate_tail(samples, [1.0])
    assert curve.exceed == (250,)
    assert curve.phat == (0.25,)


def test_threshold_above_every_sample():
    curve = estimate_tail([1.0, 2.0, 3.0], [5.0])
    assert curve.phat == (0.0,)
    assert curve.ci[0][0] == 0.0


def test_exceedance_is_strict():
    assert estimate_tail([1.0, 1.0, 2.0], [1.0]).exceed == (1,)


def test_tail_curve_is_nonincreasing():
    samples = np.random.default_rng(0).exponential(size=500)
    curve = estimate_tail(samples, np.linspace(0.0, 5.0, 30))
    assert all(b <= a for a, b in zip(curve.phat, curve.phat[1:]))
    assert all(lo <= p <= hi for p, (lo, hi) in zip(curve.phat, curve.ci))


def test_tail_validation():
    with pytest.raises(BanditInputError):
        estimate_tail([], [1.0])
    with pytest.raises(BanditInputError):
        estimate_tail([1.0], [2.0, 1.0])


def test_wilson_reference_interval():
    lo, hi = wilson_interval(5, 100)
    assert lo == pytest.approx(0.0215, abs=1e-4)
    assert hi == pytest.approx(0.1118, abs=1e-4)


def test_wilson_edges():
    assert wilson_interval(0, 50)[0] == 0.0
    assert wilson_interval(50, 50)[1] == 1.0
    with pytest.raises(BanditInputError):
        wilson_interval(1, 0)


def test_empty_tail_has_no_counts():
    curve = empty_tail([1.0, 2.0])
    assert curve.total == 0
    assert all(math.isnan(p) for p in curve.phat)


def test_stretch_tail_exact_law():
    points = [(T, math.exp(-math.sqrt(T))) for T in (100, 400, 1600)]
    assert fit_exponent(points, FitMode.STRETCH_TAIL).slope == pytest.approx(0.5, abs=1e-9)


def test_poly_tail_exact_law():
    fit = fit_exponent([(T, 1.0 / T) for T in (1e2, 1e3, 1e4)], FitMode.POLY_TAIL)
    assert fit.slope == pytest.approx(-1.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


def test_regret_scaling_recovers_exponent():
    rng = np.random.default_rng(1)
    horizons = [2 ** k for k in range(10, 15)]
    points = [(T, 3.0 * T ** 0.7 * (1.0 + 0.05 * rng.uniform(-1.0, 1.0))) for T in horizons]
    assert fit_exponent(points, FitMode.REGRET_SCALING).slope == pytest.approx(0.7, abs=0.05)


def test_stretch_tail_discards_zero_probabilities():
    points = [(100, 0.3), (200, 0.1), (400, 0.02), (800, 0.0)]
    fit = fit_exponent(points, FitMode.STRETCH_TAIL)
    assert fit.points == 3
    assert fit.discarded == 1


def test_fit_names_the_bad_point():
    with pytest.raises(BanditInputError, match="T=200"):
        fit_exponent([(100, 0.5), (200, 1.5), (400, 0.1)], FitMode.POLY_TAIL)
    with pytest.raises(BanditInputError):
        fit_exponent([(100, 0.5), (200, 0.1)], FitMode.POLY_TAIL)


def test_summary_of_constant_sample():
    s = summarize([2.0, 2.0, 2.0])
    assert s.mean == 2.0
    assert s.variance == 0.0


def test_summary_mean():
    assert summarize([0.0, 1.0]).mean == 0.5


def test_lower_quantile():
    s = summarize(np.arange(1, 1001, dtype=float))
    assert s.quantiles[0.999] == 999.0


def test_ks_distance_of_exact_sample():
    support = ((0.0, 0.5), (0.2, 0.25), (0.4, 0.25))
    samples = [0.0, 0.0, 0.2, 0.4]
    assert ks_distance(samples, support) == pytest.approx(0.0)
    assert ks_distance([0.0] * 4, support) == pytest.approx(0.5)


def test_pooled_se():
    a = [0.0, 2.0] * 50
    b = [1.0] * 100
    assert pooled_se(a, b) == pytest.approx(math.sqrt(summarize(a).variance / 100))


@pytest.mark.parametrize("p", [0.01, 0.1, 0.5])
def test_wilson_coverage(p):
    n = 200
    draws = np.random.default_rng(17).binomial(n, p, size=10_000)
    intervals = {int(k): wilson_interval(int(k), n) for k in np.unique(draws)}
    covered = sum(1 for k in draws if intervals[int(k)][0] <= p <= intervals[int(k)][1])
    assert covered / len(draws) >= 0.93


def test_tail_ignores_sample_order():
    rng = np.random.default_rng(3)
    samples = rng.exponential(2.0, size=500)
    xs = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
    a = estimate_tail(samples, xs)
    b = estimate_tail(rng.permutation(samples), xs)
    assert a.exceed == b.exceed
    assert a.phat == b.phat
    assert a.ci == b.ci
