"""
stats.py - Tail curves with Wilson intervals, exponent fits, and sample summaries
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from tailbandits.errors import BanditInputError


QUANTILE_LEVELS = (0.5, 0.9, 0.99, 0.999)
MIN_FIT_POINTS = 3

TAIL_COLUMNS = ("policy", "scenario", "T", "x", "reps", "exceed", "phat", "ci_lo", "ci_hi", "bound")


class FitMode(str, Enum):
    POLY_TAIL = "poly_tail"          # ln p vs ln T
    STRETCH_TAIL = "stretch_tail"    # ln(-ln p) vs ln T
    REGRET_SCALING = "regret_scaling"  # ln E[R] vs ln T


@dataclass(frozen=True)
class TailCurve:
    """
    Empirical P(pseudo regret > x) over a threshold grid.

    `bound` is filled per threshold when theoretical bounds are attached; `policy`, `scenario`
    and `horizon` label the curve in CSV output.
    """
    thresholds: Tuple[float, ...]
    exceed: Tuple[int, ...]
    total: int
    phat: Tuple[float, ...]
    ci: Tuple[Tuple[float, float], ...]
    confidence: float = 0.95
    policy: str = ""
    scenario: str = ""
    horizon: int = 0
    bound: Optional[Tuple[float, ...]] = None

    def rows(self) -> List[Dict[str, Any]]:
        out = []
        for i, x in enumerate(self.thresholds):
            out.append({
                "policy": self.policy,
                "scenario": self.scenario,
                "T": self.horizon,
                "x": x,
                "reps": self.total,
                "exceed": self.exceed[i],
                "phat": self.phat[i],
                "ci_lo": self.ci[i][0],
                "ci_hi": self.ci[i][1],
                "bound": None if self.bound is None else self.bound[i],
            })
        return out

    def with_labels(self, policy: str, scenario: str, horizon: int) -> "TailCurve":
        return TailCurve(self.thresholds, self.exceed, self.total, self.phat, self.ci, self.confidence,
                         policy, scenario, horizon, self.bound)

    def with_bound(self, bound: Sequence[float]) -> "TailCurve":
        if len(bound) != len(self.thresholds):
            raise BanditInputError(f"{len(bound)} bound values for {len(self.thresholds)} thresholds")
        return TailCurve(self.thresholds, self.exceed, self.total, self.phat, self.ci, self.confidence,
                         self.policy, self.scenario, self.horizon, tuple(float(b) for b in bound))


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    mode: FitMode
    points: int = 0
    discarded: int = 0


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for k successes out of n.

    Returns:
        (lo, hi) with lo exactly 0 when k == 0 and hi exactly 1 when k == n
    """
    if n <= 0:
        raise BanditInputError(f"Wilson interval needs n >= 1, got {n}")
    if not 0.0 < confidence < 1.0:
        raise BanditInputError(f"confidence must be in (0, 1), got {confidence}")
    z = float(sps.norm.ppf(0.5 + confidence / 2.0))
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, min(p, center - half))
    hi = 1.0 if k == n else min(1.0, max(p, center + half))
    return lo, hi


def estimate_tail(samples: Sequence[float], thresholds: Sequence[float], confidence: float = 0.95) -> TailCurve:
    """
    Count samples strictly above each threshold and attach Wilson intervals.

    Args:
        samples: Pseudo-regret values
        thresholds: Sorted x grid
        confidence: Interval level

    Returns:
        TailCurve
    """
    data = np.sort(np.asarray(samples, dtype=float))
    n = len(data)
    if n == 0:
        raise BanditInputError("tail estimation needs at least one sample")
    xs = tuple(float(x) for x in thresholds)
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise BanditInputError("thresholds must be sorted ascending")
    exceed = tuple(int(n - np.searchsorted(data, x, side="right")) for x in xs)
    return TailCurve(
        thresholds=xs,
        exceed=exceed,
        total=n,
        phat=tuple(k / n for k in exceed),
        ci=tuple(wilson_interval(k, n, confidence) for k in exceed),
        confidence=confidence,
    )


def empty_tail(thresholds: Sequence[float], confidence: float = 0.95) -> TailCurve:
    """Curve over zero replications: no counts and vacuous intervals."""
    xs = tuple(float(x) for x in thresholds)
    return TailCurve(xs, tuple(0 for _ in xs), 0, tuple(math.nan for _ in xs),
                     tuple((0.0, 1.0) for _ in xs), confidence)


def fit_exponent(points: Sequence[Tuple[float, float]], mode: FitMode) -> ExponentFit:
    """
    Ordinary least squares in the mode's transformed coordinates.

    StretchTail drops points with p = 0 and reports how many were dropped.

    Raises:
        BanditInputError: fewer than three usable points, or a value outside the mode's domain
    """
    mode = FitMode(mode)
    xs, ys = [], []
    discarded = 0
    for T, value in points:
        if T <= 0:
            raise BanditInputError(f"point (T={T}, {value}): T must be positive")
        if mode == FitMode.REGRET_SCALING:
            if not value > 0:
                raise BanditInputError(f"point (T={T}, {value}): expected regret must be positive")
            y = math.log(value)
        elif mode == FitMode.STRETCH_TAIL and value == 0:
            discarded += 1
            continue
        elif not 0.0 < value < 1.0:
            raise BanditInputError(f"point (T={T}, {value}): tail probability must lie in (0, 1)")
        elif mode == FitMode.POLY_TAIL:
            y = math.log(value)
        else:
            y = math.log(-math.log(value))
        xs.append(math.log(T))
        ys.append(y)
    if len(xs) < MIN_FIT_POINTS:
        raise BanditInputError(f"{mode.value} fit needs at least {MIN_FIT_POINTS} points, got {len(xs)}")
    result = sps.linregress(xs, ys)
    r = result.rvalue if math.isfinite(result.rvalue) else 1.0
    return ExponentFit(slope=float(result.slope), intercept=float(result.intercept),
                       r_squared=min(1.0, max(0.0, float(r * r))), mode=mode,
                       points=len(xs), discarded=discarded)


@dataclass(frozen=True)
class Summary:
    count: int
    mean: float
    variance: float
    quantiles: Dict[float, float] = field(default_factory=dict)


def summarize(samples: Sequence[float]) -> Summary:
    """
    Mean, unbiased variance, and lower order-statistic quantiles at 0.5, 0.9, 0.99, 0.999.
    """
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise BanditInputError("cannot summarize an empty sample")
    variance = float(np.var(data, ddof=1)) if data.size > 1 else 0.0
    quantiles = {q: float(np.quantile(data, q, method="lower")) for q in QUANTILE_LEVELS}
    return Summary(count=int(data.size), mean=float(np.mean(data)), variance=variance, quantiles=quantiles)


def binomial_se(p: float, n: int) -> float:
    if n <= 0:
        return math.inf
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def pooled_se(a: Sequence[float], b: Sequence[float]) -> float:
    """Standard error of mean(a) - mean(b) for independent samples."""
    return math.sqrt(summarize(a).variance / len(a) + summarize(b).variance / len(b))


def ks_distance(samples: Sequence[float], support: Sequence[Tuple[float, float]], decimals: int = 12) -> float:
    """
    Kolmogorov-Smirnov distance between an empirical sample and a discrete law given as (value, prob) atoms.

    Both CDFs are step functions, so comparing at the union of jump points suffices.
    """
    data = np.sort(np.round(np.asarray(samples, dtype=float), decimals))
    if data.size == 0:
        raise BanditInputError("KS distance needs at least one sample")
    values = np.round(np.array([v for v, _ in support], dtype=float), decimals)
    probs = np.array([p for _, p in support], dtype=float)
    order = np.argsort(values)
    values, cum = values[order], np.cumsum(probs[order])
    grid = np.union1d(values, data)
    empirical = np.searchsorted(data, grid, side="right") / data.size
    idx = np.searchsorted(values, grid, side="right") - 1
    exact = np.where(idx >= 0, cum[np.clip(idx, 0, None)], 0.0)
    return float(np.max(np.abs(empirical - exact)))
