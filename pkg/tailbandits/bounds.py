"""
bounds.py - Closed-form regret tail bounds, noise concentration, and critical rates

All bound values are probabilities clamped to [0, 1]. Exponent arguments are built in
numpy.longdouble and combined with the log of the prefactor before exponentiation, so large
prefactors never overflow and deep tails underflow cleanly to 0.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from tailbandits.errors import BanditInputError, DegenerateInstanceError


LD = np.longdouble


class Scenario(str, Enum):
    WORST_CASE = "worst_case"
    INSTANCE = "instance"


class Timing(str, Enum):
    FIXED = "fixed"
    ANYTIME = "anytime"


class BoundEnv(str, Enum):
    PLAIN = "plain"
    BASELINE = "baseline"
    LINEAR = "linear"


class EnvelopeFamily(str, Enum):
    SE = "se"                    # SE and SEwRP with the fixed-time tail-optimal radius
    UCB_ANYTIME = "ucb_anytime"
    UCBL = "ucbl"


@dataclass(frozen=True)
class BoundParams:
    """
    Parameters shared by every tail bound.

    Args:
        scenario: worst_case or instance
        timing: fixed or anytime
        env: plain, baseline (uses baseline_bound B) or linear (uses uniform_gap)
        horizon: T
        size: K arms, or dimension d for linear
        sigma: Noise scale
        gaps: Per-arm gaps, instance-dependent plain/baseline only
        baseline_bound: B
        uniform_gap: Delta of the linear instance
    """
    scenario: Scenario
    timing: Timing
    env: BoundEnv
    horizon: int
    size: int
    sigma: float
    alpha: float = 0.5
    beta: float = 0.5
    eta1: float = 1.0
    eta2: float = 1.0
    gaps: Optional[Tuple[float, ...]] = None
    baseline_bound: float = 0.0
    uniform_gap: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "timing", Timing(self.timing))
        object.__setattr__(self, "env", BoundEnv(self.env))
        if self.gaps is not None:
            object.__setattr__(self, "gaps", tuple(float(g) for g in self.gaps))
        if not 0.0 <= self.beta <= self.alpha <= 1.0:
            raise BanditInputError(
                f"bound parameters must satisfy 0 <= beta <= alpha <= 1, got alpha={self.alpha}, beta={self.beta}")
        if self.sigma < 0 or self.eta1 < 0 or self.eta2 < 0 or self.baseline_bound < 0:
            raise BanditInputError("sigma, eta1, eta2 and B must be nonnegative")
        if self.size < 1:
            raise BanditInputError(f"arm count / dimension must be >= 1, got {self.size}")
        if self.env == BoundEnv.LINEAR:
            if self.horizon < self.size:
                raise BanditInputError(f"linear bounds need T >= d, got T={self.horizon}, d={self.size}")
            if self.scenario == Scenario.INSTANCE and not (self.uniform_gap or 0.0) > 0:
                raise BanditInputError("instance-dependent linear bound needs a positive uniform gap")
        else:
            if self.horizon < 3:
                raise BanditInputError(f"bandit tail bounds need T >= 3, got T={self.horizon}")
            if self.env == BoundEnv.BASELINE and self.timing == Timing.ANYTIME:
                raise BanditInputError("baseline-reward bounds exist for fixed time only")
            if self.scenario == Scenario.INSTANCE and self.gaps is None:
                raise BanditInputError("instance-dependent bound needs per-arm gaps")

    @property
    def variance(self) -> float:
        """sigma^2, or (B + 2 sigma)^2 / 4 for baseline rewards."""
        if self.env == BoundEnv.BASELINE:
            return (self.baseline_bound + 2.0 * self.sigma) ** 2 / 4.0
        return self.sigma ** 2


def delta_zero(gaps: Sequence[float]) -> float:
    """Harmonic aggregate 1 / sum_{gap > 0} 1/gap."""
    positive = [float(g) for g in gaps if g > 0]
    if not positive:
        raise DegenerateInstanceError("delta_zero needs at least one positive gap")
    return 1.0 / math.fsum(1.0 / g for g in positive)


def _pos(v):
    return v if v > 0 else LD(0)


def _div(num, den):
    """num / den, with c/0 = inf for c > 0 and 0/0 = 0."""
    if den == 0:
        return LD(math.inf) if num > 0 else LD(0)
    return num / den


def _term(log_prefactor, exponent):
    if np.isinf(exponent):
        return LD(0)
    return np.exp(LD(log_prefactor) - exponent)


def _clamp(total) -> float:
    return float(min(LD(1), max(LD(0), total)))


def mab_tail_bound(params: BoundParams, x: float) -> float:
    """
    Tail bound on P(pseudo regret >= x) for K-armed SE / UCB / SEwRP with the tail-optimal radius.

    Args:
        params: plain or baseline environment
        x: Threshold, positive

    Returns:
        min(1, term1 + term2)
    """
    if params.env == BoundEnv.LINEAR:
        raise BanditInputError("use linear_tail_bound for linear environments")
    if not x > 0:
        raise BanditInputError(f"threshold must be positive, got {x}")
    K, T = LD(params.size), LD(params.horizon)
    a, b, e1, e2 = LD(params.alpha), LD(params.beta), LD(params.eta1), LD(params.eta2)
    s2 = LD(params.variance)
    x = LD(x)
    lnT = np.log(T)
    sq = np.sqrt(lnT)
    xk = _pos(x - K)

    if params.timing == Timing.FIXED:
        if params.scenario == Scenario.WORST_CASE:
            lead = _pos(x - K - 4 * e1 * K ** (1 - a) * T ** a * sq)
            term1 = _term(np.log(6 * K), _div(lead ** 2, 32 * s2 * K * T))
            inner = min(e1 * xk / (2 * K ** a * T ** (1 - a)), e2 ** 2 * T ** b * sq)
            term2 = _term(np.log(6 * K ** 2 * T), _div(sq * inner, 8 * s2))
            return _clamp(term1 + term2)
        d0 = LD(delta_zero(params.gaps))
        lead = _pos((x - K) * d0 - 4 * e2 ** 2 * T ** b * lnT)
        term1 = _term(np.log(3 * K), _div(lead, 8 * s2))
        term2 = LD(0)
        for gap in params.gaps:
            if gap > 0:
                inner = min(e1 * (T / K) ** a * LD(gap), e2 ** 2 * T ** b * sq)
                term2 += _term(np.log(3 * K * T), _div(inner * sq, 8 * s2))
        return _clamp(term1 + term2)

    if params.scenario == Scenario.WORST_CASE:
        lead = _pos(x - K - 4 * e1 * K ** (1 - a) * T ** a)
        term1 = _term(np.log(2 * K * T ** 2), _div(lead ** 2, 32 * s2 * K * T * lnT))
        inner = min(_div(e1 * xk, 2 * s2 * K ** a * T ** (1 - a) * lnT),
                    _div(e2 ** 2 * xk ** b, 2 * s2 * lnT ** b))
        term2 = _term(np.log(2 * K * T ** 3), inner)
        return _clamp(term1 + term2)
    d0 = LD(delta_zero(params.gaps))
    lead = _pos((x - K) * d0 - 4 * e2 ** 2 * T ** b)
    term1 = _term(np.log(K * T ** 2), _div(lead, 8 * s2))
    inner = min(_div(e1 * xk ** a * d0 ** a, s2 * K ** a),
                _div(e2 ** 2 * xk ** b * d0 ** b, 2 * s2))
    term2 = _term(np.log(K * T ** 3), inner)
    return _clamp(term1 + term2)


def linear_tail_bound(params: BoundParams, x: float) -> float:
    """
    Tail bound on P(pseudo regret >= x) for UCB-L, with prefactor 2d (T/d)^(2d+1).
    """
    if params.env != BoundEnv.LINEAR:
        raise BanditInputError("linear_tail_bound needs a linear environment")
    if not x > 0:
        raise BanditInputError(f"threshold must be positive, got {x}")
    d, T = LD(params.size), LD(params.horizon)
    a, b, e1, e2 = LD(params.alpha), LD(params.beta), LD(params.eta1), LD(params.eta2)
    s2 = LD(params.variance)
    lnT = np.log(T)
    log_prefactor = np.log(2 * d) + (2 * d + 1) * np.log(T / d)
    y = LD(x) - 2 * np.sqrt(d)
    yp = _pos(y)

    if params.timing == Timing.FIXED:
        cap = _div(e2 ** 2 * T ** b, 2 * s2)
    else:
        cap = _div(e2 ** 2 * yp ** b, 16 * s2 * d ** (b / 2) * lnT ** b)

    if params.scenario == Scenario.WORST_CASE:
        lead = _pos(y - 16 * d * np.sqrt(T) * lnT - 8 * e1 * d ** (1 - a) * T ** a * lnT)
        term1 = _term(log_prefactor, _div(lead ** 2, 128 * s2 * d * T * lnT ** 2))
        first = _div(e1 * yp, 4 * s2 * d ** a * T ** (1 - a) * lnT)
    else:
        gap = LD(params.uniform_gap)
        lead = _pos(gap * y - 128 * d - 32 * e2 ** 2 * T ** b)
        term1 = _term(log_prefactor, _div(lead, 32 * s2 * d * lnT))
        first = _div(e1 * gap * yp ** a, 8 * s2 * d ** (3 * a / 2) * lnT ** a)
    term2 = _term(log_prefactor, min(first, cap))
    return _clamp(term1 + term2)


def tail_bound(params: BoundParams, x: float) -> float:
    if params.env == BoundEnv.LINEAR:
        return linear_tail_bound(params, x)
    return mab_tail_bound(params, x)


def bound_curve(params: BoundParams, thresholds: Sequence[float]) -> Tuple[float, ...]:
    return tuple(tail_bound(params, x) for x in thresholds)


def noise_tail_bound(x: float, sigma: float, T: int) -> float:
    """min(1, exp(-x^2 / (2 sigma^2 T))); 0 for sigma = 0 and x > 0."""
    if x < 0 or sigma < 0 or T < 1:
        raise BanditInputError(f"noise bound needs x >= 0, sigma >= 0, T >= 1, got {x}, {sigma}, {T}")
    if x == 0:
        return 1.0
    if sigma == 0:
        return 0.0
    return min(1.0, math.exp(-x * x / (2.0 * sigma * sigma * T)))


def critical_rate(scenario: Scenario, horizon_known: bool, x: float, T: float,
                  alpha: float, beta: float) -> float:
    """
    Polynomial rate r with log P(regret > x) ~ -r for an optimally tailed policy.
    """
    if not x > 0 or T < 1:
        raise BanditInputError(f"critical rate needs x > 0 and T >= 1, got x={x}, T={T}")
    scenario = Scenario(scenario)
    if scenario == Scenario.WORST_CASE:
        linear_part = x / T ** (1.0 - alpha)
        return min(linear_part, T ** beta if horizon_known else x ** beta)
    return T ** beta if horizon_known else x ** beta


def critical_exponent(scenario: Scenario, horizon_known: bool, delta: float,
                      alpha: float, beta: float) -> float:
    """
    Best achievable tail exponent gamma for thresholds x = T^delta.
    """
    scenario = Scenario(scenario)
    if scenario == Scenario.WORST_CASE:
        return min(delta + alpha - 1.0, beta if horizon_known else delta * beta)
    return beta if horizon_known else delta * beta


def regret_envelope(family: EnvelopeFamily, scenario: Scenario, T: float, size: int,
                    alpha: float, beta: float, gaps: Optional[Sequence[float]] = None) -> float:
    """
    Order of the expected regret (constants dropped) for SE/SEwRP, any-time UCB, and UCB-L.

    For UCB-L instance-dependent envelopes `gaps` holds the single uniform gap.
    """
    family, scenario = EnvelopeFamily(family), Scenario(scenario)
    lnT = math.log(T)
    if scenario == Scenario.INSTANCE:
        positive = [g for g in (gaps or ()) if g > 0]
        if not positive:
            raise DegenerateInstanceError("instance-dependent envelope needs a positive gap")
        inverse = math.fsum(1.0 / g for g in positive)
    if family == EnvelopeFamily.SE:
        if scenario == Scenario.WORST_CASE:
            return size ** (1.0 - alpha) * T ** alpha * math.sqrt(lnT)
        return T ** beta * lnT * inverse
    if family == EnvelopeFamily.UCB_ANYTIME:
        if scenario == Scenario.WORST_CASE:
            return size ** (1.0 - alpha) * T ** alpha * lnT ** 2
        return T ** beta * inverse
    if scenario == Scenario.WORST_CASE:
        return size ** (1.0 + alpha) * T ** (1.0 - alpha) * lnT ** 2
    return size ** 2 * T ** beta / min(positive)
