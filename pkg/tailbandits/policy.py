"""
policy.py - Confidence radii and the SE, SEwRP and UCB policy state machines
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from tailbandits.errors import BanditInputError


class BonusVariant(str, Enum):
    STANDARD_FIXED = "standard"
    TAIL_OPTIMAL_FIXED = "tail_fixed"
    TAIL_OPTIMAL_ANYTIME = "tail_anytime"


class PolicyKind(str, Enum):
    SE = "se"
    SEWRP = "sewrp"
    UCB = "ucb"
    FIXED = "fixed"


# (arm, t) -> (reward, noise)
Sampler = Callable[[int, int], Tuple[float, float]]
PULL = Tuple[int, float]  # (arm, reward)


@dataclass(frozen=True)
class BonusSpec:
    """
    Confidence radius rad(n) (fixed time) or rad_t(n) (any time).

    standard:      sigma * sqrt(eta ln T / n)
    tail_fixed:    eta1 (T/K)^alpha sqrt(ln T) / n  ^  eta2 sqrt(T^beta ln T / n)
    tail_anytime:  eta1 (t/K)^alpha / n  ^  eta2 sqrt(t^beta / n)
    """
    variant: BonusVariant
    eta: float = 1.0
    sigma: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0
    alpha: float = 0.5
    beta: float = 0.5
    horizon: Optional[int] = None
    arms: int = 2

    def __post_init__(self):
        object.__setattr__(self, "variant", BonusVariant(self.variant))
        for name in ("eta", "sigma", "eta1", "eta2"):
            value = getattr(self, name)
            if not value >= 0:
                raise BanditInputError(f"bonus parameter {name} must be >= 0, got {value}")
        if not 0.0 <= self.beta <= self.alpha <= 1.0:
            raise BanditInputError(
                f"bonus parameters must satisfy 0 <= beta <= alpha <= 1, got alpha={self.alpha}, beta={self.beta}")
        if self.arms < 1:
            raise BanditInputError(f"bonus arm count must be >= 1, got {self.arms}")
        if self.fixed_time:
            if self.horizon is None or self.horizon < 3:
                raise BanditInputError(f"{self.variant.value} bonus needs a horizon T >= 3, got {self.horizon}")
            log_t = math.log(self.horizon)
            object.__setattr__(self, "_log_t", log_t)
            object.__setattr__(self, "_scale1", self.eta1 * (self.horizon / self.arms) ** self.alpha * math.sqrt(log_t))
            object.__setattr__(self, "_scale2", self.eta2 * math.sqrt(self.horizon ** self.beta * log_t))
        elif self.horizon is not None:
            raise BanditInputError("tail_anytime bonus does not take a horizon")

    @classmethod
    def standard(cls, eta: float, sigma: float, horizon: int) -> "BonusSpec":
        return cls(BonusVariant.STANDARD_FIXED, eta=eta, sigma=sigma, horizon=horizon)

    @classmethod
    def tail_fixed(cls, eta1: float, eta2: float, alpha: float, beta: float,
                   horizon: int, arms: int) -> "BonusSpec":
        return cls(BonusVariant.TAIL_OPTIMAL_FIXED, eta1=eta1, eta2=eta2, alpha=alpha,
                   beta=beta, horizon=horizon, arms=arms)

    @classmethod
    def tail_anytime(cls, eta1: float, eta2: float, alpha: float, beta: float, arms: int) -> "BonusSpec":
        return cls(BonusVariant.TAIL_OPTIMAL_ANYTIME, eta1=eta1, eta2=eta2, alpha=alpha,
                   beta=beta, arms=arms)

    @property
    def fixed_time(self) -> bool:
        return self.variant != BonusVariant.TAIL_OPTIMAL_ANYTIME

    def to_dict(self) -> Dict[str, Any]:
        if self.variant == BonusVariant.STANDARD_FIXED:
            return {"variant": self.variant.value, "eta": self.eta, "sigma": self.sigma, "horizon": self.horizon}
        out = {"variant": self.variant.value, "eta1": self.eta1, "eta2": self.eta2,
               "alpha": self.alpha, "beta": self.beta, "arms": self.arms}
        if self.fixed_time:
            out["horizon"] = self.horizon
        return out

    @classmethod
    def from_dict(cls, config: Dict[str, Any], horizon: Optional[int] = None,
                  arms: Optional[int] = None) -> "BonusSpec":
        """
        Build a spec from a config mapping; `horizon` / `arms` fill fields the mapping leaves out.
        """
        variant = BonusVariant(config.get("variant", BonusVariant.STANDARD_FIXED.value))
        T = config.get("horizon", horizon)
        if variant == BonusVariant.STANDARD_FIXED:
            return cls.standard(eta=float(config.get("eta", 1.0)), sigma=float(config.get("sigma", 1.0)),
                                horizon=None if T is None else int(T))
        K = int(config.get("arms", arms if arms is not None else 2))
        params = dict(eta1=float(config.get("eta1", 1.0)), eta2=float(config.get("eta2", 1.0)),
                      alpha=float(config.get("alpha", 0.5)), beta=float(config.get("beta", 0.5)), arms=K)
        if variant == BonusVariant.TAIL_OPTIMAL_FIXED:
            return cls.tail_fixed(horizon=None if T is None else int(T), **params)
        return cls.tail_anytime(**params)

    def label(self) -> str:
        if self.variant == BonusVariant.STANDARD_FIXED:
            return f"standard(eta={self.eta:g})"
        return f"{self.variant.value}(a={self.alpha:g},b={self.beta:g},e1={self.eta1:g},e2={self.eta2:g})"


def bonus_eval(spec: BonusSpec, n: int, t: Optional[int] = None) -> float:
    """
    Evaluate the confidence radius for an arm pulled n times.

    Args:
        spec: Radius definition
        n: Pull count of the arm (n = 0 gives +inf)
        t: Current time index, required by the any-time variant

    Returns:
        Nonnegative radius
    """
    if n <= 0:
        return math.inf
    if spec.variant == BonusVariant.STANDARD_FIXED:
        return spec.sigma * math.sqrt(spec.eta * spec._log_t / n)
    if spec.variant == BonusVariant.TAIL_OPTIMAL_FIXED:
        return min(spec._scale1 / n, spec._scale2 / math.sqrt(n))
    if t is None or t < 1:
        raise BanditInputError(f"tail_anytime bonus needs a time index t >= 1, got {t}")
    first = spec.eta1 * (t / spec.arms) ** spec.alpha / n
    second = spec.eta2 * math.sqrt(t ** spec.beta / n)
    return min(first, second)


def phase_transition_count(spec: BonusSpec) -> float:
    """
    Pull count where the tail_fixed radius switches from its sqrt(1/n) branch to its 1/n branch.

    Below the returned n the second component is the smaller one.
    """
    if spec.variant != BonusVariant.TAIL_OPTIMAL_FIXED:
        raise BanditInputError("phase transition is defined for the tail_fixed radius only")
    if spec.eta2 == 0:
        return 0.0
    T, K = spec.horizon, spec.arms
    return (spec.eta1 / spec.eta2) ** 2 * (T / K) ** (2 * spec.alpha) * T ** (-spec.beta)


@dataclass(frozen=True)
class PolicySpec:
    """
    Which policy to run and with which radius.

    Args:
        kind: se, sewrp, ucb, or fixed (always pull `arm`)
        bonus: Radius for se / sewrp / ucb
        arm: Arm pulled by the fixed policy (0-based)
    """
    kind: PolicyKind
    bonus: Optional[BonusSpec] = None
    arm: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind != PolicyKind.FIXED and self.bonus is None:
            raise BanditInputError(f"policy {self.kind.value} needs a bonus spec")

    @property
    def eliminating(self) -> bool:
        return self.kind in (PolicyKind.SE, PolicyKind.SEWRP)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind == PolicyKind.FIXED:
            out["arm"] = self.arm
        else:
            out["bonus"] = self.bonus.to_dict()
        return out

    @classmethod
    def from_dict(cls, config: Dict[str, Any], horizon: Optional[int] = None,
                  arms: Optional[int] = None) -> "PolicySpec":
        kind = PolicyKind(config.get("kind", PolicyKind.UCB.value))
        if kind == PolicyKind.FIXED:
            return cls(kind, arm=int(config.get("arm", 0)))
        return cls(kind, BonusSpec.from_dict(config.get("bonus", {}), horizon=horizon, arms=arms))

    def label(self) -> str:
        if self.kind == PolicyKind.FIXED:
            return f"fixed(arm={self.arm})"
        return f"{self.kind.value}-{self.bonus.label()}"


# Successive elimination

@dataclass
class SEState:
    """
    Successive elimination state; `pending` holds the arms still to pull in the current phase.
    """
    active: Tuple[int, ...]
    counts: List[int]
    sums: List[float]
    permute: bool = False
    phase: int = 0
    time: int = 0
    pending: Tuple[int, ...] = ()

    @classmethod
    def initial(cls, arms: int, permute: bool = False) -> "SEState":
        return cls(active=tuple(range(arms)), counts=[0] * arms, sums=[0.0] * arms, permute=permute)

    def copy(self) -> "SEState":
        return SEState(self.active, list(self.counts), list(self.sums), self.permute,
                       self.phase, self.time, self.pending)

    def key(self) -> tuple:
        return (self.active, tuple(self.counts), tuple(self.sums), self.phase, self.time, self.pending)

    def estimates(self) -> List[float]:
        return [s / n if n > 0 else 0.0 for s, n in zip(self.sums, self.counts)]


def phase_order(state: SEState, stream: Optional[np.random.Generator]) -> Tuple[int, ...]:
    """Index order for SE, a uniformly random permutation of the active set for SEwRP."""
    if state.permute:
        if stream is None:
            raise BanditInputError("SEwRP needs a stream to draw phase permutations")
        return tuple(int(k) for k in stream.permutation(np.array(state.active)))
    return state.active


def se_begin_phase(state: SEState, order: Sequence[int]) -> SEState:
    state.pending = tuple(order)
    return state


def se_record(state: SEState, arm: int, reward: float) -> SEState:
    """Record the pull of the next pending arm."""
    if not state.pending or state.pending[0] != arm:
        raise BanditInputError(f"arm {arm} is not next in the current phase {state.pending}")
    state.pending = state.pending[1:]
    state.counts[arm] += 1
    state.sums[arm] += reward
    state.time += 1
    return state


def elimination_set(active: Sequence[int], estimates: Sequence[float],
                    radii: Sequence[float]) -> Tuple[int, ...]:
    """
    Arms k with some k' such that mu_k' - rad_k' > mu_k + rad_k.

    `estimates` and `radii` are indexed by arm.
    """
    best_lower = max(estimates[k] - radii[k] for k in active)
    return tuple(k for k in active if best_lower > estimates[k] + radii[k])


def se_end_phase(state: SEState, spec: BonusSpec) -> SEState:
    """Apply the elimination rule to the post-phase estimates."""
    estimates = state.estimates()
    radii = [bonus_eval(spec, n, max(state.time, 1)) for n in state.counts]
    eliminated = set(elimination_set(state.active, estimates, radii))
    survivors = tuple(k for k in state.active if k not in eliminated)
    if not survivors:
        # keep the empirical leader, lowest index on ties
        survivors = (max(state.active, key=lambda k: (estimates[k], -k)),)
    state.active = survivors
    state.phase += 1
    state.pending = ()
    return state


def se_step(state: SEState, spec: BonusSpec, sampler: Sampler,
            stream: Optional[np.random.Generator], horizon: int) -> Tuple[SEState, List[PULL]]:
    """
    Run one elimination phase, truncated at the horizon.

    Args:
        state: Current state (updated in place and returned)
        spec: Radius used by the elimination rule
        sampler: (arm, t) -> (reward, noise)
        stream: Source of SEwRP permutations
        horizon: T

    Returns:
        Tuple of (state, [(arm, reward), ...]); the pull list is empty once the budget is spent
    """
    if state.time >= horizon:
        return state, []
    se_begin_phase(state, phase_order(state, stream))
    pulls = []
    while state.pending and state.time < horizon:
        arm = state.pending[0]
        reward, _ = sampler(arm, state.time + 1)
        se_record(state, arm, reward)
        pulls.append((arm, reward))
    se_end_phase(state, spec)
    return state, pulls


# Upper confidence bound

@dataclass
class UCBState:
    counts: List[int]
    sums: List[float]
    time: int = 0

    @classmethod
    def initial(cls, arms: int) -> "UCBState":
        return cls(counts=[0] * arms, sums=[0.0] * arms)

    def copy(self) -> "UCBState":
        return UCBState(list(self.counts), list(self.sums), self.time)

    def key(self) -> tuple:
        return (tuple(self.counts), tuple(self.sums), self.time)


def ucb_indices(state: UCBState, spec: BonusSpec) -> List[float]:
    t = state.time + 1
    return [(s / n if n > 0 else 0.0) + bonus_eval(spec, n, t) for s, n in zip(state.sums, state.counts)]


def ucb_select(state: UCBState, spec: BonusSpec) -> int:
    """Arm with the largest index; unpulled arms first, lowest index on ties."""
    best_arm, best_index = 0, -math.inf
    for arm, index in enumerate(ucb_indices(state, spec)):
        if index > best_index:
            best_arm, best_index = arm, index
    return best_arm


def ucb_record(state: UCBState, arm: int, reward: float) -> UCBState:
    state.counts[arm] += 1
    state.sums[arm] += reward
    state.time += 1
    return state


def ucb_step(state: UCBState, spec: BonusSpec, sampler: Sampler,
             stream: Optional[np.random.Generator] = None) -> Tuple[UCBState, int, float]:
    """
    Pull the arm with the highest index.

    Returns:
        Tuple of (state, arm, reward)
    """
    arm = ucb_select(state, spec)
    reward, _ = sampler(arm, state.time + 1)
    ucb_record(state, arm, reward)
    return state, arm, reward
