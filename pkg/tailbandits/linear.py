"""
linear.py - UCB-L for linear bandits with a rank-one maintained design-matrix inverse
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from tailbandits.errors import BanditInputError, NumericalDriftError
from tailbandits.sim import EpisodeResult, make_stream, replicate_map


logger = logging.getLogger(__name__)

REFRESH_EVERY = 1000
DRIFT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class LinearBonusSpec:
    """
    Radius min(eta1 (t/d)^alpha z, eta2 s^(beta/2) sqrt(z)) + sqrt(d z), with z = a^T V^-1 a.

    s is the horizon T when one is given (fixed time) and the current t otherwise (any time).
    """
    eta1: float
    eta2: float
    alpha: float
    beta: float
    dim: int
    horizon: Optional[int] = None

    def __post_init__(self):
        if self.eta1 < 0 or self.eta2 < 0:
            raise BanditInputError(f"eta1, eta2 must be >= 0, got {self.eta1}, {self.eta2}")
        if not 0.0 <= self.beta <= self.alpha <= 1.0:
            raise BanditInputError(
                f"linear bonus must satisfy 0 <= beta <= alpha <= 1, got alpha={self.alpha}, beta={self.beta}")
        if self.dim < 1:
            raise BanditInputError(f"dimension must be >= 1, got {self.dim}")
        if self.horizon is not None and self.horizon < self.dim:
            raise BanditInputError(f"fixed-time UCB-L needs T >= d, got T={self.horizon}, d={self.dim}")

    @property
    def fixed_time(self) -> bool:
        return self.horizon is not None

    def to_dict(self) -> Dict[str, Any]:
        out = {"eta1": self.eta1, "eta2": self.eta2, "alpha": self.alpha, "beta": self.beta, "dim": self.dim}
        if self.fixed_time:
            out["horizon"] = self.horizon
        return out

    @classmethod
    def from_dict(cls, config: Dict[str, Any], dim: int, horizon: Optional[int] = None) -> "LinearBonusSpec":
        fixed = config.get("timing", "anytime") == "fixed"
        return cls(eta1=float(config.get("eta1", 1.0)), eta2=float(config.get("eta2", 1.0)),
                   alpha=float(config.get("alpha", 0.5)), beta=float(config.get("beta", 0.5)),
                   dim=int(dim), horizon=horizon if fixed else None)

    def label(self) -> str:
        timing = "fixed" if self.fixed_time else "anytime"
        return f"ucbl-{timing}(a={self.alpha:g},b={self.beta:g},e1={self.eta1:g},e2={self.eta2:g})"


def radl_eval(spec: LinearBonusSpec, z, t: int):
    """
    Evaluate the UCB-L radius; `z` may be a scalar or an array of quadratic forms.
    """
    z = np.maximum(np.asarray(z, dtype=float), 0.0)
    s = spec.horizon if spec.fixed_time else t
    first = spec.eta1 * (t / spec.dim) ** spec.alpha * z
    second = spec.eta2 * s ** (spec.beta / 2.0) * np.sqrt(z)
    radius = np.minimum(first, second) + np.sqrt(spec.dim * z)
    return float(radius) if radius.ndim == 0 else radius


@dataclass
class LinearState:
    """
    Running quantities of UCB-L with V_0 = I.

    Args:
        vinv: V_t^-1
        xty: sum of a_s r_s
        estimate: theta_hat = V_t^-1 xty
        gram: V_t, kept for the periodic direct solve
        potential: sum of a_t^T V_{t-1}^-1 a_t over the chosen actions
    """
    vinv: np.ndarray
    xty: np.ndarray
    estimate: np.ndarray
    gram: np.ndarray
    time: int = 0
    updates: int = 0
    potential: float = 0.0
    refresh_every: int = REFRESH_EVERY

    @classmethod
    def initial(cls, dim: int, refresh_every: int = REFRESH_EVERY) -> "LinearState":
        return cls(vinv=np.eye(dim), xty=np.zeros(dim), estimate=np.zeros(dim),
                   gram=np.eye(dim), refresh_every=refresh_every)


def ucbl_select(state: LinearState, spec: LinearBonusSpec, actions: Sequence[Sequence[float]]) -> int:
    """
    Index of the action with the highest theta_hat^T a + radius; the lowest index wins ties.
    """
    A = np.asarray(actions, dtype=float)
    if A.size == 0:
        raise BanditInputError("UCB-L needs a nonempty action set")
    z = np.einsum("ij,jk,ik->i", A, state.vinv, A)
    index = A @ state.estimate + radl_eval(spec, z, state.time + 1)
    return int(np.argmax(index))


def refresh_inverse(state: LinearState) -> LinearState:
    """Replace the running inverse with a direct solve, failing on drift."""
    direct = np.linalg.solve(state.gram, np.eye(len(state.xty)))
    deviation = float(np.linalg.norm(direct - state.vinv, ord="fro"))
    if deviation >= DRIFT_TOLERANCE:
        raise NumericalDriftError(
            f"inverse drifted by {deviation:.3e} (Frobenius) after {state.updates} updates")
    logger.debug(f"[LINEAR] Refreshed inverse after {state.updates} updates (drift {deviation:.2e})")
    state.vinv = direct
    state.estimate = direct @ state.xty
    return state


def ucbl_update(state: LinearState, action: Sequence[float], reward: float) -> LinearState:
    """
    Sherman-Morrison update V^-1 <- V^-1 - V^-1 a a^T V^-1 / (1 + a^T V^-1 a), then theta_hat = V^-1 xty.
    """
    a = np.asarray(action, dtype=float)
    va = state.vinv @ a
    z = float(a @ va)
    state.potential += z
    state.vinv = state.vinv - np.outer(va, va) / (1.0 + z)
    # keep it exactly symmetric
    state.vinv = (state.vinv + state.vinv.T) / 2.0
    state.gram = state.gram + np.outer(a, a)
    state.xty = state.xty + reward * a
    state.estimate = state.vinv @ state.xty
    state.time += 1
    state.updates += 1
    if state.refresh_every and state.updates % state.refresh_every == 0:
        refresh_inverse(state)
    return state


def run_linear_episode(instance, spec: LinearBonusSpec, T: int, seed: int = 0):
    """
    Run UCB-L for T rounds on a linear instance.

    Args:
        instance: LinearInstance
        spec: Radius definition; its dimension must match the instance
        T: Horizon
        seed: Episode seed

    Returns:
        EpisodeResult with pull counts per base action index and the elliptical potential
    """
    if T < 1:
        raise BanditInputError(f"horizon must be >= 1, got {T}")
    if spec.dim != instance.dim:
        raise BanditInputError(f"bonus dimension {spec.dim} does not match instance dimension {instance.dim}")

    stream = make_stream(seed)
    eps = instance.noise.sample_array(stream, T)
    theta = np.array(instance.theta)
    state = LinearState.initial(instance.dim)
    counts = [0] * len(instance.actions)
    gaps: List[float] = []
    cached_t, matrix, means = None, None, None

    for t in range(1, T + 1):
        phase = (t - 1) % instance.cycle
        if phase != cached_t:
            matrix = instance.action_matrix(t)
            means = matrix @ theta
            cached_t = phase
        i = ucbl_select(state, spec, matrix)
        reward = float(means[i] + eps[t - 1])
        ucbl_update(state, matrix[i], reward)
        counts[i] += 1
        gaps.append(float(means.max() - means[i]))

    pseudo = math.fsum(gaps)
    noise_sum = math.fsum(eps.tolist())
    return EpisodeResult(pull_counts=tuple(counts), pseudo_regret=pseudo, noise_sum=noise_sum,
                         empirical_regret=pseudo - noise_sum, horizon=T, seed=seed,
                         potential=state.potential)


def run_linear_replicates(instance, spec: LinearBonusSpec, T: int, seeds: Sequence[int],
                          threads: int = 1, progress: bool = False) -> List[EpisodeResult]:
    """UCB-L episodes for each seed, returned in seed order."""
    runner = partial(_linear_episode_for_seed, instance, spec, T)
    return replicate_map(runner, seeds, threads=threads, progress=progress, desc=spec.label())


def _linear_episode_for_seed(instance, spec: LinearBonusSpec, T: int, seed: int) -> EpisodeResult:
    return run_linear_episode(instance, spec, T, seed)
