"""
env.py - Bandit environments and sigma-subgaussian noise models
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from tailbandits.errors import BanditInputError


SQRT3 = math.sqrt(3.0)
NORM_TOLERANCE = 1e-12  # slack on the ||a||_2 <= 1 and ||theta||_inf <= 1 checks
ACTION_MATCH_TOLERANCE = 1e-12
SINUSOID_PERIOD = 50.0
# random walk moves are drawn in blocks so b_t does not depend on the horizon asked for
WALK_BLOCK = 1024

Stream = np.random.Generator


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"


class BaselineKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    SINUSOID = "sinusoid"
    RANDOM_WALK = "random_walk"
    PIECEWISE = "piecewise"


class Rotation(str, Enum):
    FIXED = "fixed"
    CYCLIC = "cyclic"


@dataclass(frozen=True)
class NoiseModel:
    """
    Zero-mean sigma-subgaussian noise law.

    Args:
        kind: Gaussian N(0, sigma^2), Rademacher +-sigma, or uniform on [-sigma*sqrt(3), sigma*sqrt(3)]
        sigma: Subgaussian scale, nonnegative
    """
    kind: NoiseKind = NoiseKind.GAUSSIAN
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise BanditInputError(f"noise sigma must be a nonnegative real, got {self.sigma}")

    @property
    def is_two_point(self) -> bool:
        return self.kind == NoiseKind.RADEMACHER

    def sample_array(self, stream: Stream, size: int) -> np.ndarray:
        """
        Draw `size` independent noise values from the stream.

        Args:
            stream: Generator owned by the caller
            size: Number of draws

        Returns:
            Float array of shape (size,)
        """
        if self.kind == NoiseKind.GAUSSIAN:
            draws = stream.normal(0.0, 1.0, size) * self.sigma
        elif self.kind == NoiseKind.RADEMACHER:
            draws = np.where(stream.integers(0, 2, size) == 1, self.sigma, -self.sigma)
        else:
            draws = stream.uniform(-1.0, 1.0, size) * (self.sigma * SQRT3)
        if self.sigma == 0.0:
            # avoid -0.0 from the sign flip
            return np.zeros(size)
        return draws.astype(float)


def sample_noise(model: NoiseModel, stream: Stream) -> float:
    """Draw one noise value; consumes state from `stream` even when sigma is 0."""
    return float(model.sample_array(stream, 1)[0])


@dataclass(frozen=True)
class BanditInstance:
    """
    K-armed instance with means in [0, 1] and a shared noise law.

    Args:
        means: Arm means theta_1..theta_K
        noise: Noise law applied to every arm
    """
    means: Tuple[float, ...]
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        object.__setattr__(self, "means", means)
        if len(means) < 2:
            raise BanditInputError(f"a bandit instance needs K >= 2 arms, got {len(means)}")
        for k, m in enumerate(means):
            if not 0.0 <= m <= 1.0:
                raise BanditInputError(f"arm {k} mean {m} is outside [0, 1]")

    @property
    def arms(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def gaps(self) -> np.ndarray:
        best = self.best_mean
        return np.array([best - m for m in self.means])

    @property
    def optimal_arms(self) -> Tuple[int, ...]:
        best = self.best_mean
        return tuple(k for k, m in enumerate(self.means) if m == best)


@dataclass(frozen=True)
class BaselineSchedule:
    """
    Non-adaptive baseline rewards b_t in [0, B], fixed before the run.

    Args:
        bound: B, the upper end of the baseline range
        kind: Schedule family
        value: Level for CONSTANT
        amplitude: Swing around B/2 for SINUSOID
        period: Period (in rounds) for SINUSOID
        step: Step size for RANDOM_WALK (defaults to B/10)
        seed: Seed for RANDOM_WALK
        pieces: ((start, value), ...) for PIECEWISE, starts 1-based and increasing
    """
    bound: float = 0.0
    kind: BaselineKind = BaselineKind.ZERO
    value: float = 0.0
    amplitude: float = 0.0
    period: float = SINUSOID_PERIOD
    step: Optional[float] = None
    seed: int = 0
    pieces: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", BaselineKind(self.kind))
        object.__setattr__(self, "pieces", tuple((int(s), float(v)) for s, v in self.pieces))
        if not math.isfinite(self.bound) or self.bound < 0:
            raise BanditInputError(f"baseline bound B must be nonnegative, got {self.bound}")
        if self.kind == BaselineKind.CONSTANT and not 0.0 <= self.value <= self.bound:
            raise BanditInputError(f"constant baseline {self.value} is outside [0, {self.bound}]")
        if self.kind == BaselineKind.SINUSOID:
            if not self.period > 2:
                # a period of 1 or 2 samples sin(2 pi t / period) only at its zeros
                raise BanditInputError(f"sinusoid period must exceed 2 rounds, got {self.period}")
            if self.amplitude < 0:
                raise BanditInputError(f"sinusoid amplitude must be nonnegative, got {self.amplitude}")
        if self.kind == BaselineKind.RANDOM_WALK and self.step is not None and self.step < 0:
            raise BanditInputError(f"random walk step must be nonnegative, got {self.step}")
        if self.kind == BaselineKind.PIECEWISE:
            if not self.pieces:
                raise BanditInputError("piecewise baseline needs at least one (start, value) piece")
            starts = [s for s, _ in self.pieces]
            if starts[0] != 1 or any(b <= a for a, b in zip(starts, starts[1:])):
                raise BanditInputError(f"piecewise starts must begin at 1 and increase, got {starts}")
            for _, v in self.pieces:
                if not 0.0 <= v <= self.bound:
                    raise BanditInputError(f"piecewise value {v} is outside [0, {self.bound}]")

    def values(self, horizon: int) -> np.ndarray:
        """
        Baseline values b_1..b_T as a read-only array (index t-1 holds b_t).

        Args:
            horizon: T

        Returns:
            Array of shape (T,) with every entry in [0, B]
        """
        return _schedule_values(self, int(horizon))

    def value_at(self, t: int) -> float:
        if t < 1:
            raise BanditInputError(f"time index must be >= 1, got {t}")
        cover = max(WALK_BLOCK, 1 << (int(t) - 1).bit_length())
        return float(_schedule_values(self, cover)[t - 1])


@lru_cache(maxsize=64)
def _schedule_values(schedule: BaselineSchedule, horizon: int) -> np.ndarray:
    B = schedule.bound
    t = np.arange(1, horizon + 1, dtype=float)
    if schedule.kind == BaselineKind.ZERO:
        values = np.zeros(horizon)
    elif schedule.kind == BaselineKind.CONSTANT:
        values = np.full(horizon, schedule.value)
    elif schedule.kind == BaselineKind.SINUSOID:
        values = B / 2.0 + schedule.amplitude * np.sin(2.0 * np.pi * t / schedule.period)
    elif schedule.kind == BaselineKind.RANDOM_WALK:
        step = B / 10.0 if schedule.step is None else schedule.step
        blocks = max(1, -(-horizon // WALK_BLOCK))
        moves = np.concatenate([np.random.default_rng((schedule.seed, j)).choice((-step, step), size=WALK_BLOCK)
                                for j in range(blocks)])[:horizon]
        values = np.empty(horizon)
        level = B / 2.0
        for i, move in enumerate(moves):
            level += move
            # reflect at the edges of [0, B]
            if level > B:
                level = 2.0 * B - level
            if level < 0.0:
                level = -level
            values[i] = level
    else:
        starts = np.array([s for s, _ in schedule.pieces])
        levels = np.array([v for _, v in schedule.pieces])
        values = levels[np.searchsorted(starts, t, side="right") - 1]
    values = np.clip(values, 0.0, B)
    values.setflags(write=False)
    return values


def draw_reward(instance: BanditInstance, arm: int, t: int,
                baseline: Optional[BaselineSchedule], stream: Stream) -> Tuple[float, float]:
    """
    Draw r_t = b_t + theta_arm + eps for one pull.

    Returns:
        Tuple of (reward, noise)
    """
    if not 0 <= arm < instance.arms:
        raise BanditInputError(f"arm {arm} is out of range for K={instance.arms}")
    if t < 1:
        raise BanditInputError(f"time index must be >= 1, got {t}")
    noise = sample_noise(instance.noise, stream)
    b_t = baseline.value_at(t) if baseline is not None else 0.0
    return b_t + instance.means[arm] + noise, noise


def sample_reward(instance: BanditInstance, arm: int, t: int,
                  baseline: Optional[BaselineSchedule], stream: Stream) -> float:
    """Reward of pulling `arm` (0-based) at time `t` (1-based)."""
    return draw_reward(instance, arm, t, baseline, stream)[0]


@dataclass(frozen=True)
class LinearInstance:
    """
    Linear bandit with a finite action set.

    Args:
        theta: Unknown parameter, ||theta||_inf <= 1
        actions: Base action set, each ||a||_2 <= 1
        noise: Noise law of r_t - theta^T a_t
        rotation: FIXED uses the base set every round; CYCLIC rolls the coordinates by (t-1) mod d
    """
    theta: Tuple[float, ...]
    actions: Tuple[Tuple[float, ...], ...]
    noise: NoiseModel = field(default_factory=NoiseModel)
    rotation: Rotation = Rotation.FIXED

    def __post_init__(self):
        theta = tuple(float(v) for v in self.theta)
        actions = tuple(tuple(float(v) for v in a) for a in self.actions)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "rotation", Rotation(self.rotation))
        if not theta:
            raise BanditInputError("theta must have at least one coordinate")
        if max(abs(v) for v in theta) > 1.0 + NORM_TOLERANCE:
            raise BanditInputError(f"||theta||_inf must be <= 1, got theta={theta}")
        if not actions:
            raise BanditInputError("action set must be nonempty")
        for i, a in enumerate(actions):
            if len(a) != len(theta):
                raise BanditInputError(f"action {i} has dimension {len(a)}, expected {len(theta)}")
            if math.sqrt(sum(v * v for v in a)) > 1.0 + NORM_TOLERANCE:
                raise BanditInputError(f"action {i} has ||a||_2 > 1")

    @property
    def dim(self) -> int:
        return len(self.theta)

    @property
    def cycle(self) -> int:
        return self.dim if self.rotation == Rotation.CYCLIC else 1

    def action_matrix(self, t: int = 1) -> np.ndarray:
        """Actions available at round t (1-based) as rows of an (n, d) array."""
        base = np.array(self.actions, dtype=float)
        if self.rotation == Rotation.CYCLIC:
            return np.roll(base, (t - 1) % self.dim, axis=1)
        return base

    def means(self, t: int = 1) -> np.ndarray:
        return self.action_matrix(t) @ np.array(self.theta)

    @property
    def uniform_gap(self) -> float:
        gap = math.inf
        for t in range(1, self.cycle + 1):
            means = self.means(t)
            if len(means) < 2:
                continue
            best = int(np.argmax(means))
            others = np.delete(means, best)
            gap = min(gap, float(means[best] - others.max()))
        return 0.0 if math.isinf(gap) else max(gap, 0.0)


def linear_mean(instance: LinearInstance, action: Sequence[float], t: int = 1) -> float:
    """
    Expected reward theta^T a of an action from the round-t action set.

    Raises:
        BanditInputError: if the action is not in the action set
    """
    a = np.asarray(action, dtype=float)
    available = instance.action_matrix(t)
    if a.shape != (instance.dim,) or not np.any(np.all(np.abs(available - a) <= ACTION_MATCH_TOLERANCE, axis=1)):
        raise BanditInputError(f"action {tuple(a)} is not in the action set at t={t}")
    return float(np.dot(np.array(instance.theta), a))


def basis_actions(dim: int) -> Tuple[Tuple[float, ...], ...]:
    """The standard basis e_1..e_d."""
    return tuple(tuple(float(i == j) for j in range(dim)) for i in range(dim))


# Config constructors

def noise_from_config(config: Optional[Dict[str, Any]]) -> NoiseModel:
    config = config or {}
    return NoiseModel(kind=NoiseKind(config.get("kind", NoiseKind.GAUSSIAN.value)),
                      sigma=float(config.get("sigma", 1.0)))


def baseline_from_config(config: Optional[Dict[str, Any]]) -> Optional[BaselineSchedule]:
    if not config:
        return None
    kind = BaselineKind(config.get("kind", BaselineKind.ZERO.value))
    bound = float(config.get("bound", 0.0))
    return BaselineSchedule(
        bound=bound,
        kind=kind,
        value=float(config.get("value", 0.0)),
        amplitude=float(config.get("amplitude", bound / 2.0)),
        period=float(config.get("period", SINUSOID_PERIOD)),
        step=None if config.get("step") is None else float(config["step"]),
        seed=int(config.get("seed", 0)),
        pieces=tuple(tuple(p) for p in config.get("pieces", ())),
    )


def instance_from_config(config: Dict[str, Any]) -> BanditInstance:
    return BanditInstance(means=tuple(config["means"]), noise=noise_from_config(config.get("noise")))


def parse_action_set(spec: Any) -> Tuple[Tuple[float, ...], ...]:
    """Explicit list of vectors, or the preset string 'basis(d)'."""
    if isinstance(spec, str):
        name = spec.replace(" ", "")
        if name.startswith("basis(") and name.endswith(")"):
            return basis_actions(int(name[len("basis("):-1]))
        raise BanditInputError(f"unknown action set preset '{spec}'")
    return tuple(tuple(float(v) for v in a) for a in spec)


def linear_instance_from_config(config: Dict[str, Any]) -> LinearInstance:
    return LinearInstance(
        theta=tuple(config["theta"]),
        actions=parse_action_set(config.get("actions", f"basis({len(config['theta'])})")),
        noise=noise_from_config(config.get("noise")),
        rotation=Rotation(config.get("rotation", Rotation.FIXED.value)),
    )

