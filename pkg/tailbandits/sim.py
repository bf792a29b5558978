"""
sim.py - Seeded episodes, the replication driver, and the exact enumeration oracle
"""

import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from tailbandits.env import BanditInstance, BaselineSchedule
from tailbandits.errors import BanditInputError
from tailbandits.policy import (
    PolicyKind,
    PolicySpec,
    SEState,
    UCBState,
    se_begin_phase,
    se_end_phase,
    se_record,
    se_step,
    ucb_record,
    ucb_select,
    ucb_step,
)


logger = logging.getLogger(__name__)

ORACLE_MAX_HORIZON = 14
ORACLE_ARMS = (2, 3)
ATOM_DIGITS = 12
PROBABILITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EpisodeResult:
    """
    Outcome of one seeded episode.

    pull_counts is per arm (per base action for linear episodes). potential is set by UCB-L only.
    """
    pull_counts: Tuple[int, ...]
    pseudo_regret: float
    noise_sum: float
    empirical_regret: float
    horizon: int
    seed: int
    potential: Optional[float] = None

    def to_record(self) -> Dict[str, Any]:
        record = {
            "seed": self.seed,
            "horizon": self.horizon,
            "pseudo_regret": self.pseudo_regret,
            "empirical_regret": self.empirical_regret,
            "noise_sum": self.noise_sum,
            "pull_counts": list(self.pull_counts),
        }
        if self.potential is not None:
            record["potential"] = self.potential
        return record


def pseudo_regret(counts: Sequence[int], gaps: Sequence[float]) -> float:
    """sum_k n_k * gap_k"""
    if len(counts) != len(gaps):
        raise BanditInputError(f"{len(counts)} pull counts but {len(gaps)} gaps")
    return math.fsum(float(n) * float(g) for n, g in zip(counts, gaps))


# Seeding

def derive_seed(seed: int, cell: int, replicate: int) -> int:
    """
    64-bit episode seed mixed from the plan seed, the grid cell, and the replicate index.
    """
    if seed < 0 or cell < 0 or replicate < 0:
        raise BanditInputError(f"seed, cell and replicate must be nonnegative, got {seed}, {cell}, {replicate}")
    sequence = np.random.SeedSequence(seed, spawn_key=(cell, replicate))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_stream(seed: int) -> np.random.Generator:
    """Counter-based stream for one episode."""
    return np.random.Generator(np.random.Philox(seed))


# Episodes

def run_episode(instance: BanditInstance, policy: PolicySpec, T: int,
                baseline: Optional[BaselineSchedule] = None, seed: int = 0) -> EpisodeResult:
    """
    Drive one policy for exactly T pulls.

    Noise eps_t is drawn for every time step up front, so the genuine noise sum is sum_t eps_t.
    The baseline b_t enters the rewards but cancels in the regret.

    Args:
        instance: K-armed instance
        policy: se, sewrp, ucb or fixed
        T: Horizon
        baseline: Optional baseline schedule
        seed: Episode seed

    Returns:
        EpisodeResult
    """
    K = instance.arms
    if T < 1:
        raise BanditInputError(f"horizon must be >= 1, got {T}")
    if policy.eliminating and T < K:
        raise BanditInputError(f"{policy.kind.value} needs T >= K for its first phase, got T={T}, K={K}")

    stream = make_stream(seed)
    eps = instance.noise.sample_array(stream, T)
    b = baseline.values(T) if baseline is not None else np.zeros(T)
    means = instance.means

    def sampler(arm: int, t: int) -> Tuple[float, float]:
        return float(b[t - 1] + means[arm] + eps[t - 1]), float(eps[t - 1])

    if policy.kind == PolicyKind.FIXED:
        if not 0 <= policy.arm < K:
            raise BanditInputError(f"fixed arm {policy.arm} is out of range for K={K}")
        counts = [0] * K
        counts[policy.arm] = T
    elif policy.eliminating:
        state = SEState.initial(K, permute=policy.kind == PolicyKind.SEWRP)
        while state.time < T:
            if len(state.active) == 1:
                # the survivor takes the rest of the budget
                state.counts[state.active[0]] += T - state.time
                state.time = T
                break
            state, _ = se_step(state, policy.bonus, sampler, stream, T)
        counts = state.counts
    else:
        state = UCBState.initial(K)
        for _ in range(T):
            state, _, _ = ucb_step(state, policy.bonus, sampler, stream)
        counts = state.counts

    regret = pseudo_regret(counts, instance.gaps)
    noise_sum = math.fsum(eps.tolist())
    return EpisodeResult(pull_counts=tuple(int(n) for n in counts), pseudo_regret=regret,
                         noise_sum=noise_sum, empirical_regret=regret - noise_sum, horizon=T, seed=seed)


def replicate_map(runner: Callable[[int], EpisodeResult], seeds: Sequence[int], threads: int = 1,
                  progress: bool = False, desc: str = "episodes") -> List[EpisodeResult]:
    """
    Apply `runner` to every seed, serially or over a process pool, keeping seed order.

    Args:
        runner: Picklable callable seed -> EpisodeResult
        seeds: Episode seeds
        threads: Worker processes; 0 uses every CPU, 1 runs in this process
        progress: Show a tqdm bar
        desc: Bar label
    """
    seeds = list(seeds)
    workers = (os.cpu_count() or 1) if threads == 0 else threads
    if workers < 1:
        raise BanditInputError(f"threads must be >= 0, got {threads}")
    if workers == 1 or len(seeds) < 2:
        return [runner(s) for s in tqdm(seeds, desc=desc, disable=not progress, leave=False)]
    chunksize = max(1, len(seeds) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = pool.map(runner, seeds, chunksize=chunksize)
        # map yields in submission order
        return list(tqdm(results, total=len(seeds), desc=desc, disable=not progress, leave=False))


def run_replicates(instance: BanditInstance, policy: PolicySpec, T: int, seeds: Sequence[int],
                   baseline: Optional[BaselineSchedule] = None, threads: int = 1,
                   progress: bool = False) -> List[EpisodeResult]:
    """Episodes for each seed, returned in seed order regardless of scheduling."""
    logger.info(f"[SIM] {policy.label()} T={T}: {len(seeds)} replicates")
    runner = partial(_episode_for_seed, instance, policy, T, baseline)
    return replicate_map(runner, seeds, threads=threads, progress=progress, desc=policy.label())


def _episode_for_seed(instance: BanditInstance, policy: PolicySpec, T: int,
                      baseline: Optional[BaselineSchedule], seed: int) -> EpisodeResult:
    return run_episode(instance, policy, T, baseline, seed)


# Exact oracle

@dataclass(frozen=True)
class RegretDistribution:
    """Exact law of the pseudo regret as sorted (value, probability) atoms."""
    support: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        support = tuple(sorted((float(v), float(p)) for v, p in self.support))
        object.__setattr__(self, "support", support)
        total = math.fsum(p for _, p in support)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise BanditInputError(f"atom probabilities sum to {total!r}, not 1")
        if support and support[0][0] < 0:
            raise BanditInputError(f"negative regret atom {support[0][0]}")

    def atoms(self) -> Tuple[float, ...]:
        return tuple(v for v, _ in self.support)

    def cdf(self, x: float) -> float:
        return min(1.0, math.fsum(p for v, p in self.support if v <= x))

    def sf(self, x: float) -> float:
        """P(regret > x)"""
        return math.fsum(p for v, p in self.support if v > x)

    def mean(self) -> float:
        return math.fsum(v * p for v, p in self.support)

    def probability(self, value: float) -> float:
        key = round(value, ATOM_DIGITS)
        return math.fsum(p for v, p in self.support if round(v, ATOM_DIGITS) == key)


def _merge(frontier: Dict[tuple, Tuple[Any, float]], state, prob: float) -> None:
    key = state.key()
    if key in frontier:
        frontier[key] = (frontier[key][0], frontier[key][1] + prob)
    else:
        frontier[key] = (state, prob)


def _signs(sigma: float) -> Tuple[Tuple[float, float], ...]:
    # identical branches collapse when sigma is 0
    if sigma == 0.0:
        return ((0.0, 1.0),)
    return ((sigma, 0.5), (-sigma, 0.5))


def exact_regret_distribution(instance: BanditInstance, policy: PolicySpec, T: int,
                              baseline: Optional[BaselineSchedule] = None) -> RegretDistribution:
    """
    Enumerate every noise sign path (and every SEwRP phase permutation) of a tiny instance.

    Args:
        instance: K = 2 or 3 arms with Rademacher noise (or sigma = 0)
        policy: Any policy kind
        T: Horizon, at most 14
        baseline: Optional schedule, evaluated on 1..T

    Returns:
        Exact pseudo-regret distribution
    """
    K = instance.arms
    sigma = instance.noise.sigma
    if not instance.noise.is_two_point and sigma != 0.0:
        raise BanditInputError(f"exact enumeration needs two-point noise, got {instance.noise.kind.value}")
    if K not in ORACLE_ARMS:
        raise BanditInputError(f"exact enumeration supports K in {ORACLE_ARMS}, got K={K}")
    if not 1 <= T <= ORACLE_MAX_HORIZON:
        raise BanditInputError(f"exact enumeration supports 1 <= T <= {ORACLE_MAX_HORIZON}, got T={T}")
    if policy.eliminating and T < K:
        raise BanditInputError(f"{policy.kind.value} needs T >= K, got T={T}, K={K}")

    gaps = instance.gaps
    if policy.kind == PolicyKind.FIXED:
        return RegretDistribution(((pseudo_regret([T if k == policy.arm else 0 for k in range(K)], gaps), 1.0),))

    b = baseline.values(T) if baseline is not None else np.zeros(T)
    branches = _signs(sigma)
    finished: Dict[float, float] = {}

    def finish(counts: Sequence[int], prob: float) -> None:
        value = round(pseudo_regret(counts, gaps), ATOM_DIGITS)
        finished[value] = finished.get(value, 0.0) + prob

    if policy.eliminating:
        frontier: Dict[tuple, Tuple[Any, float]] = {}
        _merge(frontier, SEState.initial(K, permute=policy.kind == PolicyKind.SEWRP), 1.0)
        while frontier:
            advanced: Dict[tuple, Tuple[Any, float]] = {}
            for state, prob in frontier.values():
                if state.time >= T or len(state.active) == 1:
                    counts = list(state.counts)
                    if len(state.active) == 1:
                        counts[state.active[0]] += T - state.time
                    finish(counts, prob)
                    continue
                if not state.pending:
                    orders = list(itertools.permutations(state.active)) if state.permute else [state.active]
                    starts = [(se_begin_phase(state.copy(), order), prob / len(orders)) for order in orders]
                else:
                    starts = [(state, prob)]
                for start, start_prob in starts:
                    arm = start.pending[0]
                    t = start.time + 1
                    for eps, p in branches:
                        nxt = se_record(start.copy(), arm, float(b[t - 1] + instance.means[arm] + eps))
                        if not nxt.pending:
                            se_end_phase(nxt, policy.bonus)
                        _merge(advanced, nxt, start_prob * p)
            frontier = advanced
    else:
        frontier = {}
        _merge(frontier, UCBState.initial(K), 1.0)
        for t in range(1, T + 1):
            advanced = {}
            for state, prob in frontier.values():
                arm = ucb_select(state, policy.bonus)
                for eps, p in branches:
                    nxt = ucb_record(state.copy(), arm, float(b[t - 1] + instance.means[arm] + eps))
                    _merge(advanced, nxt, prob * p)
            frontier = advanced
        for state, prob in frontier.values():
            finish(state.counts, prob)

    logger.info(f"[ORACLE] {policy.label()} T={T}: {len(finished)} atoms")
    return RegretDistribution(tuple(finished.items()))
