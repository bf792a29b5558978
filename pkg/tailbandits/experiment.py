"""
experiment.py - YAML experiment plans, plan execution, and CSV / JSONL / manifest output
"""

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from tailbandits import __version__
from tailbandits.bounds import (
    BoundEnv,
    BoundParams,
    EnvelopeFamily,
    Scenario,
    Timing,
    bound_curve,
    regret_envelope,
)
from tailbandits.env import (
    BanditInstance,
    BaselineSchedule,
    LinearInstance,
    baseline_from_config,
    instance_from_config,
    linear_instance_from_config,
    noise_from_config,
)
from tailbandits.errors import BanditInputError, ConfigError, TailBanditError
from tailbandits.linear import LinearBonusSpec, run_linear_replicates
from tailbandits.policy import BonusVariant, PolicyKind, PolicySpec
from tailbandits.sim import derive_seed, exact_regret_distribution, run_replicates
from tailbandits.stats import (
    TAIL_COLUMNS,
    FitMode,
    TailCurve,
    binomial_se,
    empty_tail,
    estimate_tail,
    fit_exponent,
    ks_distance,
    summarize,
)


logger = logging.getLogger(__name__)

DEFAULT_REPLICATIONS = 10_000
DEFAULT_CONFIDENCE = 0.95
MAX_SEED = 2 ** 64 - 1
ORACLE_CELL_BASE = 1_000_000
SWEEP_NOTE = ("worst-case rows labelled [sup] maximise phat over a finite gap sweep "
              "gap = c*x/T (plus any fixed gaps); they approximate the supremum over all instances")

SUMMARY_COLUMNS = ("policy", "instance", "T", "reps", "mean", "variance",
                   "q50", "q90", "q99", "q999", "mean_empirical")
FIT_COLUMNS = ("policy", "instance", "mode", "at", "points", "discarded",
               "slope", "intercept", "r_squared", "reference_slope", "note")
BOUND_COLUMNS = ("policy", "scenario", "T", "x", "bound")
ORACLE_COLUMNS = ("policy", "instance", "T", "atoms", "reps", "ks", "max_atom_z", "mean_exact", "mean_mc")

LINEAR_KIND = "ucbl"


class Stage(str, Enum):
    SIMULATE = "simulate"
    TAIL = "tail"
    SWEEP = "sweep"
    BOUNDS = "bounds"
    ORACLE = "oracle"


# Plan types

@dataclass(frozen=True)
class PolicyTemplate:
    """
    A configured policy; fixed-time radii are instantiated per cell once T and K are known.
    """
    name: str
    kind: str
    bonus: Dict[str, Any] = field(default_factory=dict)
    arm: int = 0

    @property
    def linear(self) -> bool:
        return self.kind == LINEAR_KIND

    def build(self, T: int, size: int) -> Union[PolicySpec, LinearBonusSpec]:
        if self.linear:
            return LinearBonusSpec.from_dict(self.bonus, dim=size, horizon=T)
        return PolicySpec.from_dict({"kind": self.kind, "bonus": self.bonus, "arm": self.arm},
                                    horizon=T, arms=size)

    def variant(self) -> Optional[BonusVariant]:
        if self.linear or self.kind == PolicyKind.FIXED.value:
            return None
        return BonusVariant(self.bonus.get("variant", BonusVariant.STANDARD_FIXED.value))


@dataclass(frozen=True)
class Cell:
    """
    One (instance, T) grid cell.

    `group` names the worst-case sweep the cell belongs to, if any.
    """
    label: str
    horizon: int
    instance: Union[BanditInstance, LinearInstance]
    baseline: Optional[BaselineSchedule] = None
    group: Optional[str] = None

    @property
    def linear(self) -> bool:
        return isinstance(self.instance, LinearInstance)

    @property
    def size(self) -> int:
        return self.instance.dim if self.linear else self.instance.arms

    @property
    def max_gap(self) -> float:
        if self.linear:
            return self.instance.uniform_gap
        return float(self.instance.gaps.max())

    @property
    def sigma(self) -> float:
        return self.instance.noise.sigma


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    seed: int
    replications: int
    confidence: float
    horizons: Tuple[int, ...]
    policies: Tuple[PolicyTemplate, ...]
    cells: Tuple[Cell, ...]
    thresholds: Dict[str, Any]
    bounds: Dict[str, Any]
    fits: Tuple[Dict[str, Any], ...]
    oracle: Dict[str, Any]
    outputs: Dict[str, Any]
    source: Dict[str, Any]

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(_canonical(self.source).encode("utf-8")).hexdigest()

    def pairs(self) -> List[Tuple[int, PolicyTemplate, Cell]]:
        """(seed cell id, policy, cell) for every policy applicable to a cell, in seeding order."""
        out = []
        for cell in self.cells:
            for policy in self.policies:
                if policy.linear == cell.linear:
                    out.append((len(out), policy, cell))
        return out


@dataclass
class RunArtifact:
    tail_curves: List[TailCurve] = field(default_factory=list)
    bound_rows: List[Dict[str, Any]] = field(default_factory=list)
    summaries: List[Dict[str, Any]] = field(default_factory=list)
    fits: List[Dict[str, Any]] = field(default_factory=list)
    oracle_rows: List[Dict[str, Any]] = field(default_factory=list)
    manifest: Dict[str, Any] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)


# Parsing

def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def _require(config: Dict[str, Any], key: str, where: str = "") -> Any:
    if key not in config:
        raise ConfigError(f"{where}{key}", "required field is missing")
    return config[key]


def _as_int(value: Any, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if int(value) < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {value}")
    return int(value)


def load_plan(path: Union[str, Path]) -> ExperimentPlan:
    with open(path, "r") as f:
        return parse_config(f.read())


def parse_config(text: str) -> ExperimentPlan:
    """
    Validate a YAML plan and fill defaults.

    Args:
        text: YAML document

    Returns:
        ExperimentPlan

    Raises:
        ConfigError: naming the offending field
    """
    try:
        config = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("<document>", f"not valid YAML ({e})") from e
    if not isinstance(config, dict):
        raise ConfigError("<document>", "expected a mapping at the top level")

    name = str(_require(config, "name"))
    seed = _as_int(_require(config, "seed"), "seed")
    if seed > MAX_SEED:
        raise ConfigError("seed", "must fit in 64 bits")
    replications = _as_int(config.get("replications", DEFAULT_REPLICATIONS), "replications")
    confidence = float(config.get("confidence", DEFAULT_CONFIDENCE))
    if not 0.0 < confidence < 1.0:
        raise ConfigError("confidence", f"must lie in (0, 1), got {confidence}")

    horizons_raw = _require(config, "horizons")
    if not isinstance(horizons_raw, list) or not horizons_raw:
        raise ConfigError("horizons", "expected a nonempty list of horizons")
    horizons = tuple(_as_int(T, f"horizons[{i}]", minimum=1) for i, T in enumerate(horizons_raw))

    policies = _parse_policies(_require(config, "policies"))
    cells = _parse_cells(config, horizons)
    if not cells:
        raise ConfigError("instances", "at least one instance or linear instance is required")
    _validate_policy_cells(policies, cells)

    thresholds = config.get("thresholds") or {"fractions": [0.1, 0.25, 0.5]}
    _validate_thresholds(thresholds)
    bounds = config.get("bounds") or {}
    if "scenario" in bounds:
        try:
            Scenario(bounds["scenario"])
        except ValueError:
            raise ConfigError("bounds.scenario", f"expected worst_case or instance, got {bounds['scenario']!r}")
    fits = tuple(config.get("fits") or ())
    for i, fit in enumerate(fits):
        try:
            FitMode(_require(fit, "mode", f"fits[{i}]."))
        except ValueError:
            raise ConfigError(f"fits[{i}].mode", f"unknown fit mode {fit['mode']!r}")

    plan = ExperimentPlan(
        name=name,
        seed=seed,
        replications=replications,
        confidence=confidence,
        horizons=horizons,
        policies=policies,
        cells=cells,
        thresholds=thresholds,
        bounds=bounds,
        fits=fits,
        oracle=config.get("oracle") or {},
        outputs=config.get("outputs") or {},
        source=config,
    )
    logger.info(f"[PLAN] '{name}': {len(policies)} policies, {len(cells)} cells, {replications} replications")
    return plan


def _parse_policies(raw: Any) -> Tuple[PolicyTemplate, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("policies", "expected a nonempty list")
    out, seen = [], set()
    for i, entry in enumerate(raw):
        where = f"policies[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(where, "expected a mapping")
        kind = str(entry.get("kind", PolicyKind.UCB.value))
        if kind != LINEAR_KIND and kind not in {k.value for k in PolicyKind}:
            raise ConfigError(f"{where}.kind", f"unknown policy kind {kind!r}")
        bonus = dict(entry.get("bonus") or {})
        alpha, beta = float(bonus.get("alpha", 0.5)), float(bonus.get("beta", 0.5))
        if not 0.0 <= beta <= alpha <= 1.0:
            raise ConfigError(f"{where}.bonus.beta",
                              f"parameters must satisfy 0 <= beta <= alpha <= 1, got alpha={alpha}, beta={beta}")
        if kind != LINEAR_KIND and "variant" in bonus:
            try:
                BonusVariant(bonus["variant"])
            except ValueError:
                raise ConfigError(f"{where}.bonus.variant", f"unknown radius variant {bonus['variant']!r}")
        name = str(entry.get("name") or f"{kind}:{bonus.get('variant', bonus.get('timing', 'default'))}")
        if name in seen:
            raise ConfigError(f"{where}.name", f"duplicate policy name {name!r}")
        seen.add(name)
        out.append(PolicyTemplate(name=name, kind=kind, bonus=bonus, arm=int(entry.get("arm", 0))))
    return tuple(out)


def _sweep_x(rule: Dict[str, Any], T: int, where: str) -> float:
    if "fraction" in rule:
        return float(rule["fraction"]) * T
    if "delta" in rule:
        return T ** float(rule["delta"])
    raise ConfigError(where, "sweep x rule needs 'fraction' or 'delta'")


def _parse_cells(config: Dict[str, Any], horizons: Sequence[int]) -> Tuple[Cell, ...]:
    cells: List[Cell] = []
    for i, entry in enumerate(config.get("instances") or ()):
        where = f"instances[{i}]"
        try:
            if "sweep" in entry:
                cells.extend(_sweep_cells(entry, i, horizons))
                continue
            instance = instance_from_config({"means": _require(entry, "means", f"{where}."),
                                             "noise": entry.get("noise")})
            baseline = baseline_from_config(entry.get("baseline"))
        except (BanditInputError, ValueError, TypeError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(where, str(e)) from e
        label = str(entry.get("name") or f"inst{i}")
        cells.extend(Cell(label, T, instance, baseline) for T in horizons)

    for i, entry in enumerate(config.get("linear_instances") or ()):
        where = f"linear_instances[{i}]"
        try:
            instance = linear_instance_from_config(entry)
        except (BanditInputError, ValueError, TypeError, KeyError) as e:
            raise ConfigError(where, str(e)) from e
        label = str(entry.get("name") or f"lin{i}")
        for T in horizons:
            if T < instance.dim:
                raise ConfigError(f"{where}", f"horizon {T} is below the dimension {instance.dim}")
            cells.append(Cell(label, T, instance))
    return tuple(cells)


def _sweep_cells(entry: Dict[str, Any], i: int, horizons: Sequence[int]) -> List[Cell]:
    """
    Two-armed instances (1/2, 1/2 - gap) with gap = min(c x(T) / T, 1/2) over the c grid, plus fixed gaps.
    """
    where = f"instances[{i}].sweep"
    sweep = entry["sweep"]
    group = str(entry.get("name") or f"sweep{i}")
    noise = noise_from_config(entry.get("noise"))
    baseline = baseline_from_config(entry.get("baseline"))
    c_grid = [float(c) for c in _require(sweep, "c", f"{where}.")]
    rule = _require(sweep, "x", f"{where}.")
    cells = []
    for c in c_grid:
        for T in horizons:
            gap = min(c * _sweep_x(rule, T, f"{where}.x") / T, 0.5)
            cells.append(Cell(f"{group}:c={c:g}", T, BanditInstance((0.5, 0.5 - gap), noise), baseline, group))
    for g in sweep.get("gaps") or ():
        for T in horizons:
            cells.append(Cell(f"{group}:gap={float(g):g}", T, BanditInstance((0.5, 0.5 - float(g)), noise),
                              baseline, group))
    return cells


def _validate_thresholds(rules: Dict[str, Any]) -> None:
    known = {"values", "fractions", "gap_fractions", "deltas", "grid"}
    unknown = set(rules) - known
    if unknown:
        raise ConfigError(f"thresholds.{sorted(unknown)[0]}", f"unknown threshold rule; expected one of {sorted(known)}")
    if "grid" in rules:
        _as_int((rules["grid"] or {}).get("points", 0), "thresholds.grid.points", minimum=2)


def _validate_policy_cells(policies: Sequence[PolicyTemplate], cells: Sequence[Cell]) -> None:
    for i, policy in enumerate(policies):
        matched = [cell for cell in cells if cell.linear == policy.linear]
        for cell in matched:
            try:
                policy.build(cell.horizon, cell.size)
            except BanditInputError as e:
                raise ConfigError(f"policies[{i}].bonus", str(e)) from e
            if policy.kind == PolicyKind.FIXED.value and not 0 <= policy.arm < cell.size:
                raise ConfigError(f"policies[{i}].arm", f"arm {policy.arm} is out of range for K={cell.size}")
            if policy.kind in (PolicyKind.SE.value, PolicyKind.SEWRP.value) and cell.horizon < cell.size:
                raise ConfigError(f"policies[{i}]", f"{policy.kind} needs T >= K, got T={cell.horizon}")


def thresholds_for(plan: ExperimentPlan, cell: Cell) -> Tuple[float, ...]:
    """Sorted positive thresholds of a cell under the plan's threshold rules."""
    rules, T = plan.thresholds, cell.horizon
    xs = [float(x) for x in rules.get("values") or ()]
    xs += [float(f) * T for f in rules.get("fractions") or ()]
    xs += [float(f) * T * cell.max_gap for f in rules.get("gap_fractions") or ()]
    xs += [T ** float(d) for d in rules.get("deltas") or ()]
    if "grid" in rules:
        start = 2.0 * math.sqrt(cell.size) if cell.linear else float(cell.size)
        stop = T * cell.max_gap
        xs += np.linspace(start, max(start, stop), int(rules["grid"]["points"])).tolist()
    return tuple(sorted({x for x in xs if x > 0}))


# Bound attachment

def bound_params_for(plan: ExperimentPlan, policy: PolicyTemplate, cell: Cell) -> Optional[BoundParams]:
    """Tail-bound parameters for policies the closed-form bounds cover, else None."""
    if plan.bounds.get("enabled", True) is False:
        return None
    scenario = Scenario(plan.bounds.get("scenario", Scenario.WORST_CASE.value))
    b = policy.bonus
    common = dict(scenario=scenario, horizon=cell.horizon, size=cell.size, sigma=cell.sigma,
                  alpha=float(b.get("alpha", 0.5)), beta=float(b.get("beta", 0.5)),
                  eta1=float(b.get("eta1", 1.0)), eta2=float(b.get("eta2", 1.0)))
    try:
        if policy.linear:
            timing = Timing.FIXED if b.get("timing", "anytime") == "fixed" else Timing.ANYTIME
            return BoundParams(timing=timing, env=BoundEnv.LINEAR, uniform_gap=cell.instance.uniform_gap, **common)
        variant = policy.variant()
        gaps = tuple(cell.instance.gaps.tolist())
        if variant == BonusVariant.TAIL_OPTIMAL_FIXED and policy.kind in (PolicyKind.SE.value, PolicyKind.SEWRP.value):
            if cell.baseline is not None:
                return BoundParams(timing=Timing.FIXED, env=BoundEnv.BASELINE, gaps=gaps,
                                   baseline_bound=cell.baseline.bound, **common)
            return BoundParams(timing=Timing.FIXED, env=BoundEnv.PLAIN, gaps=gaps, **common)
        if variant == BonusVariant.TAIL_OPTIMAL_ANYTIME and policy.kind == PolicyKind.UCB.value \
                and cell.baseline is None:
            return BoundParams(timing=Timing.ANYTIME, env=BoundEnv.PLAIN, gaps=gaps, **common)
    except BanditInputError as e:
        logger.warning(f"[PLAN] No bound for {policy.name} on {cell.label}: {e}")
    return None


def envelope_family(policy: PolicyTemplate) -> Optional[EnvelopeFamily]:
    if policy.linear:
        return EnvelopeFamily.UCBL
    variant = policy.variant()
    if variant == BonusVariant.TAIL_OPTIMAL_FIXED and policy.kind in (PolicyKind.SE.value, PolicyKind.SEWRP.value):
        return EnvelopeFamily.SE
    if variant == BonusVariant.TAIL_OPTIMAL_ANYTIME and policy.kind == PolicyKind.UCB.value:
        return EnvelopeFamily.UCB_ANYTIME
    return None


# Emission

def _render(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _csv_bytes(columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_render(row.get(c)) for c in columns])
    return buffer.getvalue().encode("utf-8")


def _write(path: Path, payload: bytes) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def _tail_csv_bytes(curves: Sequence[TailCurve]) -> bytes:
    # curves over zero replications have no estimate to report
    rows = [row for curve in curves if curve.total > 0 for row in curve.rows()]
    rows.sort(key=lambda r: (r["policy"], r["T"], r["x"]))
    return _csv_bytes(TAIL_COLUMNS, rows)


def emit_csv(curves: Sequence[TailCurve], path: Union[str, Path]) -> int:
    """
    Write tail curves in the tail CSV schema, rows ordered by (policy, T, x).
    Curves with no replications are left out.

    Returns:
        Number of bytes written
    """
    payload = _tail_csv_bytes(curves)
    _write(Path(path), payload)
    return len(payload)


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, "r", newline="") as f:
        return list(csv.DictReader(f))


# Execution

def run_plan(plan: ExperimentPlan, stage: Stage = Stage.TAIL, out_dir: Optional[Union[str, Path]] = None,
             threads: int = 1, progress: bool = False) -> RunArtifact:
    """
    Execute a plan and write its outputs.

    Args:
        plan: Parsed plan
        stage: simulate (episodes + summaries), tail / sweep (tail curves, bounds, fits),
            bounds (bound curves only), oracle (exact enumeration check)
        out_dir: Output directory, overriding outputs.dir
        threads: Worker processes for replicates (0 = all CPUs); results do not depend on it
        progress: Show progress bars

    Returns:
        RunArtifact
    """
    stage = Stage(stage)
    out = Path(out_dir or plan.outputs.get("dir") or Path("out") / plan.name)
    artifact = RunArtifact()
    payloads: Dict[str, bytes] = {}

    if stage == Stage.SWEEP and not any(cell.group for cell in plan.cells):
        raise ConfigError("instances", "the sweep stage needs at least one instance with a sweep rule")

    if stage == Stage.BOUNDS:
        artifact.bound_rows = _bound_rows(plan)
        payloads["bounds.csv"] = _csv_bytes(BOUND_COLUMNS, artifact.bound_rows)
    elif stage == Stage.ORACLE:
        artifact.oracle_rows = _oracle_rows(plan, threads, progress)
        payloads["oracle.csv"] = _csv_bytes(ORACLE_COLUMNS, artifact.oracle_rows)
    else:
        episodes = _simulate(plan, threads, progress)
        artifact.summaries = _summary_rows(episodes)
        payloads["summary.csv"] = _csv_bytes(SUMMARY_COLUMNS, artifact.summaries)
        if plan.outputs.get("episodes", True):
            payloads["episodes.jsonl"] = _episode_lines(episodes)
        if stage != Stage.SIMULATE:
            artifact.tail_curves = _tail_curves(plan, episodes)
            payloads["tail.csv"] = _tail_csv_bytes(artifact.tail_curves)
            artifact.fits = _fit_rows(plan, episodes)
            payloads["fits.csv"] = _csv_bytes(FIT_COLUMNS, artifact.fits)

    for name, payload in payloads.items():
        artifact.files[name] = _write(out / name, payload)
        logger.info(f"[PLAN] Wrote {out / name}")

    artifact.manifest = {
        "name": plan.name,
        "version": __version__,
        "seed": plan.seed,
        "stage": stage.value,
        "replications": plan.replications,
        "config_sha256": plan.config_hash,
        "config": plan.source,
        "seeding": "episode seed = SeedSequence(seed, spawn_key=(cell, replicate)); stream = Philox",
        "files": dict(sorted(artifact.files.items())),
        "notes": [SWEEP_NOTE] if any(cell.group for cell in plan.cells) else [],
    }
    manifest_bytes = (json.dumps(artifact.manifest, sort_keys=True, indent=2, default=str) + "\n").encode("utf-8")
    _write(out / "manifest.json", manifest_bytes)
    return artifact


@dataclass
class _CellRun:
    cell_id: int
    policy: PolicyTemplate
    cell: Cell
    results: list


def _simulate(plan: ExperimentPlan, threads: int, progress: bool) -> List[_CellRun]:
    pairs = plan.pairs()
    seen = set()
    runs = []
    for cell_id, policy, cell in pairs:
        seeds = [derive_seed(plan.seed, cell_id, r) for r in range(plan.replications)]
        if seen.intersection(seeds):
            raise TailBanditError(f"derived seed collision in cell {cell_id}")
        seen.update(seeds)
        spec = policy.build(cell.horizon, cell.size)
        if policy.linear:
            results = run_linear_replicates(cell.instance, spec, cell.horizon, seeds,
                                            threads=threads, progress=progress)
        else:
            results = run_replicates(cell.instance, spec, cell.horizon, seeds, baseline=cell.baseline,
                                     threads=threads, progress=progress)
        runs.append(_CellRun(cell_id, policy, cell, results))
    return runs


def _episode_lines(runs: Sequence[_CellRun]) -> bytes:
    lines = []
    for run in runs:
        for replicate, result in enumerate(run.results):
            record = result.to_record()
            record.update(policy=run.policy.name, instance=run.cell.label, cell=run.cell_id, replicate=replicate)
            lines.append(json.dumps(record, sort_keys=True))
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def _summary_rows(runs: Sequence[_CellRun]) -> List[Dict[str, Any]]:
    rows = []
    for run in runs:
        if not run.results:
            continue
        s = summarize([r.pseudo_regret for r in run.results])
        rows.append({
            "policy": run.policy.name, "instance": run.cell.label, "T": run.cell.horizon, "reps": s.count,
            "mean": s.mean, "variance": s.variance,
            "q50": s.quantiles[0.5], "q90": s.quantiles[0.9],
            "q99": s.quantiles[0.99], "q999": s.quantiles[0.999],
            "mean_empirical": float(np.mean([r.empirical_regret for r in run.results])),
        })
    return rows


def _curve_label(policy: PolicyTemplate, cell: Cell) -> str:
    return f"{policy.name}|{cell.label}"


def _tail_curves(plan: ExperimentPlan, runs: Sequence[_CellRun]) -> List[TailCurve]:
    curves = []
    for run in runs:
        xs = thresholds_for(plan, run.cell)
        samples = [r.pseudo_regret for r in run.results]
        curve = estimate_tail(samples, xs, plan.confidence) if samples else empty_tail(xs, plan.confidence)
        params = bound_params_for(plan, run.policy, run.cell)
        scenario = params.scenario.value if params else "none"
        curve = curve.with_labels(_curve_label(run.policy, run.cell), scenario, run.cell.horizon)
        if params is not None:
            curve = curve.with_bound(bound_curve(params, xs))
        curves.append(curve)
    return curves + _sup_curves(plan, runs, curves)


def _sup_curves(plan: ExperimentPlan, runs: Sequence[_CellRun], curves: Sequence[TailCurve]) -> List[TailCurve]:
    """Per (policy, sweep, T): the largest phat over the sweep at each shared threshold."""
    grouped: Dict[Tuple[str, str, int], List[TailCurve]] = {}
    for run, curve in zip(runs, curves):
        if run.cell.group is not None and curve.total > 0:
            grouped.setdefault((run.policy.name, run.cell.group, run.cell.horizon), []).append(curve)
    out = []
    for (policy, group, T), members in sorted(grouped.items()):
        xs = members[0].thresholds
        if any(m.thresholds != xs for m in members):
            logger.warning(f"[PLAN] Sweep {group} at T={T} has cell-specific thresholds; no sup curve")
            continue
        picks = [max(members, key=lambda m: m.phat[i]) for i in range(len(xs))]
        bound = None
        if all(m.bound is not None for m in members):
            bound = tuple(max(m.bound[i] for m in members) for i in range(len(xs)))
        out.append(TailCurve(
            thresholds=xs,
            exceed=tuple(p.exceed[i] for i, p in enumerate(picks)),
            total=members[0].total,
            phat=tuple(p.phat[i] for i, p in enumerate(picks)),
            ci=tuple(p.ci[i] for i, p in enumerate(picks)),
            confidence=plan.confidence,
            policy=f"{policy}|{group}[sup]",
            scenario=members[0].scenario,
            horizon=T,
            bound=bound,
        ))
    return out


def _fit_at(rule: Dict[str, Any], cell: Cell) -> float:
    T = cell.horizon
    if "value" in rule:
        return float(rule["value"])
    if "fraction" in rule:
        return float(rule["fraction"]) * T
    if "gap_fraction" in rule:
        return float(rule["gap_fraction"]) * T * cell.max_gap
    if "delta" in rule:
        return T ** float(rule["delta"])
    raise ConfigError("fits[].at", "expected value, fraction, gap_fraction or delta")


def _fit_rows(plan: ExperimentPlan, runs: Sequence[_CellRun]) -> List[Dict[str, Any]]:
    rows = []
    for spec in plan.fits:
        mode = FitMode(spec["mode"])
        at = spec.get("at") or {}
        groups: Dict[Tuple[str, str], List[_CellRun]] = {}
        for run in runs:
            if spec.get("policy") not in (None, run.policy.name):
                continue
            if spec.get("instance") not in (None, run.cell.label):
                continue
            if run.results:
                groups.setdefault((run.policy.name, run.cell.label), []).append(run)
        for (policy_name, label), members in sorted(groups.items()):
            members.sort(key=lambda r: r.cell.horizon)
            row = {"policy": policy_name, "instance": label, "mode": mode.value,
                   "at": _canonical(at) if at else "", "note": ""}
            if mode == FitMode.REGRET_SCALING:
                points = [(m.cell.horizon, float(np.mean([r.pseudo_regret for r in m.results]))) for m in members]
            else:
                points = []
                for m in members:
                    x = _fit_at(at, m.cell)
                    exceed = sum(1 for r in m.results if r.pseudo_regret > x)
                    points.append((m.cell.horizon, exceed / len(m.results)))
            try:
                fit = fit_exponent(points, mode)
                row.update(points=fit.points, discarded=fit.discarded, slope=fit.slope,
                           intercept=fit.intercept, r_squared=fit.r_squared)
            except BanditInputError as e:
                logger.warning(f"[PLAN] Fit {mode.value} for {policy_name}|{label} skipped: {e}")
                row.update(points=len(points), discarded=0, note=str(e))
            if mode == FitMode.REGRET_SCALING:
                row["reference_slope"] = _reference_slope(plan, members)
            rows.append(row)
    return rows


def _reference_slope(plan: ExperimentPlan, members: Sequence[_CellRun]) -> Optional[float]:
    """Slope of the expected-regret envelope over the same horizons."""
    family = envelope_family(members[0].policy)
    if family is None or len(members) < 2:
        return None
    b = members[0].policy.bonus
    scenario = Scenario(plan.bounds.get("scenario", Scenario.WORST_CASE.value))
    xs, ys = [], []
    for m in members:
        gaps = [m.cell.instance.uniform_gap] if m.cell.linear else m.cell.instance.gaps.tolist()
        try:
            value = regret_envelope(family, scenario, m.cell.horizon, m.cell.size,
                                    float(b.get("alpha", 0.5)), float(b.get("beta", 0.5)), gaps)
        except BanditInputError:
            return None
        xs.append(math.log(m.cell.horizon))
        ys.append(math.log(value))
    return float(np.polyfit(xs, ys, 1)[0])


def _bound_rows(plan: ExperimentPlan) -> List[Dict[str, Any]]:
    rows = []
    for _, policy, cell in plan.pairs():
        params = bound_params_for(plan, policy, cell)
        if params is None:
            continue
        xs = thresholds_for(plan, cell)
        for x, value in zip(xs, bound_curve(params, xs)):
            rows.append({"policy": _curve_label(policy, cell), "scenario": params.scenario.value,
                         "T": cell.horizon, "x": x, "bound": value})
    rows.sort(key=lambda r: (r["policy"], r["T"], r["x"]))
    return rows


def _oracle_rows(plan: ExperimentPlan, threads: int, progress: bool) -> List[Dict[str, Any]]:
    """Exact enumeration against Monte Carlo for every enumerable (policy, instance, T)."""
    horizons = [int(T) for T in plan.oracle.get("horizons", plan.horizons)]
    reps = int(plan.oracle.get("replications", plan.replications))
    rows = []
    oracle_id = 0
    seen = set()
    for cell in plan.cells:
        if cell.linear or cell.label in seen:
            continue
        seen.add(cell.label)
        for policy in plan.policies:
            if policy.linear:
                continue
            for T in horizons:
                spec = policy.build(T, cell.size)
                try:
                    exact = exact_regret_distribution(cell.instance, spec, T, cell.baseline)
                except BanditInputError as e:
                    logger.warning(f"[ORACLE] Skipping {policy.name} on {cell.label} at T={T}: {e}")
                    continue
                seeds = [derive_seed(plan.seed, ORACLE_CELL_BASE + oracle_id, r) for r in range(reps)]
                oracle_id += 1
                samples = [r.pseudo_regret for r in
                           run_replicates(cell.instance, spec, T, seeds, cell.baseline, threads, progress)]
                row = {"policy": policy.name, "instance": cell.label, "T": T, "atoms": len(exact.support),
                       "reps": reps, "mean_exact": exact.mean()}
                if samples:
                    row.update(ks=ks_distance(samples, exact.support),
                               max_atom_z=_max_atom_z(samples, exact.support),
                               mean_mc=float(np.mean(samples)))
                rows.append(row)
    return rows


def _max_atom_z(samples: Sequence[float], support: Sequence[Tuple[float, float]]) -> float:
    """Largest |frequency - probability| over atoms, in binomial standard errors."""
    rounded = np.round(np.asarray(samples, dtype=float), 12)
    worst = 0.0
    for value, p in support:
        freq = float(np.mean(rounded == round(value, 12)))
        se = binomial_se(p, len(samples))
        if se > 0:
            worst = max(worst, abs(freq - p) / se)
        elif freq != p:
            worst = math.inf
    return worst


# Offline fits from earlier output

def fit_from_csv(path: Union[str, Path], mode: FitMode, rank: int = 0) -> List[Dict[str, Any]]:
    """
    Exponent fits from a previous run.

    regret_scaling reads summary.csv (mean vs T per policy and instance); the tail modes read
    tail.csv and use the threshold of the given rank within each (policy, T) curve.
    """
    mode = FitMode(mode)
    rows = read_csv(path)
    groups: Dict[str, List[Tuple[float, float]]] = {}
    if mode == FitMode.REGRET_SCALING:
        if rows and "mean" not in rows[0]:
            raise ConfigError(str(path), "regret_scaling fits read a summary.csv file")
        for row in rows:
            groups.setdefault(f"{row['policy']}|{row['instance']}", []).append((float(row["T"]), float(row["mean"])))
    else:
        if rows and "phat" not in rows[0]:
            raise ConfigError(str(path), "tail fits read a tail.csv file")
        curves: Dict[Tuple[str, float], List[Dict[str, str]]] = {}
        for row in rows:
            curves.setdefault((row["policy"], float(row["T"])), []).append(row)
        for (policy, T), curve in sorted(curves.items()):
            curve.sort(key=lambda r: float(r["x"]))
            if rank < len(curve) and curve[rank]["phat"] not in ("", "nan"):
                groups.setdefault(policy, []).append((T, float(curve[rank]["phat"])))
    out = []
    for label, points in sorted(groups.items()):
        row = {"policy": label, "mode": mode.value}
        try:
            fit = fit_exponent(sorted(points), mode)
            row.update(points=fit.points, discarded=fit.discarded, slope=fit.slope,
                       intercept=fit.intercept, r_squared=fit.r_squared, note="")
        except BanditInputError as e:
            row.update(points=len(points), note=str(e))
        out.append(row)
    return out


def with_overrides(plan: ExperimentPlan, seed: Optional[int] = None) -> ExperimentPlan:
    """Apply command-line overrides; the manifest records the effective seed."""
    if seed is None:
        return plan
    if not 0 <= seed <= MAX_SEED:
        raise ConfigError("seed", "must be a nonnegative 64-bit integer")
    return replace(plan, seed=seed, source={**plan.source, "seed": seed})
