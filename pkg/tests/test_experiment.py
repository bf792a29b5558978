import json
from pathlib import Path

import pytest

from tailbandits.errors import ConfigError
from tailbandits.experiment import (
    DEFAULT_REPLICATIONS,
    Stage,
    emit_csv,
    fit_from_csv,
    load_plan,
    parse_config,
    read_csv,
    run_plan,
    thresholds_for,
    with_overrides,
)
from tailbandits.stats import FitMode, empty_tail, estimate_tail


DEFAULTS = Path(__file__).resolve().parent.parent / "defaults"

SMALL_PLAN = """
name: small
seed: 21
replications: 60
horizons: [64, 128, 256]
instances:
  - name: two-arm
    means: [0.6, 0.4]
    noise: {kind: gaussian, sigma: 0.3}
linear_instances:
  - name: basis-2
    theta: [0.5, 0.3]
    noise: {kind: gaussian, sigma: 0.3}
policies:
  - name: se-tail
    kind: se
    bonus: {variant: tail_fixed}
  - name: ucb-anytime
    kind: ucb
    bonus: {variant: tail_anytime, alpha: 0.5, beta: 0.5}
  - name: ucbl
    kind: ucbl
    bonus: {timing: fixed}
thresholds:
  gap_fractions: [0.1, 0.3]
fits:
  - mode: regret_scaling
  - mode: poly_tail
    at: {gap_fraction: 0.1}
"""

SWEEP_PLAN = """
name: sweep
seed: 1
replications: 20
horizons: [100, 200, 400, 800]
instances:
  - name: sw
    noise: {kind: gaussian, sigma: 0.1}
    sweep: {c: [0.5, 1, 2], x: {delta: 0.8}}
policies:
  - name: se-tail
    kind: se
    bonus: {variant: tail_fixed}
thresholds:
  deltas: [0.7, 0.8]
"""


def test_minimal_plan_gets_defaults(minimal_plan_text):
    plan = parse_config(minimal_plan_text)
    assert plan.replications == DEFAULT_REPLICATIONS
    assert plan.confidence == 0.95
    assert plan.cells[0].instance.noise.sigma == 1.0
    assert plan.cells[0].label == "inst0"
    assert thresholds_for(plan, plan.cells[0]) == pytest.approx((5.0, 12.5, 25.0))


def test_beta_above_alpha_is_rejected(minimal_plan_text):
    text = minimal_plan_text.replace("{variant: tail_anytime}", "{variant: tail_anytime, alpha: 0.3, beta: 0.6}")
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.field == "policies[0].bonus.beta"


@pytest.mark.parametrize("broken, field", [
    ("seed: 3", "seed"),
    ("horizons: [50]", "horizons"),
])
def test_missing_field_is_named(minimal_plan_text, broken, field):
    with pytest.raises(ConfigError) as e:
        parse_config(minimal_plan_text.replace(broken, ""))
    assert e.value.field == field


def test_bad_values_are_named(minimal_plan_text):
    with pytest.raises(ConfigError) as e:
        parse_config(minimal_plan_text.replace("kind: ucb", "kind: thompson"))
    assert e.value.field == "policies[0].kind"
    with pytest.raises(ConfigError) as e:
        parse_config(minimal_plan_text.replace("means: [0.6, 0.4]", "means: [0.6, 1.4]"))
    assert e.value.field == "instances[0]"
    with pytest.raises(ConfigError):
        parse_config("- just a list")


def test_sweep_cross_product():
    plan = parse_config(SWEEP_PLAN)
    assert len(plan.cells) == 12
    assert {cell.group for cell in plan.cells} == {"sw"}
    gaps = {(cell.label, cell.horizon): cell.max_gap for cell in plan.cells}
    assert gaps[("sw:c=1", 100)] == pytest.approx(100 ** 0.8 / 100)


def test_zero_replications_still_writes_a_manifest(minimal_plan_text, tmp_path):
    plan = parse_config(minimal_plan_text.replace("seed: 3", "seed: 3\nreplications: 0"))
    artifact = run_plan(plan, out_dir=tmp_path)
    assert artifact.summaries == []
    assert all(curve.total == 0 for curve in artifact.tail_curves)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["replications"] == 0
    assert set(manifest["files"]) == set(artifact.files)
    assert read_csv(tmp_path / "tail.csv") == []


def test_reruns_are_byte_identical(tmp_path):
    plan = parse_config(SMALL_PLAN)
    first = run_plan(plan, out_dir=tmp_path / "a", threads=1)
    second = run_plan(plan, out_dir=tmp_path / "b", threads=2)
    assert first.files == second.files
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()


def test_tail_stage_outputs(tmp_path):
    plan = parse_config(SMALL_PLAN)
    artifact = run_plan(plan, stage=Stage.TAIL, out_dir=tmp_path)
    assert set(artifact.files) == {"summary.csv", "episodes.jsonl", "tail.csv", "fits.csv"}
    # 3 horizons x (2 K-armed + 1 linear policy)
    assert len(read_csv(tmp_path / "summary.csv")) == 9
    episodes = (tmp_path / "episodes.jsonl").read_text().splitlines()
    assert len(episodes) == 9 * 60
    assert "potential" in json.loads(episodes[-1])
    tail = read_csv(tmp_path / "tail.csv")
    assert all(row["bound"] != "" for row in tail if row["policy"].startswith(("se-tail", "ucbl")))
    fits = {(row["policy"], row["mode"]): row for row in read_csv(tmp_path / "fits.csv")}
    assert fits[("ucb-anytime", "regret_scaling")]["reference_slope"] != ""


def test_simulate_stage_skips_tails(tmp_path):
    artifact = run_plan(parse_config(SMALL_PLAN), stage=Stage.SIMULATE, out_dir=tmp_path)
    assert set(artifact.files) == {"summary.csv", "episodes.jsonl"}


def test_sweep_stage_adds_sup_rows(tmp_path):
    artifact = run_plan(parse_config(SWEEP_PLAN), stage=Stage.SWEEP, out_dir=tmp_path)
    sup = [curve for curve in artifact.tail_curves if curve.policy.endswith("[sup]")]
    assert len(sup) == 4
    for curve in sup:
        members = [c for c in artifact.tail_curves
                   if c.horizon == curve.horizon and not c.policy.endswith("[sup]")]
        for i in range(len(curve.thresholds)):
            assert curve.phat[i] == max(m.phat[i] for m in members)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["notes"]


def test_sweep_stage_needs_a_sweep(tmp_path):
    with pytest.raises(ConfigError):
        run_plan(parse_config(SMALL_PLAN), stage=Stage.SWEEP, out_dir=tmp_path)


def test_bounds_stage(tmp_path):
    artifact = run_plan(parse_config(SMALL_PLAN), stage=Stage.BOUNDS, out_dir=tmp_path)
    assert set(artifact.files) == {"bounds.csv"}
    rows = read_csv(tmp_path / "bounds.csv")
    assert rows and all(0.0 <= float(row["bound"]) <= 1.0 for row in rows)


def test_oracle_stage(tmp_path):
    plan = parse_config("""
name: oracle
seed: 7
replications: 2000
horizons: [6]
instances:
  - means: [0.6, 0.4]
    noise: {kind: rademacher, sigma: 0.3}
policies:
  - {name: ucb, kind: ucb, bonus: {variant: standard, eta: 1, sigma: 0.3}}
""")
    artifact = run_plan(plan, stage=Stage.ORACLE, out_dir=tmp_path)
    [row] = artifact.oracle_rows
    assert row["reps"] == 2000
    assert row["ks"] < 0.05
    assert row["mean_mc"] == pytest.approx(row["mean_exact"], abs=0.05)


def test_empty_curve_list_writes_header_only(tmp_path):
    path = tmp_path / "tail.csv"
    emit_csv([], path)
    assert path.read_text().splitlines() == ["policy,scenario,T,x,reps,exceed,phat,ci_lo,ci_hi,bound"]


def test_one_curve_two_thresholds(tmp_path):
    path = tmp_path / "tail.csv"
    curve = estimate_tail([0.0, 1.0, 2.0], [0.5, 1.5]).with_labels("p", "none", 10)
    written = emit_csv([curve], path)
    assert len(path.read_text().splitlines()) == 3
    assert written == len(path.read_bytes())


def test_curves_without_replications_are_not_written(tmp_path):
    path = tmp_path / "tail.csv"
    filled = estimate_tail([0.0, 1.0, 2.0], [0.5, 1.5]).with_labels("p", "none", 10)
    empty = empty_tail([0.5, 1.5]).with_labels("q", "none", 10)
    emit_csv([empty, filled], path)
    rows = read_csv(path)
    assert [row["policy"] for row in rows] == ["p", "p"]
    assert all(row["phat"] != "nan" for row in rows)


def test_offline_fit_matches_run(tmp_path):
    plan = parse_config(SMALL_PLAN)
    artifact = run_plan(plan, out_dir=tmp_path)
    offline = {row["policy"]: row for row in fit_from_csv(tmp_path / "summary.csv", FitMode.REGRET_SCALING)}
    online = [row for row in artifact.fits if row["mode"] == "regret_scaling"]
    for row in online:
        assert offline[f"{row['policy']}|{row['instance']}"]["slope"] == pytest.approx(row["slope"])


def test_offline_fit_checks_the_file_kind(tmp_path):
    run_plan(parse_config(SMALL_PLAN), stage=Stage.SIMULATE, out_dir=tmp_path)
    with pytest.raises(ConfigError):
        fit_from_csv(tmp_path / "summary.csv", FitMode.POLY_TAIL)


def test_seed_override_is_recorded(minimal_plan_text):
    plan = with_overrides(parse_config(minimal_plan_text), seed=99)
    assert plan.seed == 99 and plan.source["seed"] == 99
    with pytest.raises(ConfigError):
        with_overrides(plan, seed=-1)


@pytest.mark.parametrize("name", ["domination", "oracle", "concentration", "scaling", "tail_contrast", "sweep"])
def test_default_plans_parse(name):
    plan = load_plan(DEFAULTS / f"{name}.yaml")
    assert plan.name == name
