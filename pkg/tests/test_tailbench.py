import pytest

import tailbench


PLAN = """
name: cli
seed: 5
replications: 30
horizons: [40, 80, 160]
instances:
  - means: [0.6, 0.4]
    noise: {kind: gaussian, sigma: 0.3}
policies:
  - {name: ucb, kind: ucb, bonus: {variant: tail_anytime}}
"""


@pytest.fixture
def plan_path(tmp_path):
    path = tmp_path / "plan.yaml"
    path.write_text(PLAN)
    return path


def test_parser_has_every_stage():
    parser = tailbench.build_parser()
    for command in ("simulate", "tail", "sweep", "bounds", "oracle"):
        args = parser.parse_args([command, "--config", "plan.yaml"])
        assert args.command == command and args.threads == 1
    args = parser.parse_args(["fit", "--csv", "summary.csv", "--mode", "poly_tail"])
    assert args.mode == "poly_tail" and args.rank == 0


def test_tail_then_fit(plan_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert tailbench.main(["tail", "--config", str(plan_path), "--out", str(out), "--seed", "8"]) == 0
    assert (out / "tail.csv").exists()
    assert tailbench.main(["fit", "--csv", str(out / "summary.csv")]) == 0
    printed = capsys.readouterr().out
    assert "[TAIL] tail.csv" in printed
    assert "[FIT] ucb|inst0: slope=" in printed


def test_invalid_plan_reports_error(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(PLAN.replace("bonus: {variant: tail_anytime}", "bonus: {variant: tail_anytime, beta: 0.9}"))
    assert tailbench.main(["bounds", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "[ERROR] policies[0].bonus.beta" in capsys.readouterr().out


def test_missing_file_reports_error(tmp_path, capsys):
    assert tailbench.main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 1
    assert capsys.readouterr().out.startswith("[ERROR]")
