import csv
from pathlib import Path

import pytest

from rcplab import cli


def run_in(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    return cli.run(argv)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_bounds_lambda_h(capsys):
    assert cli.run(["bounds", "lambda-h", "--eps", "0.9", "--a0", "1"]) == 0
    out = capsys.readouterr().out.strip()
    assert out == "1.14348017"


def test_bounds_requires_args(capsys):
    assert cli.run(["bounds", "lambda-h", "--eps", "0.9"]) == 2


def test_unknown_subcommand_exits_2():
    assert cli.run(["frobnicate"]) == 2


def test_bad_law_exits_2(tmp_path, monkeypatch, capsys):
    rc = run_in(tmp_path, monkeypatch,
                ["simulate", "--law", "cauchy(1)", "--n", "10"])
    assert rc == 2


def test_simulate_degenerate_summary(tmp_path, monkeypatch, capsys):
    rc = run_in(tmp_path, monkeypatch, [
        "simulate", "--law", "det(1)", "--lambda", "5", "--L", "50",
        "--T", "10", "--n", "1000", "--seed", "7",
    ])
    assert rc == 0
    assert "survival 0/1000" in capsys.readouterr().out
    rows = read_csv(tmp_path / "rcplab_simulate.csv")
    assert len(rows) == 1000
    assert all(r["survived"] == "0" for r in rows)
    assert all(float(r["extinction_time"]) <= 1.0 for r in rows)
    assert (tmp_path / "rcplab_simulate.png").exists()


def test_simulate_trajectory_output(tmp_path, monkeypatch):
    rc = run_in(tmp_path, monkeypatch, [
        "simulate", "--law", "exp(1)", "--lambda", "2", "--L", "20", "--T", "5",
        "--n", "50", "--seed", "3", "--trajectory", "traj.csv",
    ])
    assert rc == 0
    rows = read_csv(tmp_path / "traj.csv")
    assert list(rows[0]) == ["time", "infected_count", "leftmost", "rightmost"]
    assert rows[0]["infected_count"] == "1"


def test_sweep_csv_round_trip(tmp_path, monkeypatch):
    rc = run_in(tmp_path, monkeypatch, [
        "sweep", "--law", "exp(1)", "--lambdas", "0.5,1.5,2.5", "--L", "30",
        "--T", "15", "--n", "120", "--seed", "5",
    ])
    assert rc == 0
    rows = read_csv(tmp_path / "rcplab_sweep.csv")
    assert [r["lambda"] for r in rows] == ["0.5", "1.5", "2.5"]
    ests = [float(r["estimate"]) for r in rows]
    assert ests == sorted(ests)
    assert (tmp_path / "rcplab_sweep.png").exists()


def test_no_figures_flag(tmp_path, monkeypatch):
    rc = run_in(tmp_path, monkeypatch, [
        "sweep", "--law", "exp(1)", "--lambdas", "1.0,2.0", "--L", "20",
        "--T", "10", "--n", "60", "--no-figures",
    ])
    assert rc == 0
    assert not (tmp_path / "rcplab_sweep.png").exists()


def test_critical_csv(tmp_path, monkeypatch, capsys):
    rc = run_in(tmp_path, monkeypatch, [
        "critical", "--law", "exp(1)", "--L", "30", "--T", "15",
        "--bracket", "0.8,3.5", "--tol", "0.2", "--n", "150", "--seed", "2",
    ])
    assert rc == 0
    row = read_csv(tmp_path / "rcplab_critical.csv")[0]
    assert 0.8 <= float(row["value"]) <= 3.5
    assert row["law"] == "exp(1)"


def test_critical_invalid_bracket_exit_4(tmp_path, monkeypatch, capsys):
    rc = run_in(tmp_path, monkeypatch, [
        "critical", "--law", "det(1)", "--L", "20", "--T", "3",
        "--bracket", "1,50", "--tol", "0.5", "--n", "80",
    ])
    assert rc == 4
    assert "runtime error" in capsys.readouterr().err


def test_crossing_csv(tmp_path, monkeypatch):
    rc = run_in(tmp_path, monkeypatch, [
        "crossing", "--law", "uniform(1)", "--lambda", "40", "--kind",
        "horizontal", "--scheme", "bounded", "--b", "1", "--t-grid", "0,0.5",
        "--n", "800", "--seed", "4",
    ])
    assert rc == 0
    rows = read_csv(tmp_path / "rcplab_crossing.csv")
    assert len(rows) == 2 and rows[0]["kind"] == "horizontal"
    assert 0.0 <= float(rows[0]["estimate"]) <= 1.0


def test_blocks_dump_and_report(tmp_path, monkeypatch, capsys):
    rc = run_in(tmp_path, monkeypatch, [
        "blocks", "--law", "uniform(1)", "--lambda", "30", "--scheme", "bounded",
        "--b", "1", "--cols", "3", "--rows", "3", "--seed", "6",
    ])
    assert rc == 0
    assert "percolates" in capsys.readouterr().out
    rows = read_csv(tmp_path / "rcplab_blocks.csv")
    assert {r["edge_kind"] for r in rows} == {"H", "V"}
    rc = run_in(tmp_path, monkeypatch, [
        "blocks", "--law", "uniform(1)", "--lambda", "30", "--scheme", "bounded",
        "--b", "1", "--cols", "3", "--rows", "3", "--n", "40", "--seed", "6",
        "--report", "--sampler", "boxwise", "--out", "report.csv",
    ])
    assert rc == 0
    kinds = {r["kind"] for r in read_csv(tmp_path / "report.csv")}
    assert {"marginal", "correlation", "percolation"} <= kinds


def test_verify_pass_and_fail(tmp_path, monkeypatch, capsys):
    rc = run_in(tmp_path, monkeypatch, [
        "verify", "determinism", "--law", "exp(1)", "--n", "500", "--seed", "1",
    ])
    assert rc == 0
    assert "PASS determinism" in capsys.readouterr().out
    # increasing hazard violates the decreasing-hazard gap bound
    rc = run_in(tmp_path, monkeypatch, [
        "verify", "dfr-gap", "--law", "uniform(1)", "--w", "0.45", "--n", "30000",
        "--seed", "1", "--out", "fail.csv",
    ])
    assert rc == 3
    rows = read_csv(tmp_path / "fail.csv")
    assert any(r["passed"] == "0" for r in rows)


def test_verify_dfr_gap_spec_example(tmp_path, monkeypatch, capsys):
    rc = run_in(tmp_path, monkeypatch, [
        "verify", "dfr-gap", "--law", "weibull(0.7,1)", "--w", "0.2",
        "--n", "20000", "--seed", "2",
    ])
    assert rc == 0


def test_verify_deterministic_across_worker_counts(tmp_path, monkeypatch):
    outs = []
    for i, workers in enumerate(("1", "4")):
        out = tmp_path / f"v{i}.csv"
        rc = run_in(tmp_path, monkeypatch, [
            "verify", "count-tail", "--law", "exp(1)", "--n", "20000",
            "--seed", "9", "--workers", workers, "--out", str(out),
        ])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_config_file_precedence(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nlambda = 5\nn = 200\nlaw = det(1)\nT = 4\n")
    rc = run_in(tmp_path, monkeypatch, [
        "simulate", "--config", str(cfg), "--n", "77",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "survival 0/77" in out  # flag beats config
    assert "law=det(1)" in out  # config beats default


def test_config_unknown_key(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("wibble = 3\n")
    rc = run_in(tmp_path, monkeypatch, ["simulate", "--config", str(cfg)])
    assert rc == 2
