import json
import subprocess
import sys

import pytest

from cfuc import cases, cli
from cfuc.sysmodel import dump_case


@pytest.fixture(scope="module")
def short_case(tmp_path_factory):
    path = tmp_path_factory.mktemp("case") / "short.json"
    dump_case(cases.desk_case(horizon=6), path)
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_case_command(tmp_path):
    assert run("case", "desk", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "case.json").read_text())
    assert [u["id"] for u in doc["units"]] == ["G1", "G2", "G3", "G4", "G5"]


def test_solve_cuc_writes_outputs(tmp_path, short_case):
    assert run("solve", "--case", short_case, "--mode", "cuc", "--out", tmp_path) == 0
    for name in ("schedule.csv", "schedule.json", "model.mps", "summary.json", "nadir_2p5hz.json",
                 "nadir_minutes.csv"):
        assert (tmp_path / name).is_file(), name
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["mode"] == "cuc" and "score" not in summary
    assert summary["objective_keur"] > 0


def test_solve_cfcuc_with_training(tmp_path, short_case):
    out = tmp_path / "cf"
    assert run("solve", "--case", short_case, "--mode", "cfcuc", "--nadir-limit", 2.5, "--train",
               "--samples", 3000, "--seed", 1, "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["nadir_limit_hz"] == 2.5 and summary["minutes_above_limit"] == 0
    assert 0.9 <= summary["score"] <= 1.0
    assert (out / "nadir_model.json").is_file() and (out / "dataset.csv").is_file()


def test_train_thresholds_differ(tmp_path, short_case):
    assert run("train", "--case", short_case, "--threshold", 3, "--samples", 2000, "--out", tmp_path / "a") == 0
    assert run("train", "--case", short_case, "--threshold", 2, "--samples", 2000, "--out", tmp_path / "b") == 0
    a = json.loads((tmp_path / "a" / "nadir_model.json").read_text())
    b = json.loads((tmp_path / "b" / "nadir_model.json").read_text())
    assert (a["threshold_hz"], b["threshold_hz"]) == (3, 2)
    assert a["margin_hz"] != b["margin_hz"]


def test_train_is_byte_identical_across_processes(tmp_path, short_case):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        subprocess.run([sys.executable, "-m", "cfuc", "train", "--case", short_case, "--threshold", "2.5",
                        "--samples", "1500", "--seed", "3", "--out", str(out)], check=True, capture_output=True)
        outs.append(out)
    for name in ("nadir_model.json", "dataset.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_evaluate(tmp_path, short_case):
    run("solve", "--case", short_case, "--out", tmp_path / "s")
    assert run("evaluate", "--case", short_case, "--schedule", tmp_path / "s", "--thresholds", 2, 3,
               "--out", tmp_path / "e") == 0
    report = json.loads((tmp_path / "e" / "evaluation.json").read_text())
    assert set(report["minutes_above"]) == {"2", "3"}
    assert report["minutes_above"]["2"] >= report["minutes_above"]["3"]
    assert (tmp_path / "e" / "nadir_2hz.json").is_file()


def test_evaluate_rejects_mismatched_case(tmp_path, short_case, capsys):
    run("solve", "--case", short_case, "--out", tmp_path / "s")
    assert run("evaluate", "--case", "desk", "--schedule", tmp_path / "s", "--out", tmp_path / "e") == 2
    assert "6 h" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ("solve", "--case", "desk", "--mode", "cfcuc", "--train"),
    ("solve", "--case", "desk", "--mode", "cfcuc", "--nadir-limit", "2.5"),
    ("solve", "--case", "missing.json"),
])
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    assert run(*argv, "--out", tmp_path) == 2
    assert capsys.readouterr().err.startswith("cfuc: ")


def test_solver_failure_exits_1(tmp_path, short_case, monkeypatch):
    from cfuc import milp

    monkeypatch.setattr(milp, "solve", lambda *a, **k: milp.Solution("infeasible"))
    assert run("solve", "--case", short_case, "--out", tmp_path) == 1


def test_config_validation():
    with pytest.raises(cli.UsageError, match="unknown mode"):
        cli.RunConfig("desk", mode="fcuc").validate()
    with pytest.raises(cli.UsageError, match="positive"):
        cli.RunConfig("desk", nadir_limit_hz=-1.0).validate()
