from __future__ import annotations

import csv
import json

import pytest
from click.testing import CliRunner

from harmonia import oracle
from harmonia.cli import main
from harmonia.runner import SCHEMA


@pytest.fixture
def cli():
    return CliRunner()


def test_list_models(cli):
    res = cli.invoke(main, ["list-models"])
    assert res.exit_code == 0
    assert "nk-s6" in res.output
    doc = json.loads(cli.invoke(main, ["list-models", "--format", "json"]).output)
    assert "nk-s6" in {d["id"] for d in doc}


def test_list_checks(cli):
    res = cli.invoke(main, ["list-checks"])
    assert res.exit_code == 0
    assert "pair-thm" in res.output
    doc = json.loads(cli.invoke(main, ["list-checks", "--format", "json"]).output)
    assert {"name", "description", "generic"} <= set(doc[0])
    assert "pair-thm" in {d["name"] for d in doc}


def test_sasakian_example_passes(cli):
    res = cli.invoke(main, ["run", "--model", "sasakian-s5", "--field", "eta-wedge-F", "--checks",
                            "harmonic-section,harmonic-map", "--points", "50", "--seed", "42", "--format", "json"])
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    checks = [c for rep in doc["reports"] for c in rep["checks"]]
    assert [c["check"] for c in checks] == ["harmonic-section", "harmonic-map"]
    assert all(c["verdict"] == "pass" and c["points"] == 50 for c in checks)


def test_negative_control_example_fails(cli):
    res = cli.invoke(main, ["run", "--model", "lck-cone:3", "--field", "omega", "--checks", "harmonic-section",
                            "--points", "10"])
    assert res.exit_code == 0, res.output
    row = next(line for line in res.output.splitlines() if line.startswith("lck-cone:3"))
    assert " fail " in row and row.rstrip().endswith("ok")


@pytest.mark.parametrize("args", [
    ["run"],
    ["run", "--model", "no-such-model"],
    ["run", "--model", "sasakian-s3", "--checks", "no-such-check"],
    ["run", "--model", "sasakian-s3", "--field", "no-such-field"],
])
def test_bad_selection_exits_two(cli, args):
    res = cli.invoke(main, args)
    assert res.exit_code == 2
    assert "error" in res.output.lower() or "usage" in res.output.lower()


def test_out_and_csv(cli, tmp_path):
    out, table = tmp_path / "r.json", tmp_path / "r.csv"
    res = cli.invoke(main, ["run", "--model", "sasakian-s3", "--field", "F", "--checks", "harmonic-section",
                            "--points", "6", "--format", "json", "--out", str(out), "--emit-csv", str(table)])
    assert res.exit_code == 0, res.output
    doc = json.loads(out.read_text())
    assert doc["schema"] == SCHEMA
    with table.open() as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"model", "field", "check", "point", "residual"}
    assert len(rows) == 6
    assert all(r["field"] == "F" for r in rows)


def test_json_output_is_deterministic_apart_from_timestamp(cli):
    args = ["run", "--model", "hopf-lck:2", "--points", "6", "--regression", "--format", "json"]
    a, b = (json.loads(cli.invoke(main, args).output) for _ in range(2))
    a.pop("timestamp"), b.pop("timestamp")
    assert a == b


def test_jobs_from_environment(cli):
    args = ["run", "--model", "sasakian-s3", "--points", "6", "--regression", "--format", "json"]
    serial = json.loads(cli.invoke(main, args).output)
    parallel = json.loads(cli.invoke(main, args, env={"HARMONIA_JOBS": "2"}).output)
    serial.pop("timestamp"), parallel.pop("timestamp")
    assert serial == parallel


def test_bad_jobs_environment_is_a_usage_error(cli):
    res = cli.invoke(main, ["run", "--model", "sasakian-s3"], env={"HARMONIA_JOBS": "many"})
    assert res.exit_code == 2
    assert "HARMONIA_JOBS" in res.output


def test_regression_tight_tolerance_exits_one(cli):
    res = cli.invoke(main, ["run", "--model", "sasakian-s3", "--field", "F", "--checks", "harmonic-section",
                            "--points", "6", "--tol-d2", "1e-15", "--regression"])
    assert res.exit_code == 1
    assert "regression" in res.output


def test_gate_failure_exits_three(cli, monkeypatch):
    bad = oracle.OracleReport("covariant-derivative", 1.0, 2.0, 1.0, oracle.COVARIANT_TOL)
    monkeypatch.setattr(oracle, "covariant_oracle", lambda *a, **k: bad)
    res = cli.invoke(main, ["run", "--model", "sasakian-s3", "--points", "6", "--regression"])
    assert res.exit_code == 3
    assert "oracle gate FAILED" in res.output
