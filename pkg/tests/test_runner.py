from __future__ import annotations

import json

import numpy as np
import pytest

from harmonia import oracle, runner
from harmonia.harmonic import CheckConfig
from harmonia.models import MODEL_IDS, build
from harmonia.runner import (
    CHECKS,
    SCHEMA,
    CheckResult,
    RunSpec,
    SelectionError,
    check_names,
    run,
    select,
    with_overrides,
)

FAST = CheckConfig(sample_count=8)


def result(residuals, tol=1e-4, expect="pass", discrepancy="", error="") -> CheckResult:
    return CheckResult("x", "harmonic-map", "m", ("f",), "theory", expect, discrepancy,
                       np.asarray(residuals, dtype=float), tol, error=error)


# ---- outcome semantics


def test_verdict_and_outcome():
    assert result([1e-6, 2e-6]).verdict == "pass"
    assert result([1e-6, 2e-6]).outcome == "ok"
    assert result([1e-6, 1.0]).verdict == "fail"
    assert result([1e-6, 1.0]).outcome == "regression"
    assert result([1e-6, 1.0], discrepancy="known").outcome == "known-discrepancy"
    assert result([np.nan]).verdict == "fail"


def test_control_must_fail_clearly():
    assert result([1.0, 0.5], expect="fail").outcome == "ok"
    # fails, but one point sits within ten tolerances of passing
    assert result([1.0, 5e-4], expect="fail").outcome == "regression"
    assert result([1e-6], expect="fail").outcome == "regression"


def test_error_is_a_regression():
    r = result([], error="ValueError: boom")
    assert r.verdict == "error"
    assert r.outcome == "regression"
    assert r.to_dict()["error"] == "ValueError: boom"


def test_check_result_to_dict_is_json_safe():
    r = result([1e-6, 2e-6])
    r.fitted = {"arr": np.array([1.0, np.nan, 3.0]), "scalar": np.float64(np.inf), "flag": np.bool_(True)}
    d = json.loads(json.dumps(r.to_dict(), allow_nan=False))
    assert d["fitted"]["scalar"] is None
    assert d["fitted"]["flag"] is True
    assert set(d["fitted"]["arr"]) == {"mean", "min", "max"}


# ---- selection


def test_check_names_sorted_and_complete():
    names = check_names()
    assert names == sorted(CHECKS)
    assert "pair-thm" in names and "harmonic-map" in names


@pytest.mark.parametrize("run_spec", [
    RunSpec(("no-such-model",)),
    RunSpec(("nope*",)),
    RunSpec(("sasakian-s5",), checks=("no-such-check",)),
    RunSpec(("sasakian-s5",), fields=("no-such-field",)),
    RunSpec(("sasakian-s5",), fields=("var",), checks=("pair-thm",), regression=True),
])
def test_selection_errors(run_spec):
    with pytest.raises(SelectionError):
        select(run_spec)


def test_spec_validation():
    with pytest.raises(SelectionError):
        RunSpec(())
    with pytest.raises(SelectionError):
        RunSpec(("flat:4",), checks=())
    with pytest.raises(SelectionError):
        RunSpec(("flat:4",), jobs=0)


def test_non_generic_check_without_target_is_rejected():
    with pytest.raises(SelectionError, match="needs catalog targets"):
        select(RunSpec(("sasakian-s5",), fields=("var",), checks=("pair-thm",)))


def test_survey_mode_adds_generic_checks():
    plan = select(RunSpec(("sasakian-s5",), fields=("var",), checks=("bending",)))
    assert plan == [("sasakian-s5", [("bending", "var")])]


def test_glob_selection_keeps_catalog_order():
    plan = select(RunSpec(("kenmotsu:*",), checks=("harmonic-section",), regression=True))
    assert [m for m, _ in plan] == ["kenmotsu:1,1,1", "kenmotsu:2,1,1", "kenmotsu:3,1,1"]


def test_with_overrides():
    c = with_overrides(CheckConfig(), sample_count=7, seed=None, tol_d2=1e-3)
    assert (c.sample_count, c.seed, c.tol_d2) == (7, 0, 1e-3)


# ---- runs


def test_example_sasakian_run_passes():
    res = run(RunSpec(("sasakian-s5",), ("eta-wedge-F",), ("harmonic-section", "harmonic-map"),
                      with_overrides(CheckConfig(), seed=42)))
    assert res.exit_code == 0
    assert [c.verdict for c in res.results] == ["pass", "pass"]
    assert all(c.points == 50 for c in res.results)


def test_negative_control_fails_as_expected():
    res = run(RunSpec(("lck-cone:3",), ("omega",), ("harmonic-section",), FAST))
    (c,) = res.results
    assert c.verdict == "fail" and c.outcome == "ok"
    assert res.exit_code == 0


def test_regression_mode_exit_one_on_regression():
    tight = with_overrides(FAST, tol_d2=1e-15)
    res = run(RunSpec(("sasakian-s3",), ("F",), ("harmonic-section",), tight, regression=True))
    assert res.results[0].outcome == "regression"
    assert res.exit_code == 1


def test_survey_mode_exit_zero_on_failed_verdicts():
    tight = with_overrides(FAST, tol_d2=1e-15)
    res = run(RunSpec(("sasakian-s3",), ("F",), ("harmonic-section",), tight))
    assert res.results[0].verdict == "fail"
    assert res.exit_code == 0


def test_survey_mode_exit_one_when_a_check_raises(monkeypatch):
    def boom(ctx, exp):
        raise RuntimeError("boom")

    monkeypatch.setitem(CHECKS, "bending", runner.CheckSpec(boom, "broken", True))
    res = run(RunSpec(("sasakian-s3",), ("F",), ("bending",), FAST))
    assert res.results[0].verdict == "error"
    assert "boom" in res.results[0].error
    assert res.exit_code == 1


def test_oracle_gate_failure_exits_three(monkeypatch):
    bad = oracle.OracleReport("covariant-derivative", 1.0, 2.0, 1.0, oracle.COVARIANT_TOL)
    monkeypatch.setattr(oracle, "covariant_oracle", lambda *a, **k: bad)
    res = run(RunSpec(("sasakian-s3",), config=FAST, regression=True))
    assert res.exit_code == 3
    assert res.gate_failed
    # nothing but the gates ran
    assert {c.check for c in res.results} <= runner.ORACLE_CHECKS


def test_json_document_round_trips():
    res = run(RunSpec(("sasakian-s3",), ("eta",), config=FAST, regression=True))
    doc = json.loads(json.dumps(res.to_dict("2026-01-01T00:00:00+00:00"), allow_nan=False))
    assert doc["schema"] == SCHEMA
    assert set(doc) == {"schema", "timestamp", "reports", "summary"}
    assert set(doc["timestamp"]) == {"created", "wall_time"}
    for rep in doc["reports"]:
        assert set(rep) == {"model", "field", "checks"}
        for c in rep["checks"]:
            assert {"name", "check", "fields", "origin", "points", "max_residual", "min_residual", "tolerance",
                    "fitted", "verdict", "expect", "outcome"} <= set(c)
            assert c["verdict"] in ("pass", "fail", "error")
    s = doc["summary"]
    assert s["checks"] == s["pass"] + s["fail"] + s["error"]
    assert s["checks"] == s["ok"] + s["known-discrepancy"] + s["regression"]
    assert s["exit_code"] == res.exit_code


def _strip(doc: dict) -> dict:
    doc = dict(doc)
    doc.pop("timestamp")
    return doc


def test_runs_are_deterministic():
    spec = RunSpec(("sasakian-s5", "hopf-lck:2"), config=FAST, regression=True)
    a, b = run(spec), run(spec)
    assert json.dumps(_strip(a.to_dict())) == json.dumps(_strip(b.to_dict()))


def test_parallel_run_matches_serial():
    spec = RunSpec(("sasakian-s3",), config=FAST, regression=True)
    serial = run(spec)
    parallel = run(RunSpec(spec.models, config=FAST, regression=True, jobs=2))
    assert json.dumps(_strip(serial.to_dict())) == json.dumps(_strip(parallel.to_dict()))


# ---- full catalog regression


def test_full_regression_exit_zero(regression_run):
    s = regression_run.summary()
    assert regression_run.exit_code == 0, s
    assert s["regression"] == 0
    assert not regression_run.gate_failed


def test_full_regression_has_one_row_per_expectation(regression_run):
    expected = [(m, e.key) for m in MODEL_IDS for e in build(m).suite]
    got = [(c.model, c.name) for c in regression_run.results]
    assert sorted(got) == sorted(expected)
    assert len(got) == len(set(got))


def test_full_regression_controls_fail_clearly(regression_run):
    controls = [c for c in regression_run.results if c.expect == "fail"]
    assert controls
    for c in controls:
        if c.outcome == "known-discrepancy":
            continue
        assert c.verdict == "fail"
        assert c.min_residual > 10 * c.tolerance, c.name


def test_full_regression_discrepancies_are_all_recorded(regression_run):
    for c in regression_run.results:
        if c.verdict != c.expect:
            assert c.discrepancy, (c.model, c.name)


def test_full_regression_uses_fifty_points(regression_run):
    for c in regression_run.results:
        if c.check.startswith("oracle-mc") or c.check in ("structure", "einstein-k", "pair-thm"):
            continue
        assert c.points >= 20, (c.model, c.name, c.points)
