"""Acceptance criteria, one printed PASS/FAIL line each.

Criteria that evaluate catalog checks read them from the session-wide full
regression run (default configuration, 50 points per model).
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from harmonia.gstructures import (
    g2_forms,
    induced_metric_spin7,
    spin7_form,
    spin7_projectors,
    spin7_split_operator,
    su3_forms,
)
from harmonia.harmonic import CheckConfig, PointSet, map_residual_from_jet, section_residual_from_jet
from harmonia.multilinear import AlternatingForm, contract, form_inner, hodge_star, wedge
from harmonia.oracle import CURVATURE_TOL
from harmonia.models import build
from harmonia.runner import RunSpec, run

ALG = 1e-12
HM_TOL = 1e-4
MIN_POINTS = 20


def _fmt(results) -> str:
    worst = max(results, key=lambda c: c.max_residual / c.tolerance)
    return f"{len(results)} checks, worst {worst.model} {worst.name} residual {worst.max_residual:.2e}"


def _select(results_by_key, keys):
    missing = [k for k in keys if k not in results_by_key]
    assert not missing, f"catalog is missing {missing}"
    return [results_by_key[k] for k in keys]


def _all_pass(results) -> bool:
    return all(c.verdict == "pass" and c.points >= MIN_POINTS for c in results)


# ---- algebraic identities at 1e-12


def test_su3_norms(acceptance):
    omega, pp, pm = su3_forms()
    vals = (form_inner(omega, omega), form_inner(pp, pp), form_inner(pm, pm))
    ok = abs(vals[0] - 6) < ALG and abs(vals[1] - 24) < ALG and abs(vals[2] - 24) < ALG
    acceptance("algebra |omega|^2=6, |Psi+-|^2=24", ok, f"got {vals[0]:.15g}, {vals[1]:.15g}, {vals[2]:.15g}")


def test_su3_omega_squared_norm_144(acceptance):
    omega, _, _ = su3_forms()
    w2 = wedge(omega, omega)
    val = form_inner(w2, w2)
    acceptance("algebra |omega^omega|^2=144", abs(val - 144) < ALG, f"got {val:.15g}")


def test_g2_norms(acceptance):
    phi, sphi = g2_forms()
    a, b = form_inner(phi, phi), form_inner(sphi, sphi)
    ok = abs(a - 42) < ALG and abs(b - 168) < ALG and abs(4 * a - 7 * 24) < ALG and hodge_star(phi).isclose(sphi, atol=ALG)
    acceptance("algebra |phi|^2=42, |*phi|^2=168", ok, f"got {a:.15g}, {b:.15g}")


@pytest.mark.parametrize("sigma", [1, -1])
def test_spin7_wedge_square(acceptance, sigma):
    Phi = spin7_form(sigma)
    val = wedge(Phi, Phi).to_array()[0]
    acceptance(f"algebra Phi^Phi=14 sigma vol (sigma={sigma})", abs(val - 14 * sigma) < ALG, f"got {val:.15g}")


@pytest.mark.parametrize("sigma", [1, -1])
def test_spin7_split(acceptance, sigma):
    Phi = spin7_form(sigma)
    vals = np.linalg.eigvalsh(spin7_split_operator(Phi))
    n1, n3 = int(np.sum(np.abs(vals - 1) < ALG)), int(np.sum(np.abs(vals + 3) < ALG))
    p21, p7 = spin7_projectors(Phi)
    ok = (n1, n3) == (21, 7) and np.abs(p21 + p7 - np.eye(28)).max() < ALG
    acceptance(f"algebra spin(7) split (sigma={sigma})", ok, f"eigenvalue 1 x{n1}, -3 x{n3}")


@pytest.mark.parametrize("sigma", [1, -1])
def test_spin7_induced_metric(acceptance, sigma):
    err = np.abs(induced_metric_spin7(spin7_form(sigma)).g - np.eye(8)).max()
    acceptance(f"algebra spin(7) induced metric = delta (sigma={sigma})", err < ALG, f"max deviation {err:.1e}")


def test_spin7_contraction_gram(acceptance):
    Phi = spin7_form(1)
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(2, 16, 8))
    err = max(abs(form_inner(contract(x, Phi), contract(y, Phi)) - 42 * x @ y) for x, y in zip(X, Y))
    e = np.eye(8)
    gram = np.array([[form_inner(contract(e[a], Phi), contract(e[b], Phi)) for b in range(8)] for a in range(8)])
    err = max(err, np.abs(gram - 42 * np.eye(8)).max())
    acceptance("algebra <X_|Phi, Y_|Phi> = 42 <X,Y>", err < ALG, f"max deviation {err:.1e}")


# ---- eigen-equations (relative 1e-4, at least 20 points)


def test_eigen_nearly_kaehler(acceptance, results_by_key):
    res = _select(results_by_key, [("nk-s6", f"rough-laplacian[{f}]") for f in ("omega", "psi+", "psi-")])
    acceptance("eigen nk-s6 omega, Psi+-", _all_pass(res), _fmt(res))


def test_eigen_g2_phi(acceptance, results_by_key):
    res = _select(results_by_key, [("g2-s7", "rough-laplacian[phi]")])
    acceptance("eigen g2-s7 phi = (k^2/4) phi", _all_pass(res), _fmt(res))


def test_eigen_g2_ricci_k2_over_16(acceptance, results_by_key):
    (c,) = _select(results_by_key, [("g2-s7", "einstein-k[rho=k^2/16]")])
    acceptance("eigen g2-s7 rho = k^2/16", c.verdict == "pass", f"residual {c.max_residual:.3e}, fitted {c.fitted}")


def test_eigen_sasakian(acceptance, results_by_key):
    names = ("eta", "eta-wedge-F", "eta-wedge-F^2", "F", "F^2")
    res = _select(results_by_key, [("sasakian-s5", f"rough-laplacian[{f}]") for f in names])
    acceptance("eigen sasakian-s5 eta^F^r and F^(r+1)", _all_pass(res), _fmt(res))


def test_eigen_three_sasakian(acceptance, results_by_key):
    res = [c for (m, _), c in results_by_key.items() if m == "3sasakian-s7" and c.check == "rough-laplacian"]
    names = {c.name for c in res}
    ok = _all_pass(res) and {"rough-laplacian[theta]", "rough-laplacian[F3+3eta12]"} <= names
    acceptance("eigen 3sasakian-s7 composite forms", ok, _fmt(res))


def test_eigen_kenmotsu(acceptance, results_by_key):
    res = [c for (m, _), c in results_by_key.items()
           if m.startswith("kenmotsu") and c.check == "rough-laplacian" and c.fields[0] in ("F", "F^2")]
    acceptance("eigen kenmotsu F^r = 2 r b^2 F^r", bool(res) and _all_pass(res), _fmt(res))


@pytest.mark.parametrize("model,field", [("lcp-spin7", "Phi"), ("hopf-lck:2", "omega"), ("lc-hk:1", "Omega")])
def test_eigen_locally_conformal(acceptance, results_by_key, model, field):
    res = _select(results_by_key, [(model, f"lcp-eigen[{field}]")])
    acceptance(f"eigen {model} {field}", _all_pass(res), _fmt(res))


# ---- harmonic-map verdicts


THEOREM_MODELS = ("nk-s6", "g2-s7", "sasakian-s3", "sasakian-s5", "3sasakian-s7")


def test_theorem_forms_are_harmonic_maps(acceptance, results_by_key):
    res = [c for (m, _), c in results_by_key.items()
           if m in THEOREM_MODELS and c.check == "harmonic-map" and c.origin == "theory"]
    acceptance("harmonic-map theorem forms", len(res) > 10 and _all_pass(res), _fmt(res))


def test_kenmotsu_power_warp_for_F_power(acceptance, results_by_key):
    # sigma = C (t+K)^{2/r} should make F^r a harmonic map
    res = _select(results_by_key, [("kenmotsu:1,1,1", "harmonic-map[F,stated]"),
                                   ("kenmotsu:2,1,1", "harmonic-map[F^2,stated]")])
    detail = ", ".join(f"{c.model} {c.name} {c.verdict} ({c.max_residual:.2e})" for c in res)
    acceptance("harmonic-map kenmotsu F^r at sigma = C(t+K)^(2/r)", _all_pass(res), detail)


def test_kenmotsu_quadratic_warp_for_eta_wedge(acceptance, results_by_key):
    res = _select(results_by_key, [("kenmotsu:1,1,1", "harmonic-map[eta-wedge-F]")])
    acceptance("harmonic-map kenmotsu eta^F at sigma = C(t+K)^2", _all_pass(res), _fmt(res))


def test_locally_conformal_harmonic_maps(acceptance, results_by_key):
    res = _select(results_by_key, [("lcp-spin7", "harmonic-map[Phi]"), ("hopf-lck:2", "harmonic-map[omega]"),
                                   ("hopf-lck:4", "harmonic-map[omega^2]")])
    acceptance("harmonic-map lcp-spin7 Phi, hopf-lck omega^n", _all_pass(res), _fmt(res))


def test_negative_controls_fail(acceptance, results_by_key):
    res = _select(results_by_key, [("hopf-lck:3", "harmonic-section[omega]"),
                                   ("hopf-lck:4", "harmonic-section[omega]"),
                                   ("kenmotsu-exp:1", "harmonic-map[F,stated]"),
                                   ("kenmotsu-exp:1", "harmonic-map[eta-wedge-F]")])
    ok = all(c.verdict == "fail" and c.min_residual > 10 * c.tolerance for c in res)
    detail = ", ".join(f"{c.model} {c.name} min {c.min_residual:.2e}" for c in res)
    acceptance("negative controls fail", ok, detail)


# ---- structural properties


@pytest.mark.parametrize("check", ["metric-compat", "ricci-identity", "orthogonality", "energy-identity", "two-route"])
def test_structural_suite(acceptance, results_by_key, check):
    res = [c for c in results_by_key.values() if c.check == check]
    ok = bool(res) and all(c.outcome == "ok" and c.verdict == "pass" for c in res)
    acceptance(f"structure {check}", ok, _fmt(res))


def test_multilinear_identities_on_random_forms(acceptance):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 8))
        p, q = (int(v) for v in rng.integers(1, n, size=2))
        a = AlternatingForm.from_array(n, p, rng.normal(size=len(AlternatingForm.zero(n, p).to_array())))
        b = AlternatingForm.from_array(n, q, rng.normal(size=len(AlternatingForm.zero(n, q).to_array())))
        x = rng.normal(size=n)
        if p + q <= n:
            worst = max(worst, (wedge(a, b) - (-1) ** (p * q) * wedge(b, a)).max_abs())
            lhs = contract(x, wedge(a, b))
            rhs = wedge(contract(x, a), b) + (-1) ** p * wedge(a, contract(x, b))
            worst = max(worst, (lhs - rhs).max_abs())
        worst = max(worst, (hodge_star(hodge_star(a)) - (-1) ** (p * (n - p)) * a).max_abs())
    acceptance("structure multilinear identities", worst < 1e-10, f"max deviation {worst:.1e}")


def test_pair_theorem(acceptance, results_by_key):
    res = [c for c in results_by_key.values() if c.check == "pair-thm"]
    acceptance("structure paired eigenvalue fit", bool(res) and all(c.verdict == "pass" for c in res), _fmt(res))


def test_three_sasakian_identities(acceptance, results_by_key):
    res = _select(results_by_key, [("3sasakian-s7", "structure[equrem]"), ("3sasakian-s7", "structure[escalprod]")])
    acceptance("structure 3sasakian-s7 contact identities", all(c.verdict == "pass" for c in res), _fmt(res))


def _kenmotsu_map(r: float, name: str) -> bool:
    cm = build(f"kenmotsu:{r!r},1.5,0.5")
    jet = PointSet(cm.model, MIN_POINTS, 0).jet(cm.field(name), 2)
    assert section_residual_from_jet(jet).max() < HM_TOL
    return bool(map_residual_from_jet(jet).max() < HM_TOL)


WARPS = (0.5, 1.0, 2.0, 3.0)


@pytest.mark.parametrize("s", [1, 2])
def test_kenmotsu_power_biconditional(acceptance, s):
    # F^s is a harmonic map iff sigma = C (t+K)^{2/s}
    name = "F" if s == 1 else f"F^{s}"
    verdicts = {r: _kenmotsu_map(r, name) for r in WARPS}
    ok = all(v == (r == s) for r, v in verdicts.items())
    acceptance(f"structure kenmotsu F^{s} map iff r = {s}", ok, f"harmonic map at r = {[r for r, v in verdicts.items() if v]}")


def test_kenmotsu_eta_wedge_biconditional(acceptance):
    # eta ^ F is a harmonic map iff sigma = C (t+K)^2
    verdicts = {r: _kenmotsu_map(r, "eta-wedge-F") for r in WARPS}
    ok = all(v == (r == 1.0) for r, v in verdicts.items())
    acceptance("structure kenmotsu eta^F map iff r = 1", ok, f"harmonic map at r = {[r for r, v in verdicts.items() if v]}")


# ---- oracle gates


def test_oracle_gates(acceptance, regression_run):
    res = [c for c in regression_run.results if c.check in ("oracle-covariant", "oracle-curvature")]
    models = {c.model for c in res}
    ok = (not regression_run.gate_failed and len(models) >= 5
          and all(c.max_residual < CURVATURE_TOL and c.verdict == "pass" for c in res))
    acceptance("oracle covariant/curvature gates < 1e-3", ok, f"{_fmt(res)} on {len(models)} models")


def test_monte_carlo_area(acceptance, regression_run):
    res = [c for c in regression_run.results if c.check == "oracle-mc"]
    acceptance("oracle Monte-Carlo within 3 sigma", bool(res) and all(c.verdict == "pass" for c in res), _fmt(res))


# ---- determinism


def test_determinism(acceptance):
    spec = RunSpec(("sasakian-s5", "nk-s6", "hopf-lck:2", "kenmotsu:2,1,1"), config=CheckConfig(), regression=True)
    a, b = (run(spec).to_dict() for _ in range(2))
    a.pop("timestamp"), b.pop("timestamp")
    same = json.dumps(a) == json.dumps(b)
    acceptance("determinism identical JSON apart from timestamp", same, f"{a['summary']['checks']} checks compared")
