"""Execution of catalog expectations and assembly of check reports.

Each catalog ``Expectation`` names a check, the fields it acts on and its
targets.  A check turns sample points into per-point residuals and a
tolerance; the verdict is ``pass`` iff the largest residual is below the
tolerance.  The outcome compares the verdict with the expectation:

* ``ok``: verdict as expected (a negative control must also stay clear of
  the tolerance: smallest residual above ten times it);
* ``known-discrepancy``: verdict differs and the expectation records why;
* ``regression``: verdict differs with no recorded reason.

Reports serialise to the ``harmonia/1`` JSON schema.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from . import fd, oracle
from .harmonic import (
    CheckConfig,
    PointSet,
    bending_from_jet,
    contract_template,
    covector_norm,
    dir_inner,
    eigen_residual_from_jet,
    finner,
    fit_lee_form,
    fit_scalar,
    flat_wedge_template,
    form_norm,
    laplacian_from_jet,
    lck_defect_from_points,
    lcp_from_jet,
    map_residual_from_jet,
    pair_fit_from_jets,
    pairing_div_form,
    pairing_from_jet,
    rayleigh_from_jet,
    section_residual_from_jet,
    spectrum_from_jet,
    tension_from_jet,
    variation_from_jets,
)
from .manifold import (
    FormField,
    Geometry,
    coderivative_from_nabla,
    curvature_action,
    exterior_from_nabla,
    orthonormal_frame,
)
from .models import CatalogModel, Expectation, build, list_models
from .multilinear import contract_coeffs, from_tensor, hodge_coeffs, to_tensor, wedge_coeffs

__all__ = [
    "CHECKS",
    "SCHEMA",
    "CheckReport",
    "CheckResult",
    "RunResult",
    "RunSpec",
    "SelectionError",
    "check_names",
    "run",
    "run_expectations",
    "select",
]

SCHEMA = "harmonia/1"
TWO_ROUTE_TOL = 1e-3
PAIR_TOL = 1e-3
MC_SAMPLES = 2000
CONTROL_MARGIN = 10.0


class SelectionError(ValueError):
    """Unknown model, field or check name."""


# --------------------------------------------------------------------------
# results and reports


def _summary(v: Any) -> Any:
    """JSON-friendly form of a fitted constant (arrays become mean/min/max)."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.ndarray):
        if v.size == 1:
            return _summary(v.reshape(-1)[0])
        if v.size == 0:
            return []
        return {"mean": _summary(v.mean()), "min": _summary(v.min()), "max": _summary(v.max())}
    if isinstance(v, (list, tuple)):
        return [_summary(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _summary(x) for k, x in v.items()}
    return v


@dataclass
class CheckResult:
    """One expectation evaluated at the sample points."""

    name: str
    check: str
    model: str
    fields: tuple[str, ...]
    origin: str
    expect: str
    discrepancy: str
    residuals: np.ndarray
    tolerance: float
    fitted: dict = field(default_factory=dict)
    conditional: bool = False
    error: str = ""

    @property
    def points(self) -> int:
        return int(self.residuals.size)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def min_residual(self) -> float:
        return float(np.min(self.residuals)) if self.residuals.size else 0.0

    @property
    def verdict(self) -> str:
        if self.error:
            return "error"
        if not np.all(np.isfinite(self.residuals)):
            return "fail"
        return "pass" if self.max_residual < self.tolerance else "fail"

    @property
    def outcome(self) -> str:
        v = self.verdict
        if v == "error":
            return "regression"
        if v == self.expect:
            if self.expect == "fail" and not self.min_residual > CONTROL_MARGIN * self.tolerance:
                return "regression"
            return "ok"
        return "known-discrepancy" if self.discrepancy else "regression"

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "check": self.check,
            "fields": list(self.fields),
            "origin": self.origin,
            "points": self.points,
            "max_residual": _summary(self.max_residual),
            "min_residual": _summary(self.min_residual),
            "tolerance": self.tolerance,
            "fitted": _summary(self.fitted),
            "verdict": self.verdict,
            "expect": self.expect,
            "outcome": self.outcome,
        }
        if self.conditional:
            out["conditional"] = True
        if self.discrepancy:
            out["discrepancy"] = self.discrepancy
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class CheckReport:
    """Results for one (model, field) pair; checks without fields use field ``"-"``."""

    model: str
    field: str
    checks: list[CheckResult]

    def to_dict(self) -> dict:
        return {"model": self.model, "field": self.field, "checks": [c.to_dict() for c in self.checks]}


# --------------------------------------------------------------------------
# evaluation context


@dataclass
class Outcome:
    residuals: np.ndarray
    tolerance: float
    fitted: dict = field(default_factory=dict)
    conditional: bool = False


class Context:
    """Shared sample points, jets and fitted constants for one model."""

    def __init__(self, cm: CatalogModel, config: CheckConfig):
        self.cm = cm
        self.model = cm.model
        self.config = config
        self.points = PointSet(cm.model, config.sample_count, config.seed)
        self._consts: dict | None = None
        self._probes: dict[int, FormField] = {}
        self._geo: Geometry | None = None
        self.cache: dict = {}

    @property
    def P(self) -> int:
        return len(self.points)

    def jet(self, name: str, order: int = 2):
        return self.points.jet(self.cm.field(name), order)

    @property
    def consts(self) -> dict:
        if self._consts is None:
            fit = self.cm.aux.get("fit")
            self._consts = dict(fit(self.cm, self.points)) if fit else {}
        return self._consts

    def value(self, v):
        if callable(v):
            v = v(self.consts)
        return v if isinstance(v, str) or v is None else np.asarray(v, dtype=float)

    def tol(self, exp: Expectation, default: str) -> float:
        kind = exp.target.get("tol", default)
        return {"alg": self.config.tol_alg, "d1": self.config.tol_d1, "d2": self.config.tol_d2}[kind]

    def geometry(self) -> Geometry:
        """Order-two metric data at all sample points, in sample order."""
        if self._geo is None:
            geos = {c: self.points.context(c, 2).geometry() for c in self.points.charts()}
            P = self.P
            arrays = {}
            for k in ("g", "g_inv", "dg", "gamma", "ddg", "dgamma", "riemann"):
                first = getattr(next(iter(geos.values())), k)
                if first is None:
                    arrays[k] = None
                    continue
                out = np.empty((P,) + first.shape[1:])
                for c, geo in geos.items():
                    out[self.points.ids == c] = getattr(geo, k)
                arrays[k] = out
            self._geo = Geometry(**arrays)
        return self._geo

    def probe(self, degree: int) -> FormField:
        """Random polynomial form field of the given degree (chart coefficients)."""
        if degree not in self._probes:
            n = self.model.n
            C = math.comb(n, degree)
            rng = np.random.default_rng([self.config.seed, 7919, degree])
            c0 = rng.normal(size=C)
            c1 = rng.normal(size=(n, C)) / self.model.scale
            c2 = rng.normal(size=(n, C)) / self.model.scale**2

            def fn(chart, u, c0=c0, c1=c1, c2=c2):
                return c0 + u @ c1 + (u * u) @ c2

            self._probes[degree] = FormField(self.model, f"probe{degree}", degree, fn,
                                             constant_length=False, description="random polynomial field")
        return self._probes[degree]


def _per_point(x, P: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(x, dtype=float), (P,)).astype(float)


def _by_chart(ctx: Context):
    for c in ctx.points.charts():
        yield c, ctx.points.ids == c


def _rel(diff: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return diff / np.where(ref > 0, ref, 1.0)


# --------------------------------------------------------------------------
# structural property checks


def _constant_length(ctx: Context, exp: Expectation) -> Outcome:
    r2 = ctx.jet(exp.fields[0], 1).norm2()
    mean = float(r2.mean())
    return Outcome(np.abs(r2 - mean) / abs(mean), ctx.tol(exp, "d1"), {"norm2": mean})


def _orthogonality(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 1)
    alpha = finner(jet, jet.nabla, np.broadcast_to(jet.sigma[:, None], jet.nabla.shape))
    return Outcome(covector_norm(jet, alpha) / jet.norm2(), ctx.tol(exp, "d1"))


def _energy_identity(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 2)
    lhs = finner(jet, laplacian_from_jet(jet), jet.sigma)
    rhs = dir_inner(jet, jet.nabla, jet.nabla)
    return Outcome(np.abs(lhs - rhs) / jet.norm2(), ctx.tol(exp, "d2"), {"nabla_norm2": rhs})


def _metric_compat(ctx: Context, exp: Expectation) -> Outcome:
    """``d<sigma, phi> = <nabla sigma, phi> + <sigma, nabla phi>`` for a random ``phi``."""
    sig = ctx.cm.field(exp.fields[0])
    phi = ctx.probe(sig.degree)
    js, jp = ctx.points.jet(sig, 1), ctx.points.jet(phi, 1)
    rhs = (finner(js, js.nabla, np.broadcast_to(jp.sigma[:, None], js.nabla.shape))
           + finner(js, np.broadcast_to(js.sigma[:, None], jp.nabla.shape), jp.nabla))
    lhs = np.empty_like(rhs)
    for c, mask in _by_chart(ctx):
        os_, st, h = ctx.points.outer_jet(sig, c)
        op, _, _ = ctx.points.outer_jet(phi, c)
        s = finner(os_, os_.sigma, op.sigma).reshape(int(mask.sum()), st.size)
        _, ds = fd.apply_stencil(s, st, h, 1)
        lhs[mask] = ds
    scale = np.sqrt(js.norm2() * jp.norm2())
    return Outcome(np.abs(lhs - rhs).max(axis=1) / scale, ctx.tol(exp, "d2"))


def _self_adjoint(ctx: Context, exp: Expectation) -> Outcome:
    """``<L sigma, phi> - <nabla sigma, nabla phi> = -div((nabla sigma)^t phi)``."""
    sig = ctx.cm.field(exp.fields[0])
    phi = ctx.probe(sig.degree)
    js, jp = ctx.points.jet(sig, 2), ctx.points.jet(phi, 2)
    a = finner(js, laplacian_from_jet(js), jp.sigma)
    b = dir_inner(js, js.nabla, jp.nabla)
    div = np.empty(ctx.P)
    n = ctx.model.n
    for c, mask in _by_chart(ctx):
        os_, st, h = ctx.points.outer_jet(sig, c)
        op, _, _ = ctx.points.outer_jet(phi, c)
        P = int(mask.sum())
        alpha = finner(os_, os_.nabla, np.broadcast_to(op.sigma[:, None], os_.nabla.shape))  # (P S, n)
        g = os_.geo.g.reshape(P, st.size, n, n)
        g_inv = os_.geo.g_inv.reshape(P, st.size, n, n)
        vol = np.sqrt(np.linalg.det(g))
        W = vol[..., None] * np.einsum("pskl,psl->psk", g_inv, alpha.reshape(P, st.size, n))
        _, dW = fd.apply_stencil(W, st, h, 1)
        div[mask] = np.einsum("pkk->p", dW) / vol[:, st.center]
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.sqrt(js.norm2() * jp.norm2()))
    return Outcome(np.abs(a - b + div) / scale, ctx.tol(exp, "d2"))


def _ricci_identity(ctx: Context, exp: Expectation) -> Outcome:
    """``nabla^2_{a,b} - nabla^2_{b,a} = -R_{a,b} sigma`` with the stored curvature sign."""
    jet = ctx.jet(exp.fields[0], 2)
    comm = jet.nabla2 - np.swapaxes(jet.nabla2, 1, 2)
    Rs = curvature_action(jet.geo.riemann, jet.geo.g_inv, jet.sigma, jet.p)
    diff = np.abs(comm + Rs).reshape(ctx.P, -1).max(axis=1)
    scale = np.maximum(np.abs(Rs).reshape(ctx.P, -1).max(axis=1), np.abs(jet.sigma).max(axis=1))
    return Outcome(diff / scale, ctx.tol(exp, "d2"))


def _two_route(ctx: Context, exp: Expectation) -> Outcome:
    sig = ctx.cm.field(exp.fields[0])
    jet = ctx.jet(exp.fields[0], 2)
    R1 = pairing_from_jet(jet)
    R2 = pairing_div_form(ctx.points, sig)
    res = covector_norm(jet, R1 - R2) / jet.norm2()
    pre = section_residual_from_jet(jet) < ctx.config.tol_d2
    # the divergence form is only claimed for harmonic sections
    res = np.where(pre, res, 0.0)
    return Outcome(res, TWO_ROUTE_TOL, {"precondition_points": int(pre.sum())}, conditional=True)


# --------------------------------------------------------------------------
# harmonic sections and maps


def _rough_laplacian(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 2)
    ray = rayleigh_from_jet(jet)
    lam = ctx.value(exp.target.get("eigenvalue"))
    if lam is None:
        lam = np.full(ctx.P, ray.mean())
    return Outcome(eigen_residual_from_jet(jet, lam), ctx.tol(exp, "d2"), {"eigenvalue": lam, "rayleigh": ray})


def _harmonic_section(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 2)
    return Outcome(section_residual_from_jet(jet), ctx.tol(exp, "d2"), {"rayleigh": rayleigh_from_jet(jet)})


def _harmonic_map(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 2)
    sec = section_residual_from_jet(jet)
    mp = map_residual_from_jet(jet)
    return Outcome(np.maximum(sec, mp), ctx.tol(exp, "d2"), {"section": sec, "pairing": mp})


def _bending(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 1)
    dens = bending_from_jet(jet)
    target = ctx.value(exp.target.get("density"))
    if target is None:
        return Outcome(np.zeros(ctx.P), ctx.tol(exp, "d1"), {"density": dens})
    scale = np.maximum(np.abs(target), 1.0)
    return Outcome(np.abs(dens - target) / scale, ctx.tol(exp, "d1"), {"density": dens})


def _tension(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 2)
    t = tension_from_jet(jet)
    r2 = jet.norm2()
    parts = []
    fitted = {}
    if exp.target.get("horizontal") == "zero":
        hor = np.einsum("pab,pb->pa", jet.geo.g, t.horizontal)
        parts.append(covector_norm(jet, hor) / r2)
        fitted["horizontal"] = parts[-1]
    if exp.target.get("tangential") == "zero":
        parts.append(form_norm(jet, t.sphere_tangential) / np.sqrt(r2))
        fitted["tangential"] = parts[-1]
    vert = exp.target.get("vertical")
    if vert is not None:
        v = np.zeros(ctx.P) if vert == "zero" else _per_point(ctx.value(vert), ctx.P)
        resid = form_norm(jet, t.vertical - v[:, None] * jet.sigma) / np.sqrt(r2)
        parts.append(resid / np.where(np.abs(v) > 0, np.abs(v), 1.0))
        fitted["vertical"] = v
    if not parts:
        raise ValueError("tension check needs at least one component target")
    return Outcome(np.max(parts, axis=0), ctx.tol(exp, "d2"), fitted)


def _spectrum(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 1)
    k = spectrum_from_jet(jet)
    tol = ctx.tol(exp, "d1")
    fitted = {"k_min": k.min(axis=1), "k_max": k.max(axis=1)}
    if exp.target.get("equal"):
        mean = k.mean(axis=1)
        ref = np.abs(mean).max() or 1.0
        spread = (k.max(axis=1) - k.min(axis=1)) / ref
        drift = np.abs(mean - mean.mean()) / ref
        return Outcome(np.maximum(spread, drift), tol, fitted)
    vals = ctx.value(exp.target.get("values"))
    if vals is None:
        return Outcome(np.zeros(ctx.P), tol, fitted)
    vals = np.sort(np.broadcast_to(vals, k.shape), axis=1)
    ref = np.abs(vals).max(axis=1)
    return Outcome(np.abs(k - vals).max(axis=1) / np.where(ref > 0, ref, 1.0), tol, fitted)


def _variation(ctx: Context, exp: Expectation) -> Outcome:
    sj, vj = ctx.jet(exp.fields[0], 2), ctx.jet(exp.fields[1], 2)
    first, hess = variation_from_jets(sj, vj)
    parts = []
    if exp.target.get("first") == "zero":
        L = laplacian_from_jet(sj)
        scale = np.maximum(form_norm(sj, L), np.sqrt(sj.norm2())) * np.sqrt(np.maximum(vj.norm2(), 1e-300))
        parts.append(np.abs(first) / scale)
    mode = exp.target.get("hess", "record")
    if mode == "nonneg":
        scale = np.maximum(dir_inner(vj, vj.nabla, vj.nabla), vj.norm2())
        parts.append(np.maximum(-hess, 0.0) / np.where(scale > 0, scale, 1.0))
    res = np.max(parts, axis=0) if parts else np.zeros(ctx.P)
    return Outcome(res, ctx.tol(exp, "d2"), {"first": first, "hess": hess,
                                             "hess_negative_points": int((hess < 0).sum())})


def _pair_thm(ctx: Context, exp: Expectation) -> Outcome:
    psi, phi = ctx.jet(exp.fields[0], 2), ctx.jet(exp.fields[1], 2)
    hyp = pair_fit_from_jets(psi, phi)
    parts = [hyp.residual_psi, hyp.residual_phi]
    for key, got in (("lam", hyp.lam), ("mu", hyp.mu)):
        want = ctx.value(exp.target.get(key))
        if want is not None:
            want = float(np.mean(want))
            parts.append(abs(got - want) / abs(want))
    pred_psi, pred_phi = hyp.predicted
    parts += [abs(pred_psi - hyp.measured_psi) / abs(pred_psi), abs(pred_phi - hyp.measured_phi) / abs(pred_phi)]
    # norm identities from the proof: |nabla Psi|^2 = -(n-p) lam mu |Psi|^2 and likewise for Phi
    npsi = dir_inner(psi, psi.nabla, psi.nabla) / psi.norm2()
    nphi = dir_inner(phi, phi.nabla, phi.nabla) / phi.norm2()
    res = np.maximum(np.abs(npsi - pred_psi) / abs(pred_psi), np.abs(nphi - pred_phi) / abs(pred_phi))
    res = np.maximum(res, max(parts))
    fitted = {"lam": hyp.lam, "mu": hyp.mu, "residual_psi": hyp.residual_psi, "residual_phi": hyp.residual_phi,
              "predicted": list(hyp.predicted), "measured": [hyp.measured_psi, hyp.measured_phi]}
    return Outcome(res, PAIR_TOL, fitted)


def _curvature(ctx: Context, exp: Expectation) -> Outcome:
    geo = ctx.geometry()
    R, g = geo.riemann, geo.g
    tol = ctx.tol(exp, "d2")
    parts, fitted = [], {}
    flat = R.reshape(ctx.P, -1)
    if "sectional" in exp.target:
        K = float(exp.target["sectional"])
        model = K * (np.einsum("pik,pjl->pijkl", g, g) - np.einsum("pil,pjk->pijkl", g, g))
        ref = max(abs(K), 1.0) * np.abs(g).reshape(ctx.P, -1).max(axis=1) ** 2
        parts.append(np.abs(R - model).reshape(ctx.P, -1).max(axis=1) / ref)
    if "einstein" in exp.target:
        rho = float(exp.target["einstein"])
        ric = np.einsum("pil,pijlk->pjk", geo.g_inv, R)
        ref = max(abs(rho), 1.0) * np.abs(g).reshape(ctx.P, -1).max(axis=1)
        parts.append(np.abs(ric - rho * g).reshape(ctx.P, -1).max(axis=1) / ref)
        fitted["rho"] = np.einsum("pjk,pjk->p", geo.g_inv, ric) / ctx.model.n
    if exp.target.get("closed_form") == "cylinder":
        closed = oracle.cone_curvature(ctx.points.points)
        ref = np.abs(closed).reshape(ctx.P, -1).max(axis=1)
        parts.append(np.abs(R - closed).reshape(ctx.P, -1).max(axis=1) / ref)
    if not parts:
        raise ValueError("curvature check needs sectional, einstein or closed_form")
    fitted["max_abs_riemann"] = np.abs(flat).max(axis=1)
    return Outcome(np.max(parts, axis=0), tol, fitted)


def _einstein_k(ctx: Context, exp: Expectation) -> Outcome:
    rho = ctx.consts.get("rho")
    geo = ctx.geometry()
    rho_pts = np.einsum("pij,pij->p", geo.g_inv, np.einsum("pil,pijlk->pjk", geo.g_inv, geo.riemann)) / ctx.model.n
    k = ctx.consts["k"]
    want = float(exp.target["relation"]) * k * k
    return Outcome(np.abs(rho_pts - want) / abs(want), ctx.tol(exp, "d2"),
                   {"k": k, "rho": rho if rho is not None else rho_pts, "predicted_rho": want})


def _pairing_value(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 2)
    eta = ctx.jet("eta", 2).sigma
    R = pairing_from_jet(jet)
    v = _per_point(ctx.value(exp.target["value"]), ctx.P)
    res = covector_norm(jet, R - v[:, None] * eta) / jet.norm2()
    measured = np.einsum("pa,pab,pb->p", R, jet.geo.g_inv, eta)
    return Outcome(res, ctx.tol(exp, "d2"), {"value": v, "measured": measured})


# --------------------------------------------------------------------------
# locally conformal parallel forms


def _lcp(ctx: Context, exp: Expectation) -> Outcome:
    rec = lcp_from_jet(ctx.jet(exp.fields[0], 2))
    res = np.maximum(np.maximum(rec.residual_lcp, rec.residual_dstar), rec.residual_lap)
    jet = ctx.jet(exp.fields[0], 2)
    t2 = np.einsum("pa,pab,pb->p", rec.theta, jet.geo.g_inv, rec.theta)
    return Outcome(res, ctx.tol(exp, "d2"), {"theta2": t2, "residual_lcp": rec.residual_lcp,
                                             "residual_dstar": rec.residual_dstar, "residual_lap": rec.residual_lap})


def _lcp_eigen(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 2)
    lam = _per_point(ctx.value(exp.target["eigenvalue"]), ctx.P)
    return Outcome(eigen_residual_from_jet(jet, lam), ctx.tol(exp, "d2"),
                   {"eigenvalue": lam, "rayleigh": rayleigh_from_jet(jet)})


def _lee_form(ctx: Context, exp: Expectation) -> Outcome:
    """Lee form ``-(1/7) *(*d Phi ^ Phi)`` against ``p`` times the lcp Lee form."""
    jet = ctx.jet(exp.fields[0], 1)
    n, p = jet.n, jet.p
    if exp.target.get("formula") != "spin7" or (n, p) != (8, 4):
        raise ValueError("lee-form supports the Spin(7) formula on 8-manifolds")
    theta_lcp, _ = fit_lee_form(jet)
    g = jet.geo.g
    dPhi = exterior_from_nabla(jet.nabla, n, p)
    w = wedge_coeffs(hodge_coeffs(dPhi, g, n, p + 1), jet.sigma, n, n - p - 1, p)
    theta = -hodge_coeffs(w, g, n, n - 1) / 7.0
    want = p * theta_lcp
    res = covector_norm(jet, theta - want) / covector_norm(jet, theta)
    ratio = np.einsum("pa,pab,pb->p", theta, jet.geo.g_inv, theta_lcp) / np.einsum(
        "pa,pab,pb->p", theta_lcp, jet.geo.g_inv, theta_lcp)
    return Outcome(res, ctx.tol(exp, "d2"), {"ratio": ratio})


def _theta_jet(ctx: Context, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Fitted Lee form and its covariant derivative ``(P, n)``, ``(P, a, b)``."""
    key = ("theta", name)
    if key not in ctx.cache:
        n = ctx.model.n
        theta = np.empty((ctx.P, n))
        nabla = np.empty((ctx.P, n, n))
        sig = ctx.cm.field(name)
        for c, mask in _by_chart(ctx):
            ojet, st, h = ctx.points.outer_jet(sig, c)
            P = int(mask.sum())
            th, _ = fit_lee_form(ojet)
            t0, dth = fd.apply_stencil(th.reshape(P, st.size, n), st, h, 1)
            gamma = ojet.geo.gamma.reshape(P, st.size, n, n, n)[:, st.center]
            theta[mask] = t0
            nabla[mask] = dth - np.einsum("pcab,pc->pab", gamma, t0)
        ctx.cache[key] = (theta, nabla)
    return ctx.cache[key]


def _theta_parallel(ctx: Context, exp: Expectation) -> Outcome:
    theta, nabla = _theta_jet(ctx, exp.fields[0])
    g_inv = ctx.geometry().g_inv
    t2 = np.einsum("pa,pab,pb->p", theta, g_inv, theta)
    nn = np.sqrt(np.maximum(np.einsum("pab,pac,pbd,pcd->p", nabla, g_inv, g_inv, nabla), 0.0))
    return Outcome(nn / t2, ctx.tol(exp, "d2"), {"theta2": t2})


def _lck_terms(ctx: Context, name: str, J) -> dict:
    key = ("lck", name)
    if key not in ctx.cache:
        ctx.cache[key] = lck_defect_from_points(ctx.points, ctx.cm.field(name), J)
    return ctx.cache[key]


def _identity_J(chart: int, u: np.ndarray) -> np.ndarray:
    n = u.shape[-1]
    return np.broadcast_to(np.eye(n), u.shape[:-1] + (n, n))


def _lck_defect(ctx: Context, exp: Expectation) -> Outcome:
    name = exp.fields[0]
    variant = exp.target.get("variant", "kaehler")
    jet = ctx.jet(name, 2)
    if variant == "kaehler":
        data = _lck_terms(ctx, name, ctx.cm.aux["J"])
        defect = data["defect"]
    elif variant == "spin7":
        # (d* theta) theta - 3 d|theta|^2 is homogeneous, so the lcp Lee form may stand in for the (c2) one
        data = _lck_terms(ctx, name, _identity_J)
        defect = data["terms"][:, 1] - 3 * data["terms"][:, 0]
    else:
        raise ValueError(f"unknown lck-defect variant {variant!r}")
    theta, _ = _theta_jet(ctx, name)
    t2 = np.einsum("pa,pab,pb->p", theta, jet.geo.g_inv, theta)
    return Outcome(covector_norm(jet, defect) / np.maximum(t2, 1e-300) ** 1.5, ctx.tol(exp, "d2"),
                   {"theta2": t2})


def _lck_ratio(ctx: Context, exp: Expectation) -> Outcome:
    """Curvature pairing of ``omega^r`` against the stated or the computed lcK formula."""
    name = exp.fields[0]
    jet = ctx.jet(name, 2)
    data = _lck_terms(ctx, name, ctx.cm.aux["J"])
    T = data["terms"]
    R = pairing_from_jet(jet)
    ncx = ctx.model.n // 2
    if exp.target.get("formula") == "stated":
        pred = -data["prefactor"] * data["defect"]
        fitted = {"prefactor": data["prefactor"]}
    else:
        r = jet.p // 2
        C = 2 * r * math.factorial(r) * math.factorial(2 * r) * math.factorial(ncx - 2) / math.factorial(ncx - r - 1)
        pred = C * (-(ncx - 1.5) * T[:, 0] + T[:, 1] - T[:, 3])
        fitted = {"C": C}
    scale = np.maximum(covector_norm(jet, R), covector_norm(jet, pred))
    res = covector_norm(jet, R - pred) / np.maximum(scale, 1e-300)
    fitted["pairing_norm"] = covector_norm(jet, R)
    return Outcome(res, ctx.tol(exp, "d2"), fitted)


# --------------------------------------------------------------------------
# G-structure identities


def _on_frame(jet) -> np.ndarray:
    """``E[p, a, i]``: coordinate components of an orthonormal frame."""
    return orthonormal_frame(jet.geo.g)


def _on_one(E, alpha):
    return np.einsum("pa,pai->pi", alpha, E)


def _on_two(E, coeffs, n):
    return np.einsum("pab,pai,pbj->pij", to_tensor(coeffs, n, 2), E, E)


def _structure_norm(ctx: Context, exp: Expectation) -> Outcome:
    r2 = ctx.jet(exp.fields[0], 1).norm2()
    v = float(exp.target["value"])
    return Outcome(np.abs(r2 - v) / abs(v), ctx.tol(exp, "alg"), {"norm2": r2})


def _structure_vanishes(ctx: Context, exp: Expectation) -> Outcome:
    jet = ctx.jet(exp.fields[0], 1)
    return Outcome(np.sqrt(jet.norm2()), ctx.tol(exp, "alg"))


def _d_omega(ctx: Context, exp: Expectation) -> Outcome:
    om, ps = ctx.jet(exp.fields[0], 1), ctx.jet(exp.fields[1], 1)
    w = float(ctx.consts["w"])
    d = exterior_from_nabla(om.nabla, om.n, om.p)
    want = 3 * w * ps.sigma
    return Outcome(form_norm(om, d - want, 3) / form_norm(om, want, 3), ctx.tol(exp, "d2"), {"w": w})


def _type_30(ctx: Context, exp: Expectation) -> Outcome:
    """``nabla omega`` is totally skew (nearly Kaehler condition)."""
    jet = ctx.jet(exp.fields[0], 1)
    n = jet.n
    T = np.stack([to_tensor(jet.nabla[:, a], n, 2) for a in range(n)], axis=1)  # (P, a, b, c)
    sym = T + np.swapaxes(T, 1, 2)
    res = np.abs(sym).reshape(ctx.P, -1).max(axis=1) / np.abs(T).reshape(ctx.P, -1).max(axis=1)
    return Outcome(res, ctx.tol(exp, "d1"))


def _hodge(ctx: Context, exp: Expectation) -> Outcome:
    """``* phi = star-phi`` with the orientation induced by the outward normal."""
    ph, sp = ctx.jet(exp.fields[0], 1), ctx.jet(exp.fields[1], 1)
    n = ph.n
    eps = np.empty(ctx.P)
    for c, mask in _by_chart(ctx):
        x, J = ctx.model.jacobian(c, ctx.points.points[mask])
        eps[mask] = np.sign(np.linalg.det(np.concatenate([x[:, :, None], J], axis=2)))
    star = eps[:, None] * hodge_coeffs(ph.sigma, ph.geo.g, n, ph.p)
    return Outcome(form_norm(sp, star - sp.sigma) / form_norm(sp, sp.sigma), ctx.tol(exp, "d1"))


def _nabla_fit(ctx: Context, exp: Expectation, template: str) -> Outcome:
    a, b = ctx.jet(exp.fields[0], 1), ctx.jet(exp.fields[1], 1)
    if template == "contract":
        T = contract_template(b, b.sigma, b.p)
    else:
        T = flat_wedge_template(b, b.sigma, b.p)
    c, res = fit_scalar(a, a.nabla, T, a.p)
    return Outcome(res, ctx.tol(exp, "d1"), {"c": c})


def _dstar_F(ctx: Context, exp: Expectation) -> Outcome:
    F, eta = ctx.jet(exp.fields[0], 1), ctx.jet("eta", 1)
    ds = coderivative_from_nabla(F.nabla, F.geo.g_inv, F.n, F.p)
    v = _per_point(ctx.value(exp.target["value"]), ctx.P)
    res = covector_norm(F, ds - v[:, None] * eta.sigma) / np.abs(v)
    measured = np.einsum("pa,pab,pb->p", ds, F.geo.g_inv, eta.sigma)
    return Outcome(res, ctx.tol(exp, "d1"), {"value": v, "measured": measured})


def _three_frames(ctx: Context):
    """Orthonormal-frame components ``(z_i, f_i)`` of the 3-contact structure and ``nabla eta_i``."""
    if "three" not in ctx.cache:
        n = ctx.model.n
        etas = [ctx.jet(f"eta{i + 1}", 1) for i in range(3)]
        Fs = [ctx.jet(f"F{i + 1}", 1) for i in range(3)]
        E = _on_frame(etas[0])
        z = [_on_one(E, j.sigma) for j in etas]
        f = [_on_two(E, j.sigma, n) for j in Fs]
        N = [np.einsum("pab,pai,pbj->pij", j.nabla, E, E) for j in etas]  # (nabla_{e_i} eta)(e_j)
        ctx.cache["three"] = (z, f, N)
    return ctx.cache["three"]


_CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


def _three_contact(ctx: Context, exp: Expectation) -> Outcome:
    """``phi_i zeta_j = zeta_k``, ``phi_j zeta_i = -zeta_k``, ``eta_i o phi_j = eta_k``,
    ``phi_i phi_j - eta_j (x) zeta_i = phi_k``, ``phi_i^2 = -I + eta_i (x) zeta_i``, ``eta_i(zeta_j) = delta_ij``.

    ``F_i(X, Y) = <X, phi_i Y>``.
    """
    z, f, _ = _three_frames(ctx)
    n = ctx.model.n
    eye = np.eye(n)
    parts = []
    for i, j, k in _CYCLIC:
        parts.append(np.abs(np.einsum("pab,pb->pa", f[i], z[j]) - z[k]).max(axis=1))
        parts.append(np.abs(np.einsum("pab,pb->pa", f[j], z[i]) + z[k]).max(axis=1))
        parts.append(np.abs(np.einsum("pa,pab->pb", z[i], f[j]) - z[k]).max(axis=1))
        M = np.einsum("pab,pbc->pac", f[i], f[j]) - np.einsum("pa,pb->pab", z[i], z[j]) - f[k]
        parts.append(np.abs(M).reshape(ctx.P, -1).max(axis=1))
        sq = np.einsum("pab,pbc->pac", f[i], f[i]) - (-eye + np.einsum("pa,pb->pab", z[i], z[i]))
        parts.append(np.abs(sq).reshape(ctx.P, -1).max(axis=1))
    for i in range(3):
        for j in range(3):
            parts.append(np.abs(np.einsum("pa,pa->p", z[i], z[j]) - (i == j)))
    return Outcome(np.max(parts, axis=0), ctx.tol(exp, "d1"))


def _equrem(ctx: Context, exp: Expectation) -> Outcome:
    """``sum_r e_r _| (e_r ^ eta_i) = 2(2n+1) eta_i`` and
    ``sum_r (e_r _| F_i) ^ (e_r _| F_j) = -2 F_k - eta_i ^ eta_j`` in an orthonormal frame."""
    z, f, _ = _three_frames(ctx)
    dim = ctx.model.n
    nq = (dim - 3) // 4
    eye = np.eye(dim)
    parts = []
    for i, j, k in _CYCLIC:
        first = sum(contract_coeffs(np.broadcast_to(eye[r], z[i].shape),
                                    wedge_coeffs(np.broadcast_to(eye[r], z[i].shape), z[i], dim, 1, 1), dim, 2)
                    for r in range(dim))
        parts.append(np.abs(first - 2 * (2 * nq + 1) * z[i]).max(axis=1))
        Fi, Fj, Fk = (from_tensor(f[x], dim, 2) for x in (i, j, k))
        second = sum(wedge_coeffs(contract_coeffs(np.broadcast_to(eye[r], z[i].shape), Fi, dim, 2),
                                  contract_coeffs(np.broadcast_to(eye[r], z[i].shape), Fj, dim, 2), dim, 1, 1)
                     for r in range(dim))
        want = -2 * Fk - wedge_coeffs(z[i], z[j], dim, 1, 1)
        parts.append(np.abs(second - want).max(axis=1))
    return Outcome(np.max(parts, axis=0), ctx.tol(exp, "d1"))


def _horizontal_basis(z: list[np.ndarray]) -> np.ndarray:
    """Orthonormal basis ``(P, 4n, dim)`` of the complement of the three ``zeta_i``."""
    Z = np.stack(z, axis=1)  # (P, 3, dim)
    dim = Z.shape[-1]
    proj = np.eye(dim) - np.einsum("pia,pib->pab", Z, Z)
    w, v = np.linalg.eigh(proj)
    return np.swapaxes(v[:, :, 3:], 1, 2)


def _escalprod(ctx: Context, exp: Expectation) -> Outcome:
    """``eta_j(nabla_{zeta_j} e_i) = <nabla_{e_i} zeta_j, e_i> = 0`` for horizontal ``e_i``.

    For a horizontal frame field ``eta_j(e_i) = 0``, so
    ``eta_j(nabla_{zeta_j} e_i) = -(nabla_{zeta_j} eta_j)(e_i)``.
    """
    z, _, N = _three_frames(ctx)
    H = _horizontal_basis(z)
    parts = []
    for j in range(3):
        scale = np.abs(N[j]).reshape(ctx.P, -1).max(axis=1)
        diag = np.einsum("pia,pab,pib->pi", H, N[j], H)
        along = np.einsum("pa,pab,pib->pi", z[j], N[j], H)
        parts.append(np.maximum(np.abs(diag).max(axis=1), np.abs(along).max(axis=1)) / scale)
    return Outcome(np.max(parts, axis=0), ctx.tol(exp, "d1"))


def _adapted_basis(z: list[np.ndarray], f: list[np.ndarray]) -> list[np.ndarray]:
    """Horizontal unit vectors ``e_s`` (``s = 1..n``) with ``{e_s, phi_i e_s}`` orthonormal."""
    H = _horizontal_basis(z)
    P, h, dim = H.shape
    chosen: list[np.ndarray] = []
    span = np.zeros((P, 0, dim))
    for _ in range(h // 4):
        e = np.empty((P, dim))
        for p in range(P):
            for cand in H[p]:
                v = cand - span[p].T @ (span[p] @ cand)
                if np.linalg.norm(v) > 0.5:
                    e[p] = v / np.linalg.norm(v)
                    break
        chosen.append(e)
        block = np.stack([e] + [np.einsum("pab,pb->pa", f[i], e) for i in range(3)], axis=1)
        span = np.concatenate([span, block], axis=1)
    return chosen


def _nabla_zeta(ctx: Context, exp: Expectation) -> Outcome:
    """Fit ``nabla zeta_i`` against the displayed adapted-frame expression.

    ``a sum_s (phi_i e_s^flat (x) e_s - e_s^flat (x) phi_i e_s + phi_j e_s^flat (x) phi_k e_s
    - phi_k e_s^flat (x) phi_j e_s) + a (eta_k (x) zeta_j - eta_j (x) zeta_k)``, read as
    ``X -> nabla_X zeta_i``.  ``jk_sign`` scales the two ``phi_j``/``phi_k`` terms.
    """
    z, f, N = _three_frames(ctx)
    es = _adapted_basis(z, f)
    sgn = float(exp.target.get("jk_sign", 1.0))
    parts, fitted = [], {}
    for i, j, k in _CYCLIC:
        T = np.einsum("pa,pb->pab", z[k], z[j]) - np.einsum("pa,pb->pab", z[j], z[k])
        for e in es:
            ph = [np.einsum("pab,pb->pa", f[x], e) for x in range(3)]
            T += (np.einsum("pa,pb->pab", ph[i], e) - np.einsum("pa,pb->pab", e, ph[i])
                  + sgn * (np.einsum("pa,pb->pab", ph[j], ph[k]) - np.einsum("pa,pb->pab", ph[k], ph[j])))
        # N[a, b] = <nabla_{e_a} zeta_i, e_b>
        c = float(np.sum(N[i] * T) / np.sum(T * T))
        r = np.sqrt(np.sum((N[i] - c * T) ** 2, axis=(1, 2))) / np.sqrt(np.sum(N[i] ** 2, axis=(1, 2)))
        parts.append(r)
        fitted[f"a{i + 1}"] = c
    return Outcome(np.max(parts, axis=0), ctx.tol(exp, "d2"), fitted)


def _nabla_eta(ctx: Context, exp: Expectation) -> Outcome:
    """``nabla eta = -b (g - eta (x) eta)`` (Kenmotsu)."""
    jet = ctx.jet(exp.fields[0], 1)
    b = _per_point(ctx.consts["b"], ctx.P)
    h = jet.geo.g - np.einsum("pa,pb->pab", jet.sigma, jet.sigma)
    want = -b[:, None, None] * h
    diff = jet.nabla - want
    nd = np.sqrt(np.einsum("pab,pac,pbd,pcd->p", diff, jet.geo.g_inv, jet.geo.g_inv, diff))
    nw = np.sqrt(np.einsum("pab,pac,pbd,pcd->p", want, jet.geo.g_inv, jet.geo.g_inv, want))
    return Outcome(nd / nw, ctx.tol(exp, "d1"), {"b": b})


def _dstar_eta(ctx: Context, exp: Expectation) -> Outcome:
    """``d* eta = 2 n b`` (Kenmotsu, ``dim = 2n + 1``)."""
    jet = ctx.jet(exp.fields[0], 1)
    b = _per_point(ctx.consts["b"], ctx.P)
    nh = (ctx.model.n - 1) // 2
    ds = coderivative_from_nabla(jet.nabla, jet.geo.g_inv, jet.n, 1)[:, 0]
    want = 2 * nh * b
    return Outcome(np.abs(ds - want) / np.abs(want), ctx.tol(exp, "d1"), {"dstar": ds})


def _nabla_F(ctx: Context, exp: Expectation) -> Outcome:
    out = _nabla_fit(ctx, exp, "wedge")
    out.fitted["a"] = -out.fitted.pop("c")
    return out


def _nabla_phi(ctx: Context, exp: Expectation) -> Outcome:
    out = _nabla_fit(ctx, exp, "contract")
    out.fitted["k"] = 4 * out.fitted.pop("c")
    return out


_STRUCTURE: dict[str, Callable[[Context, Expectation], Outcome]] = {
    "norm": _structure_norm,
    "vanishes": _structure_vanishes,
    "d-omega": _d_omega,
    "type-30": _type_30,
    "hodge": _hodge,
    "nabla-phi": _nabla_phi,
    "nabla-F": _nabla_F,
    "dstar-F": _dstar_F,
    "3-contact-relations": _three_contact,
    "equrem": _equrem,
    "escalprod": _escalprod,
    "nabla-zeta": _nabla_zeta,
    "nabla-eta": _nabla_eta,
    "dstar-eta": _dstar_eta,
}


def _structure(ctx: Context, exp: Expectation) -> Outcome:
    ident = exp.target.get("identity")
    if ident not in _STRUCTURE:
        raise ValueError(f"unknown structure identity {ident!r}")
    return _STRUCTURE[ident](ctx, exp)


# --------------------------------------------------------------------------
# oracle gates


def _oracle_covariant(ctx: Context, exp: Expectation) -> Outcome:
    sig = ctx.cm.field(exp.fields[0])
    res = np.empty(ctx.P)
    tol = oracle.COVARIANT_TOL
    for c, mask in _by_chart(ctx):
        for idx in np.flatnonzero(mask):
            rep = oracle.covariant_oracle(ctx.model, sig, ctx.points.points[idx], c)
            res[idx] = rep.discrepancy
            tol = rep.tolerance
    return Outcome(res, tol)


def _oracle_curvature(ctx: Context, exp: Expectation) -> Outcome:
    res = np.empty(ctx.P)
    tol = oracle.CURVATURE_TOL
    for c, mask in _by_chart(ctx):
        for idx in np.flatnonzero(mask):
            rep = oracle.curvature_oracle(ctx.model, ctx.points.points[idx], c)
            res[idx] = rep.discrepancy
            tol = rep.tolerance
    return Outcome(res, tol)


def _oracle_mc(ctx: Context, exp: Expectation) -> Outcome:
    kind = exp.target.get("integrand", "one")
    sig = ctx.cm.field(exp.fields[0]) if exp.fields else None
    rep = oracle.mc_report(ctx.model, float(exp.target["value"]), kind, sig, MC_SAMPLES, ctx.config.seed)
    return Outcome(np.array([rep.discrepancy]), rep.tolerance,
                   {"estimate": rep.route_a, "exact": rep.route_b, "stderr": rep.extra["stderr"],
                    "samples": MC_SAMPLES})


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class CheckSpec:
    fn: Callable[[Context, Expectation], Outcome]
    description: str
    generic: bool = False  # runnable on any constant-length field without targets


CHECKS: dict[str, CheckSpec] = {
    "constant-length": CheckSpec(_constant_length, "spread of |sigma|^2 across points", True),
    "orthogonality": CheckSpec(_orthogonality, "(nabla sigma)^t sigma = 0", True),
    "energy-identity": CheckSpec(_energy_identity, "<nabla* nabla sigma, sigma> = |nabla sigma|^2", True),
    "metric-compat": CheckSpec(_metric_compat, "d<sigma, phi> = <nabla sigma, phi> + <sigma, nabla phi>", True),
    "self-adjoint": CheckSpec(_self_adjoint, "<L sigma, phi> - <nabla sigma, nabla phi> = -div((nabla sigma)^t phi)",
                              True),
    "ricci-identity": CheckSpec(_ricci_identity, "antisymmetrised second derivative equals -R sigma", True),
    "two-route": CheckSpec(_two_route, "curvature pairing: curvature route vs divergence route", True),
    "rough-laplacian": CheckSpec(_rough_laplacian, "nabla* nabla sigma = lambda sigma", True),
    "harmonic-section": CheckSpec(_harmonic_section, "nabla* nabla sigma collinear with sigma", True),
    "harmonic-map": CheckSpec(_harmonic_map, "harmonic section with vanishing curvature pairing", True),
    "bending": CheckSpec(_bending, "bending density 1/2 |nabla sigma|^2", True),
    "tension": CheckSpec(_tension, "tension field components", True),
    "spectrum": CheckSpec(_spectrum, "eigenvalues of <nabla_X sigma, nabla_Y sigma> against g", True),
    "variation": CheckSpec(_variation, "first and second variation integrands"),
    "pair-thm": CheckSpec(_pair_thm, "fit of the (Psi, Phi) pair equations and predicted eigenvalues"),
    "curvature": CheckSpec(_curvature, "Riemann tensor against sectional, Einstein or closed-form targets"),
    "einstein-k": CheckSpec(_einstein_k, "Ricci constant against the fitted structure constant"),
    "pairing-value": CheckSpec(_pairing_value, "curvature pairing against a multiple of eta"),
    "structure": CheckSpec(_structure, "G-structure identities (norms, derivatives, frame relations)"),
    "lcp": CheckSpec(_lcp, "locally conformal parallel equation, coderivative and Laplacian formulas", True),
    "lcp-eigen": CheckSpec(_lcp_eigen, "rough-Laplacian eigenvalue in terms of the Lee form"),
    "lee-form": CheckSpec(_lee_form, "closed-form Lee form against the fitted one"),
    "lck-defect": CheckSpec(_lck_defect, "harmonic-map defect of the lcK or Spin(7) structure"),
    "lck-ratio": CheckSpec(_lck_ratio, "curvature pairing against the lcK pairing formula"),
    "theta-parallel": CheckSpec(_theta_parallel, "covariant derivative of the Lee form"),
    "oracle-covariant": CheckSpec(_oracle_covariant, "oracle: ambient-projection covariant derivative"),
    "oracle-curvature": CheckSpec(_oracle_curvature, "oracle: Gauss-equation or closed-form curvature"),
    "oracle-mc": CheckSpec(_oracle_mc, "oracle: Monte-Carlo integral on a round sphere"),
}

ORACLE_CHECKS = frozenset(k for k in CHECKS if k.startswith("oracle-"))


def check_names() -> list[str]:
    """All check names, in stable (sorted) order."""
    return sorted(CHECKS)


def evaluate(ctx: Context, exp: Expectation) -> CheckResult:
    """Run one expectation; exceptions become ``error`` verdicts."""
    base = dict(name=exp.key, check=exp.check, model=ctx.cm.id, fields=exp.fields, origin=exp.origin,
                expect=exp.expect, discrepancy=exp.discrepancy)
    try:
        out = CHECKS[exp.check].fn(ctx, exp)
    except Exception as err:  # noqa: BLE001 - reported, not raised
        return CheckResult(residuals=np.zeros(0), tolerance=0.0, error=f"{type(err).__name__}: {err}", **base)
    res = np.asarray(out.residuals, dtype=float).reshape(-1)
    return CheckResult(residuals=res, tolerance=float(out.tolerance), fitted=out.fitted,
                       conditional=out.conditional, **base)


def run_expectations(model_id: str, expectations: list[Expectation], config: CheckConfig) -> list[CheckResult]:
    """Evaluate expectations of one model on shared sample points."""
    ctx = Context(build(model_id), config)
    return [evaluate(ctx, e) for e in expectations]


# --------------------------------------------------------------------------
# selection and runs


@dataclass(frozen=True)
class RunSpec:
    """What to run: model patterns, optional field and check filters, configuration."""

    models: tuple[str, ...]
    fields: tuple[str, ...] | None = None
    checks: tuple[str, ...] | None = None
    config: CheckConfig = CheckConfig()
    regression: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.models:
            raise SelectionError("need at least one model")
        if self.checks is not None and not self.checks:
            raise SelectionError("need at least one check")
        if self.jobs < 1:
            raise SelectionError("jobs must be >= 1")


def _expand_models(patterns: tuple[str, ...]) -> list[str]:
    out: list[str] = []
    for pat in patterns:
        if any(ch in pat for ch in "*?["):
            hits = list_models(pat)
            if not hits:
                raise SelectionError(f"no catalog model matches {pat!r}")
        else:
            try:
                build(pat)
            except (KeyError, ValueError) as err:
                raise SelectionError(f"unknown model {pat!r}: {err}") from None
            hits = [pat]
        out += [h for h in hits if h not in out]
    return out


def _expectation(cm: CatalogModel, ref) -> Expectation:
    if isinstance(ref, int):
        return cm.suite[ref]
    check, field_name = ref
    return Expectation(check, (field_name,), "derived")


def select(spec: RunSpec) -> list[tuple[str, list]]:
    """Resolve a ``RunSpec`` into ``(model id, expectation refs)``; unknown names raise ``SelectionError``.

    Catalog expectations matching the filters are used as they are.  In
    survey mode a requested (field, check) pair without a catalog entry runs
    the generic form of the check; checks that need targets are rejected.
    """
    if spec.checks is not None:
        unknown = [c for c in spec.checks if c not in CHECKS]
        if unknown:
            raise SelectionError(f"unknown check(s) {', '.join(unknown)}; known: {', '.join(check_names())}")
    models = _expand_models(spec.models)
    if spec.fields is not None:
        known = set().union(*(build(m).fields for m in models))
        missing = [f for f in spec.fields if f not in known]
        if missing:
            raise SelectionError(f"unknown field(s) {', '.join(missing)} for {', '.join(models)}")
    plan = []
    for mid in models:
        cm = build(mid)
        refs: list = []
        for i, e in enumerate(cm.suite):
            if spec.checks is not None and e.check not in spec.checks:
                continue
            if spec.fields is not None and (not e.fields or e.fields[0] not in spec.fields):
                continue
            refs.append(i)
        if not spec.regression and spec.fields is not None and spec.checks is not None:
            for f in spec.fields:
                if f not in cm.fields:
                    continue
                for c in spec.checks:
                    if any(cm.suite[i].check == c and cm.suite[i].fields[0] == f for i in refs):
                        continue
                    if not CHECKS[c].generic:
                        raise SelectionError(f"check {c!r} needs catalog targets; {mid!r} has none for field {f!r}")
                    refs.append((c, f))
        if refs:
            plan.append((mid, refs))
    if not plan:
        raise SelectionError("selection is empty")
    return plan


def _task(args) -> list[tuple[int, CheckResult]]:
    """Worker: evaluate ``(model id, [(order, ref)], config)`` on one shared context."""
    mid, items, config = args
    cm = build(mid)
    ctx = Context(cm, config)
    return [(k, evaluate(ctx, _expectation(cm, ref))) for k, ref in items]


def _execute(tasks: list, jobs: int) -> dict[int, CheckResult]:
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            done = list(ex.map(_task, tasks))
    else:
        done = [_task(t) for t in tasks]
    return {k: r for part in done for k, r in part}


def _tasks(items: list[tuple[str, int, Any, str]], config: CheckConfig, jobs: int) -> list:
    """Group items by model (one task each), or by (model, field) when running in parallel."""
    groups: dict = {}
    for mid, k, ref, fld in items:
        key = (mid, fld) if jobs > 1 else (mid,)
        groups.setdefault(key, []).append((k, ref))
    return [(key[0], group, config) for key, group in groups.items()]


@dataclass
class RunResult:
    reports: list[CheckReport]
    exit_code: int
    gate_failed: bool = False
    wall_time: float = 0.0

    @property
    def results(self) -> list[CheckResult]:
        return [c for r in self.reports for c in r.checks]

    def summary(self) -> dict:
        out = {"checks": 0, "pass": 0, "fail": 0, "error": 0, "ok": 0, "known-discrepancy": 0, "regression": 0}
        for c in self.results:
            out["checks"] += 1
            out[c.verdict] += 1
            out[c.outcome] += 1
        out["gate_failed"] = self.gate_failed
        out["exit_code"] = self.exit_code
        return out

    def to_dict(self, created: str | None = None) -> dict:
        """Report document; ``timestamp`` is the only run-dependent part."""
        return {
            "schema": SCHEMA,
            "timestamp": {"created": created, "wall_time": round(self.wall_time, 3)},
            "reports": [r.to_dict() for r in self.reports],
            "summary": self.summary(),
        }


def _reports(results: list[CheckResult]) -> list[CheckReport]:
    reports: dict[tuple[str, str], CheckReport] = {}
    for r in results:
        key = (r.model, r.fields[0] if r.fields else "-")
        reports.setdefault(key, CheckReport(key[0], key[1], [])).checks.append(r)
    return list(reports.values())


def run(spec: RunSpec) -> RunResult:
    """Execute a spec: oracle gates first, then everything else.

    Exit codes: 3 when an oracle gate did not come out ``ok`` (nothing else
    runs); in regression mode 1 when any outcome is a regression, else 0; in
    survey mode 1 when a check raised, else 0.
    """
    t0 = time.perf_counter()
    plan = select(spec)
    items = []
    for mid, refs in plan:
        cm = build(mid)
        for ref in refs:
            e = _expectation(cm, ref)
            items.append((mid, len(items), ref, e.fields[0] if e.fields else "-", e.check in ORACLE_CHECKS))
    gates = [i[:4] for i in items if i[4]]
    rest = [i[:4] for i in items if not i[4]]
    done = _execute(_tasks(gates, spec.config, spec.jobs), spec.jobs) if gates else {}
    gate_failed = any(r.outcome != "ok" for r in done.values())
    if not gate_failed and rest:
        done.update(_execute(_tasks(rest, spec.config, spec.jobs), spec.jobs))
    results = [done[k] for k in sorted(done)]
    if gate_failed:
        code = 3
    elif spec.regression:
        code = 1 if any(r.outcome == "regression" for r in results) else 0
    else:
        code = 1 if any(r.verdict == "error" for r in results) else 0
    return RunResult(_reports(results), code, gate_failed, time.perf_counter() - t0)


def with_overrides(config: CheckConfig, **kw) -> CheckConfig:
    """Copy of ``config`` with the non-``None`` overrides applied."""
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
