"""Harmonic-section and harmonic-map analysis of form fields.

Everything here consumes ``FieldJet`` objects (value, covariant derivative and
second covariant derivative of a form field at a batch of points) and returns
pointwise quantities: bending density, rough Laplacian, the curvature-pairing
one-form ``R_sigma(X) = <R_{X, e_i} sigma, nabla_{e_i} sigma>`` computed two
independent ways, the spectrum of ``<nabla_X sigma, nabla_Y sigma>``, fitted
structure constants, locally conformal parallel (lcp) data, variation
integrands and tension components.

Single-point convenience wrappers take ``(model, field, u, chart=0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import fd
from .manifold import (
    H1,
    H2,
    FieldJet,
    FormField,
    ModelManifold,
    StencilContext,
    coderivative_from_nabla,
    curvature_action,
    field_jet,
    field_jet_from_context,
    orthonormal_frame,
)
from .multilinear import AlternatingForm, contract_coeffs, wedge_coeffs

__all__ = [
    "CheckConfig",
    "LcpRecord",
    "PairHypothesis",
    "Spectrum",
    "PointSet",
    "bending_density",
    "curvature_pairing",
    "curvature_pairing_div_form",
    "fit_scalar",
    "harmonic_map_residual",
    "harmonic_section_residual",
    "ki_spectrum",
    "lcp_check",
    "lck_harmonic_map_defect",
    "pair_fit",
    "rough_laplacian",
    "tension_components",
    "variation_integrands",
]


@dataclass(frozen=True)
class CheckConfig:
    """Tolerances, step sizes and sampling for a check run."""

    tol_alg: float = 1e-12
    tol_d1: float = 1e-6
    tol_d2: float = 1e-4
    h1: float = H1
    h2: float = H2
    sample_count: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.tol_alg, self.tol_d1, self.tol_d2, self.h1, self.h2) <= 0:
            raise ValueError("tolerances and steps must be positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


# --------------------------------------------------------------------------
# batched inner products


def _gp(jet: FieldJet, p: int) -> np.ndarray:
    return math.factorial(p) * jet.geo.compound_inv(p)


def finner(jet: FieldJet, a: np.ndarray, b: np.ndarray, p: int | None = None) -> np.ndarray:
    """Fibre inner product of ``(P, ..., C)`` stacks at the jet points."""
    p = jet.p if p is None else p
    if p == 0:
        return a[..., 0] * b[..., 0]
    G = _gp(jet, p)
    extra = a.ndim - 2
    Gb = G.reshape(G.shape[:1] + (1,) * extra + G.shape[1:])
    return np.einsum("...i,...ij,...j->...", a, Gb, b)


def dir_inner(jet: FieldJet, A: np.ndarray, B: np.ndarray, p: int | None = None) -> np.ndarray:
    """``g^{ab} <A_a, B_b>`` for direction-indexed stacks ``(P, n, C)``."""
    A_up = np.einsum("pab,pbI->paI", jet.geo.g_inv, A)
    return finner(jet, A_up, B, p).sum(axis=1)


def covector_norm(jet: FieldJet, alpha: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(np.einsum("pa,pab,pb->p", alpha, jet.geo.g_inv, alpha), 0.0))


def form_norm(jet: FieldJet, a: np.ndarray, p: int | None = None) -> np.ndarray:
    return np.sqrt(np.maximum(finner(jet, a, a, p), 0.0))


# --------------------------------------------------------------------------
# point sets with cached stencil contexts


class PointSet:
    """Sample points of a model with lazily built, cached stencil contexts.

    Jets are computed chart by chart and concatenated back into sample order.
    """

    def __init__(self, model: ModelManifold, count: int | None = None, seed: int = 0,
                 ids: np.ndarray | None = None, points: np.ndarray | None = None):
        self.model = model
        if points is None:
            if count is None:
                raise ValueError("need count or explicit points")
            ids, points = model.sample(count, seed)
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self.ids = np.zeros(len(points), dtype=int) if ids is None else np.asarray(ids, dtype=int)
        self.points = points
        self._ctx: dict = {}
        self._jets: dict = {}

    def __len__(self) -> int:
        return len(self.points)

    def charts(self) -> list[int]:
        return sorted(set(int(c) for c in self.ids))

    def context(self, chart: int, order: int) -> StencilContext:
        key = (chart, order)
        if key not in self._ctx:
            self._ctx[key] = StencilContext(self.model, chart, self.points[self.ids == chart], order)
        return self._ctx[key]

    def jet(self, sigma: FormField, order: int = 2) -> FieldJet:
        key = (sigma.name, id(sigma), order)
        if key not in self._jets:
            parts = [field_jet_from_context(self.context(c, order), sigma) for c in self.charts()]
            self._jets[key] = _concat_jets(parts, self.ids, self.charts())
        return self._jets[key]

    def outer_points(self, chart: int, h: float) -> tuple[np.ndarray, fd.Stencil]:
        st = fd.gradient_stencil(self.model.n)
        return fd.stencil_points(self.points[self.ids == chart], st, h), st

    def outer_context(self, chart: int) -> tuple[StencilContext, fd.Stencil, float]:
        """First-order contexts at every point of a gradient stencil around the samples."""
        key = ("outer", chart)
        h = H2 * self.model.scale
        if key not in self._ctx:
            pts, st = self.outer_points(chart, h)
            self._ctx[key] = (StencilContext(self.model, chart, pts.reshape(-1, self.model.n), 1), st, h)
        return self._ctx[key]

    def outer_jet(self, sigma: FormField, chart: int) -> tuple[FieldJet, fd.Stencil, float]:
        ctx, st, h = self.outer_context(chart)
        key = ("outer", sigma.name, id(sigma), chart)
        if key not in self._jets:
            self._jets[key] = field_jet_from_context(ctx, sigma)
        return self._jets[key], st, h


def _concat_jets(parts: Sequence[FieldJet], ids: np.ndarray, charts: list[int]) -> FieldJet:
    if len(parts) == 1:
        return parts[0]
    order = np.concatenate([np.flatnonzero(ids == c) for c in charts])
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))

    def cat(name, obj_list):
        vals = [getattr(o, name) for o in obj_list]
        if vals[0] is None:
            return None
        return np.concatenate(vals, axis=0)[inv]

    from .manifold import Geometry

    geos = [p.geo for p in parts]
    geo = Geometry(*(cat(k, geos) for k in ("g", "g_inv", "dg", "gamma", "ddg", "dgamma", "riemann")))
    out = FieldJet(parts[0].field, -1, cat("u", parts), geo, cat("sigma", parts), cat("dsigma", parts),
                   cat("nabla", parts), cat("ddsigma", parts), cat("nabla2", parts))
    return out


# --------------------------------------------------------------------------
# core pointwise quantities


def bending_from_jet(jet: FieldJet) -> np.ndarray:
    """``1/2 |nabla sigma|^2``."""
    return 0.5 * dir_inner(jet, jet.nabla, jet.nabla)


def laplacian_from_jet(jet: FieldJet) -> np.ndarray:
    return jet.rough_laplacian()


def pairing_from_jet(jet: FieldJet) -> np.ndarray:
    """``R_sigma(d_a) = g^{bc} <R_{d_a, d_b} sigma, nabla_c sigma>``, shape ``(P, n)``."""
    if jet.geo.riemann is None:
        raise ValueError("curvature needs a second-order jet")
    Rs = curvature_action(jet.geo.riemann, jet.geo.g_inv, jet.sigma, jet.p)  # (P, a, b, C)
    up = np.einsum("pbc,pcI->pbI", jet.geo.g_inv, jet.nabla)
    return finner(jet, Rs, np.broadcast_to(up[:, None], Rs.shape)).sum(axis=2)


def section_residual_from_jet(jet: FieldJet) -> np.ndarray:
    """``|nabla* nabla sigma - (|nabla sigma|^2 / r^2) sigma| / |sigma|``."""
    L = laplacian_from_jet(jet)
    r2 = jet.norm2()
    if np.any(r2 <= 0):
        raise ValueError("zero-length section")
    k = dir_inner(jet, jet.nabla, jet.nabla) / r2
    return form_norm(jet, L - k[:, None] * jet.sigma) / np.sqrt(r2)


def map_residual_from_jet(jet: FieldJet) -> np.ndarray:
    """``|R_sigma|_g / |sigma|^2``: scale-free size of the curvature pairing."""
    return covector_norm(jet, pairing_from_jet(jet)) / jet.norm2()


def spectrum_from_jet(jet: FieldJet) -> np.ndarray:
    """Generalised eigenvalues of ``B`` against ``g`` at each point, sorted."""
    B = jet.gram()
    return np.array([scipy.linalg.eigh(0.5 * (b + b.T), g, eigvals_only=True) for b, g in zip(B, jet.geo.g)])


def rayleigh_from_jet(jet: FieldJet) -> np.ndarray:
    """Pointwise ``<nabla* nabla sigma, sigma> / |sigma|^2``."""
    return finner(jet, laplacian_from_jet(jet), jet.sigma) / jet.norm2()


def eigen_residual_from_jet(jet: FieldJet, eigenvalue: np.ndarray | float) -> np.ndarray:
    """``|L - lam sigma| / (|lam| |sigma|)``; absolute (``/ |sigma|``) when ``lam == 0``."""
    L = laplacian_from_jet(jet)
    lam = np.broadcast_to(np.asarray(eigenvalue, dtype=float), (L.shape[0],))
    res = form_norm(jet, L - lam[:, None] * jet.sigma) / np.sqrt(jet.norm2())
    scale = np.where(np.abs(lam) > 0, np.abs(lam), 1.0)
    return res / scale


# --------------------------------------------------------------------------
# divergence-form route


def pairing_div_form(points: PointSet, sigma: FormField) -> np.ndarray:
    """``div((nabla sigma)^t nabla_X sigma) + <nabla_[X, e_i] sigma, nabla_{e_i} sigma> - X(|nabla sigma|^2)/2``.

    Uses only first covariant derivatives on an outer stencil, an orthonormal
    frame field from Gram-Schmidt, and finite differences; no curvature.
    """
    n = points.model.n
    out = np.empty((len(points), n))
    for c in points.charts():
        jet, st, h = points.outer_jet(sigma, c)
        P = int((points.ids == c).sum())
        S = st.size
        B = jet.gram().reshape(P, S, n, n)
        g = jet.geo.g.reshape(P, S, n, n)
        g_inv = jet.geo.g_inv.reshape(P, S, n, n)
        vol = np.sqrt(np.linalg.det(g))
        # W^k_a = sqrt(g) g^{kl} B_{la}
        W = vol[..., None, None] * np.einsum("pskl,psla->psak", g_inv, B)
        _, dW = fd.apply_stencil(W, st, h, 1)  # (P, m, a, k)
        div = np.einsum("pkak->pa", dW) / vol[:, st.center, None]
        E = orthonormal_frame(g)  # (P, S, k, i)
        E0, dE = fd.apply_stencil(E, st, h, 1)  # dE (P, a, k, i)
        comm = np.einsum("paki,pli,pkl->pa", dE, E0, B[:, st.center])
        Q = np.einsum("pskl,pskl->ps", g_inv, B)
        _, dQ = fd.apply_stencil(Q, st, h, 1)
        out[points.ids == c] = div + comm - 0.5 * dQ
    return out


# --------------------------------------------------------------------------
# least-squares fitting


def fit_scalar(jet: FieldJet, Y: np.ndarray, T: np.ndarray, p: int | None = None,
               pointwise: bool = False) -> tuple[np.ndarray | float, np.ndarray]:
    """Fit ``Y_a = c T_a`` over directions ``a`` (and points unless ``pointwise``).

    Returns ``(c, relative residual per point)``; the residual is
    ``|Y - c T| / max(|Y|, |c T|)`` in the direction-summed fibre norm.
    """
    yt = dir_inner(jet, Y, T, p)
    tt = dir_inner(jet, T, T, p)
    yy = dir_inner(jet, Y, Y, p)
    if pointwise:
        c = np.where(tt > 0, yt / np.where(tt > 0, tt, 1.0), 0.0)
    else:
        c = float(yt.sum() / tt.sum()) if tt.sum() > 0 else 0.0
    cb = np.broadcast_to(np.asarray(c), yt.shape)
    # residual from the difference itself; expanding the square cancels catastrophically
    D = Y - cb.reshape(cb.shape + (1,) * (Y.ndim - 1)) * T
    rr = np.maximum(dir_inner(jet, D, D, p), 0.0)
    den = np.sqrt(np.maximum(np.maximum(yy, cb * cb * tt), 1e-300))
    return c, np.sqrt(rr) / den


def contract_template(jet: FieldJet, form: np.ndarray, p: int) -> np.ndarray:
    """``T_a = d_a _| form``, shape ``(P, n, C(n, p-1))``."""
    n = jet.n
    eye = np.eye(n)
    return np.stack([contract_coeffs(eye[a], form, n, p) for a in range(n)], axis=1)


def flat_wedge_template(jet: FieldJet, form: np.ndarray, p: int) -> np.ndarray:
    """``T_a = (d_a)^flat ^ form``, shape ``(P, n, C(n, p+1))``."""
    n = jet.n
    return np.stack([wedge_coeffs(jet.geo.g[:, a, :], form, n, 1, p) for a in range(n)], axis=1)


@dataclass(frozen=True)
class PairHypothesis:
    """Fitted constants of ``nabla_X Psi = lam X _| Phi`` and ``nabla_X Phi = mu X^flat ^ Psi``."""

    lam: float
    mu: float
    residual_psi: float
    residual_phi: float
    n: int
    p: int
    measured_psi: float = float("nan")
    measured_phi: float = float("nan")

    @property
    def predicted(self) -> tuple[float, float]:
        """Rough-Laplacian eigenvalues ``(-(n-p) lam mu, -(p+1) lam mu)``."""
        return -(self.n - self.p) * self.lam * self.mu, -(self.p + 1) * self.lam * self.mu


def pair_fit_from_jets(psi: FieldJet, phi: FieldJet) -> PairHypothesis:
    p = psi.p
    if phi.p != p + 1:
        raise ValueError("pair needs deg Phi = deg Psi + 1")
    lam, r_psi = fit_scalar(psi, psi.nabla, contract_template(phi, phi.sigma, p + 1), p)
    mu, r_phi = fit_scalar(phi, phi.nabla, flat_wedge_template(psi, psi.sigma, p), p + 1)
    m_psi = m_phi = float("nan")
    if psi.nabla2 is not None and phi.nabla2 is not None:
        m_psi = float(np.mean(rayleigh_from_jet(psi)))
        m_phi = float(np.mean(rayleigh_from_jet(phi)))
    return PairHypothesis(lam, mu, float(r_psi.max()), float(r_phi.max()), psi.n, p, m_psi, m_phi)


# --------------------------------------------------------------------------
# locally conformal parallel forms


def lcp_templates(jet: FieldJet) -> np.ndarray:
    """``T[c]_a = d_a^flat ^ (theta_c^sharp _| sigma) - dx^c ^ (d_a _| sigma)`` for ``theta = dx^c``.

    Shape ``(P, c, a, C)``; the lcp equation is ``nabla_a sigma = theta_c T[c]_a``.
    """
    n, p = jet.n, jet.p
    eye = np.eye(n)
    inner = contract_template(jet, jet.sigma, p)  # (P, b, C(p-1)): d_b _| sigma
    sharp = np.einsum("pcb,pbI->pcI", jet.geo.g_inv, inner)  # (dx^c)^sharp _| sigma
    first = wedge_coeffs(jet.geo.g[:, None, :, :], sharp[:, :, None, :], n, 1, p - 1)
    second = wedge_coeffs(eye[None, :, None, :], inner[:, None, :, :], n, 1, p - 1)
    return first - second


def fit_lee_form(jet: FieldJet, weight: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise least-squares ``theta`` with ``weight * nabla_X sigma = lcp(theta)``.

    Returns ``(theta (P, n), relative residual (P,))``.
    """
    T = lcp_templates(jet)
    Y = weight * jet.nabla
    P, n = T.shape[:2]
    # contract both the direction (g^{ab}) and the fibre (p! compound(g^-1)) indices
    G = _gp(jet, jet.p)
    TU = np.einsum("pab,pcbI->pcaI", jet.geo.g_inv, T).reshape(P, n * n, -1)
    TG = np.matmul(T.reshape(P, n * n, -1), G).reshape(P, n, n, -1)
    YG = np.matmul(Y, G)
    M = np.einsum("pcaI,pdaI->pcd", TU.reshape(P, n, n, -1), TG)
    rhs = np.einsum("pcaI,paI->pc", TU.reshape(P, n, n, -1), YG)
    yy = dir_inner(jet, Y, Y)
    live = yy > 1e-24
    theta = np.zeros((P, n))
    theta[live] = np.einsum("pcd,pd->pc", np.linalg.pinv(M[live], hermitian=True), rhs[live])
    fitted = np.einsum("pc,pcaI->paI", theta, T)
    diff = Y - fitted
    res = np.sqrt(np.maximum(dir_inner(jet, diff, diff), 0)) / np.sqrt(np.maximum(yy, 1e-300))
    res[~live] = 0.0
    return theta, res


@dataclass(frozen=True)
class LcpRecord:
    """Lee form and residuals of the lcp equation, its coderivative and Laplacian formulas."""

    theta: np.ndarray
    residual_lcp: np.ndarray
    residual_dstar: np.ndarray
    residual_lap: np.ndarray


def lcp_from_jet(jet: FieldJet, weight: float = 1.0) -> LcpRecord:
    n, p = jet.n, jet.p
    theta, r_lcp = fit_lee_form(jet, weight)
    th = theta / weight  # Lee form of the unweighted lcp equation
    tsharp = np.einsum("pab,pb->pa", jet.geo.g_inv, th)
    tcon = contract_coeffs(tsharp, jet.sigma, n, p)  # theta^sharp _| sigma
    dstar = coderivative_from_nabla(jet.nabla, jet.geo.g_inv, n, p)
    pred_dstar = (p - n) * tcon
    base = np.sqrt(jet.norm2())
    r_dstar = form_norm(jet, dstar - pred_dstar, p - 1) / base
    if jet.nabla2 is not None:
        L = laplacian_from_jet(jet)
        t2 = np.einsum("pa,pab,pb->p", th, jet.geo.g_inv, th)
        pred = p * t2[:, None] * jet.sigma + (n - 2 * p) * wedge_coeffs(th, tcon, n, 1, p - 1)
        r_lap = form_norm(jet, L - pred) / base
    else:
        r_lap = np.full(len(th), np.nan)
    return LcpRecord(theta, r_lcp, r_dstar, r_lap)


# --------------------------------------------------------------------------
# variations and tension


def variation_from_jets(sig: FieldJet, var: FieldJet, orth_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """``(<nabla* nabla sigma, phi>, |nabla phi|^2 - |phi|^2 |nabla sigma|^2)`` pointwise.

    ``|nabla sigma|^2`` enters normalised by ``|sigma|^2`` (unit sphere bundle).
    """
    cos = finner(sig, sig.sigma, var.sigma) / np.sqrt(sig.norm2() * np.maximum(var.norm2(), 1e-300))
    if np.any(np.abs(cos) > orth_tol):
        raise ValueError(f"variation field is not orthogonal to the section (|cos| = {np.abs(cos).max():.2e})")
    first = finner(sig, laplacian_from_jet(sig), var.sigma)
    k = dir_inner(sig, sig.nabla, sig.nabla) / sig.norm2()
    hess = dir_inner(var, var.nabla, var.nabla) - var.norm2() * k
    return first, hess


@dataclass(frozen=True)
class Tension:
    horizontal: np.ndarray  # (P, n) vector components
    vertical: np.ndarray  # (P, C)
    sphere_tangential: np.ndarray  # (P, C)


def tension_from_jet(jet: FieldJet) -> Tension:
    R = pairing_from_jet(jet)
    horizontal = np.einsum("pab,pb->pa", jet.geo.g_inv, R)
    L = laplacian_from_jet(jet)
    r2 = jet.norm2()
    tangential = (finner(jet, L, jet.sigma) / r2)[:, None] * jet.sigma - L
    return Tension(horizontal, -L, tangential)


# --------------------------------------------------------------------------
# single-point API


def _jet1(m: ModelManifold, sigma: FormField, u, chart: int, order: int) -> FieldJet:
    if sigma.base is not m:
        raise ValueError("field belongs to a different model")
    return field_jet(sigma, np.asarray(u, dtype=float)[None], chart, order)


def bending_density(m: ModelManifold, sigma: FormField, u, chart: int = 0) -> float:
    return float(bending_from_jet(_jet1(m, sigma, u, chart, 1))[0])


def rough_laplacian(m: ModelManifold, sigma: FormField, u, chart: int = 0) -> AlternatingForm:
    jet = _jet1(m, sigma, u, chart, 2)
    return AlternatingForm.from_array(m.n, sigma.degree, laplacian_from_jet(jet)[0])


def curvature_pairing(m: ModelManifold, sigma: FormField, u, chart: int = 0) -> AlternatingForm:
    return AlternatingForm.from_vector(pairing_from_jet(_jet1(m, sigma, u, chart, 2))[0])


def curvature_pairing_div_form(m: ModelManifold, sigma: FormField, u, chart: int = 0,
                               tol: float = 1e-4) -> tuple[AlternatingForm, bool]:
    """Second route to ``R_sigma``; the flag says whether the harmonic-section hypothesis held."""
    pts = PointSet(m, ids=np.array([chart]), points=np.asarray(u, dtype=float)[None])
    val = pairing_div_form(pts, sigma)[0]
    ok = bool(section_residual_from_jet(pts.jet(sigma, 2))[0] < tol)
    return AlternatingForm.from_vector(val), ok


@dataclass(frozen=True)
class Spectrum:
    """Generalised eigenvalues of ``B(X, Y) = <nabla_X sigma, nabla_Y sigma>`` against ``g``."""

    k: np.ndarray
    spread: float


def ki_spectrum(m: ModelManifold, sigma: FormField, u, chart: int = 0) -> Spectrum:
    k = spectrum_from_jet(_jet1(m, sigma, u, chart, 1))[0]
    return Spectrum(k, float(k.max() - k.min()))


def harmonic_section_residual(m: ModelManifold, sigma: FormField, u, chart: int = 0) -> float:
    return float(section_residual_from_jet(_jet1(m, sigma, u, chart, 2))[0])


def harmonic_map_residual(m: ModelManifold, sigma: FormField, u, chart: int = 0) -> float:
    return float(map_residual_from_jet(_jet1(m, sigma, u, chart, 2))[0])


def pair_fit(m: ModelManifold, psi: FormField, phi: FormField, points: PointSet | None = None,
             count: int = 20, seed: int = 0) -> PairHypothesis:
    points = PointSet(m, count, seed) if points is None else points
    return pair_fit_from_jets(points.jet(psi, 2), points.jet(phi, 2))


def lcp_check(m: ModelManifold, sigma: FormField, u, chart: int = 0, weight: float = 1.0) -> LcpRecord:
    rec = lcp_from_jet(_jet1(m, sigma, u, chart, 2), weight)
    return LcpRecord(rec.theta[0], rec.residual_lcp[0], rec.residual_dstar[0], rec.residual_lap[0])


def variation_integrands(m: ModelManifold, sigma: FormField, phivar: FormField, u, chart: int = 0) -> tuple[float, float]:
    first, hess = variation_from_jets(_jet1(m, sigma, u, chart, 2), _jet1(m, phivar, u, chart, 2))
    return float(first[0]), float(hess[0])


def tension_components(m: ModelManifold, sigma: FormField, u, chart: int = 0) -> tuple[np.ndarray, AlternatingForm, AlternatingForm]:
    t = tension_from_jet(_jet1(m, sigma, u, chart, 2))
    n, p = m.n, sigma.degree
    return (t.horizontal[0], AlternatingForm.from_array(n, p, t.vertical[0]),
            AlternatingForm.from_array(n, p, t.sphere_tangential[0]))


# --------------------------------------------------------------------------
# lcK harmonic-map defect


def lck_defect_from_points(points: PointSet, omega: FormField, J: Callable[[int, np.ndarray], np.ndarray]) -> dict:
    """``(n-2) d|theta|^2 - (d* theta) theta - d*(J theta) J theta - nabla_{J theta^sharp} J theta``.

    ``omega`` is the Kaehler form field, ``J(chart, u)`` the complex structure
    as ``(P, n, n)`` matrices acting on coordinate vectors, and ``n`` the
    complex dimension.  Lee form and its derivatives come from fits of the
    lcp equation on a stencil around each point.
    """
    m = points.model
    dim = m.n
    ncx = dim // 2
    terms = np.empty((len(points), 4, dim))
    for c in points.charts():
        jet, st, h = points.outer_jet(omega, c)
        P = int((points.ids == c).sum())
        S = st.size
        theta, _ = fit_lee_form(jet)
        theta = theta.reshape(P, S, dim)
        g = jet.geo.g.reshape(P, S, dim, dim)
        g_inv = jet.geo.g_inv.reshape(P, S, dim, dim)
        gamma = jet.geo.gamma.reshape(P, S, dim, dim, dim)
        Jm = J(c, jet.u).reshape(P, S, dim, dim)
        # (J theta)(X) = -theta(J X): the one-form metric-dual to J theta^sharp
        Jtheta = -np.einsum("psa,psab->psb", theta, Jm)
        t2 = np.einsum("psa,psab,psb->ps", theta, g_inv, theta)
        vol = np.sqrt(np.linalg.det(g))

        def dstar(alpha):
            # d* alpha = -div(alpha^sharp) = -(1/sqrt g) d_k (sqrt g g^{kl} alpha_l)
            W = vol[..., None] * np.einsum("pskl,psl->psk", g_inv, alpha)
            _, dW = fd.apply_stencil(W, st, h, 1)
            return -np.einsum("pkk->p", dW) / vol[:, st.center]

        _, dt2 = fd.apply_stencil(t2, st, h, 1)
        a0, dJt = fd.apply_stencil(Jtheta, st, h, 1)  # dJt[p, a, b] = d_a (J theta)_b
        g0 = gamma[:, st.center]
        nablaJt = dJt - np.einsum("pcab,pc->pab", g0, a0)  # (nabla_a J theta)_b
        Jt_sharp = np.einsum("pab,pb->pa", g_inv[:, st.center], a0)
        term_nabla = np.einsum("pa,pab->pb", Jt_sharp, nablaJt)
        th0 = theta[:, st.center]
        parts = np.stack([dt2, dstar(theta)[:, None] * th0, dstar(Jtheta)[:, None] * a0, term_nabla], axis=1)
        terms[points.ids == c] = parts
    out = (ncx - 2) * terms[:, 0] - terms[:, 1] - terms[:, 2] - terms[:, 3]
    return {"defect": out, "terms": terms, "prefactor": 0.5 * (ncx - 1) * math.factorial(ncx) ** 2}


def lck_harmonic_map_defect(m: ModelManifold, u, omega: FormField, J: Callable, chart: int = 0) -> AlternatingForm:
    if "lck" not in m.tags:
        raise ValueError("lck_harmonic_map_defect needs an lcK model")
    pts = PointSet(m, ids=np.array([chart]), points=np.asarray(u, dtype=float)[None])
    return AlternatingForm.from_vector(lck_defect_from_points(pts, omega, J)["defect"][0])
