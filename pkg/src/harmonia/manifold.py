"""Chart-based model Riemannian manifolds with finite-difference geometry.

A ``ModelManifold`` is a list of coordinate charts.  Each chart either embeds
a box of ``R^n`` into ``R^N`` (the metric is pulled back through a
finite-difference Jacobian) or carries a metric directly.  ``FormField``
objects give form coefficients on the coordinate coframe.

Curvature convention: ``R_{X,Y} = nabla_[X,Y] - nabla_X nabla_Y + nabla_Y nabla_X``
(the negative of the usual one), stored as ``R[i,j,k,l] = <R_{d_i,d_j} d_k, d_l>``.
With this sign a round sphere of curvature ``K`` has
``R[i,j,k,l] = K (g_ik g_jl - g_il g_jk)``.

Batched evaluation goes through ``Geometry`` and ``FieldJet``; the
single-point functions (``metric_at``, ``covariant_derivative``, ...) are thin
wrappers over them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping

import numpy as np

from . import fd
from .multilinear import (
    AlternatingForm,
    PointMetric,
    compound,
    compound_levels,
    contract_coeffs,
    derivation_coeffs,
    wedge_coeffs,
)

__all__ = [
    "H1",
    "H2",
    "Chart",
    "ConnectionData",
    "CurvatureData",
    "FieldJet",
    "FormField",
    "Geometry",
    "ModelManifold",
    "christoffel_at",
    "coderivative",
    "covariant_derivative",
    "curvature_action",
    "curvature_at",
    "exterior_derivative",
    "field_jet",
    "geometry",
    "graph_chart",
    "metric_at",
    "orthonormal_frame",
    "second_covariant_derivative",
    "sphere_charts",
]

# base steps in units of the model scale
H1 = 1e-3
H2 = 1e-2


# --------------------------------------------------------------------------
# charts and models


@dataclass(frozen=True, eq=False)
class Chart:
    """Coordinate box ``[lo, hi]`` with an embedding or a direct metric."""

    label: str
    lo: np.ndarray
    hi: np.ndarray
    embedding: Callable[[np.ndarray], np.ndarray] | None = None
    metric: Callable[[np.ndarray], np.ndarray] | None = None
    margin: float = 0.1

    def __post_init__(self) -> None:
        if (self.embedding is None) == (self.metric is None):
            raise ValueError("a chart needs exactly one of embedding / metric")
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("invalid chart box")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        return np.all((u >= self.lo) & (u <= self.hi), axis=-1)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform points in the box shrunk by ``margin`` on each side."""
        width = self.hi - self.lo
        lo = self.lo + self.margin * width
        hi = self.hi - self.margin * width
        return rng.uniform(lo, hi, size=(count, self.dim))


@dataclass(frozen=True, eq=False)
class ModelManifold:
    """A Riemannian manifold described by one or more charts."""

    name: str
    n: int
    charts: tuple[Chart, ...]
    scale: float = 1.0
    ambient_dim: int | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    tags: frozenset[str] = frozenset()
    closed_forms: Mapping[str, Callable] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.charts:
            raise ValueError("model needs at least one chart")
        for c in self.charts:
            if c.dim != self.n:
                raise ValueError("chart dimension mismatch")
            if (c.embedding is not None) != (self.ambient_dim is not None):
                raise ValueError("embedded charts need ambient_dim (and direct charts must not set it)")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        object.__setattr__(self, "closed_forms", MappingProxyType(dict(self.closed_forms)))

    @property
    def flavor(self) -> str:
        return "embedded" if self.ambient_dim is not None else "direct"

    def descriptor(self) -> dict:
        return {
            "name": self.name,
            "dim": self.n,
            "ambient_dim": self.ambient_dim,
            "flavor": self.flavor,
            "charts": [c.label for c in self.charts],
            "scale": self.scale,
            "params": {k: v for k, v in self.params.items()},
        }

    def sample(self, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """``(chart_ids, points)``: charts drawn uniformly, points uniform in each chart box."""
        rng = np.random.default_rng(seed)
        ids = rng.integers(0, len(self.charts), size=count)
        pts = np.empty((count, self.n))
        for c, chart in enumerate(self.charts):
            mask = ids == c
            pts[mask] = chart.sample(int(mask.sum()), rng)
        return ids, pts

    # ---- pointwise primitives (batched over leading axes)

    def embed(self, chart: int, u: np.ndarray) -> np.ndarray:
        emb = self.charts[chart].embedding
        if emb is None:
            raise ValueError(f"{self.name} is not an embedded model")
        return fd.evaluate_chunked(emb, np.asarray(u, dtype=float))

    def jacobian(self, chart: int, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Embedded point and FD Jacobian ``(..., N, n)`` at ``u``."""
        u = np.asarray(u, dtype=float)
        lead = u.shape[:-1]
        flat = u.reshape(-1, self.n)
        x, J = fd.jet(self.charts[chart].embedding, flat, H1 * self.scale, order=1)
        # jet returns (P, n, N); store as (P, N, n)
        J = np.swapaxes(J, -1, -2)
        return x.reshape(lead + x.shape[1:]), J.reshape(lead + J.shape[1:])

    def metric_values(self, chart: int, u: np.ndarray, J: np.ndarray | None = None) -> np.ndarray:
        ch = self.charts[chart]
        u = np.asarray(u, dtype=float)
        if ch.metric is not None:
            return fd.evaluate_chunked(ch.metric, u)
        if J is None:
            _, J = self.jacobian(chart, u)
        return np.einsum("...ka,...kb->...ab", J, J)

    def check_domain(self, chart: int, pts: np.ndarray) -> None:
        if not np.all(self.charts[chart].contains(pts)):
            raise ValueError(f"stencil leaves the domain of chart {self.charts[chart].label!r} of {self.name}")


def graph_chart(n: int, k: int, sign: int, radius: float = 1.0, half_width: float | None = None) -> Chart:
    """Chart of ``S^n(radius)`` solving for ambient coordinate ``k`` with the given sign."""
    c = 0.9 * radius / math.sqrt(n) if half_width is None else half_width

    def emb(u: np.ndarray) -> np.ndarray:
        rest = radius * radius - np.sum(u * u, axis=-1, keepdims=True)
        if np.any(rest <= 0):
            raise ValueError("point outside the graph chart")
        return np.concatenate([u[..., :k], sign * np.sqrt(rest), u[..., k:]], axis=-1)

    label = f"x{k}{'+' if sign > 0 else '-'}"
    return Chart(label, -c * np.ones(n), c * np.ones(n), embedding=emb)


def sphere_charts(n: int, radius: float = 1.0, count: int = 2) -> tuple[Chart, ...]:
    """Graph charts over the last coordinates, ``count`` of them (at most ``2(n+1)``)."""
    charts = []
    for k in range(n, -1, -1):
        for s in (1, -1):
            charts.append(graph_chart(n, k, s, radius))
    return tuple(charts[:count])


# --------------------------------------------------------------------------
# form fields


@dataclass(frozen=True, eq=False)
class FormField:
    """A differential form given in the coordinate coframe of each chart.

    ``source`` selects how ``fn`` is read:

    * ``"ambient"``: ``fn(x)`` gives ambient coefficients ``(P, C(N, p))``;
      they are pulled back through the chart Jacobian.
    * ``"embedded"``: ``fn(x, J)`` returns chart coefficients directly.
    * ``"local"``: ``fn(chart, u)`` returns chart coefficients.
    """

    base: ModelManifold
    name: str
    degree: int
    fn: Callable
    source: str = "local"
    constant_length: bool = True
    description: str = ""

    def __post_init__(self) -> None:
        if self.source not in ("ambient", "embedded", "local"):
            raise ValueError(f"unknown field source {self.source!r}")
        if not 0 <= self.degree <= self.base.n:
            raise ValueError("field degree out of range")
        if self.source != "local" and self.base.flavor != "embedded":
            raise ValueError("ambient fields need an embedded model")

    @property
    def size(self) -> int:
        return math.comb(self.base.n, self.degree)

    def coeffs(self, chart: int, u: np.ndarray, frame: tuple[np.ndarray, np.ndarray] | None = None,
               cache: dict | None = None) -> np.ndarray:
        """Coefficients ``(..., C(n, p))`` at ``u``.

        ``frame`` may pass precomputed ``(x, J)``; ``cache`` may hold
        the compound matrices of ``J`` already computed.
        """
        u = np.asarray(u, dtype=float)
        if self.source == "local":
            return fd.evaluate_chunked(lambda v: self.fn(chart, v), u)
        x, J = frame if frame is not None else self.base.jacobian(chart, u)
        lead = x.shape[:-1]
        if self.source == "embedded":
            out = self.fn(x.reshape(-1, x.shape[-1]), J.reshape((-1,) + J.shape[-2:]))
            return out.reshape(lead + out.shape[-1:])
        A = self.fn(x.reshape(-1, x.shape[-1]))
        A = A.reshape(lead + A.shape[-1:])
        if self.degree == 0:
            return A
        if self.degree > min(J.shape[-2:]):
            return np.zeros(lead + (self.size,))
        if cache is None:
            Cj = compound(J, self.degree)
        else:
            Cj = compound_levels(J, self.degree, cache.setdefault("compound", []))[self.degree - 1]
        return np.einsum("...KI,...K->...I", Cj, A)

    def at(self, u: np.ndarray, chart: int = 0) -> AlternatingForm:
        c = self.coeffs(chart, np.asarray(u, dtype=float)[None])[0]
        return AlternatingForm.from_array(self.base.n, self.degree, c)


# --------------------------------------------------------------------------
# geometry


@dataclass
class Geometry:
    """Metric jet at ``P`` points of one chart."""

    g: np.ndarray  # (P, n, n)
    g_inv: np.ndarray
    dg: np.ndarray  # (P, a, i, j) = d_a g_ij
    gamma: np.ndarray  # (P, k, i, j) = Gamma^k_ij
    ddg: np.ndarray | None = None  # (P, a, b, i, j)
    dgamma: np.ndarray | None = None  # (P, a, k, i, j) = d_a Gamma^k_ij
    riemann: np.ndarray | None = None  # (P, i, j, k, l)

    @property
    def n(self) -> int:
        return self.g.shape[-1]

    def vol(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.g))

    def compound_inv(self, p: int) -> np.ndarray:
        """``compound(g_inv, p)`` per point, cached on the geometry."""
        cache = self.__dict__.setdefault("_compound_inv", [])
        return compound_levels(self.g_inv, p, cache)[p - 1]


def _christoffel(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
    t = np.einsum("pilj->plij", dg) + np.einsum("pjli->plij", dg) - dg
    return 0.5 * np.einsum("pkl,plij->pkij", g_inv, t)


def _geometry_from_values(values: np.ndarray, stencil: fd.Stencil, h: float, order: int) -> Geometry:
    if order == 1:
        g, dg = fd.apply_stencil(values, stencil, h, 1)
        ddg = None
    else:
        g, dg, ddg = fd.apply_stencil(values, stencil, h, 2)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    g_inv = np.linalg.inv(g)
    gamma = _christoffel(g_inv, dg)
    geo = Geometry(g, g_inv, dg, gamma, ddg)
    if order == 2:
        dg_inv = -np.einsum("pkm,pamn,pnl->pakl", g_inv, dg, g_inv)
        t = np.einsum("pilj->plij", dg) + np.einsum("pjli->plij", dg) - dg
        dt = (
            np.einsum("pailj->palij", ddg)
            + np.einsum("pajli->palij", ddg)
            - ddg
        )
        geo.dgamma = 0.5 * (
            np.einsum("pakl,plij->pakij", dg_inv, t) + np.einsum("pkl,palij->pakij", g_inv, dt)
        )
        geo.riemann = _riemann(g, gamma, geo.dgamma)
    return geo


def _riemann(g: np.ndarray, gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    # usual R^l_{kij} = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    std = (
        np.einsum("piljk->plkij", dgamma)
        - np.einsum("pjlik->plkij", dgamma)
        + np.einsum("plim,pmjk->plkij", gamma, gamma)
        - np.einsum("pljm,pmik->plkij", gamma, gamma)
    )
    # stored sign, lowered: R[i,j,k,l] = -g_lm R^m_{kij}
    return -np.einsum("plm,pmkij->pijkl", g, std)


class StencilContext:
    """Points of a derivative stencil around ``P`` base points, with cached frames."""

    def __init__(self, model: ModelManifold, chart: int, u: np.ndarray, order: int, h: float | None = None):
        self.model = model
        self.chart = chart
        self.u = np.atleast_2d(np.asarray(u, dtype=float))
        self.order = order
        self.h = (H1 if order == 1 else H2) * model.scale if h is None else h
        self.stencil = fd.gradient_stencil(model.n) if order == 1 else fd.hessian_stencil(model.n)
        self.points = fd.stencil_points(self.u, self.stencil, self.h)
        model.check_domain(chart, self.points)
        self.cache: dict = {}
        self.frame = model.jacobian(chart, self.points) if model.flavor == "embedded" else None
        self._geometry: Geometry | None = None

    def geometry(self) -> Geometry:
        if self._geometry is None:
            J = self.frame[1] if self.frame is not None else None
            values = self.model.metric_values(self.chart, self.points, J)
            self._geometry = _geometry_from_values(values, self.stencil, self.h, self.order)
        return self._geometry

    def field_values(self, sigma: FormField) -> np.ndarray:
        return sigma.coeffs(self.chart, self.points, self.frame, self.cache)


def geometry(m: ModelManifold, u: np.ndarray, chart: int = 0, order: int = 2) -> Geometry:
    """Metric, Christoffel symbols and (for ``order == 2``) curvature at ``u``."""
    return StencilContext(m, chart, u, order).geometry()


# --------------------------------------------------------------------------
# covariant derivatives of form fields


@dataclass
class FieldJet:
    """Form field, its partial and covariant derivatives at ``P`` points."""

    field: FormField
    chart: int
    u: np.ndarray
    geo: Geometry
    sigma: np.ndarray  # (P, C)
    dsigma: np.ndarray  # (P, a, C)
    nabla: np.ndarray  # (P, a, C)
    ddsigma: np.ndarray | None = None
    nabla2: np.ndarray | None = None  # (P, a, b, C) = (nabla^2 sigma)_{d_a, d_b}

    @property
    def n(self) -> int:
        return self.field.base.n

    @property
    def p(self) -> int:
        return self.field.degree

    def inner(self, a: np.ndarray, b: np.ndarray, p: int | None = None) -> np.ndarray:
        """Fibre inner product of stacked forms at the jet points."""
        p = self.p if p is None else p
        if p == 0:
            return a[..., 0] * b[..., 0]
        gp = self.geo.compound_inv(p)
        gp = gp.reshape((-1,) + (1,) * (a.ndim - 2) + gp.shape[-2:])
        return math.factorial(p) * np.einsum("...i,...i->...", a, np.einsum("...ij,...j->...i", gp, b))

    def norm2(self) -> np.ndarray:
        return self.inner(self.sigma, self.sigma)

    def gram(self) -> np.ndarray:
        """``B_ab = <nabla_a sigma, nabla_b sigma>``, shape ``(P, n, n)``."""
        n = self.n
        A = np.broadcast_to(self.nabla[:, :, None, :], (self.nabla.shape[0], n, n, self.nabla.shape[-1]))
        B = np.broadcast_to(self.nabla[:, None, :, :], A.shape)
        return self.inner(A, B)

    def nabla_norm2(self) -> np.ndarray:
        return np.einsum("pab,pab->p", self.geo.g_inv, self.gram())

    def rough_laplacian(self) -> np.ndarray:
        if self.nabla2 is None:
            raise ValueError("jet has no second derivatives")
        return -np.einsum("pab,pabc->pc", self.geo.g_inv, self.nabla2)


def _gamma_mats(gamma: np.ndarray) -> np.ndarray:
    # mats[p, a, c, k] = Gamma^c_{a k}
    return np.einsum("pcak->pack", gamma)


def _derivation(mats: np.ndarray, coeffs: np.ndarray, n: int, p: int) -> np.ndarray:
    return derivation_coeffs(mats, coeffs, n, p)


def field_jet_from_context(ctx: StencilContext, sigma: FormField) -> FieldJet:
    if sigma.base is not ctx.model:
        raise ValueError("field belongs to a different model")
    n, p = ctx.model.n, sigma.degree
    geo = ctx.geometry()
    values = ctx.field_values(sigma)
    if ctx.order == 1:
        s, ds = fd.apply_stencil(values, ctx.stencil, ctx.h, 1)
        dds = None
    else:
        s, ds, dds = fd.apply_stencil(values, ctx.stencil, ctx.h, 2)
    G = _gamma_mats(geo.gamma)  # (P, a, c, k)
    nabla = ds - _derivation(G, s[:, None, :], n, p)
    jet = FieldJet(sigma, ctx.chart, ctx.u, geo, s, ds, nabla, dds)
    if ctx.order == 2:
        dG = np.einsum("pacbk->pabck", geo.dgamma)  # d_a Gamma^c_{b k} as mats over (c, k)
        # d_a (nabla_b sigma)
        d_nabla = dds - _derivation(dG, s[:, None, None, :], n, p) - _derivation(G[:, None], ds[:, :, None, :], n, p)
        nabla2 = (
            d_nabla
            - _derivation(G[:, :, None], nabla[:, None, :, :], n, p)
            - np.einsum("pcab,pcI->pabI", geo.gamma, nabla)
        )
        jet.nabla2 = nabla2
    return jet


def field_jet(sigma: FormField, u: np.ndarray, chart: int = 0, order: int = 2) -> FieldJet:
    """Batched jet of ``sigma`` at the points ``u`` of ``chart``."""
    ctx = StencilContext(sigma.base, chart, u, order)
    return field_jet_from_context(ctx, sigma)


# --------------------------------------------------------------------------
# pointwise API


@dataclass(frozen=True)
class ConnectionData:
    """Christoffel symbols ``gamma[k, i, j]`` with their metric-compatibility residual."""

    gamma: np.ndarray
    compatibility_residual: float
    symmetry_residual: float


@dataclass(frozen=True)
class CurvatureData:
    """``R[i, j, k, l] = <R_{d_i, d_j} d_k, d_l>`` plus the metric it lives in."""

    R: np.ndarray
    g: np.ndarray

    @property
    def ricci(self) -> np.ndarray:
        # Ric(Y, Z) = tr(X -> R_std(X, Y) Z) = g^{il} R[i, j, l, k] with the stored sign
        g_inv = np.linalg.inv(self.g)
        return np.einsum("il,ijlk->jk", g_inv, self.R)

    @property
    def scalar(self) -> float:
        return float(np.einsum("jk,jk->", np.linalg.inv(self.g), self.ricci))

    def sectional(self, X: np.ndarray, Y: np.ndarray) -> float:
        num = np.einsum("ijkl,i,j,k,l->", self.R, X, Y, X, Y)
        den = (X @ self.g @ X) * (Y @ self.g @ Y) - (X @ self.g @ Y) ** 2
        return float(num / den)

    def symmetry_residuals(self) -> dict[str, float]:
        R = self.R
        scale = max(1.0, float(np.abs(R).max()))
        return {
            "antisym_ij": float(np.abs(R + np.swapaxes(R, 0, 1)).max()) / scale,
            "antisym_kl": float(np.abs(R + np.swapaxes(R, 2, 3)).max()) / scale,
            "pair": float(np.abs(R - R.transpose(2, 3, 0, 1)).max()) / scale,
            "bianchi": float(
                np.abs(R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)).max()
            ) / scale,
        }

    def action(self, a: int, b: int, coeffs: np.ndarray, p: int) -> np.ndarray:
        """``R_{d_a, d_b}`` acting on stacked ``p``-form coefficients."""
        return curvature_action(self.R[None], np.linalg.inv(self.g)[None], coeffs[None], p)[0, a, b]


def curvature_action(R: np.ndarray, g_inv: np.ndarray, coeffs: np.ndarray, p: int) -> np.ndarray:
    """All ``R_{d_a, d_b} sigma`` at once: ``(P, a, b, C)``.

    ``R_{a b}`` acts on one-forms by ``alpha -> -alpha(R_{a b} .)`` and on
    ``p``-forms as the induced derivation.
    """
    n = R.shape[-1]
    # A[p, a, b, c, k] = (R_ab)^c_k = g^{cl} R[a, b, k, l]
    A = np.einsum("pcl,pabkl->pabck", g_inv, R)
    return -derivation_coeffs(A, coeffs[:, None, None, :], n, p)


def _single(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ValueError("expected a single chart point")
    return u[None]


def metric_at(m: ModelManifold, u: np.ndarray, chart: int = 0) -> PointMetric:
    """Pulled-back (or direct) metric at a chart point."""
    u1 = _single(u)
    ch = m.charts[chart]
    if not ch.contains(u1)[0]:
        raise ValueError("point outside the chart domain")
    g = m.metric_values(chart, u1)[0]
    g = 0.5 * (g + g.T)
    if m.flavor == "embedded":
        _, J = m.jacobian(chart, u1)
        if np.linalg.matrix_rank(J[0], tol=1e-8) < m.n:
            raise ValueError("rank-deficient Jacobian")
    return PointMetric(g)


def christoffel_at(m: ModelManifold, u: np.ndarray, chart: int = 0) -> ConnectionData:
    geo = geometry(m, _single(u), chart, order=1)
    gam, g, dg = geo.gamma[0], geo.g[0], geo.dg[0]
    # d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il
    compat = dg - np.einsum("lki,lj->kij", gam, g) - np.einsum("lkj,il->kij", gam, g)
    sym = gam - np.swapaxes(gam, 1, 2)
    return ConnectionData(gam, float(np.abs(compat).max()), float(np.abs(sym).max()))


def curvature_at(m: ModelManifold, u: np.ndarray, chart: int = 0) -> CurvatureData:
    geo = geometry(m, _single(u), chart, order=2)
    return CurvatureData(geo.riemann[0], geo.g[0])


def covariant_derivative(m: ModelManifold, sigma: FormField, u: np.ndarray, chart: int = 0) -> np.ndarray:
    """``(n, C(n, p))`` array: row ``a`` holds ``nabla_{d_a} sigma``."""
    if sigma.base is not m:
        raise ValueError("field belongs to a different model")
    return field_jet(sigma, _single(u), chart, order=1).nabla[0]


def second_covariant_derivative(m: ModelManifold, sigma: FormField, u: np.ndarray, chart: int = 0) -> np.ndarray:
    """``(n, n, C(n, p))`` array: ``[a, b]`` holds ``(nabla^2 sigma)_{d_a, d_b}``."""
    if sigma.base is not m:
        raise ValueError("field belongs to a different model")
    return field_jet(sigma, _single(u), chart, order=2).nabla2[0]


def exterior_from_nabla(nabla: np.ndarray, n: int, p: int) -> np.ndarray:
    """``d sigma = sum_a dx^a ^ nabla_a sigma`` on stacked ``(..., a, C)`` input."""
    if p >= n:
        raise ValueError("exterior derivative of a top-degree form")
    eye = np.eye(n)
    return sum(wedge_coeffs(eye[a], nabla[..., a, :], n, 1, p) for a in range(n))


def coderivative_from_nabla(nabla: np.ndarray, g_inv: np.ndarray, n: int, p: int) -> np.ndarray:
    """``d* sigma = -g^{ab} d_a _| nabla_b sigma``."""
    if p < 1:
        raise ValueError("coderivative of a 0-form")
    eye = np.eye(n)
    parts = np.stack([contract_coeffs(eye[a], nabla[..., b, :], n, p) for a in range(n) for b in range(n)], axis=-2)
    parts = parts.reshape(parts.shape[:-2] + (n, n, parts.shape[-1]))
    return -np.einsum("...ab,...abI->...I", g_inv, parts)


def exterior_derivative(m: ModelManifold, sigma: FormField, u: np.ndarray, chart: int = 0) -> AlternatingForm:
    nabla = covariant_derivative(m, sigma, u, chart)
    return AlternatingForm.from_array(m.n, sigma.degree + 1, exterior_from_nabla(nabla, m.n, sigma.degree))


def coderivative(m: ModelManifold, sigma: FormField, u: np.ndarray, chart: int = 0) -> AlternatingForm:
    jet = field_jet(sigma, _single(u), chart, order=1)
    out = coderivative_from_nabla(jet.nabla[0], jet.geo.g_inv[0], m.n, sigma.degree)
    return AlternatingForm.from_array(m.n, sigma.degree - 1, out)


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Gram-Schmidt on coordinate fields: columns ``E[:, i]`` with ``E^T g E = I``."""
    L = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(L), -1, -2)
