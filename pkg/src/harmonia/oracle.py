"""Independent numerical cross-checks for the main finite-difference path.

* ``covariant_oracle``: covariant derivative of a form field on an embedded
  model, computed by pushing the form to the ambient space through the
  tangential projection, differencing it there and pulling it back.  No
  Christoffel symbols are involved.
* ``curvature_oracle``: Riemann tensor from the Gauss equation with a
  finite-difference second fundamental form, or from a closed form for flat
  and cone models.
* ``mc_integral``: Monte-Carlo integrals over round unit spheres.

Oracles use plain second-order central differences at ``h = 5e-4`` (times the
model scale), unlike the Richardson stencils of the main path, so agreement
is not an artefact of shared truncation error.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fd
from .manifold import FormField, ModelManifold, field_jet, geometry, graph_chart
from .multilinear import compound

__all__ = [
    "H_ORACLE",
    "OracleReport",
    "cone_curvature",
    "covariant_oracle",
    "curvature_oracle",
    "gauss_curvature",
    "mc_integral",
    "mc_report",
    "sphere_volume",
]

H_ORACLE = 5e-4
COVARIANT_TOL = 1e-4
CURVATURE_TOL = 1e-3
# relative floor for Monte-Carlo comparisons: integrands carry a deterministic
# finite-difference error that no sample size removes
MC_REL_FLOOR = 1e-6
MC_CHUNK = 1024


@dataclass(frozen=True)
class OracleReport:
    """Two routes to one quantity; ``verdict`` is pass iff ``discrepancy < tolerance``."""

    quantity: str
    route_a: float
    route_b: float
    discrepancy: float
    tolerance: float
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.discrepancy < self.tolerance else "fail"

    def to_dict(self) -> dict:
        out = {
            "quantity": self.quantity,
            "route_a": self.route_a,
            "route_b": self.route_b,
            "discrepancy": self.discrepancy,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }
        out.update(self.extra)
        return out


def _points(u) -> np.ndarray:
    return np.atleast_2d(np.asarray(u, dtype=float))


def _central_jacobian(m: ModelManifold, chart: int, u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Embedded points and plain central-difference Jacobians ``(P, N, n)``."""
    st = fd.central_stencil(m.n)
    vals = m.embed(chart, fd.stencil_points(u, st, h))
    x, J = fd.apply_stencil(vals, st, h, 1)
    return x, np.swapaxes(J, -1, -2)


# --------------------------------------------------------------------------
# covariant derivative


def _ambient_coeffs(sigma: FormField, chart: int, u: np.ndarray, h: float) -> np.ndarray:
    """Coefficients on ``R^N`` of the form ``sigma o P`` (``P`` the tangential projection)."""
    m = sigma.base
    x, J = _central_jacobian(m, chart, u, h)
    coeffs = sigma.coeffs(chart, u, frame=(x, J))
    if sigma.degree == 0:
        return coeffs
    g = np.einsum("...ka,...kb->...ab", J, J)
    Jplus = np.linalg.solve(g, np.swapaxes(J, -1, -2))  # (..., n, N): chart components of P V
    return np.einsum("...IK,...I->...K", compound(Jplus, sigma.degree), coeffs)


def covariant_oracle(m: ModelManifold, sigma: FormField, u, chart: int = 0, h: float | None = None,
                     tol: float = COVARIANT_TOL) -> OracleReport:
    """Compare the main-path ``nabla sigma`` with the ambient-projection route.

    On a submanifold ``(nabla_X sigma)(Y, ...) = (D_X sigma~)(Y, ...)`` for tangent
    ``Y`` when ``sigma~ = sigma o P``, so the ambient difference quotient of
    ``sigma~`` along the chart directions, pulled back, is ``nabla sigma``.
    """
    if m.flavor != "embedded":
        raise ValueError(f"covariant_oracle needs an embedded model; {m.name} is {m.flavor}")
    if sigma.base is not m:
        raise ValueError("field belongs to a different model")
    u = _points(u)
    h = H_ORACLE * m.scale if h is None else h
    main = field_jet(sigma, u, chart, order=1)
    st = fd.central_stencil(m.n)
    pts = fd.stencil_points(u, st, h)
    amb = _ambient_coeffs(sigma, chart, pts.reshape(-1, m.n), h).reshape(pts.shape[:2] + (-1,))
    _, D = fd.apply_stencil(amb, st, h, 1)  # (P, a, C(N, p))
    if sigma.degree == 0:
        other = D
    else:
        _, J = _central_jacobian(m, chart, u, h)
        other = np.einsum("pKI,paK->paI", compound(J, sigma.degree), D)
    scale = max(float(np.abs(main.nabla).max()), float(np.abs(main.sigma).max()), 1e-300)
    disc = float(np.abs(main.nabla - other).max()) / scale
    return OracleReport("covariant-derivative", float(np.abs(main.nabla).max()), float(np.abs(other).max()),
                        disc, tol, {"points": len(u), "field": sigma.name})


# --------------------------------------------------------------------------
# curvature


def gauss_curvature(m: ModelManifold, u, chart: int = 0, h: float | None = None) -> np.ndarray:
    """Riemann tensor ``(P, i, j, k, l)`` from the Gauss equation.

    With ``II = (I - P) d^2 x`` this returns
    ``<II_ik, II_jl> - <II_il, II_jk>``, the storage convention of the
    manifold module (the negative of ``<II(X,W), II(Y,Z)> - <II(X,Z), II(Y,W)>``
    read as ``R(X, Y, Z, W)``).
    """
    if m.flavor != "embedded":
        raise ValueError(f"gauss_curvature needs an embedded model; {m.name} is {m.flavor}")
    u = _points(u)
    h = H_ORACLE * m.scale if h is None else h
    n = m.n
    eye = np.eye(n)
    x0 = m.embed(chart, u)
    _, J = _central_jacobian(m, chart, u, h)
    hess = np.empty(u.shape[:1] + (n, n) + x0.shape[-1:])
    for a in range(n):
        for b in range(a, n):
            if a == b:
                val = (m.embed(chart, u + h * eye[a]) - 2 * x0 + m.embed(chart, u - h * eye[a])) / h**2
            else:
                ea, eb = h * eye[a], h * eye[b]
                val = (m.embed(chart, u + ea + eb) - m.embed(chart, u + ea - eb)
                       - m.embed(chart, u - ea + eb) + m.embed(chart, u - ea - eb)) / (4 * h * h)
            hess[:, a, b] = hess[:, b, a] = val
    g = np.einsum("pka,pkb->pab", J, J)
    P = np.einsum("pka,pab,plb->pkl", J, np.linalg.inv(g), J)
    II = hess - np.einsum("pkl,pabl->pabk", P, hess)
    return np.einsum("pikv,pjlv->pijkl", II, II) - np.einsum("pilv,pjkv->pijkl", II, II)


def cone_curvature(u) -> np.ndarray:
    """Closed-form Riemann tensor of ``delta / |x|^2`` on ``R^N \\ 0``.

    The metric is ``dt^2 + g_{S^{N-1}}`` with ``t = ln|x|``; with ``h = g - dt dt``
    the tensor is ``h_ik h_jl - h_il h_jk``.
    """
    x = _points(u)
    r2 = np.sum(x * x, axis=-1)
    N = x.shape[-1]
    h = (np.eye(N) - np.einsum("pa,pb->pab", x, x) / r2[:, None, None]) / r2[:, None, None]
    return np.einsum("pik,pjl->pijkl", h, h) - np.einsum("pil,pjk->pijkl", h, h)


def curvature_oracle(m: ModelManifold, u, chart: int = 0, tol: float = CURVATURE_TOL) -> OracleReport:
    """Compare the Christoffel-route Riemann tensor with Gauss or a closed form."""
    u = _points(u)
    main = geometry(m, u, chart, order=2).riemann
    if m.flavor == "embedded":
        other, route = gauss_curvature(m, u, chart), "gauss"
    elif "flat" in m.tags:
        other, route = np.zeros_like(main), "flat"
    elif "cone" in m.tags:
        other, route = cone_curvature(u), "cone"
    else:
        raise ValueError(f"no independent curvature route for {m.name}")
    scale = max(float(np.abs(other).max()), 1.0 if route == "flat" else 1e-300)
    disc = float(np.abs(main - other).max()) / scale
    return OracleReport("riemann", float(np.abs(main).max()), float(np.abs(other).max()), disc, tol,
                        {"points": len(u), "route": route})


# --------------------------------------------------------------------------
# Monte-Carlo integration on round spheres


def sphere_volume(n: int, radius: float = 1.0) -> float:
    """Volume of the round ``S^n`` of the given radius."""
    return 2 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2) * radius**n


def _cover(m: ModelManifold) -> ModelManifold:
    """All ``2(n+1)`` graph charts; each point is used in the chart of its largest coordinate."""
    n = m.n
    # a point lies in the chart of its largest |x_k|; the remaining coordinates
    # then satisfy |u|^2 <= n / (n + 1)
    half = math.sqrt(n / (n + 1)) + 0.05
    charts = tuple(graph_chart(n, k, s, half_width=half) for k in range(n + 1) for s in (1, -1))
    return ModelManifold(m.name + "#cover", n, charts, ambient_dim=n + 1, tags=m.tags)


def _chart_points(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = np.argmax(np.abs(x), axis=-1)
    s = np.sign(x[np.arange(len(x)), k])
    ids = 2 * k + (s < 0)
    mask = np.ones_like(x, dtype=bool)
    mask[np.arange(len(x)), k] = False
    return ids, x[mask].reshape(len(x), -1)


def _field_integrand(m: ModelManifold, sigma: FormField, kind: str) -> Callable[[np.ndarray], np.ndarray]:
    if sigma.source == "local":
        raise ValueError("Monte-Carlo integrands need ambient or embedded fields")
    cover = _cover(m)
    moved = dataclasses.replace(sigma, base=cover)

    def fn(x: np.ndarray) -> np.ndarray:
        from .harmonic import PointSet, bending_from_jet

        ids, u = _chart_points(x)
        pts = PointSet(cover, ids=ids, points=u)
        dens = bending_from_jet(pts.jet(moved, 1))
        if kind == "energy":
            dens = dens + 0.5 * m.n
        return dens

    return fn


def mc_integral(m: ModelManifold, integrand: str | Callable[[np.ndarray], np.ndarray] = "one",
                sigma: FormField | None = None, samples: int = 2000, seed: int = 0,
                jobs: int = 1) -> tuple[float, float]:
    """Monte-Carlo ``int_{S^n} f dv`` with its standard error.

    ``integrand`` is ``"one"``, ``"bending"`` (``1/2 |nabla sigma|^2``),
    ``"energy"`` (``n/2 + 1/2 |nabla sigma|^2``) or a callable on ambient
    points ``(S, n + 1)``.  Uniform points come from normalised Gaussians;
    each chunk of ``MC_CHUNK`` samples draws from its own Philox stream
    spawned from ``seed``, so results do not depend on ``jobs``.
    """
    if "sphere" not in m.tags or "round" not in m.tags or m.flavor != "embedded":
        raise ValueError(f"mc_integral needs a round unit sphere; {m.name} is not one")
    if float(m.params.get("radius", 1.0)) != 1.0:
        raise ValueError("mc_integral supports unit spheres only")
    if samples < 2:
        raise ValueError("need at least two samples")
    if callable(integrand):
        fn = integrand
    elif integrand == "one":
        fn = lambda x: np.ones(len(x))  # noqa: E731
    elif integrand in ("bending", "energy"):
        if sigma is None:
            raise ValueError(f"integrand {integrand!r} needs a field")
        fn = _field_integrand(m, sigma, integrand)
    else:
        raise ValueError(f"unknown integrand {integrand!r}")
    N = m.n + 1
    sizes = [min(MC_CHUNK, samples - i) for i in range(0, samples, MC_CHUNK)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def chunk(args):
        size, ss = args
        rng = np.random.Generator(np.random.Philox(ss))
        x = rng.standard_normal((size, N))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        return np.asarray(fn(x), dtype=float)

    tasks = list(zip(sizes, streams))
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(chunk, tasks))
    else:
        parts = [chunk(t) for t in tasks]
    vals = np.concatenate(parts)
    vol = sphere_volume(m.n)
    return float(vol * vals.mean()), float(vol * vals.std(ddof=1) / math.sqrt(len(vals)))


def mc_report(m: ModelManifold, exact: float, integrand="one", sigma: FormField | None = None,
              samples: int = 2000, seed: int = 0, jobs: int = 1) -> OracleReport:
    """Monte-Carlo estimate against a closed-form value (pass within 3 standard errors)."""
    est, err = mc_integral(m, integrand, sigma, samples, seed, jobs)
    tol = 3 * err + MC_REL_FLOOR * abs(exact)
    name = integrand if isinstance(integrand, str) else "callable"
    return OracleReport(f"integral[{name}]", est, float(exact), abs(est - exact), tol,
                        {"stderr": err, "samples": samples})
