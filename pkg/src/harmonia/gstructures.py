"""Canonical constant-coefficient tensors of the model G-structures.

Everything here lives on a flat fibre ``R^m`` with its standard inner product:
quaternion/octonion multiplication tables, the Kaehler, SU(3), G2 and
Spin(7) forms, contact and 3-contact models, the quaternionic four-form, and
the composite forms built from contact data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .multilinear import (
    AlternatingForm,
    PointMetric,
    contract,
    from_tensor,
    hodge_star,
    to_tensor,
    wedge,
    wedge_coeffs,
)

__all__ = [
    "AlgebraTable",
    "CanonicalTensorSet",
    "ContactModel",
    "ThreeContactModel",
    "algebra_mul",
    "beta_forms",
    "composite_coeffs",
    "contact_composites",
    "contact_model",
    "complex_structure",
    "fundamental_four_form",
    "g2_forms",
    "hyperkaehler_structures",
    "induced_metric_spin7",
    "kaehler_form",
    "octonion_table",
    "quaternion_table",
    "spin7_form",
    "spin7_split",
    "spin7_split_operator",
    "su3_forms",
    "three_contact_model",
    "COMPOSITE_KINDS",
]


# --------------------------------------------------------------------------
# composition algebras


@dataclass(frozen=True)
class AlgebraTable:
    """Structure constants ``table[i, j, k]``: ``e_i e_j = sum_k table[i, j, k] e_k``.

    Basis element 0 is the unit.
    """

    dim: int
    table: np.ndarray = field(repr=False)

    def mul(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("ijk,...i,...j->...k", self.table, x, y)

    def left_matrix(self, x: np.ndarray) -> np.ndarray:
        """Matrix of ``y -> x y``."""
        return np.einsum("ijk,...i->...kj", self.table, x)

    def right_matrix(self, y: np.ndarray) -> np.ndarray:
        """Matrix of ``x -> x y``."""
        return np.einsum("ijk,...j->...ki", self.table, y)

    def conj(self, x: np.ndarray) -> np.ndarray:
        out = -np.array(x, dtype=float)
        out[..., 0] *= -1
        return out

    def unit(self) -> np.ndarray:
        return np.eye(self.dim)[0]


def _table_from_mul(dim: int, mul) -> np.ndarray:
    basis = np.eye(dim)
    return np.array([[mul(basis[i], basis[j]) for j in range(dim)] for i in range(dim)])


def _qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return np.array([
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    ])


def _qconj(a: np.ndarray) -> np.ndarray:
    return a * np.array([1.0, -1.0, -1.0, -1.0])


def _cayley_dickson(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # (a, b)(c, d) = (ac - d* b, da + b c*)
    a, b, c, d = x[:4], x[4:], y[:4], y[4:]
    return np.concatenate([_qmul(a, c) - _qmul(_qconj(d), b), _qmul(d, a) + _qmul(b, _qconj(c))])


@lru_cache(maxsize=None)
def quaternion_table() -> AlgebraTable:
    """Quaternions on the basis ``(1, i, j, k)`` with ``ij = k``."""
    table = _table_from_mul(4, _qmul)
    table.setflags(write=False)
    return AlgebraTable(4, table)


def _z7_change_of_basis() -> np.ndarray:
    """Columns: the Cayley-Dickson coordinates of ``(1, e_0, ..., e_6)``.

    ``e_0, e_1, e_2`` are ``i, j, l``; the rest follow from the lines
    ``e_i e_{i+1} = e_{i+3}``.
    """
    basis = np.eye(8)
    e = [basis[1], basis[2], basis[4]]
    e.append(_cayley_dickson(e[0], e[1]))
    e.append(_cayley_dickson(e[1], e[2]))
    e.append(_cayley_dickson(e[2], e[3]))
    e.append(_cayley_dickson(e[3], e[4]))
    for i in range(7):
        if not np.allclose(_cayley_dickson(e[i], e[(i + 1) % 7]), e[(i + 3) % 7]):
            raise RuntimeError("Cayley-Dickson basis does not realise the Z7 lines")
    return np.column_stack([basis[0]] + e)


@lru_cache(maxsize=None)
def octonion_table(basis: str = "z7") -> AlgebraTable:
    """Octonions by Cayley-Dickson doubling of ``quaternion_table``.

    ``basis="z7"`` re-expresses the table on ``(1, e_0, ..., e_6)`` so that
    ``e_i e_{i+1} = e_{i+3}`` (indices mod 7); ``basis="cayley-dickson"``
    keeps the doubled coordinates ``(q, q') -> q + q' l``.
    """
    if basis == "cayley-dickson":
        table = _table_from_mul(8, _cayley_dickson)
    elif basis == "z7":
        change = _z7_change_of_basis()  # signed permutation, orthogonal
        inv = change.T

        def mul(x, y):
            return inv @ _cayley_dickson(change @ x, change @ y)

        table = _table_from_mul(8, mul)
    else:
        raise ValueError(f"unknown octonion basis {basis!r}")
    table.setflags(write=False)
    return AlgebraTable(8, table)


def algebra_mul(t: AlgebraTable, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != t.dim or y.shape[-1] != t.dim:
        raise ValueError(f"vectors must have length {t.dim}")
    return t.mul(x, y)


# --------------------------------------------------------------------------
# Hermitian, SU(3), G2, Spin(7)


def complex_structure(m: int) -> np.ndarray:
    """Block complex structure ``J`` on ``R^{2m}`` with ``<X, J Y> = sum e^{2k} ^ e^{2k+1}``."""
    J = np.zeros((2 * m, 2 * m))
    for k in range(m):
        J[2 * k, 2 * k + 1] = 1.0
        J[2 * k + 1, 2 * k] = -1.0
    return J


def two_form_of(mat: np.ndarray) -> AlternatingForm:
    """The two-form ``(X, Y) -> <X, mat Y>`` for skew ``mat``."""
    n = mat.shape[0]
    return AlternatingForm.from_array(n, 2, from_tensor(mat, n, 2))


def kaehler_form(n: int) -> AlternatingForm:
    """``omega = sum_{k<n} e^{2k} ^ e^{2k+1}`` on ``R^{2n}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return AlternatingForm(2 * n, 2, {(2 * k, 2 * k + 1): 1.0 for k in range(n)})


def compose_first_slot(form: AlternatingForm, mat: np.ndarray) -> AlternatingForm:
    """``(X, Y, ...) -> form(mat X, Y, ...)``; must come out alternating."""
    n, p = form.dim, form.degree
    tensor = np.tensordot(mat, to_tensor(form.to_array(), n, p), axes=([0], [0]))
    coeffs = from_tensor(tensor, n, p)
    if not np.allclose(to_tensor(coeffs, n, p), tensor, atol=1e-12):
        raise ValueError("composed tensor is not alternating")
    return AlternatingForm.from_array(n, p, coeffs)


def su3_forms() -> tuple[AlternatingForm, AlternatingForm, AlternatingForm]:
    """``(omega, Psi_+, Psi_-)`` on ``R^6`` with ``Psi_- = -Psi_+(J., ., .)``."""
    omega = kaehler_form(3)
    # Re of (e^0 + i e^1)(e^2 + i e^3)(e^4 + i e^5)... with J-compatible sign
    psi_plus = AlternatingForm(6, 3, {
        (0, 2, 4): 1.0, (0, 3, 5): -1.0, (1, 2, 5): -1.0, (1, 3, 4): -1.0,
    })
    psi_minus = -compose_first_slot(psi_plus, complex_structure(3))
    return omega, psi_plus, psi_minus


def g2_forms() -> tuple[AlternatingForm, AlternatingForm]:
    """``phi = sum e^i ^ e^{i+1} ^ e^{i+3}`` and its Hodge dual on ``R^7``."""
    phi = AlternatingForm(7, 3, {(i, (i + 1) % 7, (i + 3) % 7): 1.0 for i in range(7)})
    star_phi = AlternatingForm(
        7, 4, {((i + 2) % 7, (i + 4) % 7, (i + 5) % 7, (i + 6) % 7): -1.0 for i in range(7)}
    )
    return phi, star_phi


def spin7_form(sigma: int = 1) -> AlternatingForm:
    """The Cayley four-form on ``R^8`` with basis ``(e, e_0, ..., e_6)``."""
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    coeffs: dict[tuple[int, ...], float] = {}
    for i in range(7):
        coeffs[(0, 1 + i, 1 + (i + 1) % 7, 1 + (i + 3) % 7)] = 1.0
        coeffs[(1 + (i + 2) % 7, 1 + (i + 4) % 7, 1 + (i + 5) % 7, 1 + (i + 6) % 7)] = -float(sigma)
    return AlternatingForm(8, 4, coeffs)


def beta_forms(sigma: int = 1) -> list[AlternatingForm]:
    """Seven two-forms spanning the complement of spin(7) in so(8)."""
    out = []
    for i in range(7):
        out.append(AlternatingForm(8, 2, {
            (1 + i, 0): float(sigma),
            (1 + (i + 1) % 7, 1 + (i + 3) % 7): 1.0,
            (1 + (i + 4) % 7, 1 + (i + 5) % 7): 1.0,
            (1 + (i + 2) % 7, 1 + (i + 6) % 7): 1.0,
        }))
    return out


def spin7_split_operator(Phi: AlternatingForm) -> np.ndarray:
    """Matrix of ``psi -> *(psi ^ Phi)`` on the 28 compressed 2-form coefficients."""
    if (Phi.dim, Phi.degree) != (8, 4):
        raise ValueError("Phi must be a four-form on R^8")
    basis = np.eye(28)
    cols = [hodge_star(wedge(AlternatingForm.from_array(8, 2, b), Phi)).to_array() for b in basis]
    return np.column_stack(cols)


@lru_cache(maxsize=4)
def _spin7_projectors(key: bytes) -> tuple[np.ndarray, np.ndarray]:
    Phi = AlternatingForm.from_array(8, 4, np.frombuffer(key))
    op = spin7_split_operator(Phi)
    # the full-sum metric on 2-forms is 2x Euclidean on coefficients, so op is symmetric
    if not np.allclose(op, op.T, atol=1e-12):
        raise ValueError("split operator is not symmetric; Phi is not a Cayley form")
    vals, vecs = np.linalg.eigh(op)
    plus = np.abs(vals - 1.0) < 1e-9
    minus = np.abs(vals + 3.0) < 1e-9
    if plus.sum() != 21 or minus.sum() != 7:
        raise ValueError(f"expected eigenvalues {{1 x21, -3 x7}}, got {np.round(vals, 6)}")
    p21 = vecs[:, plus] @ vecs[:, plus].T
    p7 = vecs[:, minus] @ vecs[:, minus].T
    return p21, p7


def spin7_split(psi: AlternatingForm, Phi: AlternatingForm) -> tuple[AlternatingForm, AlternatingForm]:
    """Split a 2-form into its spin(7) (eigenvalue 1) and complement (eigenvalue -3) parts."""
    if (psi.dim, psi.degree) != (8, 2):
        raise ValueError("psi must be a two-form on R^8")
    p21, p7 = _spin7_projectors(Phi.to_array().tobytes())
    v = psi.to_array()
    return AlternatingForm.from_array(8, 2, p21 @ v), AlternatingForm.from_array(8, 2, p7 @ v)


def spin7_projectors(Phi: AlternatingForm) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projectors onto the 21- and 7-dimensional eigenspaces."""
    return _spin7_projectors(Phi.to_array().tobytes())


def induced_metric_spin7(Phi: AlternatingForm) -> PointMetric:
    """Metric recovered from the Cayley form.

    ``<X, Y> = (1/7) *((X _| Phi) ^ *(Y _| Phi))`` with the Hodge star of the
    standard oriented basis; the opposite overall sign yields ``-delta``.
    """
    basis = np.eye(8)
    contracted = [contract(v, Phi) for v in basis]
    duals = [hodge_star(c) for c in contracted]
    g = np.empty((8, 8))
    for a in range(8):
        for b in range(8):
            g[a, b] = hodge_star(wedge(contracted[a], duals[b])).to_array()[0] / 7.0
    return PointMetric(g)


# --------------------------------------------------------------------------
# contact and 3-contact fibre models


@dataclass(frozen=True)
class ContactModel:
    """Almost contact metric data on ``R^{2n+1}``: ``phi``, ``zeta``, ``eta``, ``F``."""

    n: int
    phi: np.ndarray = field(repr=False)
    zeta: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def eta(self) -> AlternatingForm:
        return AlternatingForm.from_vector(self.zeta)

    @property
    def F(self) -> AlternatingForm:
        return two_form_of(self.phi)


def contact_model(n: int) -> ContactModel:
    """``eta = e^{2n}``, ``phi`` the block complex structure on the first ``2n`` coordinates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    phi = np.zeros((2 * n + 1, 2 * n + 1))
    phi[: 2 * n, : 2 * n] = complex_structure(n)
    return ContactModel(n, phi, np.eye(2 * n + 1)[2 * n])


@dataclass(frozen=True)
class ThreeContactModel:
    """Three almost contact metric structures on ``R^{4n+3}`` (horizontal first, then ``zeta_1..3``)."""

    n: int
    phis: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)
    zetas: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)

    @property
    def dim(self) -> int:
        return 4 * self.n + 3

    @property
    def etas(self) -> list[AlternatingForm]:
        return [AlternatingForm.from_vector(z) for z in self.zetas]

    @property
    def Fs(self) -> list[AlternatingForm]:
        return [two_form_of(p) for p in self.phis]


def quaternion_units_right(m: int) -> list[np.ndarray]:
    """Matrices of right multiplication by ``i, j, k`` on ``H^m = R^{4m}``."""
    t = quaternion_table()
    units = np.eye(4)[1:]
    return [np.kron(np.eye(m), t.right_matrix(u)) for u in units]


def quaternion_units_left(m: int) -> list[np.ndarray]:
    """Matrices of left multiplication by ``i, j, k`` on ``H^m``; ``K = I J``."""
    t = quaternion_table()
    units = np.eye(4)[1:]
    return [np.kron(np.eye(m), t.left_matrix(u)) for u in units]


def three_contact_model(n: int) -> ThreeContactModel:
    """Tangent space of the 3-Sasakian sphere ``S^{4n+3} in H^{n+1}`` at ``p = 1``.

    ``zeta_i = p I_i`` with right multiplication, ``phi_i = -(right mult by I_i)``
    restricted and projected to the tangent space.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    N = 4 * n + 4
    rights = quaternion_units_right(n + 1)
    p = np.eye(N)[0]
    # tangent frame: horizontal coordinates 4..N-1, then p i, p j, p k
    frame = np.column_stack([np.eye(N)[k] for k in range(4, N)] + [R @ p for R in rights])
    proj = frame.T  # orthonormal frame, so coordinates are frame.T @ v
    phis = tuple(-proj @ R @ frame for R in rights)
    zetas = tuple(proj @ (R @ p) for R in rights)
    return ThreeContactModel(n, phis, zetas)


def hyperkaehler_structures(m: int) -> list[np.ndarray]:
    """Adapted basis ``I, J, K = IJ`` on ``R^{4m}`` (left quaternion multiplication)."""
    return quaternion_units_left(m)


def fundamental_four_form(m: int) -> AlternatingForm:
    """``Omega = sum_A omega_A ^ omega_A`` with ``omega_A(X, Y) = <X, A Y>`` on ``R^{4m}``."""
    out = AlternatingForm.zero(4 * m, 4)
    for A in hyperkaehler_structures(m):
        w = two_form_of(A)
        out = out + wedge(w, w)
    return out


# --------------------------------------------------------------------------
# composites


COMPOSITE_KINDS = (
    "eta-F^r",
    "F^r+1",
    "Psi^r",
    "Omega^r",
    "theta",
    "eta123",
    "cyc-eta-F-F",
    "cyc-eta-eta-F",
    "F1F2F3",
    "etaF+etaF",
    "FiFj",
    "Fk+(2n+1)etaij",
    "Psi-Omega",
    "Omega-quaternionic",
)


def _power(F: np.ndarray, dim: int, r: int) -> np.ndarray:
    out = np.ones(F.shape[:-1] + (1,))
    for k in range(r):
        out = wedge_coeffs(out, F, dim, 2 * k, 2)
    return out


def composite_coeffs(
    kind: str,
    dim: int,
    etas: list[np.ndarray],
    Fs: list[np.ndarray],
    *,
    r: int = 1,
    i: int = 0,
    j: int = 1,
    horizontal_n: int = 1,
) -> tuple[int, np.ndarray]:
    """Degree and stacked coefficients of a composite built from ``eta_i`` and ``F_i``.

    ``etas``/``Fs`` hold stacked one-form and two-form coefficients; single
    contact structures pass lists of length one.  ``horizontal_n`` is the
    ``n`` of ``R^{2n+1}`` / ``R^{4n+3}`` entering the numeric prefactors.
    """
    w = lambda a, b, p, q: wedge_coeffs(a, b, dim, p, q)  # noqa: E731
    n = horizontal_n
    if kind == "eta-F^r":
        return 2 * r + 1, w(etas[0], _power(Fs[0], dim, r), 1, 2 * r)
    if kind == "F^r+1":
        return 2 * r + 2, _power(Fs[0], dim, r + 1)
    if kind == "Psi^r":
        return 2 * r + 1, sum(w(etas[a], _power(Fs[a], dim, r), 1, 2 * r) for a in range(3))
    if kind == "Omega^r":
        return 2 * r + 2, sum(_power(Fs[a], dim, r + 1) for a in range(3))
    if kind == "eta123":
        return 3, w(w(etas[0], etas[1], 1, 1), etas[2], 2, 1)
    if kind == "theta":
        psi1 = sum(w(etas[a], Fs[a], 1, 2) for a in range(3))
        return 3, (2 * n + 3) * composite_coeffs("eta123", dim, etas, Fs)[1] + psi1
    if kind == "cyc-eta-F-F":
        return 5, sum(
            w(etas[a], w(Fs[(a + 1) % 3], Fs[(a + 2) % 3], 2, 2), 1, 4) for a in range(3)
        )
    if kind == "cyc-eta-eta-F":
        return 4, sum(
            w(w(etas[a], etas[(a + 1) % 3], 1, 1), Fs[(a + 2) % 3], 2, 2) for a in range(3)
        )
    if kind == "F1F2F3":
        return 6, w(w(Fs[0], Fs[1], 2, 2), Fs[2], 4, 2)
    if kind == "etaF+etaF":
        return 3, w(etas[i], Fs[j], 1, 2) + w(etas[j], Fs[i], 1, 2)
    if kind == "FiFj":
        return 4, w(Fs[i], Fs[j], 2, 2)
    if kind == "Fk+(2n+1)etaij":
        # (i, j, k) cyclic; caller passes k through ``i`` and the cyclic successors are derived
        kk = i
        ii, jj = (kk + 1) % 3, (kk + 2) % 3
        return 2, Fs[kk] + (2 * n + 1) * w(etas[ii], etas[jj], 1, 1)
    if kind == "Psi-Omega":
        omega1 = composite_coeffs("Omega^r", dim, etas, Fs, r=1)[1]
        cyc = composite_coeffs("cyc-eta-eta-F", dim, etas, Fs)[1]
        return 4, omega1 + (2 * n + 3) * cyc
    if kind == "Omega-quaternionic":
        # here ``Fs`` carries omega_I, omega_J, omega_K
        return 4, sum(w(Fs[a], Fs[a], 2, 2) for a in range(3))
    raise ValueError(f"unknown composite kind {kind!r}")


def contact_composites(n: int, kind: str, r: int = 1, *, i: int = 0, j: int = 1) -> AlternatingForm:
    """Constant-coefficient composite form on the flat contact/3-contact/quaternionic fibre."""
    if kind not in COMPOSITE_KINDS:
        raise ValueError(f"unknown composite kind {kind!r}")
    if kind in ("eta-F^r", "F^r+1"):
        model = contact_model(n)
        dim = model.dim
        etas, Fs = [model.eta.to_array()], [model.F.to_array()]
    elif kind == "Omega-quaternionic":
        dim = 4 * n
        etas, Fs = [], [two_form_of(A).to_array() for A in hyperkaehler_structures(n)]
    else:
        model3 = three_contact_model(n)
        dim = model3.dim
        etas = [e.to_array() for e in model3.etas]
        Fs = [F.to_array() for F in model3.Fs]
    degree = _composite_degree(kind, r)
    if degree > dim or r < 0:
        raise ValueError(f"degree overflow: {kind} with r={r} has degree {degree} > {dim}")
    degree, coeffs = composite_coeffs(kind, dim, etas, Fs, r=r, i=i, j=j, horizontal_n=n)
    return AlternatingForm.from_array(dim, degree, coeffs)


def _composite_degree(kind: str, r: int) -> int:
    return {
        "eta-F^r": 2 * r + 1, "F^r+1": 2 * r + 2, "Psi^r": 2 * r + 1, "Omega^r": 2 * r + 2,
        "theta": 3, "eta123": 3, "cyc-eta-F-F": 5, "cyc-eta-eta-F": 4, "F1F2F3": 6,
        "etaF+etaF": 3, "FiFj": 4, "Fk+(2n+1)etaij": 2, "Psi-Omega": 4, "Omega-quaternionic": 4,
    }[kind]


@dataclass(frozen=True)
class CanonicalTensorSet:
    """Named canonical forms of one structure on its flat fibre."""

    name: str
    dim: int
    forms: dict[str, AlternatingForm]
    sigma: int | None = None


def canonical_set(name: str, n: int = 1, sigma: int = 1) -> CanonicalTensorSet:
    """Bundle the canonical forms of a structure label."""
    if name == "u(n)":
        return CanonicalTensorSet(name, 2 * n, {"omega": kaehler_form(n)})
    if name == "su(3)":
        omega, pp, pm = su3_forms()
        return CanonicalTensorSet(name, 6, {"omega": omega, "psi+": pp, "psi-": pm,
                                            "omega^2": wedge(omega, omega)})
    if name == "g2":
        phi, sphi = g2_forms()
        return CanonicalTensorSet(name, 7, {"phi": phi, "*phi": sphi})
    if name == "spin7":
        return CanonicalTensorSet(name, 8, {"Phi": spin7_form(sigma)}, sigma)
    if name == "contact(n)":
        m = contact_model(n)
        return CanonicalTensorSet(name, m.dim, {"eta": m.eta, "F": m.F})
    if name == "3-contact(n)":
        m3 = three_contact_model(n)
        forms = {f"eta{a + 1}": e for a, e in enumerate(m3.etas)}
        forms.update({f"F{a + 1}": F for a, F in enumerate(m3.Fs)})
        return CanonicalTensorSet(name, m3.dim, forms)
    if name == "sp(n)sp(1)":
        return CanonicalTensorSet(name, 4 * n, {"Omega": fundamental_four_form(n)})
    raise ValueError(f"unknown structure {name!r}")


def norm_eta_F(n: int, r: int) -> float:
    """Closed form ``|eta ^ F^r|^2 = (2r+1)! r! n! / (n-r)!``."""
    return math.factorial(2 * r + 1) * math.factorial(r) * math.factorial(n) / math.factorial(n - r)


def norm_F_power(n: int, r: int) -> float:
    """Closed form ``|F^r|^2 = (2r)! r! n! / (n-r)!``."""
    return math.factorial(2 * r) * math.factorial(r) * math.factorial(n) / math.factorial(n - r)
