"""Exterior algebra over a finite-dimensional real inner-product space.

Forms are stored by their coefficients on increasing multi-indices, i.e. the
values ``alpha(e_{i1}, ..., e_{ip})`` for ``i1 < ... < ip``.  The fibre
metric is the *full* tuple sum over all ordered ``p``-tuples of orthonormal
vectors, which is ``p!`` times the determinant pairing.

Two layers live here:

* ``AlternatingForm`` / ``PointMetric`` and the pure functions ``wedge``,
  ``contract``, ``hodge_star``, ``form_inner``, ``musical``.
* Batched kernels (``*_coeffs``, ``compound``, ``derivation_coeffs``) acting on
  stacked coefficient arrays of shape ``(..., C(n, p))``; the manifold and
  harmonic modules run on these.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ALG_TOL",
    "AlternatingForm",
    "PointMetric",
    "compound",
    "compound_levels",
    "contract",
    "contract_coeffs",
    "derivation_coeffs",
    "derivation_matrix",
    "from_tensor",
    "form_inner",
    "hodge_coeffs",
    "hodge_star",
    "index_of",
    "inner_coeffs",
    "multi_indices",
    "musical",
    "sort_with_sign",
    "to_tensor",
    "wedge",
    "wedge_coeffs",
]

ALG_TOL = 1e-12


# --------------------------------------------------------------------------
# index bookkeeping


@lru_cache(maxsize=None)
def multi_indices(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    """Increasing multi-indices of length ``p`` in ``range(n)`` (lexicographic)."""
    return tuple(itertools.combinations(range(n), p))


@lru_cache(maxsize=None)
def index_of(n: int, p: int) -> dict[tuple[int, ...], int]:
    return {idx: k for k, idx in enumerate(multi_indices(n, p))}


def sort_with_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sort ``idx`` and return the permutation sign; sign 0 on a repeat."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(idx)


@lru_cache(maxsize=None)
def _wedge_tensor(n: int, p: int, q: int) -> np.ndarray:
    out = np.zeros((math.comb(n, p + q), math.comb(n, p), math.comb(n, q)))
    target = index_of(n, p + q)
    for a, idx_a in enumerate(multi_indices(n, p)):
        for b, idx_b in enumerate(multi_indices(n, q)):
            sign, merged = sort_with_sign(idx_a + idx_b)
            if sign:
                out[target[merged], a, b] = sign
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _contract_tensor(n: int, p: int) -> np.ndarray:
    # (v _| alpha)_J = sum_c v^c alpha_{c J}
    out = np.zeros((math.comb(n, p - 1), n, math.comb(n, p)))
    source = index_of(n, p)
    for j, idx in enumerate(multi_indices(n, p - 1)):
        for c in range(n):
            sign, merged = sort_with_sign((c,) + idx)
            if sign:
                out[j, c, source[merged]] = sign
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _derivation_tensor(n: int, p: int) -> np.ndarray:
    # (D(A) s)_I = sum_slots sum_c A[c, i_s] s_{I with i_s -> c}
    size = math.comb(n, p)
    out = np.zeros((size, size, n, n))
    source = index_of(n, p)
    for i, idx in enumerate(multi_indices(n, p)):
        for slot, k in enumerate(idx):
            for c in range(n):
                replaced = idx[:slot] + (c,) + idx[slot + 1:]
                sign, merged = sort_with_sign(replaced)
                if sign:
                    out[i, source[merged], c, k] += sign
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _hodge_signs(n: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    comp = index_of(n, n - p)
    target = np.empty(math.comb(n, p), dtype=int)
    signs = np.empty(math.comb(n, p))
    for i, idx in enumerate(multi_indices(n, p)):
        rest = tuple(k for k in range(n) if k not in idx)
        signs[i], _ = sort_with_sign(idx + rest)
        target[i] = comp[rest]
    return target, signs


# --------------------------------------------------------------------------
# batched kernels


def wedge_coeffs(a: np.ndarray, b: np.ndarray, n: int, p: int, q: int) -> np.ndarray:
    """Wedge product of stacked coefficient arrays."""
    if p + q > n:
        raise ValueError(f"degree overflow: {p} + {q} > {n}")
    T = _wedge_tensor(n, p, q)
    a = np.asarray(a, dtype=float)[..., :, None]
    b = np.asarray(b, dtype=float)[..., None, :]
    return _bilinear(T, a * b)


def _bilinear(T: np.ndarray, outer: np.ndarray) -> np.ndarray:
    # T[k, i, j] applied to a stacked outer product (..., i, j) through one matmul
    lead = outer.shape[:-2]
    flat = outer.reshape(lead + (-1,))
    return flat @ T.reshape(T.shape[0], -1).T


def contract_coeffs(v: np.ndarray, a: np.ndarray, n: int, p: int) -> np.ndarray:
    """Interior product ``v _| a`` of stacked vectors and ``p``-form coefficients."""
    if p < 1:
        raise ValueError("cannot contract a 0-form")
    outer = np.asarray(v, dtype=float)[..., :, None] * np.asarray(a, dtype=float)[..., None, :]
    return _bilinear(_contract_tensor(n, p), outer)


def derivation_coeffs(mat: np.ndarray, a: np.ndarray, n: int, p: int) -> np.ndarray:
    """Apply the derivation induced by ``mat`` on every slot of a ``p``-form.

    Returns ``sum_s a(..., mat^T e_{i_s}, ...)``, i.e. component
    ``sum_s sum_c mat[c, i_s] a_{..c..}``.
    """
    if p == 0:
        return np.zeros_like(a)
    M = derivation_matrix(mat, n, p)
    return np.einsum("...ij,...j->...i", M, a)


def derivation_matrix(mat: np.ndarray, n: int, p: int) -> np.ndarray:
    """Matrix of ``derivation_coeffs(mat, ., n, p)`` on the compressed basis."""
    T = _derivation_tensor(n, p)
    mat = np.asarray(mat, dtype=float)
    flat = mat.reshape(mat.shape[:-2] + (-1,)) @ T.reshape(T.shape[0] * T.shape[1], -1).T
    return flat.reshape(mat.shape[:-2] + T.shape[:2])


@lru_cache(maxsize=None)
def _laplace_tables(m: int, n: int, p: int):
    # expansion of p-minors along their first row
    rows_prev = index_of(m, p - 1)
    cols_prev = index_of(n, p - 1)
    rows = multi_indices(m, p)
    cols = multi_indices(n, p)
    first = np.array([K[0] for K in rows])
    rest = np.array([rows_prev[K[1:]] for K in rows])
    col_s = np.array([[I[s] for s in range(p)] for I in cols])
    col_rest = np.array([[cols_prev[I[:s] + I[s + 1:]] for s in range(p)] for I in cols])
    return first, rest, col_s, col_rest


def compound(mat: np.ndarray, p: int) -> np.ndarray:
    """``p``-th compound matrix: all ``p x p`` minors, rows/cols in lexicographic order.

    Built level by level through Laplace expansion along the first row.
    """
    mat = np.asarray(mat, dtype=float)
    m, n = mat.shape[-2:]
    if p == 0:
        return np.ones(mat.shape[:-2] + (1, 1))
    if p > min(m, n):
        return np.zeros(mat.shape[:-2] + (math.comb(m, p), math.comb(n, p)))
    return compound_levels(mat, p)[p - 1]


def compound_levels(mat: np.ndarray, p: int, levels: list[np.ndarray] | None = None) -> list[np.ndarray]:
    """Compound matrices of degrees ``1..p``; extends a previously returned list in place."""
    m, n = mat.shape[-2:]
    levels = [np.asarray(mat, dtype=float)] if not levels else levels
    mat = levels[0]
    for level in range(len(levels) + 1, min(p, m, n) + 1):
        first, rest, col_s, col_rest = _laplace_tables(m, n, level)
        out = levels[-1]
        acc = None
        for s in range(level):
            term = mat[..., first[:, None], col_s[None, :, s]] * out[..., rest[:, None], col_rest[None, :, s]]
            if acc is None:
                acc = term
            elif s % 2:
                acc -= term
            else:
                acc += term
        levels.append(acc)
    return levels


def inner_coeffs(a: np.ndarray, b: np.ndarray, g_inv: np.ndarray, p: int) -> np.ndarray:
    """Full-sum fibre metric of stacked ``p``-forms under inverse metric ``g_inv``."""
    if p == 0:
        return a[..., 0] * b[..., 0]
    gp = compound(g_inv, p)
    return math.factorial(p) * np.einsum("...i,...i->...", a, np.einsum("...ij,...j->...i", gp, b))


def hodge_coeffs(a: np.ndarray, g: np.ndarray, n: int, p: int, orientation: int = 1) -> np.ndarray:
    """Hodge star of stacked coefficient arrays for metric ``g`` (coordinate frame)."""
    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g)
    raised = np.einsum("...ij,...j->...i", compound(g_inv, p), a)
    vol = np.sqrt(np.linalg.det(g))
    target, signs = _hodge_signs(n, p)
    out = np.zeros(raised.shape[:-1] + (math.comb(n, n - p),))
    out[..., target] = raised * signs
    return orientation * vol[..., None] * out


# --------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class PointMetric:
    """Inner product on ``R^n`` in a declared basis plus an orientation sign."""

    g: np.ndarray
    orientation: int = 1
    g_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("metric must be a square matrix")
        if not np.allclose(g, g.T, atol=1e-12, rtol=0):
            raise ValueError("metric must be symmetric")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise ValueError("metric is not positive definite")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        g.setflags(write=False)
        g_inv = np.linalg.inv(g)
        g_inv.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g_inv", g_inv)

    @classmethod
    def euclidean(cls, n: int, orientation: int = 1) -> PointMetric:
        return cls(np.eye(n), orientation)

    @property
    def dim(self) -> int:
        return self.g.shape[0]


class AlternatingForm:
    """Immutable degree-``p`` alternating form on ``R^n``.

    ``coeffs`` maps index tuples to reals.  Unsorted keys are sorted on
    insertion with the permutation sign applied; keys with a repeated index
    are dropped.  Storage switches to a dense vector when more than half of
    the ``C(n, p)`` coefficients are non-zero.
    """

    __slots__ = ("_dim", "_degree", "_sparse", "_dense")

    def __init__(self, dim: int, degree: int, coeffs: Mapping[Sequence[int], float] | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0 <= degree <= dim:
            raise ValueError(f"degree {degree} outside [0, {dim}]")
        self._dim = dim
        self._degree = degree
        data: dict[tuple[int, ...], float] = {}
        for key, value in (coeffs or {}).items():
            key = tuple(int(k) for k in key)
            if len(key) != degree:
                raise ValueError(f"key {key} has length != degree {degree}")
            if any(k < 0 or k >= dim for k in key):
                raise ValueError(f"key {key} out of range for dim {dim}")
            sign, ordered = sort_with_sign(key)
            if sign == 0:
                continue
            data[ordered] = data.get(ordered, 0.0) + sign * float(value)
        self._set(data)

    def _set(self, data: dict[tuple[int, ...], float]) -> None:
        data = {k: v for k, v in data.items() if v != 0.0}
        size = math.comb(self._dim, self._degree)
        if len(data) > size // 2:
            dense = np.zeros(size)
            lookup = index_of(self._dim, self._degree)
            for k, v in data.items():
                dense[lookup[k]] = v
            dense.setflags(write=False)
            self._dense, self._sparse = dense, None
        else:
            self._dense, self._sparse = None, data

    @classmethod
    def from_array(cls, dim: int, degree: int, values: Iterable[float]) -> AlternatingForm:
        """Build from a compressed coefficient vector in lexicographic index order."""
        values = np.asarray(values, dtype=float)
        if values.shape != (math.comb(dim, degree),):
            raise ValueError("coefficient vector has the wrong length")
        form = cls.__new__(cls)
        form._dim, form._degree = dim, degree
        form._set({idx: float(v) for idx, v in zip(multi_indices(dim, degree), values)})
        return form

    @classmethod
    def basis(cls, dim: int, *indices: int) -> AlternatingForm:
        """``e^{i1} ^ ... ^ e^{ip}`` (indices in any order, sign applied)."""
        return cls(dim, len(indices), {tuple(indices): 1.0})

    @classmethod
    def zero(cls, dim: int, degree: int) -> AlternatingForm:
        return cls(dim, degree)

    @classmethod
    def from_vector(cls, covector: Sequence[float]) -> AlternatingForm:
        covector = np.asarray(covector, dtype=float)
        return cls.from_array(len(covector), 1, covector)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def is_dense(self) -> bool:
        return self._dense is not None

    @property
    def coeffs(self) -> dict[tuple[int, ...], float]:
        if self._sparse is not None:
            return dict(self._sparse)
        return {
            idx: float(v)
            for idx, v in zip(multi_indices(self._dim, self._degree), self._dense)
            if v != 0.0
        }

    def to_array(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense.copy()
        out = np.zeros(math.comb(self._dim, self._degree))
        lookup = index_of(self._dim, self._degree)
        for k, v in self._sparse.items():
            out[lookup[k]] = v
        return out

    def __getitem__(self, key: Sequence[int]) -> float:
        sign, ordered = sort_with_sign(tuple(key))
        if sign == 0:
            return 0.0
        if self._dense is not None:
            return sign * float(self._dense[index_of(self._dim, self._degree)[ordered]])
        return sign * self._sparse.get(ordered, 0.0)

    def __call__(self, *vectors: Sequence[float]) -> float:
        """Evaluate on ``p`` vectors given by components."""
        if len(vectors) != self._degree:
            raise ValueError("need exactly `degree` vectors")
        if self._degree == 0:
            return float(self.to_array()[0])
        mat = np.asarray(vectors, dtype=float).T  # n x p
        return float(compound(mat, self._degree)[:, 0] @ self.to_array())

    def _check_compatible(self, other: AlternatingForm) -> None:
        if not isinstance(other, AlternatingForm):
            raise TypeError("expected an AlternatingForm")
        if (self._dim, self._degree) != (other._dim, other._degree):
            raise ValueError("dimension/degree mismatch")

    def __add__(self, other: AlternatingForm) -> AlternatingForm:
        self._check_compatible(other)
        return AlternatingForm.from_array(self._dim, self._degree, self.to_array() + other.to_array())

    def __sub__(self, other: AlternatingForm) -> AlternatingForm:
        return self + (-other)

    def __neg__(self) -> AlternatingForm:
        return -1.0 * self

    def __mul__(self, scalar: float) -> AlternatingForm:
        return AlternatingForm.from_array(self._dim, self._degree, float(scalar) * self.to_array())

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> AlternatingForm:
        return self * (1.0 / scalar)

    def __xor__(self, other: AlternatingForm) -> AlternatingForm:
        return wedge(self, other)

    def max_abs(self) -> float:
        arr = self.to_array()
        return float(np.abs(arr).max()) if arr.size else 0.0

    def isclose(self, other: AlternatingForm, atol: float = ALG_TOL) -> bool:
        self._check_compatible(other)
        return bool(np.allclose(self.to_array(), other.to_array(), atol=atol, rtol=0))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AlternatingForm):
            return NotImplemented
        if (self._dim, self._degree) != (other._dim, other._degree):
            return False
        return bool(np.array_equal(self.to_array(), other.to_array()))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        terms = ", ".join(f"{k}: {v:.6g}" for k, v in sorted(self.coeffs.items())[:6])
        more = " ..." if len(self.coeffs) > 6 else ""
        return f"AlternatingForm(dim={self._dim}, degree={self._degree}, {{{terms}{more}}})"


# --------------------------------------------------------------------------
# operations


def _metric(m: PointMetric | None, n: int) -> PointMetric:
    if m is None:
        return PointMetric.euclidean(n)
    if m.dim != n:
        raise ValueError("metric dimension does not match form dimension")
    return m


def wedge(a: AlternatingForm, b: AlternatingForm) -> AlternatingForm:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.degree + b.degree > a.dim:
        raise ValueError(f"degree overflow: {a.degree} + {b.degree} > {a.dim}")
    coeffs = wedge_coeffs(a.to_array(), b.to_array(), a.dim, a.degree, b.degree)
    return AlternatingForm.from_array(a.dim, a.degree + b.degree, coeffs)


def contract(
    v: Sequence[float] | AlternatingForm,
    a: AlternatingForm,
    m: PointMetric | None = None,
) -> AlternatingForm:
    """Interior product ``v _| a``.

    ``v`` is a vector by components; if a one-form is passed it is sharpened
    with ``m`` first.
    """
    if a.degree < 1:
        raise ValueError("cannot contract a 0-form")
    if isinstance(v, AlternatingForm):
        if v.degree != 1:
            raise ValueError("only one-forms can be sharpened")
        v = musical(v.to_array(), _metric(m, a.dim), "sharp")
    v = np.asarray(v, dtype=float)
    if v.shape != (a.dim,):
        raise ValueError("vector length must equal the form dimension")
    coeffs = contract_coeffs(v, a.to_array(), a.dim, a.degree)
    return AlternatingForm.from_array(a.dim, a.degree - 1, coeffs)


def hodge_star(a: AlternatingForm, m: PointMetric | None = None) -> AlternatingForm:
    m = _metric(m, a.dim)
    coeffs = hodge_coeffs(a.to_array(), m.g, a.dim, a.degree, m.orientation)
    return AlternatingForm.from_array(a.dim, a.dim - a.degree, coeffs)


def form_inner(a: AlternatingForm, b: AlternatingForm, m: PointMetric | None = None) -> float:
    """Full-tuple-sum inner product (``p!`` times the determinant pairing)."""
    if (a.dim, a.degree) != (b.dim, b.degree):
        raise ValueError("degree/dim mismatch")
    m = _metric(m, a.dim)
    return float(inner_coeffs(a.to_array(), b.to_array(), m.g_inv, a.degree))


def musical(x: Sequence[float], m: PointMetric, direction: str) -> np.ndarray:
    """``flat`` lowers a vector with ``g``; ``sharp`` raises a covector with ``g^{-1}``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise ValueError("input length must equal the metric dimension")
    if direction == "flat":
        return m.g @ x
    if direction == "sharp":
        return m.g_inv @ x
    raise ValueError("direction must be 'flat' or 'sharp'")


def to_tensor(coeffs: np.ndarray, n: int, p: int) -> np.ndarray:
    """Expand stacked compressed coefficients into full antisymmetric tensors."""
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.zeros(coeffs.shape[:-1] + (n,) * p)
    for k, idx in enumerate(multi_indices(n, p)):
        for perm in itertools.permutations(range(p)):
            sign, _ = sort_with_sign(perm)
            out[(Ellipsis,) + tuple(idx[s] for s in perm)] = sign * coeffs[..., k]
    return out


def from_tensor(tensor: np.ndarray, n: int, p: int) -> np.ndarray:
    """Read the increasing-index components of (assumed alternating) tensors."""
    tensor = np.asarray(tensor, dtype=float)
    return np.stack([tensor[(Ellipsis,) + idx] for idx in multi_indices(n, p)], axis=-1)
