from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from harmonia.multilinear import (
    AlternatingForm,
    PointMetric,
    compound,
    contract,
    derivation_coeffs,
    derivation_matrix,
    form_inner,
    from_tensor,
    hodge_star,
    multi_indices,
    musical,
    sort_with_sign,
    to_tensor,
    wedge,
    wedge_coeffs,
)

TOL = 1e-10

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


@st.composite
def forms(draw, n, p):
    vals = draw(st.lists(finite, min_size=math.comb(n, p), max_size=math.comb(n, p)))
    return AlternatingForm.from_array(n, p, vals)


@st.composite
def vectors(draw, n):
    return np.array(draw(st.lists(finite, min_size=n, max_size=n)))


@st.composite
def metrics(draw, n):
    A = np.array(draw(st.lists(finite, min_size=n * n, max_size=n * n))).reshape(n, n)
    return PointMetric(A @ A.T + 0.5 * np.eye(n))


@st.composite
def dim_and_degrees(draw, max_dim=6):
    n = draw(st.integers(2, max_dim))
    p = draw(st.integers(0, n))
    q = draw(st.integers(0, n - p))
    return n, p, q


# ---- index bookkeeping


def test_multi_indices_are_increasing_and_complete():
    idx = multi_indices(5, 3)
    assert len(idx) == math.comb(5, 3)
    assert all(list(i) == sorted(set(i)) for i in idx)
    assert list(idx) == sorted(idx)


@given(st.permutations(list(range(5))))
def test_sort_with_sign_matches_permutation_parity(perm):
    sign, ordered = sort_with_sign(perm)
    inversions = sum(1 for i in range(5) for j in range(i + 1, 5) if perm[i] > perm[j])
    assert ordered == tuple(range(5))
    assert sign == (-1) ** inversions


def test_sort_with_sign_repeat_is_zero():
    assert sort_with_sign((1, 2, 1)) == (0, ())


# ---- form construction


def test_form_construction_sorts_keys_with_sign():
    a = AlternatingForm(4, 2, {(1, 0): 2.0, (2, 2): 5.0})
    assert a[(0, 1)] == -2.0
    assert a[(1, 0)] == 2.0
    assert a[(2, 2)] == 0.0
    assert a.coeffs == {(0, 1): -2.0}


def test_form_rejects_bad_input():
    with pytest.raises(ValueError):
        AlternatingForm(3, 4)
    with pytest.raises(ValueError):
        AlternatingForm(3, 2, {(0, 3): 1.0})
    with pytest.raises(ValueError):
        AlternatingForm.from_array(3, 2, [1.0, 2.0])
    with pytest.raises(ValueError):
        wedge(AlternatingForm.basis(3, 0, 1), AlternatingForm.basis(3, 1, 2))


def test_dense_switch_keeps_values():
    vals = np.arange(1.0, 11.0)
    a = AlternatingForm.from_array(5, 2, vals)
    assert a.is_dense
    np.testing.assert_array_equal(a.to_array(), vals)
    sparse = AlternatingForm.basis(5, 0, 1)
    assert not sparse.is_dense


@given(forms(4, 2), vectors(4), vectors(4))
def test_evaluation_is_alternating(a, x, y):
    assert a(x, y) == pytest.approx(-a(y, x), abs=TOL)
    assert a(x, x) == pytest.approx(0.0, abs=TOL)


def test_evaluation_on_basis_vectors_gives_coefficient():
    a = AlternatingForm(4, 2, {(1, 3): 7.0})
    e = np.eye(4)
    assert a(e[1], e[3]) == pytest.approx(7.0)
    assert a(e[3], e[1]) == pytest.approx(-7.0)


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))).flatmap(
    lambda np_: st.tuples(st.just(np_[0]), st.just(np_[1]), forms(*np_))))
def test_tensor_round_trip(args):
    n, p, a = args
    t = to_tensor(a.to_array(), n, p)
    np.testing.assert_allclose(from_tensor(t, n, p), a.to_array(), atol=0)
    if p >= 2:
        np.testing.assert_allclose(t, -np.swapaxes(t, 0, 1), atol=0)


# ---- wedge


@given(dim_and_degrees().flatmap(lambda d: st.tuples(st.just(d), forms(d[0], d[1]), forms(d[0], d[2]))))
def test_wedge_graded_commutative(args):
    (n, p, q), a, b = args
    lhs = wedge(a, b)
    rhs = (-1) ** (p * q) * wedge(b, a)
    assert lhs.isclose(rhs, atol=TOL)


@given(forms(6, 1), forms(6, 2), forms(6, 2))
def test_wedge_associative(a, b, c):
    assert wedge(wedge(a, b), c).isclose(wedge(a, wedge(b, c)), atol=TOL)


@given(forms(5, 1))
def test_one_form_squares_to_zero(a):
    assert wedge(a, a).max_abs() < TOL


@given(forms(5, 2), forms(5, 2), forms(5, 1))
def test_wedge_bilinear(a, b, c):
    assert wedge(a + b, c).isclose(wedge(a, c) + wedge(b, c), atol=TOL)
    assert wedge(2.5 * a, c).isclose(2.5 * wedge(a, c), atol=TOL)


def test_wedge_of_basis_forms():
    e = lambda *i: AlternatingForm.basis(4, *i)  # noqa: E731
    assert wedge(e(2), e(0)) == -1.0 * e(0, 2)
    assert (e(0) ^ e(1) ^ e(2) ^ e(3)) == e(0, 1, 2, 3)


def test_wedge_coeffs_batched_matches_scalar():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(7, 10))
    B = rng.normal(size=(7, 5))
    out = wedge_coeffs(A, B, 5, 2, 1)
    for k in range(7):
        ref = wedge(AlternatingForm.from_array(5, 2, A[k]), AlternatingForm.from_array(5, 1, B[k]))
        np.testing.assert_allclose(out[k], ref.to_array(), atol=1e-14)


# ---- interior product


@given(dim_and_degrees(5).flatmap(lambda d: st.tuples(st.just(d), forms(d[0], d[1]), forms(d[0], d[2]),
                                                       vectors(d[0]))))
def test_contract_is_antiderivation(args):
    (n, p, q), a, b, v = args
    assume(p >= 1 and q >= 1)
    lhs = contract(v, wedge(a, b))
    rhs = wedge(contract(v, a), b) + (-1) ** p * wedge(a, contract(v, b))
    assert lhs.isclose(rhs, atol=1e-9)


@given(forms(5, 3), vectors(5))
def test_contract_twice_vanishes(a, v):
    assert contract(v, contract(v, a)).max_abs() < TOL


@given(forms(4, 2), vectors(4), vectors(4))
def test_contract_matches_evaluation(a, v, w):
    assert contract(w, contract(v, a)).to_array()[0] == pytest.approx(a(v, w), abs=TOL)


@given(metrics(3), forms(3, 1), forms(3, 2))
def test_contract_with_one_form_uses_sharp(m, alpha, a):
    v = musical(alpha.to_array(), m, "sharp")
    assert contract(alpha, a, m).isclose(contract(v, a), atol=TOL)


# ---- metric, Hodge star


def test_full_sum_norm_of_basis_forms():
    for p in range(0, 5):
        e = AlternatingForm.basis(4, *range(p)) if p else AlternatingForm.from_array(4, 0, [1.0])
        assert form_inner(e, e) == pytest.approx(math.factorial(p))


@given(metrics(4), forms(4, 2), forms(4, 2))
def test_inner_symmetric(m, a, b):
    assert form_inner(a, b, m) == pytest.approx(form_inner(b, a, m), abs=1e-9)


@given(metrics(4), forms(4, 2))
def test_inner_positive(m, a):
    assert form_inner(a, a, m) >= -1e-12


@given(dim_and_degrees(5).flatmap(lambda d: st.tuples(st.just(d), metrics(d[0]), forms(d[0], d[1]),
                                                       forms(d[0], d[1]))))
def test_hodge_star_defining_identity(args):
    (n, p, _), m, a, b = args
    vol = np.sqrt(np.linalg.det(m.g))
    lhs = wedge(a, hodge_star(b, m)).to_array()[0]
    rhs = form_inner(a, b, m) / math.factorial(p) * vol
    assert lhs == pytest.approx(rhs, abs=1e-8 * max(1.0, abs(rhs)))


@given(dim_and_degrees(5).flatmap(lambda d: st.tuples(st.just(d), metrics(d[0]), forms(d[0], d[1]))))
def test_hodge_star_involution(args):
    (n, p, _), m, a = args
    twice = hodge_star(hodge_star(a, m), m)
    assert twice.isclose((-1) ** (p * (n - p)) * a, atol=1e-8 * max(1.0, a.max_abs()))


@given(dim_and_degrees(5).flatmap(lambda d: st.tuples(st.just(d), metrics(d[0]), forms(d[0], d[1]))))
def test_hodge_star_isometry(args):
    (n, p, _), m, a = args
    sa = hodge_star(a, m)
    lhs = form_inner(sa, sa, m) / math.factorial(n - p)
    rhs = form_inner(a, a, m) / math.factorial(p)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)


def test_orientation_flips_hodge_star():
    a = AlternatingForm.basis(3, 0)
    plus = hodge_star(a, PointMetric.euclidean(3))
    minus = hodge_star(a, PointMetric.euclidean(3, orientation=-1))
    assert plus == AlternatingForm.basis(3, 1, 2)
    assert minus == -1.0 * plus


@given(metrics(4), vectors(4))
def test_musical_round_trip(m, x):
    back = musical(musical(x, m, "flat"), m, "sharp")
    np.testing.assert_allclose(back, x, atol=1e-9)


def test_point_metric_validation():
    with pytest.raises(ValueError):
        PointMetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        PointMetric(-np.eye(2))
    with pytest.raises(ValueError):
        PointMetric(np.eye(2), orientation=0)
    with pytest.raises(ValueError):
        musical(np.ones(2), PointMetric.euclidean(2), "up")


# ---- compound matrices and derivations


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_compound_is_multiplicative(p, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(5, 4))
    B = rng.normal(size=(4, 6))
    np.testing.assert_allclose(compound(A @ B, p), compound(A, p) @ compound(B, p), atol=1e-9)


def test_compound_top_degree_is_determinant():
    A = np.random.default_rng(0).normal(size=(5, 5))
    assert compound(A, 5)[0, 0] == pytest.approx(np.linalg.det(A))
    np.testing.assert_allclose(compound(A, 1), A)


@given(st.integers(0, 2**31 - 1))
def test_derivation_obeys_leibniz(seed):
    rng = np.random.default_rng(seed)
    n = 5
    M = rng.normal(size=(n, n))
    a = rng.normal(size=math.comb(n, 2))
    b = rng.normal(size=math.comb(n, 1))
    lhs = derivation_coeffs(M, wedge_coeffs(a, b, n, 2, 1), n, 3)
    rhs = wedge_coeffs(derivation_coeffs(M, a, n, 2), b, n, 2, 1) + wedge_coeffs(a, derivation_coeffs(M, b, n, 1), n, 2, 1)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_derivation_is_linearised_compound(seed):
    # d/dt compound(I + tM)^T at t = 0 is the induced derivation
    rng = np.random.default_rng(seed)
    n, p, t = 4, 2, 1e-6
    M = rng.normal(size=(n, n))
    num = (compound(np.eye(n) + t * M, p) - compound(np.eye(n) - t * M, p)).T / (2 * t)
    np.testing.assert_allclose(derivation_matrix(M, n, p), num, atol=1e-7)


def test_derivation_of_zero_form_is_zero():
    out = derivation_coeffs(np.ones((3, 3)), np.array([2.0]), 3, 0)
    np.testing.assert_array_equal(out, [0.0])
