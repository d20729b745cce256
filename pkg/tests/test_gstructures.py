from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from harmonia.gstructures import (
    COMPOSITE_KINDS,
    algebra_mul,
    beta_forms,
    canonical_set,
    complex_structure,
    compose_first_slot,
    contact_composites,
    contact_model,
    fundamental_four_form,
    g2_forms,
    hyperkaehler_structures,
    induced_metric_spin7,
    kaehler_form,
    norm_eta_F,
    norm_F_power,
    octonion_table,
    quaternion_table,
    spin7_form,
    spin7_projectors,
    spin7_split,
    spin7_split_operator,
    su3_forms,
    three_contact_model,
    two_form_of,
)
from harmonia.multilinear import AlternatingForm, contract, form_inner, hodge_star, wedge

ALG = 1e-12

unit = st.floats(-1.0, 1.0, allow_nan=False)
octonions = st.lists(unit, min_size=8, max_size=8).map(np.array)
quaternions = st.lists(unit, min_size=4, max_size=4).map(np.array)


# ---- normed division algebras


def test_quaternion_units():
    t = quaternion_table()
    one, i, j, k = np.eye(4)
    np.testing.assert_array_equal(algebra_mul(t, i, j), k)
    np.testing.assert_array_equal(algebra_mul(t, j, i), -k)
    np.testing.assert_array_equal(algebra_mul(t, i, i), -one)


@given(quaternions, quaternions, quaternions)
def test_quaternions_associative(x, y, z):
    t = quaternion_table()
    np.testing.assert_allclose(t.mul(t.mul(x, y), z), t.mul(x, t.mul(y, z)), atol=1e-14)


@pytest.mark.parametrize("basis", ["z7", "cayley-dickson"])
@given(x=octonions, y=octonions)
def test_octonion_norm_multiplicative(basis, x, y):
    t = octonion_table(basis)
    assert np.linalg.norm(t.mul(x, y)) == pytest.approx(np.linalg.norm(x) * np.linalg.norm(y), abs=1e-12)


@given(octonions, octonions)
def test_octonions_alternative(x, y):
    t = octonion_table()
    np.testing.assert_allclose(t.mul(t.mul(x, x), y), t.mul(x, t.mul(x, y)), atol=1e-12)
    np.testing.assert_allclose(t.mul(t.mul(y, x), x), t.mul(y, t.mul(x, x)), atol=1e-12)


@given(octonions)
def test_octonion_conjugate_gives_norm(x):
    t = octonion_table()
    np.testing.assert_allclose(t.mul(x, t.conj(x)), np.dot(x, x) * t.unit(), atol=1e-12)


def test_octonions_not_associative():
    t = octonion_table()
    e = np.eye(8)
    assoc = max(np.abs(t.mul(t.mul(e[a], e[b]), e[c]) - t.mul(e[a], t.mul(e[b], e[c]))).max()
                for a in range(1, 8) for b in range(1, 8) for c in range(1, 8))
    assert assoc > 1.0


def test_z7_lines():
    t = octonion_table("z7")
    e = np.eye(8)[1:]
    for i in range(7):
        np.testing.assert_array_equal(t.mul(e[i], e[(i + 1) % 7]), e[(i + 3) % 7])


def test_algebra_mul_rejects_wrong_length():
    with pytest.raises(ValueError):
        algebra_mul(quaternion_table(), np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        octonion_table("split")


@given(octonions, octonions)
def test_left_and_right_matrices(x, y):
    t = octonion_table()
    np.testing.assert_allclose(t.left_matrix(x) @ y, t.mul(x, y), atol=1e-14)
    np.testing.assert_allclose(t.right_matrix(y) @ x, t.mul(x, y), atol=1e-14)


# ---- Hermitian and SU(3)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_kaehler_form_from_complex_structure(m):
    J = complex_structure(m)
    np.testing.assert_array_equal(J @ J, -np.eye(2 * m))
    assert two_form_of(J) == kaehler_form(m)
    omega = kaehler_form(m)
    assert form_inner(omega, omega) == pytest.approx(2 * m)


def test_su3_norms():
    omega, pp, pm = su3_forms()
    assert abs(form_inner(omega, omega) - 6.0) < ALG
    assert abs(form_inner(pp, pp) - 24.0) < ALG
    assert abs(form_inner(pm, pm) - 24.0) < ALG


def test_su3_omega_squared_norm_is_288():
    omega, _, _ = su3_forms()
    w2 = wedge(omega, omega)
    assert abs(form_inner(w2, w2) - 288.0) < ALG


def test_su3_compatibility():
    omega, pp, pm = su3_forms()
    assert wedge(omega, pp).max_abs() < ALG
    assert wedge(omega, pm).max_abs() < ALG
    assert abs(form_inner(pp, pm)) < ALG
    assert hodge_star(pp).isclose(-1.0 * pm, atol=ALG)
    # omega^3 / 3! = vol and psi_+ ^ psi_- = -4 vol in this orientation
    assert wedge(omega, wedge(omega, omega)).to_array()[0] == pytest.approx(6.0)
    assert wedge(pp, pm).to_array()[0] == pytest.approx(-4.0)


def test_compose_first_slot_rejects_non_alternating():
    with pytest.raises(ValueError):
        compose_first_slot(AlternatingForm.basis(3, 0, 1), np.diag([1.0, 2.0, 3.0]))


# ---- G2


def test_g2_norms():
    phi, sphi = g2_forms()
    assert abs(form_inner(phi, phi) - 42.0) < ALG
    assert abs(form_inner(sphi, sphi) - 168.0) < ALG
    assert abs(4 * form_inner(phi, phi) - 7 * math.factorial(4)) < ALG


def test_g2_star_phi_is_hodge_dual():
    phi, sphi = g2_forms()
    assert hodge_star(phi).isclose(sphi, atol=ALG)
    assert wedge(phi, sphi).to_array()[0] == pytest.approx(7.0)


def test_g2_phi_is_octonion_product():
    # phi(x, y, z) = <x y, z> on imaginary octonions
    phi, _ = g2_forms()
    t = octonion_table()
    e = np.eye(8)
    for a, b, c in [(0, 1, 3), (1, 2, 4), (0, 2, 5), (3, 4, 6)]:
        val = float(t.mul(e[1 + a], e[1 + b]) @ e[1 + c])
        assert phi(np.eye(7)[a], np.eye(7)[b], np.eye(7)[c]) == pytest.approx(val)


# ---- Spin(7)


@pytest.mark.parametrize("sigma", [1, -1])
def test_spin7_wedge_square(sigma):
    Phi = spin7_form(sigma)
    assert abs(wedge(Phi, Phi).to_array()[0] - 14.0 * sigma) < ALG


@pytest.mark.parametrize("sigma", [1, -1])
def test_spin7_split_dimensions_and_eigenvalues(sigma):
    Phi = spin7_form(sigma)
    vals = np.linalg.eigvalsh(spin7_split_operator(Phi))
    assert np.sum(np.abs(vals - 1.0) < ALG) == 21
    assert np.sum(np.abs(vals + 3.0) < ALG) == 7
    p21, p7 = spin7_projectors(Phi)
    np.testing.assert_allclose(p21 + p7, np.eye(28), atol=ALG)
    assert round(np.trace(p21)) == 21 and round(np.trace(p7)) == 7


@pytest.mark.parametrize("sigma", [1, -1])
def test_beta_forms_span_the_complement(sigma):
    Phi = spin7_form(sigma)
    for b in beta_forms(sigma):
        inside, outside = spin7_split(b, Phi)
        assert inside.max_abs() < ALG
        assert outside.isclose(b, atol=ALG)


@pytest.mark.parametrize("sigma", [1, -1])
def test_spin7_induced_metric_is_identity(sigma):
    g = induced_metric_spin7(spin7_form(sigma)).g
    assert np.abs(g - np.eye(8)).max() < ALG


@pytest.mark.parametrize("sigma", [1, -1])
def test_spin7_contraction_gram(sigma):
    Phi = spin7_form(sigma)
    e = np.eye(8)
    G = np.array([[form_inner(contract(e[a], Phi), contract(e[b], Phi)) for b in range(8)] for a in range(8)])
    assert np.abs(G - 42.0 * np.eye(8)).max() < ALG


@given(st.lists(unit, min_size=8, max_size=8), st.lists(unit, min_size=8, max_size=8))
def test_spin7_contraction_inner_product(x, y):
    Phi = spin7_form(1)
    x, y = np.array(x), np.array(y)
    assert form_inner(contract(x, Phi), contract(y, Phi)) == pytest.approx(42.0 * x @ y, abs=1e-12)


def test_spin7_self_dual():
    Phi = spin7_form(1)
    assert hodge_star(Phi).isclose(Phi, atol=ALG)


def test_spin7_split_rejects_wrong_shape():
    with pytest.raises(ValueError):
        spin7_split(AlternatingForm.basis(6, 0, 1), spin7_form())
    with pytest.raises(ValueError):
        spin7_form(2)


# ---- contact and 3-contact fibres


@pytest.mark.parametrize("n", [1, 2, 3])
def test_contact_model_relations(n):
    m = contact_model(n)
    zeta = m.zeta
    np.testing.assert_allclose(m.phi @ m.phi, -np.eye(m.dim) + np.outer(zeta, zeta), atol=ALG)
    np.testing.assert_allclose(m.phi @ zeta, 0.0, atol=ALG)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_contact_norm_closed_forms(n):
    m = contact_model(n)
    F, eta = m.F, m.eta
    power = AlternatingForm.from_array(m.dim, 0, [1.0])
    for r in range(0, n + 1):
        ef = wedge(eta, power)
        assert form_inner(power, power) == pytest.approx(norm_F_power(n, r))
        assert form_inner(ef, ef) == pytest.approx(norm_eta_F(n, r))
        if 2 * r + 2 <= m.dim:
            power = wedge(power, F)


@pytest.mark.parametrize("n", [1, 2])
def test_three_contact_relations(n):
    m = three_contact_model(n)
    I = np.eye(m.dim)
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        phi_i, phi_j, phi_k = m.phis[i], m.phis[j], m.phis[k]
        np.testing.assert_allclose(phi_i @ phi_i, -I + np.outer(m.zetas[i], m.zetas[i]), atol=ALG)
        np.testing.assert_allclose(phi_i @ phi_j, phi_k + np.outer(m.zetas[i], m.zetas[j]), atol=ALG)
        np.testing.assert_allclose(phi_i @ m.zetas[j], m.zetas[k], atol=ALG)
        np.testing.assert_allclose(phi_i @ m.zetas[i], 0.0, atol=ALG)


@pytest.mark.parametrize("m", [1, 2])
def test_hyperkaehler_structures(m):
    I, J, K = hyperkaehler_structures(m)
    eye = np.eye(4 * m)
    for A in (I, J, K):
        np.testing.assert_allclose(A @ A, -eye, atol=ALG)
        np.testing.assert_allclose(A.T @ A, eye, atol=ALG)
    np.testing.assert_allclose(I @ J, K, atol=ALG)


def test_fundamental_four_form_norm_is_rotation_invariant():
    Omega = fundamental_four_form(1)
    # on R^4 each omega_A ^ omega_A = 2 vol
    assert Omega.to_array()[0] == pytest.approx(6.0)


@pytest.mark.parametrize("kind", COMPOSITE_KINDS)
def test_composites_build(kind):
    n = 2 if kind in ("F1F2F3", "cyc-eta-F-F", "F^r+1") else 1
    form = contact_composites(n, kind)
    assert form.max_abs() > 0


def test_composites_degree_overflow():
    with pytest.raises(ValueError):
        contact_composites(1, "F^r+1", r=2)
    with pytest.raises(ValueError):
        contact_composites(1, "nope")


def test_three_contact_degenerate_composites_vanish_for_n1():
    for kind in ("cyc-eta-F-F", "F1F2F3"):
        assert contact_composites(1, kind).max_abs() < ALG


@pytest.mark.parametrize("name", ["u(n)", "su(3)", "g2", "spin7", "contact(n)", "3-contact(n)", "sp(n)sp(1)"])
def test_canonical_sets(name):
    s = canonical_set(name, 1)
    assert s.forms
    for f in s.forms.values():
        assert f.dim == s.dim


def test_canonical_set_unknown():
    with pytest.raises(ValueError):
        canonical_set("e8")
