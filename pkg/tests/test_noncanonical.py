import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rodchaos.dynamics.dop853 import IntegratorConfig, integrate
from rodchaos.model import RodParameters
from rodchaos.noncanonical import (
    BodyState9, casimir_gradients, casimirs, field9, field_params, grad_hamiltonian9, hamiltonian9,
    integrals, jacobi_defect, poisson_bracket, saddle_state, structure_matrix, vector_field9,
)
from rodchaos.verify import central_gradient

states = st.lists(st.floats(-2.0, 2.0), min_size=9, max_size=9).map(np.array)
lams = st.floats(-2.0, 2.0)
ELASTIC = RodParameters(B1=1.3, B2=0.8, C=2.0, H=3.0, J=4.0, K=5.0, lam=0.7)


def bracket_terms(gf, gg, s, lam):
    # four-term expansion in the moment, force and field blocks
    m, n, e = s[0:3], s[3:6], s[6:9]
    fm, fn, fe = gf[0:3], gf[3:6], gf[6:9]
    gm, gn, ge = gg[0:3], gg[3:6], gg[6:9]
    return (-m @ np.cross(fm, gm) - n @ (np.cross(fm, gn) + np.cross(fn, gm))
            - e @ (np.cross(fm, ge) + np.cross(fe, gm)) - lam * e @ np.cross(fn, gn))


def test_structure_matrix_trivial_cases():
    np.testing.assert_array_equal(structure_matrix(np.zeros(9), 1.5), np.zeros((9, 9)))
    J = structure_matrix(np.arange(9.0), 0.0)
    np.testing.assert_array_equal(J[3:6, 3:6], np.zeros((3, 3)))


@given(states, lams)
def test_structure_matrix_is_exactly_antisymmetric(s, lam):
    J = structure_matrix(s, lam)
    assert np.array_equal(J, -J.T)


@given(states, lams, states, states)
def test_bracket_matches_term_expansion(s, lam, gf, gg):
    assert poisson_bracket(gf, gg, s, lam) == pytest.approx(bracket_terms(gf, gg, s, lam), abs=1e-13)
    assert poisson_bracket(gf, gf, s, lam) == pytest.approx(0.0, abs=1e-14)


def test_jacobi_defect_vanishes_on_all_triples(rng):
    for s in rng.normal(size=(5, 9)):
        lam = rng.uniform(-2, 2)
        worst = max(abs(jacobi_defect(i, j, k, s, lam))
                    for i, j, k in itertools.combinations_with_replacement(range(9), 3))
        assert worst < 1e-12
    assert jacobi_defect(2, 2, 5, rng.normal(size=9), 0.0) == 0.0


@given(states, lams)
def test_casimirs_are_annihilated(s, lam):
    np.testing.assert_allclose(structure_matrix(s, lam) @ casimir_gradients(s, lam).T, 0.0, atol=1e-12)


def test_casimir_values():
    s = BodyState9(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 2.0]), np.array([0.0, 0.6, 0.8]))
    C1, C2, C3 = casimirs(s, 0.0)
    assert (C1, C2, C3) == (2.0, pytest.approx(1.6), pytest.approx(1.0))


@given(states)
def test_casimir_gradients_match_finite_differences(s):
    G = casimir_gradients(s, 0.9)
    for i in range(3):
        np.testing.assert_allclose(G[i], central_gradient(lambda x: casimirs(x, 0.9)[i], s), atol=1e-8)


def test_hamiltonian_values():
    rigid = RodParameters(B1=1.0, B2=1.0, C=1.0)
    assert hamiltonian9(np.zeros(9), rigid) == 0.0
    s = np.array([0, 0, 1.0, 0, 0, 2.0, 0.3, 0.4, 0.5])
    assert hamiltonian9(s, rigid) == pytest.approx(2.5)
    s2 = s.copy()
    s2[6:9] = [-1.0, 2.0, 0.1]
    assert hamiltonian9(s2, ELASTIC) == hamiltonian9(s, ELASTIC)


@given(states)
def test_hamiltonian_gradient(s):
    np.testing.assert_allclose(grad_hamiltonian9(s, ELASTIC),
                               central_gradient(lambda x: hamiltonian9(x, ELASTIC), s), rtol=1e-7, atol=1e-8)


@given(states)
def test_vector_field_is_structure_times_gradient(s):
    expected = structure_matrix(s, ELASTIC.lam) @ grad_hamiltonian9(s, ELASTIC)
    np.testing.assert_allclose(vector_field9(s, ELASTIC), expected, atol=1e-12)
    np.testing.assert_allclose(field9(0.0, s, field_params(ELASTIC)), expected, atol=1e-12)


def test_vector_field_special_states():
    np.testing.assert_allclose(vector_field9(saddle_state(ELASTIC), ELASTIC), 0.0, atol=1e-15)
    p0 = RodParameters(B1=1.3, B2=0.8, C=2.0, H=3.0, J=4.0, K=5.0, lam=0.0)
    s = np.linspace(-1, 1, 9)
    u = s[0:3] * np.array([1 / 1.3, 1 / 0.8, 0.5])
    np.testing.assert_allclose(vector_field9(s, p0)[3:6], np.cross(s[3:6], u), atol=1e-15)


def test_first_integrals():
    p = RodParameters(B1=2.0, B2=2.0, C=1.0)
    I = integrals(np.array([0, 0, 3.0, 1, 1, 1, 0, 0, 1]), p)
    assert I.I1 == 6.0 and I.I1_valid and I.I2_valid
    s = np.array([1.0, 2, 3, 4, 5, 6, 0, 0, 1])
    assert integrals(s, p).I2 == pytest.approx(s[0:3] @ s[3:6] + 2.0 * p.lam)
    assert not integrals(s, ELASTIC).I1_valid


def test_torque_integral_is_conserved_for_isotropic_rigid_rod():
    p = RodParameters(B1=1.0, B2=1.0, C=1.5, lam=0.4)
    y0 = np.array([0.3, -0.2, 1.1, 0.5, 0.1, 0.9, 0.2, 0.3, 0.93])
    y0[6:9] /= np.linalg.norm(y0[6:9])
    tr = integrate(field9, y0, 100.0, IntegratorConfig(), par=field_params(p))
    ys = tr(np.linspace(0, 100, 401))
    I2 = np.array([integrals(y, p).I2 for y in ys])
    H = np.array([hamiltonian9(y, p) for y in ys])
    C = np.array([casimirs(y, p.lam) for y in ys])
    assert np.max(np.abs(I2 - I2[0])) < 1e-9
    assert np.max(np.abs(H - H[0])) < 1e-9
    assert np.max(np.abs(C - C[0])) < 1e-9
