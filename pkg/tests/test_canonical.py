import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rodchaos.canonical import (
    CanonicalState, LevelSpec, canonical_to_noncanonical, complete_state_on_level, e3_of_angles,
    field4, force_from_state, grad_hamiltonian_nondim, hamiltonian4, hamiltonian_canonical,
    hamiltonian_nondim, i2bar, i2bar_kernel, level_seed, moment_matrix, momenta_to_moments,
    vector_field4,
)
from rodchaos.errors import AlignmentError, ConvergenceError, SingularityError
from rodchaos.homoclinic import planar_field, psi_rate
from rodchaos.model import DimensionlessParameters, RodParameters
from rodchaos.noncanonical import casimirs, hamiltonian9
from rodchaos.verify import central_gradient

angles = st.floats(0.2, math.pi - 0.2)
free = st.floats(-3.0, 3.0)
reduced = st.tuples(angles, free, st.floats(-1.0, 1.0), st.floats(-0.5, 1.5))
params = st.builds(DimensionlessParameters, st.floats(0.5, 3.0), st.floats(0.0, 4.0), st.floats(0.0, 4.0),
                   st.floats(-0.3, 0.3), st.floats(0.7, 1.5))
SECTION = DimensionlessParameters(1.7, 3.0, 3.0, 0.135, 0.4)


def test_e3_and_moment_examples():
    np.testing.assert_allclose(e3_of_angles((math.pi / 2, 0.3, 0.0)), [-1.0, 0.0, 0.0], atol=1e-16)
    m = momenta_to_moments((math.pi / 2, 0.0, 0.0), (1.0, 0.0, 0.0))
    np.testing.assert_allclose(m, [0.0, 1.0, 0.0], atol=1e-16)
    with pytest.raises(SingularityError):
        moment_matrix((0.0, 0.0, 0.0))


@given(angles, free, free, free, free, free)
def test_momenta_are_projections_of_moment(theta, psi, phi, a, b, c):
    # p_psi = m . e3 and p_phi = m3
    q = (theta, psi, phi)
    m = momenta_to_moments(q, (a, b, c))
    assert m @ e3_of_angles(q) == pytest.approx(b, abs=1e-10)
    assert m[2] == pytest.approx(c, abs=1e-12)
    assert np.linalg.norm(e3_of_angles(q)) == pytest.approx(1.0)


def test_force_example_and_alignment_error():
    q = (0.7, 0.2, 1.1)
    np.testing.assert_allclose(force_from_state(q, 0.5, 2.0, 2.0, 0.0), 2.0 * e3_of_angles(q), atol=1e-15)
    with pytest.raises(AlignmentError):
        force_from_state(q, 1.0, 0.5, 1.0, 0.3)


@given(reduced, free, params)
def test_canonical_state_has_prescribed_casimirs(s, phi, dp):
    rod = RodParameters.from_dimensionless(dp, B=1.3, C=0.9, C2=1.1)
    if dp.radicand(s[3]) <= 0:
        return
    y = canonical_to_noncanonical(s, phi, rod)
    np.testing.assert_allclose(casimirs(y, rod.lam), [rod.C1, rod.C2, 1.0], rtol=1e-12, atol=1e-12)
    Hc = hamiltonian_canonical((s[0], s[1], phi), rod.m3 * np.array([s[2], s[3], 1.0]), rod)
    assert Hc == pytest.approx(hamiltonian9(y, rod), rel=1e-13, abs=1e-13)


@given(reduced, reduced, params, st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_reduced_hamiltonian_is_scaled_full_hamiltonian(s1, s2, dp, B, C2):
    rod = RodParameters.from_dimensionless(dp, B=B, C=1.0, C2=C2)
    if min(dp.radicand(s1[3]), dp.radicand(s2[3])) <= 0:
        return
    d9 = hamiltonian9(canonical_to_noncanonical(s1, 0.4, rod), rod) - hamiltonian9(canonical_to_noncanonical(s2, -1.0, rod), rod)
    dn = hamiltonian_nondim(s1, dp) - hamiltonian_nondim(s2, dp)
    assert d9 == pytest.approx(rod.m3 ** 2 / B * dn, rel=1e-9, abs=1e-10)


def test_hamiltonian_examples():
    dp = DimensionlessParameters(1.0, 0.0, 0.0, 0.0, 0.0)
    assert hamiltonian_nondim((math.pi / 2, 0.0, 0.0, 0.0), dp) == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(SingularityError):
        hamiltonian_nondim((0.0, 0.0, 0.0, 0.0), dp)
    with pytest.raises(AlignmentError):
        hamiltonian_nondim((1.0, 0.0, 0.0, 2.0), DimensionlessParameters(1.0, 0.0, 0.0, 0.3, 0.4))


@given(reduced, params)
def test_gradient_and_compiled_kernels(s, dp):
    if dp.radicand(s[3]) <= 1e-3:
        return
    par = dp.as_array()
    num = central_gradient(lambda x: hamiltonian_nondim(x, dp), np.array(s))
    np.testing.assert_allclose(grad_hamiltonian_nondim(s, dp), num, rtol=1e-6, atol=1e-7)
    np.testing.assert_allclose(field4(0.0, np.array(s), par), vector_field4(s, dp), rtol=1e-14, atol=1e-14)
    assert hamiltonian4(np.array(s), par) == pytest.approx(hamiltonian_nondim(s, dp), rel=1e-14, abs=1e-14)
    assert i2bar_kernel(np.array(s), par) == pytest.approx(i2bar(s, dp), rel=1e-14, abs=1e-14)


def test_field_guard_returns_nan():
    par = SECTION.as_array()
    assert np.isnan(field4(0.0, np.array([0.0, 0.1, 0.1, 0.1]), par)).all()
    assert np.isnan(field4(0.0, np.array([1.0, 0.1, 0.1, 10.0]), par)).all()


@given(angles, st.floats(-1.0, 1.0), st.floats(0.5, 3.0), st.floats(0.0, 4.0), st.floats(0.0, 4.0))
def test_aligned_field_reduces_to_planar_system(theta, P, m, gamma, delta):
    dp = DimensionlessParameters(m, gamma, delta, 0.0, 0.0)
    f = field4(0.0, np.array([theta, 0.3, P, 1.0]), dp.as_array())
    pl = planar_field(theta, P, m, gamma)
    np.testing.assert_allclose([f[0], f[2]], pl, rtol=1e-12, atol=1e-14)
    assert f[1] == pytest.approx(psi_rate(theta))
    assert f[1] == pytest.approx(1.0 / (1.0 + math.cos(theta)))
    assert f[3] == 0.0


def test_i2bar_without_field():
    dp = DimensionlessParameters(1.7, 3.0, 3.0, 0.0, 0.4)
    s = (0.8, math.pi / 2, 0.3, 0.6)
    assert i2bar(s, dp) == pytest.approx(s[3] - math.sqrt(dp.mu) * s[2])


@given(angles, free, st.floats(-0.5, 0.5))
def test_level_completion_without_field_is_quadratic_root(theta, psi, P):
    spec = LevelSpec(1.2, DimensionlessParameters(1.7, 3.0, 3.0, 0.0, 0.4))
    Q = level_seed(theta, psi, P, spec)
    if Q is None:
        with pytest.raises(ConvergenceError):
            complete_state_on_level(theta, psi, P, spec)
        return
    s = complete_state_on_level(theta, psi, P, spec)
    assert s.p_psi_bar == pytest.approx(Q, abs=1e-12)
    assert hamiltonian_nondim(s, spec.params) == pytest.approx(1.2, abs=1e-12)


@pytest.mark.parametrize("lb", [0.135, 0.1575, 0.175, 0.186])
def test_level_completion_on_section_start(lb):
    spec = LevelSpec(0.9, DimensionlessParameters(1.7, 3.0, 3.0, lb, 0.4))
    s = complete_state_on_level(0.1, 0.0, 0.5, spec)
    assert isinstance(s, CanonicalState)
    assert spec.params.radicand(s.p_psi_bar) > 0
    assert abs(hamiltonian_nondim(s, spec.params) - 0.9) < 1e-12


def test_level_completion_below_minimum_raises():
    with pytest.raises(ConvergenceError):
        complete_state_on_level(1.0, 0.0, 0.0, LevelSpec(-50.0, SECTION))
