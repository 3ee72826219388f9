import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rodchaos.canonical import field4, hamiltonian_nondim
from rodchaos.dynamics.multipulse import (
    PulseCountError, canonical_from_regularized, count_pulses, field_reg, hamiltonian_reg, is_aligned,
    regularized_from_canonical, reversor, saddle_local_chart, saddle_local_chart9, shoot_multipulse,
    unfold_multipulse,
)
from rodchaos.errors import AlignmentError, ConvergenceError, NoSignChangeError, ParameterError
from rodchaos.homoclinic import homoclinic_orbit, orbit_closed_form, saddle_rate
from rodchaos.model import DimensionlessParameters

FREE = DimensionlessParameters(1.7, 1.0, 1.0, 0.0, 0.0)
TILTED = DimensionlessParameters(1.7, 1.0, 1.0, 0.001, 0.004)
ALIGNED = DimensionlessParameters(1.7, 1.0, 1.0, 0.001, 0.002)
ALIGNED_STIFF = DimensionlessParameters(1.7, 0.01, 0.01, 0.5, 1.0)

reduced = st.tuples(st.floats(0.2, 2.5), st.floats(-3.0, 3.0), st.floats(-1.0, 1.0), st.floats(0.0, 1.5))


@given(reduced)
def test_chart_roundtrip_and_hamiltonian(s):
    z = regularized_from_canonical(s)
    back = canonical_from_regularized(z)
    np.testing.assert_allclose(back, s, atol=1e-12)
    par = np.append(TILTED.as_array(), 0.0)
    assert hamiltonian_reg(z, par) == pytest.approx(hamiltonian_nondim(s, TILTED), rel=1e-12, abs=1e-12)


@given(reduced)
def test_regularized_field_is_pushforward(s):
    # d/dt of the chart map along the reduced flow
    par = np.append(TILTED.as_array(), 0.0)
    f4 = field4(0.0, np.array(s), TILTED.as_array())
    h = 1e-6
    dz = (regularized_from_canonical(np.array(s) + h * f4) - regularized_from_canonical(np.array(s) - h * f4)) / (2 * h)
    np.testing.assert_allclose(field_reg(0.0, regularized_from_canonical(s), par), dz, rtol=1e-6, atol=1e-7)


def test_field_is_smooth_at_pole():
    par = np.append(FREE.as_array(), 0.0)
    np.testing.assert_array_equal(field_reg(0.0, np.zeros(4), par), np.zeros(4))
    z = np.array([1e-9, -2e-9, 3e-9, 1e-9])
    assert np.all(np.isfinite(field_reg(0.0, z, par)))


def test_saddle_spectrum():
    chart = saddle_local_chart(FREE)
    sigma = saddle_rate(1.7, 1.0)
    np.testing.assert_allclose(np.sort(np.abs(chart.eigenvalues.real)), sigma, rtol=1e-12)
    assert chart.rate == pytest.approx(sigma, rel=1e-12)
    assert chart.energy == pytest.approx(homoclinic_orbit(1.7, 1.0).h)
    tilted = saddle_local_chart(TILTED)
    assert tilted.point[1] == 0.0 and tilted.point[2] == 0.0
    assert np.max(np.abs(field_reg(0.0, tilted.point, tilted.par))) < 1e-14


def test_reversor_maps_unstable_to_stable():
    chart = saddle_local_chart(TILTED)
    R = np.diag([1.0, -1.0, -1.0, 1.0])
    # R U lies in span(S): residual of the least-squares fit vanishes
    RU = R @ chart.unstable
    coef, *_ = np.linalg.lstsq(chart.stable, RU, rcond=None)
    np.testing.assert_allclose(chart.stable @ coef, RU, atol=1e-10)
    z = np.array([0.3, 0.2, -0.1, 0.4])
    # reversibility: f(R z) = -R f(z)
    np.testing.assert_allclose(field_reg(0.0, reversor(z), chart.par), -R @ field_reg(0.0, z, chart.par), atol=1e-14)


def test_aligned_saddle_needs_full_system():
    assert is_aligned(ALIGNED) and is_aligned(ALIGNED_STIFF) and not is_aligned(TILTED)
    with pytest.raises(AlignmentError):
        saddle_local_chart(ALIGNED)
    chart = saddle_local_chart9(ALIGNED)
    assert chart.kind == "noncanonical"
    # time runs in arclength here: rate = sigma m3 / B with m3 = m for B = C2 = 1
    assert chart.rate == pytest.approx(1.7 * saddle_rate(1.7, 1.0), rel=1e-3)
    with pytest.raises(ParameterError):
        saddle_local_chart9(TILTED)
    with pytest.raises(ParameterError):
        saddle_local_chart(DimensionlessParameters(3.0, 1.0, 1.0, 0.0, 0.0))


def test_count_pulses():
    t = np.linspace(-30, 30, 3001)
    bump = lambda c: 1.5 / np.cosh(t - c) ** 2
    assert count_pulses(bump(0)) == 1
    assert count_pulses(bump(-5) + bump(5)) == 2
    assert count_pulses(bump(-8) + bump(0) + bump(8)) == 3
    # a flat double-humped apex is one pulse
    assert count_pulses(bump(-0.6) + bump(0.6)) == 1
    assert count_pulses(np.zeros(10)) == 0


@pytest.fixture(scope="module")
def one_pulse():
    return shoot_multipulse(FREE, 1)


def test_unperturbed_one_pulse_matches_closed_form(one_pulse):
    o = one_pulse
    assert o.pulse_count == 1 and o.method == "regularized"
    theta, _ = orbit_closed_form(o.t, homoclinic_orbit(1.7, 1.0))
    assert np.max(np.abs(theta - o.theta)) < 1e-4
    assert o.closure_residual < 1e-6 and o.symmetry_residual < 1e-6
    np.testing.assert_allclose(o.t, -o.t[::-1], atol=1e-12)
    np.testing.assert_allclose(o.theta, o.theta[::-1], atol=1e-12)


def test_tilted_two_pulse_orbit():
    o = shoot_multipulse(TILTED, 2)
    assert o.pulse_count == 2
    assert o.closure_residual < 1e-6 and o.symmetry_residual < 1e-6
    assert 0 < o.theta.max() < 3
    H = [hamiltonian_nondim(s, TILTED) for s in o.states[::50] if s[0] > 1e-3]
    np.testing.assert_allclose(H, saddle_local_chart(TILTED).energy, atol=1e-8)


def test_invalid_pulse_count():
    with pytest.raises(ParameterError):
        shoot_multipulse(FREE, 0)


def test_aligned_shooting_fails_without_unfolding():
    # at the aligned saddle symmetric orbits are codimension one
    with pytest.raises(ConvergenceError):
        shoot_multipulse(ALIGNED_STIFF, 2)


@pytest.mark.slow
def test_unfolding_delta_gives_aligned_two_pulse():
    value, o = unfold_multipulse(ALIGNED, 2, "delta", (1.5, 1.875))
    assert value == pytest.approx(1.5770679593321246, abs=1e-9)
    assert o.pulse_count == 2 and o.method == "noncanonical"
    assert o.closure_residual < 1e-6 and o.symmetry_residual < 1e-6
    with pytest.raises(NoSignChangeError):
        unfold_multipulse(ALIGNED, 2, "delta", (1.0, 1.2))


def test_pulse_count_error_carries_orbit():
    err = PulseCountError("wrong", type("O", (), {"symmetry_residual": 0.5})())
    assert err.residual == 0.5 and isinstance(err, ConvergenceError)
    assert math.isfinite(err.orbit.symmetry_residual)
