import math

import numpy as np
import pytest
from numba import njit
from scipy.integrate import solve_ivp

from rodchaos.dynamics import _dop853_tableau as tab
from rodchaos.dynamics.dop853 import STATUS_DONE, STATUS_EVENTS, IntegratorConfig, integrate
from rodchaos.errors import ConvergenceError, ParameterError


@njit
def oscillator(t, y, par):
    return np.array([y[1], -par[0] * par[0] * y[0]])


@njit
def oscillator_energy(y, par):
    return 0.5 * y[1] * y[1] + 0.5 * par[0] * par[0] * y[0] * y[0]


@njit
def first_component(t, y, par):
    return y[0]


@njit
def pendulum(t, y, par):
    return np.array([y[1], -math.sin(y[0])])


@njit
def blowup(t, y, par):
    return np.array([1.0 / (1.0 - t)]) if t < 1.0 else np.array([np.nan])


@njit
def driven(t, y, par):
    return np.array([math.cos(t) * y[0]])


def test_tableau_consistency():
    np.testing.assert_allclose(tab.A[:tab.N_STAGES, :].sum(axis=1), tab.C[:tab.N_STAGES], atol=1e-14)
    assert tab.B.sum() == pytest.approx(1.0, abs=1e-14)


def test_oscillator_matches_exact_solution():
    w = 1.3
    tr = integrate(oscillator, [1.0, 0.0], 50.0, par=[w], hamiltonian=oscillator_energy)
    assert tr.status == STATUS_DONE
    ts = np.linspace(0, 50, 1001)
    np.testing.assert_allclose(tr(ts)[:, 0], np.cos(w * ts), atol=1e-10)
    np.testing.assert_allclose(tr(ts)[:, 1], -w * np.sin(w * ts), atol=1e-10)
    assert tr.drift < 1e-11
    assert tr.t_final == 50.0


def test_agrees_with_reference_dop853():
    tr = integrate(pendulum, [2.5, 0.0], 20.0)
    ref = solve_ivp(lambda t, y: [y[1], -math.sin(y[0])], (0, 20), [2.5, 0.0], method="DOP853",
                    rtol=1e-13, atol=1e-14, dense_output=True)
    ts = np.linspace(0, 20, 301)
    np.testing.assert_allclose(tr(ts), ref.sol(ts).T, atol=1e-9)


def test_dense_output_hits_step_points_and_scalar_input():
    tr = integrate(driven, [1.0], 10.0)
    np.testing.assert_allclose(tr(tr.t), tr.y, atol=1e-14)
    assert tr(3.0).shape == (1,)
    assert tr(3.0)[0] == pytest.approx(math.exp(math.sin(3.0)), rel=1e-11)


def test_fixed_step_is_eighth_order():
    errs = []
    for h in (0.2, 0.1):
        tr = integrate(oscillator, [1.0, 0.0], 4.0, par=[1.0], fixed_step=h)
        errs.append(abs(tr.y_final[0] - math.cos(4.0)))
    assert 150 < errs[0] / errs[1] < 600


def test_backward_integration_returns_to_start():
    fwd = integrate(pendulum, [1.0, 0.3], 7.0)
    back = integrate(pendulum, fwd.y_final, 0.0, t0=7.0)
    np.testing.assert_allclose(back.y_final, [1.0, 0.3], atol=1e-11)
    assert back(3.5) == pytest.approx(fwd(3.5), abs=1e-11)


def test_events_are_located_with_direction():
    w = 1.0
    tr = integrate(oscillator, [1.0, 0.0], 20.0, par=[w], event=first_component)
    expected = (np.arange(len(tr.t_events)) + 0.5) * math.pi
    assert len(tr.t_events) == 6
    np.testing.assert_allclose(tr.t_events, expected, atol=1e-12)
    np.testing.assert_allclose(tr.y_events[:, 0], 0.0, atol=1e-13)
    np.testing.assert_array_equal(tr.event_directions, [-1, 1, -1, 1, -1, 1])
    up = integrate(oscillator, [1.0, 0.0], 20.0, par=[w], event=first_component, event_direction=1)
    np.testing.assert_allclose(up.t_events, expected[1::2], atol=1e-12)


def test_terminal_event_stops_integration():
    tr = integrate(oscillator, [1.0, 0.0], 100.0, par=[1.0], event=first_component, terminal=2)
    assert tr.status == STATUS_EVENTS
    assert len(tr.t_events) == 2
    assert tr.t_final == pytest.approx(1.5 * math.pi, abs=1e-12)


def test_wrapped_angle_stays_in_principal_range():
    tr = integrate(pendulum, [0.0, 3.0], 30.0, wrap_index=0)
    assert np.all(np.abs(tr.y[:, 0]) <= math.pi + 1e-12)


def test_guard_raises_convergence_error():
    with pytest.raises(ConvergenceError):
        integrate(blowup, [0.0], 2.0)
    tr = integrate(blowup, [0.0], 2.0, raise_on_failure=False)
    assert tr.status != STATUS_DONE and tr.t_final < 1.0


@pytest.mark.parametrize("kw", [dict(rtol=1e-16), dict(atol=0.0), dict(max_step=0.0), dict(rtol=math.nan)])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        IntegratorConfig(**kw)


def test_max_steps_limit():
    with pytest.raises(ConvergenceError):
        integrate(pendulum, [1.0, 0.0], 100.0, IntegratorConfig(max_steps=10))
