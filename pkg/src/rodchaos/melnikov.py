"""Mel'nikov integral for the magnetically perturbed extensible rod.

With ``mu = a eps**2`` and ``lambda_bar = b eps**2`` the reduced Hamiltonian
splits as ``H0 + eps H1 + O(eps**2)`` where ``H0`` is the field-free
extensible rod and

    H1 = (gamma cos(theta) + 1) sin(theta) cos(psi) sqrt(a - 2 b p_psi) / m**2.

On the homoclinic orbit of ``H0`` the Mel'nikov function factors as
``M(psi0) = -sqrt(a - 2 b) / m**2 * sin(psi0) * amplitude``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, NoSignChangeError, ParameterError
from .homoclinic import (
    HomoclinicOrbit, homoclinic_orbit, orbit_closed_form, orbit_quadrature, psi_bar,
)

TAIL_TOL = 1e-12
GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
PSI0_SAMPLES = 512


# ---------------------------------------------------------------- H0, H1 and partial derivatives

def h0(theta, p_theta, p_psi, m, gamma):
    """Unperturbed Hamiltonian with ``p_psi_bar`` free (needed for ``omega0``)."""
    c, s = np.cos(theta), np.sin(theta)
    return (0.5 * p_theta ** 2 + 0.5 * ((p_psi - c) / s) ** 2
            + c / m ** 2 + gamma * c * c / (2.0 * m ** 2))


def h1(theta, psi, p_psi, m, gamma, a, b):
    """First-order perturbation ``H1``."""
    return (gamma * np.cos(theta) + 1.0) * np.sin(theta) * np.cos(psi) * np.sqrt(a - 2.0 * b * p_psi) / m ** 2


def omega0(theta):
    """``dH0/dp_psi`` at ``p_psi = 1``, i.e. ``1/(1 + cos(theta))``."""
    return 1.0 / (1.0 + np.cos(theta))


def dh0_dtheta(theta, m, gamma):
    c = np.cos(theta)
    return np.sin(theta) * (1.0 / (1.0 + c) ** 2 - (1.0 + gamma * c) / m ** 2)


def dh0_dp(p_theta):
    return p_theta


def domega0_dtheta(theta):
    return np.sin(theta) / (1.0 + np.cos(theta)) ** 2


def domega0_dp(p_theta):
    return np.zeros_like(np.asarray(p_theta, dtype=float))


def dh1_dtheta(theta, psi, m, gamma, a, b):
    c = np.cos(theta)
    return (c + gamma * np.cos(2.0 * theta)) * np.cos(psi) * math.sqrt(a - 2.0 * b) / m ** 2


def dh1_dp(p_theta):
    return np.zeros_like(np.asarray(p_theta, dtype=float))


def bracket_h0_h1_over_omega(theta, p_theta, psi, m, gamma, a, b):
    """``{H0, H1/omega0}`` in ``(theta, p_theta)`` via the quotient rule."""
    w = omega0(theta)
    hh1 = h1(theta, psi, 1.0, m, gamma, a, b)
    br_h1 = dh0_dtheta(theta, m, gamma) * dh1_dp(p_theta) - dh0_dp(p_theta) * dh1_dtheta(theta, psi, m, gamma, a, b)
    br_w = dh0_dtheta(theta, m, gamma) * domega0_dp(p_theta) - dh0_dp(p_theta) * domega0_dtheta(theta)
    return br_h1 / w - hh1 / w ** 2 * br_w


# ---------------------------------------------------------------- orbit sources

def frequency_on_orbit(t, orbit):
    """``omega0`` along the homoclinic orbit; lies in ``[1/2, 1/(1 + u_plus)]``."""
    theta, _ = orbit_closed_form(t, orbit)
    return omega0(theta)


def _closed_form_source(orbit):
    return lambda t: orbit_closed_form(t, orbit)


def _quadrature_source(orbit, T, n=4000):
    """Orbit ``t >= 0`` reconstructed from ``t(theta)`` quadrature and a spline.

    The spline interpolates ``log(sin(theta/2))`` against ``t``; nodes are
    uniform in ``log(c - w)`` with ``u = u_plus + w**2`` and ``c**2 = 1 - u_plus``.
    """
    c = math.sqrt(1.0 - orbit.u_plus)
    # stop where theta is far below the tail bound
    theta_end = 1e-3 * math.sin(math.acos(orbit.u_plus)) * math.exp(-orbit.sigma * T)
    x_end = 2.0 * math.sin(0.5 * theta_end) ** 2 / (2.0 * c)
    ys = np.linspace(math.log(c), math.log(x_end), n)
    x = np.exp(ys)
    # 1 - cos(theta) = c**2 - w**2 = x (2c - x)
    half = np.arcsin(np.sqrt(0.5 * x * (2.0 * c - x)))
    theta = 2.0 * half
    ts = np.array([orbit_quadrature(th, orbit) for th in theta])
    ts[0] = 0.0
    spl = CubicSpline(ts, np.log(np.sin(half)), bc_type=((1, 0.0), "not-a-knot"))
    dspl = spl.derivative()
    t_max = ts[-1]

    def source(t):
        t = np.asarray(t, dtype=float)
        a = np.minimum(np.abs(t), t_max)
        sh = np.exp(spl(a))
        hf = np.arcsin(sh)
        th = 2.0 * hf
        p = 2.0 * sh * dspl(a) / np.cos(hf)
        return th, np.where(t < 0, -p, p)

    return source


def orbit_source(orbit, kind="closed_form", T=None):
    """Callable ``t -> (theta, p_theta_bar)`` from the closed form or from quadrature."""
    if kind == "closed_form":
        return _closed_form_source(orbit)
    if kind == "quadrature":
        return _quadrature_source(orbit, T or default_truncation(orbit))
    raise ParameterError(f"unknown orbit source {kind!r}")


# ---------------------------------------------------------------- integrands

def _bracket_standard(theta, gamma):
    c, s = np.cos(theta), np.sin(theta)
    return (1.0 + c) * (c + gamma * np.cos(2.0 * theta)) + s * s * (1.0 + gamma * c)


def _bracket_derived(theta, gamma):
    c, s = np.cos(theta), np.sin(theta)
    return -(1.0 + c) * (c + gamma * np.cos(2.0 * theta)) + s * s * (1.0 + gamma * c)


def melnikov_integrand(t, orbit, psi_bar_values=None):
    """``p_theta_bar sin(psi_bar) [(1 + c)(c + gamma cos 2 theta) + s**2 (1 + gamma c)]``.

    Parameters
    ----------
    t : float or array
    orbit : HomoclinicOrbit
    psi_bar_values : array, optional
        Precomputed ``psi_bar(t)``; evaluated by quadrature otherwise.
    """
    theta, p = orbit_closed_form(t, orbit)
    pb = psi_bar(t, orbit) if psi_bar_values is None else psi_bar_values
    return p * np.sin(pb) * _bracket_standard(theta, orbit.gamma)


def bracket_integrand(t, orbit, psi_bar_values=None):
    """``sin(psi0)`` coefficient of ``-m**2 {H0, H1/omega0} / sqrt(a - 2b)``.

    Derived directly from the partial-derivative table; differs from
    :func:`melnikov_integrand` in the sign of the first bracket term.
    """
    theta, p = orbit_closed_form(t, orbit)
    pb = psi_bar(t, orbit) if psi_bar_values is None else psi_bar_values
    return p * np.sin(pb) * _bracket_derived(theta, orbit.gamma)


# ---------------------------------------------------------------- amplitude

def default_truncation(orbit):
    return max(40.0 / orbit.sigma, 50.0)


def _panel_sum(source, gamma, T, n_panels, bracket):
    """Composite Gauss-Legendre over ``[0, T]`` with ``psi_bar`` nested on the nodes."""
    edges = np.linspace(0.0, T, n_panels + 1)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)[:, None]
    mid = 0.5 * (a + b)[:, None]
    nodes = mid + half * GL_NODES                                    # (P, 20)
    theta, p = source(nodes)
    om = omega0(theta)
    # psi_bar at panel starts
    panel_int = (half[:, 0] * (om @ GL_WEIGHTS))
    start = np.concatenate([[0.0], np.cumsum(panel_int)[:-1]])
    # psi_bar from panel start to each node: GL on [a, node]
    sub_half = 0.5 * (nodes - a[:, None])                            # (P, 20)
    sub_nodes = (a[:, None] + sub_half)[:, :, None] + sub_half[:, :, None] * GL_NODES  # (P, 20, 20)
    sub_theta, _ = source(sub_nodes)
    inner = sub_half * (omega0(sub_theta) @ GL_WEIGHTS)
    pb = start[:, None] + inner
    f = p * np.sin(pb) * bracket(theta, gamma)
    # even integrand
    return 2.0 * float(np.sum(half[:, 0] * (f @ GL_WEIGHTS))), nodes, f


def _tail_bound(nodes, f, sigma, T):
    # envelope A e^{-sigma t} fitted on the last half of the window
    t = nodes.ravel()
    mask = t > 0.5 * T
    A = float(np.max(np.abs(f.ravel()[mask]) * np.exp(sigma * t[mask])))
    return 2.0 * A * math.exp(-sigma * T) / sigma


def melnikov_amplitude(m, gamma, T=None, tol=1e-10, source="closed_form", form="standard",
                       return_info=False):
    """``int_{-T}^{T}`` of the Mel'nikov integrand on the homoclinic orbit.

    The integrand is even, so twice the integral over ``[0, T]`` is computed by
    composite 20-point Gauss-Legendre quadrature. ``psi_bar`` at every node is
    accumulated from panel integrals plus a nested Gauss-Legendre rule. The
    panel count is doubled until successive values agree to ``tol``, and ``T``
    is doubled until the analytic tail bound ``A exp(-sigma T)/sigma`` falls
    below 1e-12.

    Parameters
    ----------
    m, gamma : float
    T : float, optional
        Truncation, ``max(40/sigma, 50)`` by default.
    tol : float
        Refinement tolerance.
    source : {"closed_form", "quadrature"}
        Orbit evaluator.
    form : {"standard", "bracket"}
        Integrand; ``"bracket"`` uses :func:`bracket_integrand`.
    return_info : bool
        Also return a dict with ``T``, panel count, tail bound and refinement error.

    Raises
    ------
    ConvergenceError
        If refinement does not reach ``tol``.
    """
    orbit = m if isinstance(m, HomoclinicOrbit) else homoclinic_orbit(m, gamma)
    bracket = {"standard": _bracket_standard, "bracket": _bracket_derived}[form]
    T = T or default_truncation(orbit)
    for _ in range(4):
        src = orbit_source(orbit, source, T)
        n = max(16, int(math.ceil(T / 0.4)))
        prev, nodes, f = _panel_sum(src, orbit.gamma, T, n, bracket)
        for _ in range(6):
            n *= 2
            val, nodes, f = _panel_sum(src, orbit.gamma, T, n, bracket)
            err = abs(val - prev)
            if err < tol:
                break
            prev = val
        else:
            raise ConvergenceError(f"amplitude refinement stalled at {err:.2e}", residual=err)
        tail = _tail_bound(nodes, f, orbit.sigma, T)
        if tail < TAIL_TOL:
            break
        T *= 2.0
    else:
        raise ConvergenceError(f"tail bound {tail:.2e} above {TAIL_TOL}", residual=tail)
    if return_info:
        return val, {"T": T, "panels": n, "tail_bound": tail, "refinement_error": err}
    return val


def melnikov(psi0, m, gamma, a, b, amplitude=None):
    """``M(psi0) = -sqrt(a - 2b)/m**2 * sin(psi0) * amplitude``.

    Raises
    ------
    ParameterError
        If ``a - 2b <= 0`` (alignment).
    """
    if not a - 2.0 * b > 0:
        raise ParameterError(f"a - 2b = {a - 2.0 * b} must be positive")
    amp = melnikov_amplitude(m, gamma) if amplitude is None else amplitude
    return -math.sqrt(a - 2.0 * b) / m ** 2 * np.sin(psi0) * amp


@dataclass
class MelnikovCurve:
    """Sampled ``M(psi0)`` at fixed ``(m, gamma, a, b)``.

    Attributes
    ----------
    m, gamma, a, b : float
    psi0 : array
    values : array
        ``M(psi0)``.
    amplitude : float
    T : float
        Truncation used.
    tol : float
        Refinement tolerance used.
    """

    m: float
    gamma: float
    a: float
    b: float
    psi0: np.ndarray
    values: np.ndarray
    amplitude: float
    T: float
    tol: float
    info: dict = field(default_factory=dict)

    @property
    def samples(self):
        return list(zip(self.psi0.tolist(), self.values.tolist()))

    @property
    def normalized(self):
        """``M / sqrt(a - 2b)``."""
        return self.values / math.sqrt(self.a - 2.0 * self.b)


def melnikov_curve(m, gamma, a=1.0, b=0.0, n=PSI0_SAMPLES, tol=1e-10):
    """Sample ``M`` on ``n`` uniform points of ``[0, 2 pi]``."""
    amp, info = melnikov_amplitude(m, gamma, tol=tol, return_info=True)
    psi0 = np.linspace(0.0, 2.0 * np.pi, n)
    vals = melnikov(psi0, m, gamma, a, b, amplitude=amp)
    # exact zeros of the sine factor at the grid ends and midpoint
    vals[[0, -1]] = 0.0
    if n % 2 == 1:
        vals[n // 2] = 0.0
    return MelnikovCurve(m, gamma, a, b, psi0, vals, amp, info["T"], tol, info)


def find_amplitude_zero(m, gamma_range, xtol=1e-6, tol=1e-10):
    """Root of ``amplitude(gamma) = 0`` in ``gamma_range`` by bisection.

    Raises
    ------
    NoSignChangeError
        If the amplitude has the same sign at both ends.
    """
    lo, hi = gamma_range
    f_lo = melnikov_amplitude(m, lo, tol=tol)
    f_hi = melnikov_amplitude(m, hi, tol=tol)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChangeError(
            f"amplitude has no sign change on [{lo}, {hi}]: {f_lo:.6g}, {f_hi:.6g}", (f_lo, f_hi))
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        f_mid = melnikov_amplitude(m, mid, tol=tol)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def amplitude_scan(m, gammas, tol=1e-10):
    """Amplitudes at each ``gamma``; evaluations are independent."""
    return np.array([melnikov_amplitude(m, g, tol=tol) for g in gammas])
