"""Homoclinic orbit of the field-free extensible rod and its fixed-point structure.

Without field (``lambda_bar = mu = 0``) and with ``p_psi_bar = 1`` the reduced
system is the planar oscillator

    theta' = p,   p' = -(1 - cos theta)**2 / sin(theta)**3 + (gamma cos theta + 1) sin(theta) / m**2,

with potential ``V`` and a saddle at ``theta = 0`` for ``m < 2 sqrt(1 + gamma)``.
Time ``t = 0`` is the apex of the orbit, where ``cos theta = u_plus``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import bisect

from .errors import ConvergenceError, ParameterError

VALIDATION_TOL = 1e-8
VALIDATION_TIMES = (0.25, 1.0, 3.0, 8.0)

BRANCH_CIRCULAR = "circular"
BRANCH_HYPERBOLIC = "hyperbolic"
BRANCH_CORRECTED = "corrected"
BRANCH_KIRCHHOFF = "kirchhoff"


def potential(theta, m, gamma):
    """Potential ``1/2 (1 - c)/(1 + c) + c/m**2 + gamma c**2/(2 m**2)`` with ``c = cos(theta)``."""
    c = np.cos(theta)
    if np.any(1.0 + c == 0.0):
        raise ParameterError("potential has a pole at theta = +-pi")
    return 0.5 * (1.0 - c) / (1.0 + c) + c / m ** 2 + gamma * c * c / (2.0 * m ** 2)


def potential_derivative(theta, m, gamma):
    """``dV/dtheta = sin(theta) (1/(1 + c)**2 - (1 + gamma c)/m**2)``."""
    c = np.cos(theta)
    return np.sin(theta) * (1.0 / (1.0 + c) ** 2 - (1.0 + gamma * c) / m ** 2)


def planar_field(theta, p, m, gamma):
    """Right-hand side of the planar oscillator, written as in the reduced equations."""
    s, c = np.sin(theta), np.cos(theta)
    return p, -(1.0 - c) ** 2 / s ** 3 + (gamma * c + 1.0) * s / m ** 2


def buckling_threshold(gamma):
    """Critical moment ``2 sqrt(1 + gamma)`` of the torsional pitchfork."""
    if gamma < 0:
        raise ParameterError("gamma must be non-negative")
    return 2.0 * math.sqrt(1.0 + gamma)


def saddle_rate(m, gamma):
    """Decay rate ``sigma = sqrt((1 + gamma)/m**2 - 1/4)`` of the saddle at ``theta = 0``."""
    r = (1.0 + gamma) / m ** 2 - 0.25
    if r <= 0:
        raise ParameterError(f"no saddle: m = {m} is not below m_c = {buckling_threshold(gamma)}")
    return math.sqrt(r)


def fixed_points(m, gamma):
    """Equilibria ``theta >= 0``: the straight rod and the helix, if it exists.

    The helix solves ``(gamma c + 1)(1 + c)**2 = m**2`` for ``c = cos(theta)``;
    the left side increases on the interval where ``gamma c + 1 > 0``, so
    there is at most one root, found by bisection.
    """
    if m <= 0:
        raise ParameterError("m must be positive")

    def F(c):
        return (gamma * c + 1.0) * (1.0 + c) ** 2 - m * m

    lo = -1.0 if gamma <= 1.0 else -1.0 / gamma
    if F(1.0) <= 0.0:
        return [0.0]
    c = bisect(F, lo, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return [0.0, math.acos(c)]


def quadratic_roots(m, gamma):
    """Roots ``u_plus > u_minus`` of ``g(u)`` and ``k = (u_plus - u_minus)/(1 - u_minus)``.

    ``u_plus`` is evaluated in a cancellation-free form.
    """
    if not gamma > 0:
        raise ParameterError("quadratic roots need gamma > 0")
    if not 0 < m * m < 4.0 * (1.0 + gamma):
        raise ParameterError(f"m = {m} outside (0, {buckling_threshold(gamma)})")
    r = math.sqrt(1.0 + gamma * m * m)
    u_plus = (m * m - 2.0 - gamma) / (r + 1.0 + gamma)
    u_minus = -(1.0 + 1.0 / gamma) - r / gamma
    for u in (u_plus, u_minus):
        terms = (u * u, 2 * u * (1 + 1 / gamma), 1 + 2 / gamma, m * m / gamma)
        g = u * u + 2 * u * (1 + 1 / gamma) + 1 + 2 / gamma - m * m / gamma
        if abs(g) > 1e-12 * max(1.0, max(abs(x) for x in terms)):
            raise ConvergenceError(f"g(u) = {g:.3e} at root {u}")
    k = (u_plus - u_minus) / (1.0 - u_minus)
    return u_plus, u_minus, k


@dataclass(frozen=True)
class HomoclinicOrbit:
    """Homoclinic orbit of the planar oscillator at level ``h = (1 + gamma/2)/m**2``.

    Attributes
    ----------
    m, gamma : float
    u_plus, u_minus : float
        Roots of ``g``; ``u_minus = -inf`` in the inextensible limit.
    k : float
        ``(u_plus - u_minus)/(1 - u_minus)``; equals 1 in the inextensible limit.
    h : float
    sigma : float
        Exponential decay rate of the tails.
    branch : str
        Closed form that passed validation against quadrature.
    """

    m: float
    gamma: float
    u_plus: float
    u_minus: float
    k: float
    h: float
    sigma: float
    branch: str


def homoclinic_orbit(m, gamma, validate=True):
    """Construct the orbit and select the closed form that matches quadrature.

    Candidate closed forms are tried in order: the circular-tangent form, its
    hyperbolic continuation and the corrected artanh-tanh form. The first whose
    ``theta(t)`` reproduces ``t`` through :func:`orbit_quadrature` to 1e-8 at
    several times is recorded in ``branch``.
    """
    sigma = saddle_rate(m, gamma)
    h = (1.0 + 0.5 * gamma) / m ** 2
    if gamma == 0:
        return HomoclinicOrbit(m, 0.0, 0.5 * m * m - 1.0, -math.inf, 1.0, h, sigma, BRANCH_KIRCHHOFF)
    u_plus, u_minus, k = quadratic_roots(m, gamma)
    trial = HomoclinicOrbit(m, gamma, u_plus, u_minus, k, h, sigma, BRANCH_CORRECTED)
    if not validate:
        return trial
    errors = {}
    for branch in (BRANCH_CIRCULAR, BRANCH_HYPERBOLIC, BRANCH_CORRECTED):
        errors[branch] = _branch_error(trial, branch)
        if errors[branch] < VALIDATION_TOL:
            return HomoclinicOrbit(m, gamma, u_plus, u_minus, k, h, sigma, branch)
    raise ConvergenceError(f"no closed form matches quadrature: {errors}")


def branch_errors(orbit):
    """Largest ``|t - t_quadrature(theta(t))|`` of every candidate closed form."""
    if orbit.branch == BRANCH_KIRCHHOFF:
        return {}
    return {b: _branch_error(orbit, b) for b in (BRANCH_CIRCULAR, BRANCH_HYPERBOLIC, BRANCH_CORRECTED)}


def _branch_error(orbit, branch):
    worst = 0.0
    for t in VALIDATION_TIMES:
        with np.errstate(all="ignore"):
            cos_theta = _cos_theta_candidate(t, orbit, branch)
        if not (np.isfinite(cos_theta) and orbit.u_plus <= cos_theta < 1.0):
            return math.inf
        theta = math.acos(cos_theta)
        worst = max(worst, abs(orbit_quadrature(theta, orbit) - t))
    return worst


def _cos_theta_candidate(t, orbit, branch):
    um, D, k, m, g = orbit.u_minus, orbit.u_plus - orbit.u_minus, orbit.k, orbit.m, orbit.gamma
    if branch == BRANCH_CIRCULAR:
        # complex continuation for k < 1
        a = np.sqrt(complex((k - 1.0) / (k + 1.0)))
        b = np.sqrt(complex(g * (k * k - 1.0)))
        z = 2.0 * np.arctanh(a * np.tan(t * (1.0 - um) * b / (4.0 * m)))
        return float(np.real(um + D * np.cosh(z) ** 2))
    if branch == BRANCH_HYPERBOLIC:
        a = math.sqrt((1.0 - k) / (1.0 + k))
        b = math.sqrt(g * (1.0 - k * k))
        z = 2.0 * math.atanh(a * math.tanh(t * (1.0 - um) * b / (4.0 * m)))
        return um + D * math.cosh(z) ** 2
    return 1.0 - _one_minus_cos(np.asarray(t, dtype=float), orbit)


def _rate(orbit):
    return (1.0 - orbit.u_minus) * math.sqrt(orbit.gamma * (1.0 - orbit.k)) / (2.0 * orbit.m)


def _one_minus_cos(t, orbit):
    # 1 - cos(theta) = (1 - u_minus)(1 - k) sech^2(tau) / (1 - (1 - k) tanh^2(tau))
    tau = _rate(orbit) * t
    T = np.tanh(tau)
    sech2 = 1.0 / np.cosh(np.minimum(np.abs(tau), 700.0)) ** 2
    return (1.0 - orbit.u_minus) * (1.0 - orbit.k) * sech2 / (1.0 - (1.0 - orbit.k) * T * T)


def orbit_closed_form(t, orbit):
    """``theta(t) >= 0`` and ``p_theta_bar(t)`` on the homoclinic orbit.

    Parameters
    ----------
    t : float or array
    orbit : HomoclinicOrbit

    Returns
    -------
    theta, p_theta_bar : float or array
    """
    if orbit.branch == BRANCH_KIRCHHOFF:
        return kirchhoff_orbit(t, orbit.m)
    t = np.asarray(t, dtype=float)
    if orbit.branch == BRANCH_CORRECTED:
        tau = _rate(orbit) * t
        T = np.tanh(tau)
        sech2 = 1.0 / np.cosh(np.minimum(np.abs(tau), 700.0)) ** 2
        q = 1.0 - orbit.k
        den = 1.0 - q * T * T
        one_minus = (1.0 - orbit.u_minus) * q * sech2 / den
        half = np.arcsin(np.sqrt(np.clip(0.5 * one_minus, 0.0, 1.0)))
        theta = 2.0 * half
        # d/dt log(1 - cos theta) = -2 T rate (1 - q sech^2 / den), and (1 - cos)/sin = tan(theta/2)
        p = -2.0 * T * _rate(orbit) * np.tan(half) * (1.0 - q * sech2 / den)
        return theta, p
    vals = np.vectorize(lambda x: _cos_theta_candidate(x, orbit, orbit.branch))(t)
    theta = np.arccos(np.clip(vals, -1.0, 1.0))
    p = -np.sign(t) * np.sqrt(np.maximum(0.0, 2.0 * (orbit.h - potential(theta, orbit.m, orbit.gamma))))
    return theta, p


def orbit_quadrature(theta_target, orbit, side=1):
    """Time at which the orbit passes ``theta_target`` by direct quadrature.

    With ``u = u_plus + w**2`` and ``c**2 = 1 - u_plus`` the time integral is
    ``t = int_0^w_end 2 m dw / ((c**2 - w**2) sqrt(2 sqrt(1 + gamma m**2) + gamma w**2))``,
    which is smooth at the apex and valid for ``gamma >= 0``. The substitution
    ``x = c - w = exp(y)`` removes the logarithmic growth near the saddle, and
    ``x_end`` is formed from ``1 - cos(theta) = 2 sin(theta/2)**2`` without
    cancellation.

    Parameters
    ----------
    theta_target : float
        Angle with ``cos(theta_target)`` in ``[u_plus, 1)``.
    orbit : HomoclinicOrbit
    side : {1, -1}
        ``1`` for the descending half (``t >= 0``), ``-1`` for the rising half.
    """
    u = math.cos(theta_target)
    up = orbit.u_plus
    if not (u >= up - 1e-14 and math.sin(0.5 * theta_target) != 0.0):
        raise ParameterError(f"cos(theta) = {u} outside [{up}, 1)")
    w_end = math.sqrt(max(0.0, u - up))
    if w_end == 0.0:
        return 0.0
    m, g = orbit.m, orbit.gamma
    a = 2.0 * math.sqrt(1.0 + g * m * m)
    c = math.sqrt(1.0 - up)
    x_end = 2.0 * math.sin(0.5 * theta_target) ** 2 / (c + w_end)

    def integrand(y):
        x = math.exp(y)
        w = c - x
        return 2.0 * m / ((2.0 * c - x) * math.sqrt(a + g * w * w))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(integrand, math.log(x_end), math.log(c),
                                  epsabs=1e-13, epsrel=1e-13, limit=500)
    if err > 1e-10 * max(1.0, val):
        raise ConvergenceError(f"quadrature error estimate {err:.2e}")
    return side * val


def psi_bar(t, orbit):
    """``int_0^t ds / (1 + cos theta(s))`` by adaptive quadrature; odd in ``t``."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t)

    def f(s):
        theta, _ = orbit_closed_form(s, orbit)
        return 0.5 / math.cos(0.5 * float(theta)) ** 2

    out = np.empty(len(tt))
    order = np.argsort(np.abs(tt))
    prev_t, prev_val = 0.0, 0.0
    for i in order:
        target = abs(tt[i])
        piece, _ = integrate.quad(f, prev_t, target, epsabs=1e-13, epsrel=1e-13, limit=200)
        prev_val += piece
        prev_t = target
        out[i] = math.copysign(prev_val, tt[i]) if tt[i] != 0 else 0.0
    return out[0] if scalar else out


def psi_rate(theta):
    """``psi' = 1 / (1 + cos(theta))`` on the field-free orbit."""
    return 1.0 / (1.0 + np.cos(theta))


def kirchhoff_orbit(t, m):
    """Homoclinic orbit of the inextensible rod, ``1 - cos(theta) = (1 - u0) sech**2(kappa t)``."""
    if not 0 < m < 2:
        raise ParameterError(f"m = {m} outside (0, 2)")
    u0 = 0.5 * m * m - 1.0
    kappa = math.sqrt(1.0 - u0) / (m * math.sqrt(2.0))
    t = np.asarray(t, dtype=float)
    x = kappa * t
    sech = 1.0 / np.cosh(np.minimum(np.abs(x), 700.0))
    half = np.arcsin(np.sqrt(0.5 * (1.0 - u0)) * sech)
    return 2.0 * half, -2.0 * kappa * np.tanh(x) * np.tan(half)
