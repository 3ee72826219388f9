"""Canonical reduction in Euler angles and the reduced dimensionless system.

The reduced state is ``(theta, psi, p_theta_bar, p_psi_bar)``; time is the
scaled arclength ``t = s m3 / B``. Compiled kernels take the parameter vector
``[m, gamma, delta, lambda_bar, mu]`` produced by
:meth:`DimensionlessParameters.as_array`.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import AlignmentError, ConvergenceError
from .model import DimensionlessParameters, check_sin_theta


class CanonicalState(NamedTuple):
    theta: float
    psi: float
    p_theta_bar: float
    p_psi_bar: float


@dataclass(frozen=True)
class LevelSpec:
    """Hamiltonian level ``h`` together with the parameters it refers to."""

    h: float
    params: DimensionlessParameters


def _radicand_root(R, lambda_bar):
    """``sqrt(R)`` with the alignment check.

    ``R == 0`` is accepted only without a field, where the square-root terms
    and their derivatives vanish identically.
    """
    if R > 0 or (R == 0 and lambda_bar == 0):
        return math.sqrt(R)
    raise AlignmentError(f"radicand mu - 2 lambda_bar p_psi = {R:.6g} is not positive")


# ---------------------------------------------------------------------------
# Euler-angle maps
# ---------------------------------------------------------------------------

def e3_of_angles(q):
    """Field direction in body components."""
    theta, _, phi = q
    st = math.sin(theta)
    return np.array([-st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def moment_matrix(q):
    """Matrix ``L`` with ``m = L p`` for momenta ``p = (p_theta, p_psi, p_phi)``."""
    theta, _, phi = q
    st = check_sin_theta(theta)
    ct = math.cos(theta)
    cf, sf = math.cos(phi), math.sin(phi)
    return np.array([[st * sf, -cf, ct * cf],
                     [st * cf, sf, -ct * sf],
                     [0.0, 0.0, st]]) / st


def momenta_to_moments(q, p):
    """Body moments from canonical momenta ``(p_theta, p_psi, p_phi)``."""
    return moment_matrix(q) @ np.asarray(p, dtype=float)


def force_from_state(q, p_psi, C1, C2, lam):
    """Body force reconstructed from the Casimirs and ``p_psi``."""
    theta, psi, phi = q
    R = 2.0 * C1 - C2 ** 2 - 2.0 * lam * p_psi
    if R < 0:
        raise AlignmentError(f"radicand 2 C1 - C2^2 - 2 lam p_psi = {R:.6g} is negative")
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    cf, sf = math.cos(phi), math.sin(phi)
    col1 = np.array([ct * cf * cp - sf * sp, -ct * sf * cp - cf * sp, st * cp])
    return C2 * e3_of_angles(q) + math.sqrt(R) * col1


def hamiltonian_canonical(q, p, rod):
    """Six-dimensional canonical Hamiltonian for a general linearly elastic rod.

    Evaluation only. Rigid components contribute no shear/stretch energy.
    """
    m = momenta_to_moments(q, p)
    n = force_from_state(q, p[1], rod.C1, rod.C2, rod.lam)
    cB1, cB2, cC, cH, cJ, cK = rod.compliances()
    return (0.5 * (cB1 * m[0] ** 2 + cB2 * m[1] ** 2 + cC * m[2] ** 2)
            + 0.5 * (cH * n[0] ** 2 + cJ * n[1] ** 2 + cK * n[2] ** 2) + n[2])


def canonical_to_noncanonical(s, phi, rod):
    """Map a reduced state and twist angle to the 9D state ``(m, n, e3)``.

    Parameters
    ----------
    s : CanonicalState
        Reduced dimensionless state.
    phi : float
        Twist angle.
    rod : RodParameters
        Physical parameters supplying ``m3``, ``C1``, ``C2`` and ``lam``.
    """
    theta, psi, P, Q = s
    q = (theta, psi, phi)
    p = rod.m3 * np.array([P, Q, 1.0])
    m = momenta_to_moments(q, p)
    n = force_from_state(q, p[1], rod.C1, rod.C2, rod.lam)
    return np.concatenate([m, n, e3_of_angles(q)])


# ---------------------------------------------------------------------------
# reduced dimensionless system
# ---------------------------------------------------------------------------

def hamiltonian_nondim(s, dp):
    """Dimensionless reduced Hamiltonian (constant twist term dropped)."""
    theta, psi, P, Q = s
    st = check_sin_theta(theta)
    ct = math.cos(theta)
    m2 = dp.m ** 2
    g = dp.gamma
    R = dp.radicand(Q)
    sq = _radicand_root(R, dp.lambda_bar)
    cp = math.cos(psi)
    W = (Q - ct) / st
    return (0.5 * P * P + 0.5 * W * W + ct / m2 + g * ct * ct / (2 * m2)
            + (g * ct + 1.0) * st * cp * sq / m2
            + g / (2 * m2) * st * st * cp * cp * R
            - dp.delta * dp.lambda_bar * Q / m2)


def grad_hamiltonian_nondim(s, dp):
    """Partial derivatives ``(dH/dtheta, dH/dpsi, dH/dp_theta, dH/dp_psi)``."""
    theta, psi, P, Q = s
    check_sin_theta(theta)
    _radicand_root(dp.radicand(Q), dp.lambda_bar)
    out = np.empty(4)
    _grad4(theta, psi, P, Q, dp.as_array(), out)
    return out


def vector_field4(s, dp):
    """Hamilton's equations ``(theta', psi', p_theta', p_psi')``."""
    dH = grad_hamiltonian_nondim(s, dp)
    return np.array([dH[2], dH[3], -dH[0], -dH[1]])


def i2bar(s, dp):
    """Dimensionless torque-like integral, conserved when ``gamma = delta = 0`` or ``lambda_bar = 0``."""
    theta, psi, P, Q = s
    st = check_sin_theta(theta)
    ct = math.cos(theta)
    sq = _radicand_root(dp.radicand(Q), dp.lambda_bar)
    return (Q + dp.lambda_bar * ct / dp.m ** 2
            - sq * (P * math.sin(psi) - math.cos(psi) * (1.0 - Q * ct) / st))


@njit(cache=True)
def _grad4(theta, psi, P, Q, par, out):
    # generic over float and complex arguments (complex-step tangents)
    m2 = par[0] * par[0]
    g = par[1]
    lb = par[3]
    R = par[4] - 2.0 * lb * Q
    st = np.sin(theta)
    ct = np.cos(theta)
    sp = np.sin(psi)
    cp = np.cos(psi)
    W = (Q - ct) / st
    if lb == 0.0:
        sq = np.sqrt(R + 0.0 * Q) if R.real > 0 else 0.0 * Q
        dsq = 0.0 * Q
    else:
        sq = np.sqrt(R)
        dsq = -lb / sq
    a = (g * ct + 1.0) * st / m2
    out[0] = (W * (1.0 - W * ct / st) - st / m2 - g * ct * st / m2
              + cp * sq * (g * (ct * ct - st * st) + ct) / m2
              + g / m2 * st * ct * cp * cp * R)
    out[1] = -a * sp * sq - g / m2 * st * st * cp * sp * R
    out[2] = P
    out[3] = (W / st + a * cp * dsq - g / m2 * st * st * cp * cp * lb
              - par[2] * lb / m2)


@njit(cache=True)
def field4(t, y, par):
    """Compiled reduced vector field; returns NaN where a guard trips."""
    out = np.empty_like(y)
    st = np.sin(y[0])
    R = par[4] - 2.0 * par[3] * y[3]
    if abs(st.real) < 1e-12 or R.real < 0.0 or (R.real == 0.0 and par[3] != 0.0):
        out[:] = np.nan
        return out
    dH = np.empty_like(y)
    _grad4(y[0], y[1], y[2], y[3], par, dH)
    out[0] = dH[2]
    out[1] = dH[3]
    out[2] = -dH[0]
    out[3] = -dH[1]
    return out


@njit(cache=True)
def hamiltonian4(y, par):
    """Compiled reduced Hamiltonian for drift monitoring."""
    m2 = par[0] * par[0]
    g = par[1]
    R = par[4] - 2.0 * par[3] * y[3]
    st = np.sin(y[0])
    ct = np.cos(y[0])
    cp = np.cos(y[1])
    sq = np.sqrt(R) if R > 0.0 else 0.0
    W = (y[3] - ct) / st
    return (0.5 * y[2] * y[2] + 0.5 * W * W + ct / m2 + g * ct * ct / (2.0 * m2)
            + (g * ct + 1.0) * st * cp * sq / m2
            + g / (2.0 * m2) * st * st * cp * cp * R
            - par[2] * par[3] * y[3] / m2)


@njit(cache=True)
def i2bar_kernel(y, par):
    """Compiled :func:`i2bar`."""
    st = np.sin(y[0])
    ct = np.cos(y[0])
    R = par[4] - 2.0 * par[3] * y[3]
    sq = np.sqrt(R) if R > 0.0 else 0.0
    return (y[3] + par[3] * ct / (par[0] * par[0])
            - sq * (y[2] * np.sin(y[1]) - np.cos(y[1]) * (1.0 - y[3] * ct) / st))


# ---------------------------------------------------------------------------
# state completion on a level set
# ---------------------------------------------------------------------------

def _safeguarded_newton(f, df, a, b, fa, tol=1e-15, maxiter=100):
    """Newton iteration kept inside the sign-change bracket ``[a, b]``."""
    x = 0.5 * (a + b)
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0.0:
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b = x
        d = df(x)
        step_ok = d != 0.0
        if step_ok:
            xn = x - fx / d
            step_ok = min(a, b) < xn < max(a, b)
        if not step_ok:
            xn = 0.5 * (a + b)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    raise ConvergenceError("safeguarded Newton did not converge", residual=abs(f(x)))


def level_seed(theta, psi, p_theta_bar, spec):
    """Closed-form ``p_psi_bar`` on the level when the field is switched off.

    With ``lambda_bar = 0`` the Hamiltonian is quadratic in ``p_psi_bar``; the
    larger root ``cos(theta) + sin(theta) sqrt(2 (h - V))`` is returned, or
    ``None`` if the level lies below the minimum over ``p_psi_bar``.
    """
    dp0 = spec.params.replace(lambda_bar=0.0)
    if dp0.mu < 0:
        return None
    st = check_sin_theta(theta)
    ct = math.cos(theta)
    rest = hamiltonian_nondim((theta, psi, p_theta_bar, ct), dp0)
    disc = 2.0 * (spec.h - rest)
    if disc < 0:
        return None
    return ct + st * math.sqrt(disc)


def complete_state_on_level(theta, psi, p_theta_bar, spec, grid=4001):
    """Solve ``H(theta, psi, p_theta_bar, p_psi_bar) = h`` for ``p_psi_bar``.

    All sign changes on a grid covering the admissible interval are refined
    by safeguarded Newton; the admissible root nearest the field-free seed
    (see :func:`level_seed`, falling back to ``cos(theta)``) is returned.

    Raises
    ------
    ConvergenceError
        If no admissible root exists in the search interval.
    """
    dp = spec.params
    h = spec.h
    st = check_sin_theta(theta)
    ct = math.cos(theta)
    seed = level_seed(theta, psi, p_theta_bar, spec)
    if seed is None:
        seed = ct
    if dp.lambda_bar == 0.0:
        if dp.mu < 0:
            raise AlignmentError("mu < 0 without field leaves no admissible state")
        Q = level_seed(theta, psi, p_theta_bar, spec)
        if Q is None:
            raise ConvergenceError(f"level h={h} lies below the minimum of H at this (theta, psi, p_theta)")
        return CanonicalState(theta, psi, p_theta_bar, Q)

    def f(Q):
        return hamiltonian_nondim((theta, psi, p_theta_bar, Q), dp) - h

    def df(Q):
        return grad_hamiltonian_nondim((theta, psi, p_theta_bar, Q), dp)[3]

    # far from cos(theta) the kinetic term dominates every other term
    scale = abs(h) + abs(dp.delta * dp.lambda_bar) / dp.m ** 2 + (1.0 + dp.gamma) * (1.0 + abs(dp.mu)) / dp.m ** 2
    width = st * (2.0 * math.sqrt(2.0 * scale) + 2.0) + 4.0 * st ** 2 * abs(dp.lambda_bar) * (1.0 + dp.delta) / dp.m ** 2 + 1.0
    lo, hi = ct - width, ct + width
    Qa = dp.mu / (2.0 * dp.lambda_bar)   # radicand vanishes here
    eps = 1e-13 * max(1.0, abs(Qa))
    if dp.lambda_bar > 0:
        hi = min(hi, Qa - eps)
    else:
        lo = max(lo, Qa + eps)
    if not lo < hi:
        raise ConvergenceError("empty admissible interval for p_psi_bar")
    Qs = np.linspace(lo, hi, grid)
    fs = np.array([f(Q) for Q in Qs])
    roots = []
    for i in range(grid - 1):
        if fs[i] == 0.0:
            roots.append(Qs[i])
        elif fs[i] * fs[i + 1] < 0:
            roots.append(_safeguarded_newton(f, df, Qs[i], Qs[i + 1], fs[i]))
    if fs[-1] == 0.0:
        roots.append(Qs[-1])
    if not roots:
        raise ConvergenceError(f"no admissible p_psi_bar on level h={h} in [{lo:.6g}, {hi:.6g}]")
    Q = min(roots, key=lambda r: abs(r - seed))
    return CanonicalState(theta, psi, p_theta_bar, Q)
