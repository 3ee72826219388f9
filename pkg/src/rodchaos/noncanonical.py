"""Nine-dimensional non-canonical Hamiltonian system in ``(m, n, e3)``.

States are length-9 arrays ``[m1, m2, m3, n1, n2, n3, e1, e2, e3]`` holding
moment, force and field direction in the director frame. A
:class:`BodyState9` can be used wherever a state is expected.
"""

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .model import hat, inverse_constitutive

D3 = np.array([0.0, 0.0, 1.0])


class BodyState9(NamedTuple):
    m: np.ndarray
    n: np.ndarray
    e3: np.ndarray

    def as_array(self):
        return np.concatenate([self.m, self.n, self.e3]).astype(float)

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:9].copy())


class Integrals(NamedTuple):
    I1: float
    I2: float
    I1_valid: bool
    I2_valid: bool


def as_state(s):
    """Return ``s`` as a flat float array of length 9."""
    if isinstance(s, BodyState9):
        return s.as_array()
    y = np.asarray(s, dtype=float).ravel()
    if y.shape != (9,):
        raise ValueError(f"expected 9 state components, got {y.shape}")
    return y


def structure_matrix(s, lam):
    """Block structure matrix of the bracket; antisymmetric by construction."""
    y = as_state(s)
    hm, hn, he = hat(y[0:3]), hat(y[3:6]), hat(y[6:9])
    Z = np.zeros((3, 3))
    return np.block([[hm, hn, he],
                     [hn, lam * he, Z],
                     [he, Z, Z]])


def hamiltonian9(s, p):
    """Hamiltonian ``1/2 m.u + 1/2 n.(v - d3) + d3.n``; independent of ``e3``."""
    y = as_state(s)
    m, n = y[0:3], y[3:6]
    u, v = inverse_constitutive(m, n, p)
    return 0.5 * m @ u + 0.5 * n @ (v - D3) + n[2]


def grad_hamiltonian9(s, p):
    """Analytic gradient ``(u, v, 0)`` of :func:`hamiltonian9`."""
    y = as_state(s)
    u, v = inverse_constitutive(y[0:3], y[3:6], p)
    return np.concatenate([u, v, np.zeros(3)])


def vector_field9(s, p):
    """Equilibrium equations ``(m x u + n x v, n x u + lam e3 x v, e3 x u)``.

    Here ``v`` is the full shear/stretch strain, which equals ``d3`` for a
    rigid rod.
    """
    y = as_state(s)
    m, n, e3 = y[0:3], y[3:6], y[6:9]
    u, v = inverse_constitutive(m, n, p)
    return np.concatenate([np.cross(m, u) + np.cross(n, v),
                           np.cross(n, u) + p.lam * np.cross(e3, v),
                           np.cross(e3, u)])


def poisson_bracket(grad_f, grad_g, s, lam):
    """Bracket ``grad_f^T J grad_g``."""
    return np.asarray(grad_f, dtype=float) @ structure_matrix(s, lam) @ np.asarray(grad_g, dtype=float)


def casimirs(s, lam):
    """Return ``(C1, C2, C3)``."""
    y = as_state(s)
    m, n, e3 = y[0:3], y[3:6], y[6:9]
    return 0.5 * n @ n + lam * m @ e3, e3 @ n, e3 @ e3


def casimir_gradients(s, lam):
    """Gradients of the three Casimirs as rows of a ``(3, 9)`` array."""
    y = as_state(s)
    m, n, e3 = y[0:3], y[3:6], y[6:9]
    z = np.zeros(3)
    return np.array([np.concatenate([lam * e3, n, lam * m]),
                     np.concatenate([z, e3, n]),
                     np.concatenate([z, z, 2.0 * e3])])


def integrals(s, p):
    """Twist integral ``I1`` and torque-like integral ``I2`` with validity flags.

    ``I1`` is conserved for isotropic rods, ``I2`` only for isotropic rods that
    are also inextensible and unshearable. For anisotropic bending ``B1`` is
    used as the bending stiffness in both expressions.
    """
    y = as_state(s)
    m, n, e3 = y[0:3], y[3:6], y[6:9]
    B = p.B1
    I1 = B * m[2]
    I2 = n @ m + B * p.lam * e3[2]
    return Integrals(I1, I2, p.isotropic, p.isotropic and p.rigid)


def _structure_derivative(lam):
    """``dJ[i, j, l] = d J_ij / d x_l``; constant because ``J`` is affine."""
    dJ = np.zeros((9, 9, 9))
    for l in range(3):
        e = np.zeros(3)
        e[l] = 1.0
        h = hat(e)
        dJ[0:3, 0:3, l] = h                # hat(m)
        dJ[0:3, 3:6, 3 + l] = h            # hat(n)
        dJ[3:6, 0:3, 3 + l] = h
        dJ[0:3, 6:9, 6 + l] = h            # hat(e3)
        dJ[6:9, 0:3, 6 + l] = h
        dJ[3:6, 3:6, 6 + l] = lam * h      # lam hat(e3)
    return dJ


def jacobi_defect(i, j, k, s, lam):
    """Cyclic Jacobi sum of the structure matrix for coordinate indices ``i, j, k``."""
    Jm = structure_matrix(s, lam)
    dJ = _structure_derivative(lam)
    return (Jm[i] @ dJ[j, k] + Jm[j] @ dJ[k, i] + Jm[k] @ dJ[i, j])


def field_params(p):
    """Parameter vector ``[cB1, cB2, cC, cH, cJ, cK, lam]`` for :func:`field9`."""
    return np.array(list(p.compliances()) + [p.lam])


@njit(cache=True)
def field9(t, y, par):
    """Compiled right-hand side of the 9D system; ``par`` from :func:`field_params`."""
    out = np.empty_like(y)
    u1 = par[0] * y[0]
    u2 = par[1] * y[1]
    u3 = par[2] * y[2]
    v1 = par[3] * y[3]
    v2 = par[4] * y[4]
    v3 = 1.0 + par[5] * y[5]
    lam = par[6]
    m1, m2, m3 = y[0], y[1], y[2]
    n1, n2, n3 = y[3], y[4], y[5]
    e1, e2, e3 = y[6], y[7], y[8]
    out[0] = m2 * u3 - m3 * u2 + n2 * v3 - n3 * v2
    out[1] = m3 * u1 - m1 * u3 + n3 * v1 - n1 * v3
    out[2] = m1 * u2 - m2 * u1 + n1 * v2 - n2 * v1
    out[3] = n2 * u3 - n3 * u2 + lam * (e2 * v3 - e3 * v2)
    out[4] = n3 * u1 - n1 * u3 + lam * (e3 * v1 - e1 * v3)
    out[5] = n1 * u2 - n2 * u1 + lam * (e1 * v2 - e2 * v1)
    out[6] = e2 * u3 - e3 * u2
    out[7] = e3 * u1 - e1 * u3
    out[8] = e1 * u2 - e2 * u1
    return out


@njit(cache=True)
def hamiltonian9_kernel(y, par):
    """Compiled :func:`hamiltonian9` for monitoring drift."""
    return 0.5 * (par[0] * y[0] ** 2 + par[1] * y[1] ** 2 + par[2] * y[2] ** 2
                  + par[3] * y[3] ** 2 + par[4] * y[4] ** 2 + par[5] * y[5] ** 2) + y[5]


def saddle_state(p):
    """Straight twisted rod aligned with the field: ``m = m3 d3``, ``n = C2 d3``, ``e3 = d3``."""
    return np.array([0.0, 0.0, p.m3, 0.0, 0.0, p.C2, 0.0, 0.0, 1.0])


def angles_from_state(y, m3):
    """Reduced canonical coordinates ``(theta, psi, p_theta_bar, p_psi_bar)`` of a 9D state.

    ``psi`` is measured from the direction of the force component normal to
    the field; it is NaN when that component vanishes.
    """
    y = as_state(y)
    m, n, e3 = y[0:3], y[3:6], y[6:9]
    c = min(1.0, max(-1.0, e3[2] / math.sqrt(e3 @ e3)))
    theta = math.acos(c)
    st = math.sin(theta)
    p_theta = (m[0] * e3[1] - m[1] * e3[0]) / st if st > 0 else 0.0
    p_psi = m @ e3
    C2 = e3 @ n
    x = n[2] - C2 * c            # |n_perp| sin(theta) cos(psi)
    z = e3[0] * n[1] - e3[1] * n[0]   # |n_perp| sin(theta) sin(psi)
    psi = math.atan2(z, x) if (x != 0 or z != 0) else math.nan
    return np.array([theta, psi, p_theta / m3, p_psi / m3])
