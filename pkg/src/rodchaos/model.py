"""Rod parameters, hat-map algebra, Euler-angle kinematics and the constitutive law.

Vectors written in the director (body) frame are plain length-3 arrays. The
rotation matrix ``R`` maps space components to body components, so its rows
are the directors ``d1, d2, d3`` expressed in the fixed frame.
"""

import math
from dataclasses import dataclass, fields
from typing import NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ParameterError, SingularityError

SINGULAR_TOL = 1e-12

RIGID = "rigid"


def check_sin_theta(theta):
    """Return ``sin(theta)``, raising if the Euler chart is degenerate."""
    s = math.sin(theta)
    if abs(s) < SINGULAR_TOL:
        raise SingularityError(f"|sin(theta)| = {abs(s):.3e} below {SINGULAR_TOL:g}")
    return s


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------

def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class RodParameters:
    """Physical parameters of an elastic conducting rod.

    Parameters
    ----------
    B1, B2 : float
        Bending stiffnesses about ``d1`` and ``d2``.
    C : float
        Torsional stiffness.
    H, J, K : float or None
        Shear (``H``, ``J``) and axial (``K``) stiffnesses. ``None`` marks the
        rigid limit, represented by a vanishing compliance.
    lam : float
        Product of current and field strength.
    C1, C2 : float
        Casimir values.
    m3 : float
        Twisting moment, equal to the momentum conjugate to the twist angle.
    """

    B1: float
    B2: float
    C: float
    H: Optional[float] = None
    J: Optional[float] = None
    K: Optional[float] = None
    lam: float = 0.0
    C1: float = 0.5
    C2: float = 1.0
    m3: float = 1.0

    def __post_init__(self):
        for name in ("B1", "B2", "C"):
            _positive(name, getattr(self, name))
        for name in ("H", "J", "K"):
            value = getattr(self, name)
            if value is not None:
                _positive(name, value)
        for name in ("lam", "C1", "C2", "m3"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    @property
    def isotropic(self):
        return self.B1 == self.B2 and self.H == self.J

    @property
    def rigid(self):
        return self.H is None and self.J is None and self.K is None

    @property
    def B(self):
        """Common bending stiffness; only defined for isotropic bending."""
        if self.B1 != self.B2:
            raise ParameterError("anisotropic bending: B1 != B2")
        return self.B1

    def compliances(self):
        """Return ``(1/B1, 1/B2, 1/C, 1/H, 1/J, 1/K)`` with rigid entries zero."""
        return tuple(0.0 if x is None else 1.0 / x
                     for x in (self.B1, self.B2, self.C, self.H, self.J, self.K))

    @classmethod
    def from_dimensionless(cls, dp, B=1.0, C=1.0, C2=1.0):
        """Build a physical parameter set realising ``dp``.

        The dimensionless set does not fix every physical constant, so the
        bending stiffness ``B``, torsional stiffness ``C`` and Casimir ``C2``
        are free choices. Shear stiffnesses are taken equal (``H = J``).
        """
        m3 = dp.m * math.sqrt(B * C2)
        cJ = dp.delta / C2
        cK = (dp.gamma + dp.delta) / C2
        return cls(B1=B, B2=B, C=C,
                   H=None if cJ == 0 else 1.0 / cJ,
                   J=None if cJ == 0 else 1.0 / cJ,
                   K=None if cK == 0 else 1.0 / cK,
                   lam=dp.lambda_bar * C2 ** 2 / m3,
                   C1=0.5 * (dp.mu + 1.0) * C2 ** 2,
                   C2=C2, m3=m3)


@dataclass(frozen=True)
class DimensionlessParameters:
    """Dimensionless parameters of the reduced canonical system.

    Parameters
    ----------
    m : float
        Scaled twisting moment.
    gamma : float
        Extensibility parameter.
    delta : float
        Shear parameter.
    lambda_bar : float
        Scaled field strength.
    mu : float
        Casimir combination ``(2 C1 - C2**2) / C2**2``.
    """

    m: float
    gamma: float = 0.0
    delta: float = 0.0
    lambda_bar: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        _positive("m", self.m)
        for name in ("gamma", "delta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be non-negative, got {value!r}")
        for name in ("lambda_bar", "mu"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    def radicand(self, p_psi):
        """Alignment radicand ``mu - 2 lambda_bar p_psi``."""
        return self.mu - 2.0 * self.lambda_bar * p_psi

    def as_array(self):
        """Parameter vector ``[m, gamma, delta, lambda_bar, mu]`` for compiled kernels."""
        return np.array([self.m, self.gamma, self.delta, self.lambda_bar, self.mu])

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return DimensionlessParameters(**values)


class EulerAngles(NamedTuple):
    theta: float
    psi: float
    phi: float


def nondimensionalize(p):
    """Map physical parameters to the dimensionless set.

    Returns
    -------
    dp : DimensionlessParameters
    t_per_s : float
        Factor ``m3 / B`` converting arclength ``s`` to scaled time ``t``.
    """
    if not p.isotropic:
        raise ParameterError("nondimensionalization requires B1 == B2 and H == J")
    if p.C2 == 0 or p.m3 == 0:
        raise ParameterError("C2 and m3 must be non-zero")
    B = p.B1
    _, _, _, _, cJ, cK = p.compliances()
    C2 = p.C2
    dp = DimensionlessParameters(
        m=p.m3 / math.sqrt(B * C2),
        gamma=C2 * (cK - cJ),
        delta=C2 * cJ,
        lambda_bar=p.lam * p.m3 / C2 ** 2,
        mu=(2.0 * p.C1 - C2 ** 2) / C2 ** 2,
    )
    return dp, p.m3 / B


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

def hat(a):
    """Skew matrix with ``hat(a) @ b == cross(a, b)``."""
    a1, a2, a3 = a
    return np.array([[0.0, -a3, a2],
                     [a3, 0.0, -a1],
                     [-a2, a1, 0.0]])


def rotation_from_euler(q):
    """Rotation matrix for Euler angles ``(theta, psi, phi)``.

    Rows are the directors in space components; the last row is the
    tangent ``d3``.
    """
    theta, psi, phi = q
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    cf, sf = math.cos(phi), math.sin(phi)
    return np.array([
        [ct * cf * cp - sf * sp, ct * cf * sp + cp * sf, -st * cf],
        [-ct * sf * cp - cf * sp, -ct * sf * sp + cf * cp, st * sf],
        [st * cp, st * sp, ct],
    ])


def curvatures_from_euler(q, qdot):
    """Body curvatures and twist from Euler angles and their arclength rates.

    Parameters
    ----------
    q : EulerAngles
    qdot : array_like
        ``(theta', psi', phi')``.
    """
    theta, _, phi = q
    st = check_sin_theta(theta)
    dtheta, dpsi, dphi = qdot
    cf, sf = math.cos(phi), math.sin(phi)
    return np.array([dtheta * sf - dpsi * st * cf,
                     dtheta * cf + dpsi * st * sf,
                     dphi + dpsi * math.cos(theta)])


def strain_energy(u, v, p):
    """Quadratic strain energy density; rigid components contribute nothing."""
    cB1, cB2, cC, cH, cJ, cK = p.compliances()
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = 0.5 * (p.B1 * u[0] ** 2 + p.B2 * u[1] ** 2 + p.C * u[2] ** 2)
    for stiff, dv in ((p.H, v[0]), (p.J, v[1]), (p.K, v[2] - 1.0)):
        if stiff is not None:
            w += 0.5 * stiff * dv ** 2
    return w


def constitutive(u, v, p):
    """Moment and force from strains for the quadratic energy.

    Raises
    ------
    ParameterError
        If a component is rigid: the corresponding force is then a reaction
        and not a function of the strain.
    """
    if p.H is None or p.J is None or p.K is None:
        raise ParameterError("force is a constraint reaction for rigid components")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = np.array([p.B1 * u[0], p.B2 * u[1], p.C * u[2]])
    n = np.array([p.H * v[0], p.J * v[1], p.K * (v[2] - 1.0)])
    return m, n


def inverse_constitutive(m, n, p):
    """Strains ``(u, v)`` from moment and force; rigid components use zero compliance."""
    cB1, cB2, cC, cH, cJ, cK = p.compliances()
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    u = np.array([cB1 * m[0], cB2 * m[1], cC * m[2]])
    v = np.array([cH * n[0], cJ * n[1], 1.0 + cK * n[2]])
    return u, v


def _expm_so3(w):
    """Rodrigues formula for ``expm(hat(w))``."""
    angle = math.sqrt(w @ w)
    W = hat(w)
    if angle < 1e-8:
        return np.eye(3) + W + 0.5 * W @ W
    return (np.eye(3) + math.sin(angle) / angle * W
            + (1.0 - math.cos(angle)) / angle ** 2 * W @ W)


def _polar(D):
    U, _, Vt = np.linalg.svd(D)
    return U @ Vt


def reconstruct_centerline(s, u, v, frame0=None, r0=None):
    """Integrate directors and centerline from sampled strains.

    Uses a fourth-order Magnus step for ``D' = -hat(u) D`` (``D`` holds the
    directors as rows) on each sample interval with cubic interpolation of the
    strains, followed by a polar projection onto the rotation group. The
    centerline ``r' = D^T v`` is integrated with three-point Gauss-Legendre
    quadrature.

    Parameters
    ----------
    s : (N,) array
        Increasing sample positions.
    u, v : (N, 3) arrays
        Body strains at the samples.
    frame0 : (3, 3) array, optional
        Initial directors as rows; identity by default.
    r0 : (3,) array, optional
        Initial position; origin by default.

    Returns
    -------
    r : (N, 3) array
        Centerline positions.
    D : (N, 3, 3) array
        Director frames (rows ``d1, d2, d3``).
    """
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = len(s)
    if n < 2:
        raise ParameterError("need at least two samples")
    us = CubicSpline(s, u, axis=0)
    vs = CubicSpline(s, v, axis=0)
    D = np.empty((n, 3, 3))
    r = np.empty((n, 3))
    D[0] = np.eye(3) if frame0 is None else _polar(np.asarray(frame0, dtype=float))
    r[0] = np.zeros(3) if r0 is None else r0

    c1, c2 = 0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6
    gl_x = np.array([0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10])
    gl_w = np.array([5.0, 8.0, 5.0]) / 18.0

    def magnus(sa, h):
        a1, a2 = -us(sa + c1 * h), -us(sa + c2 * h)
        # Omega = h/2 (A1 + A2) + sqrt(3) h^2 / 12 [A2, A1]; for skew matrices
        # hat(x) hat(y) - hat(y) hat(x) = hat(x cross y)
        omega = 0.5 * h * (a1 + a2) + math.sqrt(3) * h * h / 12.0 * np.cross(a2, a1)
        return _expm_so3(omega)

    for i in range(n - 1):
        h = s[i + 1] - s[i]
        dr = np.zeros(3)
        for x, w in zip(gl_x, gl_w):
            Dx = magnus(s[i], x * h) @ D[i]
            dr += w * Dx.T @ vs(s[i] + x * h)
        r[i + 1] = r[i] + h * dr
        D[i + 1] = _polar(magnus(s[i], h) @ D[i])
    return r, D


# ---------------------------------------------------------------------------
# parameter files
# ---------------------------------------------------------------------------

PHYSICAL_KEYS = ("B1", "B2", "C", "H", "J", "K", "lambda", "C1", "C2", "m3")
DIMENSIONLESS_KEYS = ("m", "gamma", "delta", "lambda_bar", "mu")


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ParameterError(f"{key}: cannot parse {text!r} as a number") from None


def parse_parameters(text, extra_keys=()):
    """Parse ``key=value`` lines into a parameter record.

    Blank lines and ``#`` comments are ignored. The stiffnesses ``H``, ``J``
    and ``K`` accept the value ``rigid``.

    Parameters
    ----------
    text : str
    extra_keys : iterable of str
        Additional keys accepted and returned verbatim as strings.

    Returns
    -------
    params : RodParameters or DimensionlessParameters
    extras : dict
    """
    values, extras = {}, {}
    extra_keys = set(extra_keys)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        if key in values or key in extras:
            raise ParameterError(f"line {lineno}: duplicate key {key!r}")
        if key in extra_keys:
            extras[key] = value
        elif key in PHYSICAL_KEYS or key in DIMENSIONLESS_KEYS:
            values[key] = value
        else:
            raise ParameterError(f"line {lineno}: unknown key {key!r}")

    phys = set(values) & set(PHYSICAL_KEYS)
    dim = set(values) & set(DIMENSIONLESS_KEYS)
    if phys and dim:
        raise ParameterError("mixes physical and dimensionless keys")
    if dim:
        if "m" not in values:
            raise ParameterError("missing key 'm'")
        return DimensionlessParameters(**{k: _parse_float(k, v) for k, v in values.items()}), extras
    if phys:
        missing = {"B1", "B2", "C"} - phys
        if missing:
            raise ParameterError(f"missing keys {sorted(missing)}")
        kw = {}
        for key, value in values.items():
            name = "lam" if key == "lambda" else key
            if key in ("H", "J", "K") and value.lower() == RIGID:
                kw[name] = None
            else:
                kw[name] = _parse_float(key, value)
        return RodParameters(**kw), extras
    raise ParameterError("no parameters given")


def format_parameters(params):
    """Serialize a parameter record in the ``key=value`` format."""
    if isinstance(params, DimensionlessParameters):
        items = [(k, getattr(params, k)) for k in DIMENSIONLESS_KEYS]
    else:
        items = [(k, getattr(params, "lam" if k == "lambda" else k)) for k in PHYSICAL_KEYS]
    lines = []
    for key, value in items:
        lines.append(f"{key}={RIGID if value is None else repr(float(value))}")
    return "\n".join(lines) + "\n"


def load_parameters(path, extra_keys=()):
    """Read a parameter file; see :func:`parse_parameters`."""
    with open(path) as fh:
        return parse_parameters(fh.read(), extra_keys)
