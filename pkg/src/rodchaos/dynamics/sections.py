"""Poincare sections of the reduced system on the plane ``sin(psi) = 0``."""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from ..canonical import CanonicalState, field4, hamiltonian4, hamiltonian_nondim
from ..errors import ParameterError
from ..model import DimensionlessParameters
from .dop853 import IntegratorConfig, integrate

LEVEL_TOL = 1e-12


@njit(cache=True)
def sin_psi(t, y, par):
    return np.sin(y[1])


@dataclass
class SectionDataset:
    """Crossings of one orbit with the section.

    Attributes
    ----------
    params : DimensionlessParameters
    h : float
        Hamiltonian level.
    initial_state : CanonicalState
    crossings : (N, 4) array
        Columns ``t, theta, p_theta_bar, sign(cos(psi))``.
    drift : float
        Largest ``|H - h|`` seen at accepted steps.
    t_final : float
        Time reached by the integration.
    wall_time : float
        Seconds spent integrating.
    config : IntegratorConfig
    max_sin_psi : float
        Largest ``|sin(psi)|`` over the recorded crossings.
    states : (N, 4) array
        Full states ``theta, psi, p_theta_bar, p_psi_bar`` at the crossings.
    """

    params: DimensionlessParameters
    h: float
    initial_state: CanonicalState
    crossings: np.ndarray
    drift: float
    t_final: float
    wall_time: float
    config: IntegratorConfig = field(default_factory=IntegratorConfig)
    max_sin_psi: float = 0.0
    states: np.ndarray = None

    @property
    def n_crossings(self):
        return len(self.crossings)

    def metadata(self):
        dp = self.params
        return {
            "m": dp.m, "gamma": dp.gamma, "delta": dp.delta,
            "lambda_bar": dp.lambda_bar, "mu": dp.mu, "p_phi_bar": 1.0,
            "h": self.h,
            "initial_state": [float(x) for x in self.initial_state],
            "rtol": self.config.rtol, "atol": self.config.atol,
            "drift": self.drift, "crossings": self.n_crossings,
            "t_final": self.t_final, "wall_time": self.wall_time,
            "max_abs_sin_psi": self.max_sin_psi,
        }


def poincare_section(y0, spec, n_crossings, cfg=None, t_max=math.inf):
    """Record crossings of ``sin(psi) = 0`` along one orbit.

    Parameters
    ----------
    y0 : CanonicalState
        Initial state on the level set.
    spec : LevelSpec
    n_crossings : int
        Stop after this many crossings (both ``psi = 0`` and ``psi = pi``, both
        directions).
    cfg : IntegratorConfig, optional
    t_max : float
        Time budget.

    Raises
    ------
    ParameterError
        If ``y0`` is not on the level to 1e-12.
    ConvergenceError
        If the orbit leaves the admissible region.
    """
    cfg = cfg or IntegratorConfig(dense_output=False)
    if cfg.dense_output:
        cfg = IntegratorConfig(cfg.rtol, cfg.atol, cfg.max_step, False, cfg.first_step, cfg.max_steps)
    dp = spec.params
    y0 = CanonicalState(*[float(x) for x in y0])
    h0 = hamiltonian_nondim(y0, dp)
    if abs(h0 - spec.h) > LEVEL_TOL:
        raise ParameterError(f"initial state off the level: |H - h| = {abs(h0 - spec.h):.3e}")
    if not math.isfinite(t_max):
        t_max = 1e300
    start = time.perf_counter()
    tr = integrate(field4, np.array(y0), t_max, cfg, par=dp.as_array(), event=sin_psi,
                   max_events=n_crossings, terminal=n_crossings, wrap_index=1,
                   hamiltonian=hamiltonian4, h_ref=spec.h)
    wall = time.perf_counter() - start
    ys = tr.y_events
    crossings = np.column_stack([tr.t_events, ys[:, 0], ys[:, 2], np.sign(np.cos(ys[:, 1]))])
    max_sin = float(np.max(np.abs(np.sin(ys[:, 1])))) if len(ys) else 0.0
    return SectionDataset(dp, spec.h, y0, crossings, tr.drift, tr.t_final, wall, cfg, max_sin, ys)


def section_thickness(points):
    """Largest deviation of a point set from a curve through its neighbours.

    For every point the two nearest other points are found and the distance
    from the point to the line through them is measured. Points sampled from
    a smooth curve give deviations of order ``curvature * spacing**2``;
    scattered points give deviations comparable to the spacing.

    Parameters
    ----------
    points : (N, 2) array

    Returns
    -------
    float
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return 0.0
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=3)
    a = pts[idx[:, 1]]
    b = pts[idx[:, 2]]
    ab = b - a
    ap = pts - a
    norm = np.hypot(ab[:, 0], ab[:, 1])
    cross = np.abs(ab[:, 0] * ap[:, 1] - ab[:, 1] * ap[:, 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.where(norm > 0, cross / norm, np.hypot(ap[:, 0], ap[:, 1]))
    return float(np.max(dist))


def crossing_groups(dataset):
    """Split the section points ``(theta, p_theta_bar)`` by the sign of ``cos(psi)``."""
    c = dataset.crossings
    return {sgn: c[c[:, 3] == sgn][:, 1:3] for sgn in (1.0, -1.0) if np.any(c[:, 3] == sgn)}


def section_points(dataset):
    """Section points in single-valued coordinates, split by crossing direction.

    ``psi = 0`` and ``psi = pi`` crossings are mapped to one plane through
    ``x = sign(cos psi) theta`` and ``p_x = sign(cos psi) p_theta_bar`` (the
    Cartesian coordinate and momentum of the regularized chart restricted to
    ``y = 0``). Crossings are grouped by ``sign(cos psi) sign(psi')``, the
    direction in which they pierce the plane ``y = 0``; each group of an
    integrable orbit lies on one smooth curve.

    Returns
    -------
    dict
        ``{+1: (N, 2) array, -1: (M, 2) array}``, empty groups omitted.
    """
    if dataset.states is None:
        raise ParameterError("dataset carries no crossing states")
    par = dataset.params.as_array()
    sgn = dataset.crossings[:, 3]
    psi_dot = np.array([field4(0.0, y, par)[1] for y in dataset.states])
    direction = sgn * np.sign(psi_dot)
    pts = np.column_stack([sgn * dataset.crossings[:, 1], sgn * dataset.crossings[:, 2]])
    return {d: pts[direction == d] for d in (1.0, -1.0) if np.any(direction == d)}
