"""Symmetric multipulse homoclinic orbits by reversible shooting.

The Euler chart is singular at ``theta = 0`` where the saddle lives, so the
reduced system is rewritten in the regularized chart

    x = theta cos(psi),  y = theta sin(psi),  L = x p_y - y p_x = p_psi_bar - 1,

whose Hamiltonian is smooth at the origin. The flow is reversible under
``(x, y, p_x, p_y, t) -> (x, -y, -p_x, p_y, -t)``; an orbit leaving the saddle
along its unstable manifold and hitting the fixed set ``{y = 0, p_x = 0}`` is
completed to a homoclinic orbit by reflection.

When ``mu = 2 lambda_bar`` the saddle is the straight rod aligned with the
field and ``sqrt(mu - 2 lambda_bar p_psi_bar)`` is not smooth there; shooting
then runs in the 9D non-canonical system.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import expm
from scipy.optimize import brentq

from ..errors import AlignmentError, ConvergenceError, NoSignChangeError, ParameterError
from ..homoclinic import buckling_threshold
from ..model import DimensionlessParameters, RodParameters
from ..noncanonical import angles_from_state, field9, field_params, hamiltonian9, saddle_state
from .dop853 import IntegratorConfig, integrate

# Taylor coefficients in rho = theta**2 of 1/sin(theta)**2 - 1/theta**2 and sin(theta)/theta
A_SERIES = np.array([1 / 3, 1 / 15, 2 / 189, 1 / 675, 2 / 10395, 1382 / 58046625, 4 / 1403325,
                     3617 / 10854718875, 87734 / 2292899734125, 349222 / 80596287646875,
                     310732 / 640374140030625])
S_SERIES = np.array([1.0 / math.factorial(2 * k + 1) * (-1) ** k for k in range(11)])
RHO_SERIES = 0.25

LAUNCH_OFFSET = 1e-6
TAIL_DISTANCE = 1e-8
ALIGN_TOL = 1e-12
NEWTON_MAXITER = 50
NEWTON_TOL = 1e-9
COMPLEX_STEP = 1e-30


# ---------------------------------------------------------------- regularized chart

@njit(cache=True)
def _poly(coef, r):
    v = coef[coef.size - 1] + 0.0 * r
    dv = 0.0 * r
    for k in range(coef.size - 2, -1, -1):
        dv = dv * r + v
        v = v * r + coef[k]
    return v, dv


@njit(cache=True)
def _reg_terms(z, par):
    """``H`` and its partials in ``rho = x**2 + y**2``, ``L`` and explicit ``x``."""
    m2 = par[0] * par[0]
    g, d, lb, mu = par[1], par[2], par[3], par[4]
    x, y, px, py = z[0], z[1], z[2], z[3]
    rho = x * x + y * y
    L = x * py - y * px
    th = np.sqrt(rho)
    c = np.cos(th)
    sh = np.sin(0.5 * th)
    if rho.real < RHO_SERIES:
        S, dS = _poly(S_SERIES, rho)
        A, dA = _poly(A_SERIES, rho)
    else:
        s = np.sin(th)
        S = s / th
        dS = (c - S) / (2.0 * rho)
        A = 1.0 / (s * s) - 1.0 / rho
        dA = -c / (s * s * s * th) + 1.0 / (rho * rho)
    dc = -0.5 * S
    q = 1.0 / (1.0 + c)
    dq = 0.5 * q * q * S
    T2 = 2.0 * sh * sh * q
    dT2 = S * q * q
    R = mu - 2.0 * lb * (L + 1.0)
    sR = np.sqrt(R)
    H = (0.5 * (px * px + py * py) + 0.5 * L * L * A + L * q + 0.5 * T2 + c / m2
         + 0.5 * g * c * c / m2 - d * lb * (L + 1.0) / m2
         + (g * c + 1.0) * S * sR * x / m2 + 0.5 * g * S * S * R * x * x / m2)
    H_rho = (0.5 * L * L * dA + L * dq + 0.5 * dT2 + dc / m2 + g * c * dc / m2
             + (g * dc * S + (g * c + 1.0) * dS) * sR * x / m2 + g * S * dS * R * x * x / m2)
    H_L = L * A + q - d * lb / m2 - g * S * S * x * x * lb / m2
    if lb != 0.0:
        H_L = H_L - (g * c + 1.0) * S * x * lb / (sR * m2)
    H_x = (g * c + 1.0) * S * sR / m2 + g * S * S * R * x / m2
    return H, H_rho, H_L, H_x


@njit(cache=True)
def field_reg(t, z, par):
    """Hamiltonian vector field in the regularized chart; ``par = [m, gamma, delta, lambda_bar, mu, ...]``."""
    _, H_rho, H_L, H_x = _reg_terms(z, par)
    out = np.empty_like(z)
    out[0] = z[2] - H_L * z[1]
    out[1] = z[3] + H_L * z[0]
    out[2] = -(2.0 * z[0] * H_rho + H_x + H_L * z[3])
    out[3] = -(2.0 * z[1] * H_rho - H_L * z[2])
    return out


@njit(cache=True)
def hamiltonian_reg(z, par):
    return _reg_terms(z, par)[0]


@njit(cache=True)
def saddle_extremum_event(t, z, par):
    """Rate of change of the squared distance to the saddle ``(par[5], 0)`` in the ``(x, y)`` plane."""
    f = field_reg(t, z, par)
    return (z[0] - par[5]) * f[0] + z[1] * f[1]


@njit(cache=True)
def polar_extremum_event9(t, y, par):
    """``-d(e3 . d3)/ds``, with the sign of ``d theta/ds``; zero at extrema of ``theta``."""
    return y[7] * par[0] * y[0] - y[6] * par[1] * y[1]


def regularized_from_canonical(s):
    """``(theta, psi, p_theta_bar, p_psi_bar) -> (x, y, p_x, p_y)``."""
    theta, psi, P, Q = (float(v) for v in s)
    L = Q - 1.0
    c, sn = math.cos(psi), math.sin(psi)
    return np.array([theta * c, theta * sn, P * c - L * sn / theta, P * sn + L * c / theta])


def canonical_from_regularized(z):
    """Inverse of :func:`regularized_from_canonical`; works on ``(..., 4)`` arrays."""
    z = np.asarray(z, dtype=float)
    x, y, px, py = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    theta = np.hypot(x, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        P = np.where(theta > 0, (x * px + y * py) / theta, 0.0)
    return np.stack([theta, np.arctan2(y, x), P, x * py - y * px + 1.0], axis=-1)


def reversor(z):
    """Reversor of the regularized chart, ``(x, y, p_x, p_y) -> (x, -y, -p_x, p_y)``."""
    z = np.asarray(z, dtype=float)
    return z * np.array([1.0, -1.0, -1.0, 1.0])


# ---------------------------------------------------------------- saddle chart

def _complex_step_jacobian(f, y, par):
    n = len(y)
    J = np.empty((n, n))
    for i in range(n):
        z = y.astype(complex)
        z[i] += 1j * COMPLEX_STEP
        J[:, i] = f(0.0, z, par).imag / COMPLEX_STEP
    return J


def _real_basis(vecs):
    cols = []
    for v in vecs.T:
        cols.append(v.real)
        if np.linalg.norm(v.imag) > 1e-12 * np.linalg.norm(v.real):
            cols.append(v.imag)
    q, _ = np.linalg.qr(np.column_stack(cols)[:, :2])
    return q


@dataclass(frozen=True)
class SaddleChart:
    """Saddle equilibrium and its linearization.

    Attributes
    ----------
    params : DimensionlessParameters
    kind : str
        ``"regularized"`` for the 4D chart or ``"noncanonical"`` for the 9D system.
    point : ndarray
        Equilibrium state.
    energy : float
        Hamiltonian at the equilibrium.
    jacobian : ndarray
    eigenvalues, eigenvectors : ndarray
    unstable, stable : (n, 2) ndarray
        Orthonormal real bases of the unstable and stable subspaces.
    par : ndarray
        Parameter vector passed to the compiled field.
    """

    params: DimensionlessParameters
    kind: str
    point: np.ndarray
    energy: float
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    unstable: np.ndarray
    stable: np.ndarray
    par: np.ndarray
    rod: RodParameters = None

    @property
    def rate(self):
        """Smallest positive real part of the unstable eigenvalues."""
        re = self.eigenvalues.real
        return float(np.min(re[re > 1e-8 * max(1.0, np.max(np.abs(re)))]))

    def launch(self, alpha, offset=LAUNCH_OFFSET):
        u = self.unstable
        return self.point + offset * (math.cos(alpha) * u[:, 0] + math.sin(alpha) * u[:, 1])


def _split_spectrum(J):
    w, V = np.linalg.eig(J)
    scale = max(1.0, np.max(np.abs(w.real)))
    up = w.real > 1e-8 * scale
    dn = w.real < -1e-8 * scale
    if up.sum() != 2 or dn.sum() != 2:
        raise ConvergenceError(f"equilibrium is not a saddle with 2D manifolds: eigenvalues {w}")
    return w, V, _real_basis(V[:, up]), _real_basis(V[:, dn])


def is_aligned(dp):
    """True when the saddle is the straight rod aligned with the field (``mu = 2 lambda_bar > 0``)."""
    return dp.lambda_bar != 0 and abs(dp.mu - 2.0 * dp.lambda_bar) <= ALIGN_TOL * max(1.0, dp.mu)


def saddle_local_chart(dp):
    """Saddle of the reduced system near ``theta = 0`` in the regularized chart.

    The equilibrium lies on the reversor fixed set ``y = p_x = 0``; its
    ``x`` and ``p_y`` are found by Newton iteration from the origin. The
    Jacobian is evaluated by complex-step differentiation.

    Raises
    ------
    ParameterError
        If ``m >= 2 sqrt(1 + gamma)``.
    AlignmentError
        If ``mu <= 2 lambda_bar`` with ``lambda_bar > 0``; use
        :func:`saddle_local_chart9` for the aligned rod.
    """
    if dp.m >= buckling_threshold(dp.gamma):
        raise ParameterError(f"m = {dp.m} is supercritical (m_c = {buckling_threshold(dp.gamma)})")
    if dp.lambda_bar != 0 and not dp.mu - 2.0 * dp.lambda_bar > ALIGN_TOL * max(1.0, dp.mu):
        raise AlignmentError("mu - 2 lambda_bar must be positive for the regularized chart")
    par = np.append(dp.as_array(), 0.0)
    z = np.zeros(4)
    for _ in range(60):
        f = field_reg(0.0, z, par)
        F = np.array([f[1], f[2]])
        if np.max(np.abs(F)) < 1e-15:
            break
        J = _complex_step_jacobian(field_reg, z, par)
        step = np.linalg.solve(J[np.ix_([1, 2], [0, 3])], -F)
        z[0] += step[0]
        z[3] += step[1]
    else:
        raise ConvergenceError("saddle Newton iteration did not converge", residual=float(np.max(np.abs(F))))
    par[5] = z[0]
    J = _complex_step_jacobian(field_reg, z, par)
    w, V, unstable, stable = _split_spectrum(J)
    return SaddleChart(dp, "regularized", z, float(hamiltonian_reg(z, par)), J, w, V, unstable, stable, par)


def saddle_local_chart9(dp, B=1.0, C=1.0, C2=1.0):
    """Aligned straight-rod saddle of the 9D system for ``mu = 2 lambda_bar``."""
    if dp.m >= buckling_threshold(dp.gamma):
        raise ParameterError(f"m = {dp.m} is supercritical (m_c = {buckling_threshold(dp.gamma)})")
    if not is_aligned(dp):
        raise ParameterError("the 9D saddle chart is for mu = 2 lambda_bar")
    rod = RodParameters.from_dimensionless(dp, B=B, C=C, C2=C2)
    y = saddle_state(rod)
    par = field_params(rod)
    J = _complex_step_jacobian(field9, y, par)
    w, V, unstable, stable = _split_spectrum(J)
    return SaddleChart(dp, "noncanonical", y, float(hamiltonian9(y, rod)), J, w, V, unstable, stable, par, rod)


# ---------------------------------------------------------------- shooting

@dataclass
class MultipulseOrbit:
    """Reversible homoclinic orbit assembled from a shot half-orbit.

    Attributes
    ----------
    params : DimensionlessParameters
    n_pulses : int
        Requested pulse count.
    pulse_count : int
        Local maxima of ``theta`` above half the first-pulse amplitude.
    t : ndarray
        Dimensionless times, symmetric about 0.
    states : (N, 4) ndarray
        ``theta, psi, p_theta_bar, p_psi_bar``.
    closure_residual : float
        Largest distance of the trajectory ends from the saddle.
    symmetry_residual : float
        Distance of the half-orbit end from the reversor fixed set.
    alpha : float
        Launch angle on the unstable manifold.
    half_time : float
        Flight time from launch to the symmetric point.
    iterations : int
    method : str
    """

    params: DimensionlessParameters
    n_pulses: int
    pulse_count: int
    t: np.ndarray
    states: np.ndarray
    closure_residual: float
    symmetry_residual: float
    alpha: float
    half_time: float
    iterations: int
    method: str
    info: dict = field(default_factory=dict)

    @property
    def theta(self):
        return self.states[:, 0]


class PulseCountError(ConvergenceError):
    """Shooting converged to an orbit with a different pulse count."""

    def __init__(self, message, orbit):
        super().__init__(message, residual=orbit.symmetry_residual)
        self.orbit = orbit


def _high_runs(values, threshold):
    """Index runs where ``values > threshold``."""
    high = np.asarray(values) > threshold
    edges = np.flatnonzero(np.diff(np.concatenate([[0], high.astype(int), [0]])))
    return [np.arange(a, b) for a, b in zip(edges[::2], edges[1::2])]


def _first_pulse_threshold(values, maxima):
    """Half the first-pulse amplitude; ripples below 1% of the largest maximum are skipped."""
    peaks = values[maxima]
    first = maxima[peaks > 1e-2 * np.max(peaks)][0]
    return 0.5 * values[first]


def count_pulses(theta):
    """Number of excursions of ``theta`` above half the first-pulse amplitude.

    Amplitudes are measured above the end value (the saddle). Local maxima
    not separated by a return below the threshold belong to one pulse, so a
    flat double-humped apex counts once.
    """
    th = np.asarray(theta)
    exc = th - 0.5 * (th[0] + th[-1])
    idx = np.flatnonzero((th[1:-1] > th[:-2]) & (th[1:-1] >= th[2:])) + 1
    if len(idx) == 0 or np.max(exc[idx]) <= 0:
        return 0
    return len(_high_runs(exc, _first_pulse_threshold(exc, idx)))


class _Problem:
    """Launch/flight/residual plumbing shared by the two charts."""

    def __init__(self, chart, cfg, offset):
        self.chart = chart
        self.cfg = cfg
        self.offset = offset
        if chart.kind == "regularized":
            self.field, self.event = field_reg, saddle_extremum_event
            self.time_scale = 1.0
        else:
            self.field, self.event = field9, polar_extremum_event9
            rod = chart.rod
            self.time_scale = rod.m3 / rod.B

    def theta(self, ys):
        ys = np.atleast_2d(ys)
        if self.chart.kind == "regularized":
            return np.hypot(ys[:, 0] - self.chart.point[0], ys[:, 1])
        return np.arccos(np.clip(ys[:, 8] / np.linalg.norm(ys[:, 6:9], axis=1), -1.0, 1.0))

    def residual(self, y):
        """Distance components ``(y, p_x)`` of the regularized chart from the reversor fixed set."""
        if self.chart.kind == "regularized":
            return np.array([y[1], y[2]])
        red = angles_from_state(y, self.chart.rod.m3)
        if not np.isfinite(red[1]):
            red[1] = 0.0
        return regularized_from_canonical(red)[1:3]

    def residual_rate(self, y):
        f = self.field(0.0, y, self.chart.par)
        if self.chart.kind == "regularized":
            return np.array([f[1], f[2]])
        h = 1e-7
        return (self.residual(y + h * f) - self.residual(y - h * f)) / (2 * h)

    def fly(self, alpha, T):
        tr = integrate(self.field, self.chart.launch(alpha, self.offset), T, self.cfg,
                       par=self.chart.par, raise_on_failure=True)
        return tr

    def candidate(self, alpha, n_pulses, t_max):
        """Symmetric-point candidate: time and state of the relevant extremum."""
        tr = integrate(self.field, self.chart.launch(alpha, self.offset), t_max, self.cfg,
                       par=self.chart.par, event=self.event, max_events=400, raise_on_failure=False)
        if len(tr.t_events) == 0:
            return None
        ys = tr.y_events
        dist = self.theta(ys)
        dirs = tr.event_directions
        maxima = np.flatnonzero(dirs < 0)
        if len(maxima) == 0:
            return None
        runs = _high_runs(dist, _first_pulse_threshold(dist, maxima))
        k = (n_pulses + 1) // 2
        if len(runs) < k:
            return None
        if n_pulses % 2 == 1:
            # centre of the k-th pulse: middle extremum of a symmetric run
            run = runs[k - 1]
            i = run[len(run) // 2] if len(run) % 2 == 1 else run[np.argmax(dist[run])]
        else:
            # deepest return after the k-th pulse
            stop = runs[k][0] if len(runs) > k else len(dist)
            window = np.arange(runs[k - 1][-1] + 1, stop)
            window = window[dirs[window] > 0]
            if len(window) == 0:
                return None
            i = window[np.argmin(dist[window])]
        return tr.t_events[i], ys[i]


def _newton(problem, alpha, T, maxiter=NEWTON_MAXITER, tol=NEWTON_TOL):
    """Damped Gauss-Newton on ``(alpha, T)`` for the two fixed-set conditions."""
    y = problem.fly(alpha, T).y_final
    F = problem.residual(y)
    norm = np.linalg.norm(F)
    it = 0
    for it in range(1, maxiter + 1):
        if norm < tol:
            break
        da = 1e-7
        Fa = (problem.residual(problem.fly(alpha + da, T).y_final)
              - problem.residual(problem.fly(alpha - da, T).y_final)) / (2 * da)
        J = np.column_stack([Fa, problem.residual_rate(y)])
        step = np.linalg.lstsq(J, -F, rcond=1e-12)[0]
        lam = 1.0
        while lam > 2.0 ** -20:
            a_new, T_new = alpha + lam * step[0], T + lam * step[1]
            y_new = problem.fly(a_new, T_new).y_final
            F_new = problem.residual(y_new)
            if np.linalg.norm(F_new) < norm:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(f"Newton stalled at residual {norm:.3e}", residual=norm)
        alpha, T, y, F = a_new, T_new, y_new, F_new
        norm = np.linalg.norm(F)
    if norm >= tol:
        raise ConvergenceError(f"Newton did not converge: residual {norm:.3e}", residual=norm)
    return alpha, T, y, it


def _linear_tail(chart, alpha, offset, target):
    """Points ``expm(J tau) delta0`` for ``tau <= 0`` until the distance drops to ``target``."""
    delta0 = chart.launch(alpha, offset) - chart.point
    tau_end = -math.log(offset / target) / chart.rate
    for _ in range(20):
        if np.linalg.norm(expm(chart.jacobian * tau_end) @ delta0) <= target:
            break
        tau_end *= 1.2
    taus = np.linspace(tau_end, 0.0, 101)[:-1]
    return taus, np.array([chart.point + expm(chart.jacobian * tau) @ delta0 for tau in taus])


def _assemble(problem, alpha, T, n_samples):
    chart = problem.chart
    cfg = IntegratorConfig(problem.cfg.rtol, problem.cfg.atol, problem.cfg.max_step, True)
    tr = integrate(problem.field, chart.launch(alpha, problem.offset), T, cfg, par=chart.par)
    ts = np.linspace(0.0, T, n_samples)
    ys = tr(ts)
    taus, tail = _linear_tail(chart, alpha, problem.offset, TAIL_DISTANCE)
    s_half = np.concatenate([taus, ts]) - T
    y_half = np.vstack([tail, ys])
    if chart.kind == "regularized":
        red = canonical_from_regularized(y_half)
    else:
        red = np.array([angles_from_state(y, chart.rod.m3) for y in y_half])
    t_half = s_half * problem.time_scale
    # reflect through the reversor; the symmetric point appears once
    mirror = red[-2::-1] * np.array([1.0, -1.0, -1.0, 1.0])
    t = np.concatenate([t_half, -t_half[-2::-1]])
    states = np.vstack([red, mirror])
    closure = float(np.linalg.norm(y_half[0] - chart.point))
    end = red[-1]
    sym = float(max(abs(end[0] * math.sin(end[1])), abs(end[2])))
    return t, states, closure, sym


def default_flight_time(chart, n_pulses, offset=LAUNCH_OFFSET):
    """Generous time budget: each passage near the saddle takes about ``log(1/offset)/rate``."""
    return (n_pulses + 2) * 2.0 * math.log(1.0 / offset) / chart.rate + 50.0


def shoot_multipulse(dp, n_pulses, alpha_guess=None, time_guess=None, cfg=None, n_scan=72,
                     offset=LAUNCH_OFFSET, n_samples=4001, t_max=None):
    """Find a reversible ``n_pulses``-pulse homoclinic orbit of the saddle.

    The unknowns are the launch angle ``alpha`` on the circle of radius
    ``offset`` in the unstable subspace and the flight time ``T`` to the
    symmetric point, where the two reversor fixed-set conditions are imposed.
    Initial guesses come from a scan over ``alpha`` of the relevant
    extremum of ``theta`` (the ``k``-th pulse apex for ``n = 2k - 1`` and the
    deepest return between pulses ``k`` and ``k + 1`` for ``n = 2k``). The
    refinement is damped Gauss-Newton with step halving.

    The regularized 4D chart is used unless ``mu = 2 lambda_bar > 0``, in
    which case the saddle is the aligned straight rod and the 9D system is
    shot instead (there the two fixed-set conditions are
    ``e3_1 n_2 - e3_2 n_1 = 0`` and ``m_1 e3_2 - m_2 e3_1 = 0``).

    Parameters
    ----------
    dp : DimensionlessParameters
    n_pulses : int
    alpha_guess, time_guess : float, optional
        Skip the scan and start Newton here.
    cfg : IntegratorConfig, optional
    n_scan : int
        Launch angles in the scan.
    offset : float
        Launch distance from the saddle.
    n_samples : int
        Samples of the shot half-orbit.

    Returns
    -------
    MultipulseOrbit

    Raises
    ------
    ConvergenceError
        If no guess converges; ``residual`` holds the best final residual.
    PulseCountError
        If the converged orbit has a different pulse count.
    """
    if n_pulses < 1:
        raise ParameterError("n_pulses must be positive")
    cfg = cfg or IntegratorConfig(dense_output=False)
    chart = saddle_local_chart9(dp) if is_aligned(dp) else saddle_local_chart(dp)
    problem = _Problem(chart, cfg, offset)
    t_max = t_max or default_flight_time(chart, n_pulses, offset)

    if alpha_guess is not None:
        if time_guess is None:
            cand = problem.candidate(alpha_guess, n_pulses, t_max)
            if cand is None:
                raise ConvergenceError("no symmetric-point candidate for the given launch angle")
            time_guess = cand[0]
        guesses = [(alpha_guess, time_guess)]
    else:
        guesses = _scan(problem, n_pulses, n_scan, t_max)
        if not guesses:
            raise ConvergenceError(f"no {n_pulses}-pulse candidate found in the launch-angle scan")

    best = math.inf
    wrong = None
    for a0, T0 in guesses:
        try:
            alpha, T, _, it = _newton(problem, a0, T0)
        except ConvergenceError as exc:
            best = min(best, exc.residual if exc.residual is not None else math.inf)
            continue
        t, states, closure, sym = _assemble(problem, alpha, T, n_samples)
        orbit = MultipulseOrbit(dp, n_pulses, count_pulses(states[:, 0]), t, states, closure, sym,
                                alpha % (2 * math.pi), T * problem.time_scale, it, chart.kind,
                                {"eigenvalues": chart.eigenvalues, "offset": offset})
        if orbit.pulse_count == n_pulses:
            return orbit
        wrong = orbit
    if wrong is not None:
        raise PulseCountError(f"converged orbit has {wrong.pulse_count} pulses, wanted {n_pulses}", wrong)
    raise ConvergenceError(f"Newton failed from all {len(guesses)} guesses; best residual {best:.3e}",
                           residual=best)


def _scan(problem, n_pulses, n_scan, t_max):
    """Launch-angle scan; returns guesses ordered by residual size."""
    alphas = np.linspace(0.0, 2.0 * math.pi, n_scan, endpoint=False)
    res = []
    for a in alphas:
        cand = problem.candidate(a, n_pulses, t_max)
        if cand is None:
            res.append(None)
        else:
            res.append((cand[0], problem.residual(cand[1])))
    guesses = []
    for i in range(n_scan):
        j = (i + 1) % n_scan
        if res[i] is None or res[j] is None:
            continue
        r0, r1 = res[i][1][0], res[j][1][0]
        if np.sign(r0) != np.sign(r1):
            # secant estimate of the crossing
            w = r0 / (r0 - r1) if r0 != r1 else 0.5
            a = alphas[i] + w * (2.0 * math.pi / n_scan)
            T = res[i][0] + w * (res[j][0] - res[i][0])
            guesses.append((min(abs(r0), abs(r1)), a, T))
    if not guesses:
        # fall back to the best residuals (e.g. when the residual does not depend on alpha)
        ranked = sorted((np.linalg.norm(r[1]), a, r[0]) for a, r in zip(alphas, res) if r is not None)
        guesses = ranked[:3]
    guesses.sort()
    return [(a, T) for _, a, T in guesses]


def unfold_multipulse(dp, n_pulses, parameter, bracket, xtol=1e-12, cfg=None, **kw):
    """Solve for one parameter at which a reversible multipulse orbit exists.

    At the aligned saddle the launch angle is immaterial: the isotropic rod
    is symmetric under rotation about its axis, which fixes the saddle and
    rotates its unstable subspace. Of the two fixed-set conditions the one on
    ``p_theta_bar`` holds automatically at every extremum of ``theta``, so the
    condition ``theta sin(psi) = 0`` is left with no free unknown and
    symmetric orbits occur on codimension-one parameter sets. This routine
    brackets that condition in ``parameter`` and then shoots at the root.

    Parameters
    ----------
    dp : DimensionlessParameters
    n_pulses : int
    parameter : str
        Field of ``dp`` to vary; varying ``lambda_bar`` keeps ``mu = 2 lambda_bar``.
    bracket : (float, float)
        Parameter interval over which the residual changes sign.

    Returns
    -------
    value : float
    orbit : MultipulseOrbit
    """
    cfg = cfg or IntegratorConfig(dense_output=False)

    def params_at(v):
        d = dp.replace(**{parameter: v})
        if parameter == "lambda_bar" and is_aligned(dp):
            d = d.replace(mu=2.0 * v)
        return d

    def residual(v):
        d = params_at(v)
        chart = saddle_local_chart9(d) if is_aligned(d) else saddle_local_chart(d)
        problem = _Problem(chart, cfg, kw.get("offset", LAUNCH_OFFSET))
        cand = problem.candidate(0.0, n_pulses, default_flight_time(chart, n_pulses))
        if cand is None:
            raise ConvergenceError(f"no {n_pulses}-pulse candidate at {parameter} = {v}")
        return problem.residual(cand[1])[0]

    lo, hi = bracket
    r_lo, r_hi = residual(lo), residual(hi)
    if np.sign(r_lo) == np.sign(r_hi):
        raise NoSignChangeError(f"residual has no sign change on [{lo}, {hi}]", (r_lo, r_hi))
    value = brentq(residual, lo, hi, xtol=xtol)
    return value, shoot_multipulse(params_at(value), n_pulses, alpha_guess=0.0, cfg=cfg, **kw)
