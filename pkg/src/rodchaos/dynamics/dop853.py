"""Compiled Dormand-Prince 8(5,3) integrator with dense output and event location.

The right-hand side is any numba-compiled function ``f(t, y, par) -> dy``
where ``par`` is a float64 parameter vector. Step-size control follows the
original DOP853 code: a combined fifth/third order error estimate, safety
factor 0.9 and step ratio limits [0.2, 10]. Dense output is the seventh-order
continuous extension using three extra stages.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _dop853_tableau as tab
from ..errors import ConvergenceError, ParameterError

A = np.ascontiguousarray(tab.A)
C = np.ascontiguousarray(tab.C)
B = np.ascontiguousarray(tab.B)
E3 = np.ascontiguousarray(tab.E3)
E5 = np.ascontiguousarray(tab.E5)
D = np.ascontiguousarray(tab.D)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0

# status codes returned by the compiled core
STATUS_DONE = 0
STATUS_EVENTS = 1
STATUS_STEP_UNDERFLOW = 2
STATUS_GUARD = 3
STATUS_MAX_STEPS = 4

EVENT_TOL = 1e-13


@njit(cache=True)
def no_event(t, y, par):
    return 1.0


@njit(cache=True)
def no_hamiltonian(y, par):
    return 0.0


@njit(cache=True)
def _all_finite(y):
    for v in y:
        if not np.isfinite(v):
            return False
    return True


@njit  # takes compiled callables; not cacheable across processes
def rk_step(rhs, t, y, f, h, par, K):
    """One DOP853 step; fills stages ``K[0:13]`` and returns ``(y_new, f_new)``."""
    n = y.size
    K[0, :] = f
    for s in range(1, 12):
        dy = np.zeros(n)
        for j in range(s):
            a = A[s, j]
            if a != 0.0:
                dy += a * K[j]
        K[s, :] = rhs(t + C[s] * h, y + h * dy, par)
    dy = np.zeros(n)
    for j in range(12):
        if B[j] != 0.0:
            dy += B[j] * K[j]
    y_new = y + h * dy
    f_new = rhs(t + h, y_new, par)
    K[12, :] = f_new
    return y_new, f_new


@njit(cache=True)
def _error_norm(K, h, y, y_new, rtol, atol):
    n = y.size
    e5 = 0.0
    e3 = 0.0
    for i in range(n):
        sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
        s5 = 0.0
        s3 = 0.0
        for j in range(13):
            s5 += E5[j] * K[j, i]
            s3 += E3[j] * K[j, i]
        e5 += (s5 / sc) ** 2
        e3 += (s3 / sc) ** 2
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * n)


@njit  # takes compiled callables; not cacheable across processes
def dense_coefficients(rhs, t, y, y_new, f, f_new, h, par, K, F):
    """Fill ``F`` (7 x n) with the continuous-extension coefficients of the last step."""
    n = y.size
    for s in range(13, 16):
        dy = np.zeros(n)
        for j in range(s):
            a = A[s, j]
            if a != 0.0:
                dy += a * K[j]
        K[s, :] = rhs(t + C[s] * h, y + h * dy, par)
    dyv = y_new - y
    F[0, :] = dyv
    F[1, :] = h * f - dyv
    F[2, :] = 2.0 * dyv - h * (f_new + f)
    for r in range(4):
        acc = np.zeros(n)
        for j in range(16):
            d = D[r, j]
            if d != 0.0:
                acc += d * K[j]
        F[3 + r, :] = h * acc


@njit(cache=True)
def dense_eval(F, y_old, x):
    """Evaluate the continuous extension at the step fraction ``x``."""
    y = np.zeros(y_old.size)
    for i in range(7):
        y += F[6 - i]
        if i % 2 == 0:
            y *= x
        else:
            y *= 1.0 - x
    return y + y_old


@njit  # takes compiled callables; not cacheable across processes
def _initial_step(rhs, t, y, f, direction, par, rtol, atol, max_step):
    n = y.size
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + abs(y[i]) * rtol
        d0 += (y[i] / sc) ** 2
        d1 += (f[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y + h0 * direction * f
    f1 = rhs(t + h0 * direction, y1, par)
    d2 = 0.0
    for i in range(n):
        sc = atol + abs(y[i]) * rtol
        d2 += ((f1[i] - f[i]) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    if not np.isfinite(d2):
        return h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1, max_step)


@njit  # takes compiled callables; not cacheable across processes
def _locate(event, t_old, h, y_old, F, g0, g1, par):
    """Illinois iteration for the event root on the dense output of one step."""
    a, b = 0.0, 1.0
    ga, gb = g0, g1
    side = 0
    x = 1.0
    for _ in range(200):
        x = (a * gb - b * ga) / (gb - ga)
        if not (min(a, b) < x < max(a, b)):
            x = 0.5 * (a + b)
        yx = dense_eval(F, y_old, x)
        gx = event(t_old + x * h, yx, par)
        if abs(gx) <= EVENT_TOL or abs(b - a) < 1e-16:
            return x
        if gx * gb < 0.0:
            a, ga = b, gb
            b, gb = x, gx
            side = 0
        else:
            b, gb = x, gx
            if side == 1:
                ga *= 0.5
            side = 1
    return x


@njit(nogil=True)  # takes compiled callables; not cacheable across processes
def solve_core(rhs, event, ham, t0, y0, t_end, rtol, atol, max_step, first_step, par,
               fixed_step, wrap_index, store, event_direction, max_events, terminal,
               track_ham, h_ref, max_steps):
    """Adaptive (or fixed-step) DOP853 integration loop.

    Returns
    -------
    tuple
        ``(status, t, y, n_accepted, n_rejected, n_fev, ts, ys, Fs, ev_t, ev_y,
        ev_dir, n_events, drift)``; the stored arrays are trimmed.
    """
    n = y0.size
    direction = 1.0 if t_end >= t0 else -1.0
    t = t0
    y = y0.copy()
    f = rhs(t, y, par)
    nfev = 1
    K = np.empty((16, n))
    F = np.empty((7, n))

    cap = 1024 if store else 1
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    Fs = np.empty((cap, 7, n))
    nstore = 0
    if store:
        ts[0] = t
        ys[0] = y
        nstore = 1

    ev_cap = max(max_events, 1)
    ev_t = np.empty(ev_cap)
    ev_y = np.empty((ev_cap, n))
    ev_dir = np.empty(ev_cap, dtype=np.int64)
    nev = 0
    use_events = max_events > 0
    g_old = event(t, y, par) if use_events else 1.0

    if track_ham and not np.isfinite(h_ref):
        h_ref = ham(y, par)
    drift = 0.0

    if not _all_finite(f):
        return (STATUS_GUARD, t, y, 0, 0, nfev, ts[:nstore], ys[:nstore], Fs[:0],
                ev_t[:0], ev_y[:0], ev_dir[:0], 0, drift)

    if fixed_step > 0.0:
        h_abs = fixed_step
    elif first_step > 0.0:
        h_abs = min(first_step, max_step)
    else:
        h_abs = _initial_step(rhs, t, y, f, direction, par, rtol, atol, max_step)
        nfev += 1

    nacc = 0
    nrej = 0
    status = STATUS_DONE
    rejected = False
    while True:
        if direction * (t - t_end) >= 0.0:
            break
        if nacc >= max_steps:
            status = STATUS_MAX_STEPS
            break
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        if h_abs < min_step:
            status = STATUS_STEP_UNDERFLOW
            break
        h = h_abs * direction
        t_new = t + h
        if direction * (t_new - t_end) > 0.0:
            t_new = t_end
        h = t_new - t
        y_new, f_new = rk_step(rhs, t, y, f, h, par, K)
        nfev += 12
        if not (_all_finite(y_new) and _all_finite(f_new)):
            if fixed_step > 0.0:
                status = STATUS_GUARD
                break
            h_abs *= 0.25
            rejected = True
            nrej += 1
            if h_abs < min_step:
                status = STATUS_GUARD
                break
            continue

        if fixed_step > 0.0:
            accept = True
        else:
            err = _error_norm(K, h, y, y_new, rtol, atol)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                if rejected:
                    factor = min(1.0, factor)
                h_abs = min(abs(h) * factor, max_step)
                accept = True
                rejected = False
            else:
                h_abs = abs(h) * max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                rejected = True
                nrej += 1
                accept = False
        if not accept:
            continue

        need_dense = store
        g_new = 1.0
        if use_events:
            g_new = event(t_new, y_new, par)
            if (g_old * g_new < 0.0) or (g_new == 0.0 and g_old != 0.0):
                need_dense = True
        if need_dense:
            dense_coefficients(rhs, t, y, y_new, f, f_new, h, par, K, F)
            nfev += 3

        stop = False
        if use_events and ((g_old * g_new < 0.0) or (g_new == 0.0 and g_old != 0.0)):
            d = 1 if g_new > g_old else -1
            if event_direction == 0 or d == event_direction:
                x = 1.0 if g_new == 0.0 else _locate(event, t, h, y, F, g_old, g_new, par)
                if nev < max_events:
                    ev_t[nev] = t + x * h
                    ev_y[nev] = dense_eval(F, y, x)
                    ev_dir[nev] = d
                    nev += 1
                if (terminal > 0 and nev >= terminal) or nev >= max_events:
                    stop = True

        # wrap before storing so the next segment starts from the stored state
        if wrap_index >= 0:
            w = y_new[wrap_index]
            if w > math.pi or w <= -math.pi:
                y_new[wrap_index] = w - 2.0 * math.pi * math.floor((w + math.pi) / (2.0 * math.pi))
        if store:
            if nstore >= cap:
                cap2 = 2 * cap
                ts2 = np.empty(cap2)
                ys2 = np.empty((cap2, n))
                Fs2 = np.empty((cap2, 7, n))
                ts2[:cap] = ts
                ys2[:cap] = ys
                Fs2[:cap] = Fs
                ts, ys, Fs = ts2, ys2, Fs2
                cap = cap2
            ts[nstore] = t_new
            ys[nstore] = y_new
            Fs[nstore - 1] = F
            nstore += 1

        t = t_new
        y = y_new
        f = f_new
        g_old = g_new
        nacc += 1
        if track_ham:
            dh = abs(ham(y, par) - h_ref)
            if dh > drift:
                drift = dh
        if stop:
            status = STATUS_EVENTS
            t = ev_t[nev - 1]
            y = ev_y[nev - 1].copy()
            break

    return (status, t, y, nacc, nrej, nfev, ts[:nstore], ys[:nstore], Fs[:max(nstore - 1, 0)],
            ev_t[:nev], ev_y[:nev], ev_dir[:nev], nev, drift)


# ---------------------------------------------------------------------------
# Python interface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for :func:`integrate`.

    Parameters
    ----------
    rtol, atol : float
        Relative and absolute local error tolerances.
    max_step : float
        Largest allowed step.
    dense_output : bool
        Keep the continuous extension of every step.
    first_step : float
        Initial step; 0 selects it automatically.
    max_steps : int
        Hard cap on accepted steps.
    """

    rtol: float = 1e-12
    atol: float = 1e-14
    max_step: float = math.inf
    dense_output: bool = True
    first_step: float = 0.0
    max_steps: int = 100_000_000

    def __post_init__(self):
        if not self.rtol >= 1e-14:
            raise ParameterError(f"rtol must be at least 1e-14, got {self.rtol}")
        if not self.atol > 0:
            raise ParameterError("atol must be positive")
        if not self.max_step > 0:
            raise ParameterError("max_step must be positive")


class Trajectory:
    """Dense solution returned by :func:`integrate`.

    Attributes
    ----------
    t, y : arrays
        Accepted step points and states.
    status : int
        Termination code of the compiled core.
    t_events, y_events, event_directions : arrays
        Located events, if an event function was supplied.
    drift : float
        Largest Hamiltonian deviation seen, if monitored.
    """

    def __init__(self, ts, ys, Fs, status, nfev, n_accepted, n_rejected,
                 t_events, y_events, event_directions, drift, t_final, y_final):
        self.t = ts
        self.y = ys
        self._F = Fs
        self.status = status
        self.nfev = nfev
        self.n_accepted = n_accepted
        self.n_rejected = n_rejected
        self.t_events = t_events
        self.y_events = y_events
        self.event_directions = event_directions
        self.drift = drift
        self.t_final = t_final
        self.y_final = y_final

    def __call__(self, t):
        """Evaluate the continuous extension at scalar or array ``t``."""
        if len(self.t) < 2:
            raise ValueError("no dense output stored")
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        forward = self.t[-1] >= self.t[0]
        if forward:
            idx = np.searchsorted(self.t, tt, side="right") - 1
        else:
            idx = len(self.t) - 1 - np.searchsorted(self.t[::-1], tt, side="left")
        idx = np.clip(idx, 0, len(self.t) - 2)
        out = np.empty((len(tt), self.y.shape[1]))
        for k, (ti, i) in enumerate(zip(tt, idx)):
            h = self.t[i + 1] - self.t[i]
            out[k] = dense_eval(self._F[i], self.y[i], (ti - self.t[i]) / h)
        return out[0] if scalar else out


def _as_par(par):
    if par is None:
        return np.zeros(1)
    return np.ascontiguousarray(par, dtype=float)


def integrate(field, y0, t_end, cfg=None, t0=0.0, par=None, event=None,
              event_direction=0, max_events=0, terminal=0, wrap_index=-1,
              hamiltonian=None, h_ref=math.nan, fixed_step=0.0, raise_on_failure=True):
    """Integrate ``y' = field(t, y, par)`` from ``t0`` to ``t_end``.

    Parameters
    ----------
    field : numba dispatcher
        Compiled right-hand side ``f(t, y, par)``.
    y0 : array_like
    t_end : float
        May be smaller than ``t0`` for backward integration.
    cfg : IntegratorConfig, optional
    par : array_like, optional
        Parameter vector passed to ``field``.
    event : numba dispatcher, optional
        Scalar function ``g(t, y, par)``; sign changes are located on the dense
        output to ``|g| <= 1e-13``.
    event_direction : {0, 1, -1}
        Record all crossings, only increasing or only decreasing ones.
    max_events, terminal : int
        Capacity of the event buffer and the number of events after which to
        stop (0 never stops early).
    wrap_index : int
        Component wrapped into ``(-pi, pi]`` after every step, or -1.
    hamiltonian : numba dispatcher, optional
        ``H(y, par)`` monitored after every accepted step.
    h_ref : float
        Reference level for the drift; defaults to ``H(y0)``.
    fixed_step : float
        Use this constant step without error control when positive.

    Returns
    -------
    Trajectory
    """
    cfg = cfg or IntegratorConfig()
    par = _as_par(par)
    y0 = np.ascontiguousarray(y0, dtype=float)
    if event is None:
        event = no_event
        max_events = 0
    elif max_events <= 0:
        max_events = 1_000_000
    track = hamiltonian is not None
    ham = hamiltonian if track else no_hamiltonian
    res = solve_core(field, event, ham, float(t0), y0, float(t_end), cfg.rtol, cfg.atol,
                     float(cfg.max_step), float(cfg.first_step), par, float(fixed_step),
                     int(wrap_index), bool(cfg.dense_output), int(event_direction),
                     int(max_events), int(terminal), track, float(h_ref), int(cfg.max_steps))
    (status, t, y, nacc, nrej, nfev, ts, ys, Fs, ev_t, ev_y, ev_dir, nev, drift) = res
    if raise_on_failure and status in (STATUS_STEP_UNDERFLOW, STATUS_GUARD, STATUS_MAX_STEPS):
        reason = {STATUS_STEP_UNDERFLOW: "step size underflow",
                  STATUS_GUARD: "right-hand side not finite (singularity or alignment guard)",
                  STATUS_MAX_STEPS: "maximum number of steps reached"}[status]
        raise ConvergenceError(f"integration stopped at t={t:.17g}: {reason}; state={y.tolist()}")
    return Trajectory(ts, ys, Fs, status, nfev, nacc, nrej, ev_t, ev_y, ev_dir,
                      drift, t, y)
