"""Command-line front end.

Every subcommand reads an optional ``--config`` file in the ``key=value``
format of :func:`rodchaos.model.parse_parameters`; command-line flags use
the same keys (``lambda_bar`` becomes ``--lambda-bar``) and override the
file. Tables are written as CSV with 17 significant digits, metadata as
JSON and figures as SVG. Exit codes: 0 success, 2 parameter error,
3 numerical failure.
"""

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .canonical import (
    LevelSpec, canonical_to_noncanonical, complete_state_on_level, field4, hamiltonian4,
)
from .dynamics.dop853 import IntegratorConfig, integrate
from .dynamics.multipulse import PulseCountError, shoot_multipulse, unfold_multipulse
from .dynamics.sections import poincare_section
from .errors import AlignmentError, ConvergenceError, NoSignChangeError, ParameterError, RodChaosError
from .homoclinic import branch_errors, homoclinic_orbit, orbit_closed_form, psi_rate
from .melnikov import find_amplitude_zero, melnikov_curve
from .model import (
    DIMENSIONLESS_KEYS, PHYSICAL_KEYS, RodParameters, nondimensionalize,
    parse_parameters,
)
from .noncanonical import field9, field_params, hamiltonian9_kernel
from .svg import PALETTE, Panel, Series, fmt, write_svg
from .verify import report, run_checks

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_NUMERICAL = 3

THREADS_ENV = "RODCHAOS_THREADS"

COMMON_OPTIONS = {"out": (".", "output directory")}

OPTIONS = {
    "homoclinic": {
        "t_min": ("-1", "first sample time"),
        "t_max": ("1", "last sample time"),
        "samples": ("401", "number of samples"),
    },
    "melnikov": {
        "gammas": ("1,1.2,1.4,1.6,1.8,2", "comma-separated extensibility values"),
        "a": ("1", "mu = a eps^2"),
        "b": ("0", "lambda_bar = b eps^2"),
        "psi0_samples": ("513", "samples of psi0 on [0, 2 pi]"),
        "gamma_range": ("1.8,2.0", "bracket searched for a zero of the amplitude"),
        "tol": ("1e-10", "quadrature refinement tolerance"),
    },
    "poincare": {
        "h": ("0.9", "Hamiltonian level"),
        "theta": ("0.1", "initial theta"),
        "psi": ("0", "initial psi"),
        "p_theta": ("0.5", "initial p_theta_bar"),
        "crossings": ("10000", "number of section crossings"),
        "t_max": ("inf", "time budget"),
        "rtol": ("1e-12", "relative tolerance"),
        "atol": ("1e-14", "absolute tolerance"),
        "sweep": ("", "panel sweep such as lambda_bar=0.135,0.1575"),
    },
    "multipulse": {
        "pulses": ("2,4", "comma-separated pulse counts"),
        "offset": ("1e-6", "launch distance from the saddle"),
        "n_scan": ("72", "launch angles in the initial scan"),
        "unfold": ("", "parameter solved for when the orbits are not generic, e.g. delta"),
        "unfold_bracket": ("", "interval for the unfolded parameter, e.g. 1,2"),
    },
    "simulate": {
        "system": ("4d", "4d or 9d"),
        "theta": ("0.1", "initial theta"),
        "psi": ("0", "initial psi"),
        "p_theta": ("0.5", "initial p_theta_bar"),
        "p_psi": ("", "initial p_psi_bar; solved from h when empty"),
        "h": ("", "Hamiltonian level used when p_psi is empty"),
        "phi": ("0", "initial twist angle for the 9d system"),
        "t_end": ("100", "final dimensionless time"),
        "samples": ("1001", "output samples"),
        "rtol": ("1e-12", "relative tolerance"),
        "atol": ("1e-14", "absolute tolerance"),
    },
    "verify": {
        "seed": ("0", "seed of the random states"),
        "n_states": ("1000", "random states per property check"),
        "t_integral": ("1000", "integration time of the first-integral checks"),
    },
}

NEEDS_PARAMETERS = ("homoclinic", "melnikov", "poincare", "multipulse", "simulate")


# ---------------------------------------------------------------- configuration

def _split_lines(text):
    items = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        if key in items:
            raise ParameterError(f"line {lineno}: duplicate key {key!r}")
        items[key] = value
    return items


@dataclass
class RunConfig:
    """Validated settings of one subcommand run.

    Attributes
    ----------
    subcommand : str
    items : dict
        Keys and raw values in input order; serialized by :meth:`to_text`.
    params : RodParameters, DimensionlessParameters or None
    options : dict
        Experiment options as strings, defaults filled in.
    """

    subcommand: str
    items: dict
    params: object = None
    options: dict = field(default_factory=dict)

    @classmethod
    def from_items(cls, subcommand, items):
        keys = {**COMMON_OPTIONS, **OPTIONS[subcommand]}
        param_items = {k: v for k, v in items.items() if k not in keys}
        params = None
        if subcommand in NEEDS_PARAMETERS:
            text = "".join(f"{k}={v}\n" for k, v in param_items.items())
            params, _ = parse_parameters(text)
        elif param_items:
            raise ParameterError(f"{subcommand} takes no parameters: {sorted(param_items)}")
        options = {k: items.get(k, d) for k, (d, _) in keys.items()}
        return cls(subcommand, dict(items), params, options)

    @classmethod
    def from_text(cls, subcommand, text, overrides=None):
        items = _split_lines(text)
        items.update(overrides or {})
        return cls.from_items(subcommand, items)

    def to_text(self):
        return "".join(f"{k}={v}\n" for k, v in self.items.items())

    def number(self, key):
        try:
            return float(self.options[key])
        except ValueError:
            raise ParameterError(f"{key}: cannot parse {self.options[key]!r} as a number") from None

    def integer(self, key):
        value = self.number(key)
        if value != int(value):
            raise ParameterError(f"{key} must be an integer")
        return int(value)

    def numbers(self, key):
        text = self.options[key].strip()
        if not text:
            return []
        try:
            return [float(x) for x in text.split(",")]
        except ValueError:
            raise ParameterError(f"{key}: cannot parse {text!r} as a number list") from None

    def dimensionless(self):
        """Dimensionless parameters; physical sets are converted."""
        if isinstance(self.params, RodParameters):
            return nondimensionalize(self.params)[0]
        return self.params

    def output_dir(self):
        out = Path(self.options["out"])
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ParameterError(f"output directory {out} is not writable")
        return out


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="rodchaos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "homoclinic": "sample the field-free homoclinic orbit and its inextensible limit",
        "melnikov": "Mel'nikov curves, amplitude table and amplitude zero",
        "poincare": "Poincare sections on sin(psi) = 0",
        "multipulse": "reversible multipulse homoclinic orbits",
        "simulate": "raw trajectory of the 4d or 9d system",
        "verify": "run the invariant checks and write a JSON report",
    }
    for name, options in OPTIONS.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="key=value file; flags override its entries")
        if name in NEEDS_PARAMETERS:
            group = p.add_argument_group("parameters")
            for key in DIMENSIONLESS_KEYS + PHYSICAL_KEYS:
                group.add_argument(_flag(key), dest=f"param:{key}", metavar="VALUE")
        for key, (default, text) in {**COMMON_OPTIONS, **options}.items():
            p.add_argument(_flag(key), dest=f"opt:{key}", metavar="VALUE",
                           help=f"{text} (default: {default or 'unset'})")
    return parser


def config_from_args(args):
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ParameterError(f"cannot read config: {exc}") from None
    overrides = {}
    for dest, value in vars(args).items():
        if value is not None and ":" in dest:
            overrides[dest.split(":", 1)[1]] = value
    return RunConfig.from_text(args.subcommand, text, overrides)


def worker_count(n_tasks):
    """Worker threads for ``n_tasks`` independent jobs, capped by ``RODCHAOS_THREADS``."""
    cap = os.environ.get(THREADS_ENV, "")
    try:
        limit = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_tasks))


def fan_out(fn, tasks):
    """``[fn(t) for t in tasks]`` evaluated on worker threads; order is preserved."""
    tasks = list(tasks)
    n = worker_count(len(tasks))
    if n == 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- output helpers

def write_csv(path, header, columns):
    columns = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _params_record(dp):
    return {k: getattr(dp, k) for k in DIMENSIONLESS_KEYS}


def _tag(x):
    return format(x, "g")


# ---------------------------------------------------------------- subcommands

def cmd_homoclinic(cfg):
    """Orbit tables ``theta``, ``p_theta_bar`` and ``psi'`` for the extensible and inextensible rods."""
    dp = cfg.dimensionless()
    out = cfg.output_dir()
    t = np.linspace(cfg.number("t_min"), cfg.number("t_max"), cfg.integer("samples"))
    orbit = homoclinic_orbit(dp.m, dp.gamma)
    limit = homoclinic_orbit(dp.m, 0.0)
    th, p = orbit_closed_form(t, orbit)
    th0, p0 = orbit_closed_form(t, limit)
    tables = {"theta": (th, th0), "p_theta": (p, p0), "psi_dot": (psi_rate(th), psi_rate(th0))}
    panels = []
    for name, (ext, inext) in tables.items():
        write_csv(out / f"homoclinic_{name}.csv", ["t", "extensible", "inextensible"], [t, ext, inext])
        panels.append(Panel([Series(t, ext, color=PALETTE[0], label=f"gamma={_tag(dp.gamma)}"),
                             Series(t, inext, color=PALETTE[1], label="gamma=0", dashed=True)],
                            xlim=(t[0], t[-1]), xlabel="t", ylabel=name))
    write_svg(out / "homoclinic.svg", panels, ncols=3)
    errors = branch_errors(orbit)
    meta = {"params": {"m": dp.m, "gamma": dp.gamma}, "branch": orbit.branch, "k": orbit.k,
            "u_plus": orbit.u_plus, "u_minus": orbit.u_minus, "sigma": orbit.sigma, "h": orbit.h,
            "branch_errors": errors}
    write_json(out / "homoclinic.json", meta)
    print(f"branch: {orbit.branch} (k = {orbit.k:.12g})")
    return EXIT_OK


def cmd_melnikov(cfg):
    """Normalized Mel'nikov curves for each ``gamma``, the amplitude table and the amplitude zero."""
    dp = cfg.dimensionless()
    out = cfg.output_dir()
    gammas = cfg.numbers("gammas")
    if not gammas:
        raise ParameterError("gammas must not be empty")
    a, b, tol = cfg.number("a"), cfg.number("b"), cfg.number("tol")
    if not a - 2.0 * b > 0:
        raise ParameterError(f"a - 2b = {a - 2.0 * b} must be positive")
    n = cfg.integer("psi0_samples")
    curves = fan_out(lambda g: melnikov_curve(dp.m, g, a, b, n, tol), gammas)
    series = []
    for k, c in enumerate(curves):
        write_csv(out / f"melnikov_gamma_{_tag(c.gamma)}.csv", ["psi0", "M_normalized"], [c.psi0, c.normalized])
        series.append(Series(c.psi0, c.normalized, color=PALETTE[k % len(PALETTE)], label=f"gamma={_tag(c.gamma)}"))
    at_half_pi = np.array([-c.amplitude / dp.m ** 2 for c in curves])
    write_csv(out / "melnikov_amplitudes.csv", ["gamma", "amplitude", "M_normalized_half_pi", "T"],
              [gammas, [c.amplitude for c in curves], at_half_pi, [c.T for c in curves]])
    write_svg(out / "melnikov.svg", [Panel(series, xlim=(0.0, 2 * math.pi), xlabel="psi0", ylabel="M/sqrt(a-2b)")])
    order = np.argsort(gammas)
    diffs = np.diff(at_half_pi[order])
    summary = {"m": dp.m, "a": a, "b": b, "tol": tol, "gammas": gammas,
               "amplitudes": [c.amplitude for c in curves], "M_normalized_half_pi": at_half_pi,
               "decreasing_in_gamma_at_half_pi": bool(np.all(diffs < 0)),
               "increasing_in_gamma_at_half_pi": bool(np.all(diffs > 0))}
    lo, hi = cfg.numbers("gamma_range") or (min(gammas), max(gammas))
    try:
        g_star = find_amplitude_zero(dp.m, (lo, hi), tol=tol)
        g_fine = find_amplitude_zero(dp.m, (lo, hi), tol=tol * 1e-2)
        summary.update(sign_change=True, gamma_star=g_star, gamma_star_refined=g_fine,
                       gamma_star_shift=abs(g_fine - g_star))
    except NoSignChangeError as exc:
        summary.update(sign_change=False, gamma_star=None, gamma_range=[lo, hi],
                       amplitude_at_range_ends=list(exc.values))
        print(f"no amplitude sign change on [{lo}, {hi}]: {exc.values[0]:.6g}, {exc.values[1]:.6g}",
              file=sys.stderr)
    write_json(out / "melnikov.json", summary)
    return EXIT_OK


def _level_state(cfg, dp, h):
    try:
        return complete_state_on_level(cfg.number("theta"), cfg.number("psi"), cfg.number("p_theta"),
                                       LevelSpec(h, dp))
    except (ConvergenceError, AlignmentError) as exc:
        raise ParameterError(f"level h={h} not attainable from the initial state: {exc}") from None


def _sweep(cfg, dp):
    text = cfg.options["sweep"].strip()
    if not text:
        return [dp]
    if "=" not in text:
        raise ParameterError("sweep must read key=v1,v2,...")
    key, values = (x.strip() for x in text.split("=", 1))
    if key not in DIMENSIONLESS_KEYS:
        raise ParameterError(f"cannot sweep {key!r}")
    try:
        return [dp.replace(**{key: float(v)}) for v in values.split(",")]
    except ValueError:
        raise ParameterError(f"sweep: cannot parse {values!r}") from None


def cmd_poincare(cfg):
    """Section crossings of ``sin(psi) = 0`` for one orbit per panel."""
    base = cfg.dimensionless()
    out = cfg.output_dir()
    h = cfg.number("h")
    ic = IntegratorConfig(rtol=cfg.number("rtol"), atol=cfg.number("atol"), dense_output=False)
    n = cfg.integer("crossings")
    t_max = cfg.number("t_max")
    panels_dp = _sweep(cfg, base)
    starts = [_level_state(cfg, dp, h) for dp in panels_dp]

    def run(job):
        dp, y0 = job
        return poincare_section(y0, LevelSpec(h, dp), n, ic, t_max)

    datasets = fan_out(run, zip(panels_dp, starts))
    panels, meta = [], []
    for k, ds in enumerate(datasets):
        c = ds.crossings
        write_csv(out / f"poincare_{k}.csv", ["t", "theta", "p_theta", "cos_psi_sign"], c.T)
        record = ds.metadata()
        record.pop("wall_time")
        record["file"] = f"poincare_{k}.csv"
        meta.append(record)
        series = [Series(c[c[:, 3] == sgn, 1], c[c[:, 3] == sgn, 2], kind="scatter", color=color)
                  for sgn, color in ((1.0, PALETTE[0]), (-1.0, PALETTE[1]))]
        title = ", ".join(f"{key}={_tag(getattr(ds.params, key))}" for key in DIMENSIONLESS_KEYS)
        panels.append(Panel(series, xlabel="theta", ylabel="p_theta", title=title))
        print(f"panel {k}: {ds.n_crossings} crossings, t = {ds.t_final:.6g}, drift = {ds.drift:.3e}, "
              f"{ds.wall_time:.1f} s")
    write_svg(out / "poincare.svg", panels, ncols=2)
    write_json(out / "poincare.json", {"panels": meta})
    return EXIT_OK


def cmd_multipulse(cfg):
    """Shoot each requested pulse count; failures are recorded with their final residual."""
    dp = cfg.dimensionless()
    out = cfg.output_dir()
    pulses = [int(x) for x in cfg.numbers("pulses")]
    kw = {"offset": cfg.number("offset"), "n_scan": cfg.integer("n_scan")}
    unfold = cfg.options["unfold"].strip()
    bracket = cfg.numbers("unfold_bracket")
    if unfold and len(bracket) != 2:
        raise ParameterError("unfold needs unfold_bracket=lo,hi")
    if unfold and unfold not in DIMENSIONLESS_KEYS:
        raise ParameterError(f"cannot unfold {unfold!r}")

    def run(n):
        try:
            if unfold:
                value, orbit = unfold_multipulse(dp, n, unfold, tuple(bracket), **kw)
                return n, orbit, {"unfolded": {unfold: value}}
            return n, shoot_multipulse(dp, n, **kw), {}
        except PulseCountError as exc:
            return n, None, {"error": str(exc), "residual": exc.residual,
                             "pulse_count": exc.orbit.pulse_count}
        except ConvergenceError as exc:
            return n, None, {"error": str(exc), "residual": exc.residual}

    results = fan_out(run, pulses)
    series, records = [], {}
    failed = False
    field_free = dp.lambda_bar == 0 and dp.mu == 0
    for k, (n, orbit, extra) in enumerate(results):
        rec = {"converged": orbit is not None, **extra}
        if orbit is None:
            failed = True
            print(f"{n}-pulse: failed ({extra['error']})", file=sys.stderr)
            records[str(n)] = rec
            continue
        cols = [orbit.t, *orbit.states.T]
        header = ["t", "theta", "psi", "p_theta", "p_psi"]
        if field_free and n == 1:
            cols.append(orbit_closed_form(orbit.t, homoclinic_orbit(dp.m, dp.gamma))[0])
            header.append("theta_closed_form")
        write_csv(out / f"multipulse_{n}.csv", header, cols)
        series.append(Series(orbit.t, orbit.theta, color=PALETTE[k % len(PALETTE)], label=f"{n}-pulse",
                             dashed=k % 2 == 1))
        if len(header) == 6:
            series.append(Series(orbit.t, cols[-1], color="black", label="closed form", dashed=True))
        rec.update(params=_params_record(orbit.params), pulse_count=orbit.pulse_count,
                   closure_residual=orbit.closure_residual, symmetry_residual=orbit.symmetry_residual,
                   alpha=orbit.alpha, half_time=orbit.half_time, iterations=orbit.iterations,
                   method=orbit.method, file=f"multipulse_{n}.csv")
        records[str(n)] = rec
        print(f"{n}-pulse: closure {orbit.closure_residual:.2e}, symmetry {orbit.symmetry_residual:.2e}")
    if series:
        write_svg(out / "multipulse.svg", [Panel(series, xlabel="t", ylabel="theta")])
    write_json(out / "multipulse.json", {"params": _params_record(dp), "orbits": records})
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_simulate(cfg):
    """Dense trajectory of the reduced (``4d``) or non-canonical (``9d``) system."""
    system = cfg.options["system"].lower()
    if system not in ("4d", "9d"):
        raise ParameterError("system must be 4d or 9d")
    out = cfg.output_dir()
    if isinstance(cfg.params, RodParameters):
        rod = cfg.params
        dp = nondimensionalize(rod)[0]
    else:
        dp = cfg.params
        rod = RodParameters.from_dimensionless(dp)
    if cfg.options["p_psi"]:
        s0 = (cfg.number("theta"), cfg.number("psi"), cfg.number("p_theta"), cfg.number("p_psi"))
    elif cfg.options["h"]:
        s0 = tuple(_level_state(cfg, dp, cfg.number("h")))
    else:
        raise ParameterError("give p_psi or h")
    ic = IntegratorConfig(rtol=cfg.number("rtol"), atol=cfg.number("atol"))
    t_end = cfg.number("t_end")
    ts = np.linspace(0.0, t_end, cfg.integer("samples"))
    if system == "4d":
        par = dp.as_array()
        tr = integrate(field4, np.array(s0, dtype=float), t_end, ic, par=par, hamiltonian=hamiltonian4)
        ys = tr(ts)
        H = [hamiltonian4(y, par) for y in ys]
        header = ["t", "theta", "psi", "p_theta", "p_psi", "H"]
    else:
        par = field_params(rod)
        y0 = canonical_to_noncanonical(s0, cfg.number("phi"), rod)
        # arclength s = t B / m3
        scale = rod.B1 / rod.m3
        tr = integrate(field9, y0, t_end * scale, ic, par=par, hamiltonian=hamiltonian9_kernel)
        ys = tr(ts * scale)
        H = [hamiltonian9_kernel(y, par) for y in ys]
        header = ["t", "m1", "m2", "m3", "n1", "n2", "n3", "e1", "e2", "e3", "H"]
    write_csv(out / f"trajectory_{system}.csv", header, [ts, *ys.T, H])
    write_json(out / f"trajectory_{system}.json",
               {"system": system, "params": _params_record(dp), "initial_state": list(s0),
                "t_end": t_end, "rtol": ic.rtol, "atol": ic.atol, "drift": tr.drift})
    return EXIT_OK


def cmd_verify(cfg):
    """Run the invariant checks; exit code 3 if any fails."""
    out = cfg.output_dir()
    seed = cfg.integer("seed")
    checks = run_checks(seed=seed, n_states=cfg.integer("n_states"), t_integral=cfg.number("t_integral"))
    rep = report(checks, seed)
    write_json(out / "verify.json", rep)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} {c.relation} {c.bound:.1e}")
    return EXIT_OK if rep["passed"] else EXIT_NUMERICAL


COMMANDS = {
    "homoclinic": cmd_homoclinic,
    "melnikov": cmd_melnikov,
    "poincare": cmd_poincare,
    "multipulse": cmd_multipulse,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.subcommand](cfg)
    except (ParameterError, AlignmentError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except RodChaosError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
