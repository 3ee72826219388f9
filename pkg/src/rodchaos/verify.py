"""Invariant checks over all modules with measured values and bounds.

Every check returns a :class:`Check` holding the measured quantity, the bound
it is compared against and the outcome. :func:`run_checks` runs the suite
with a seeded generator; :func:`report` turns the result into a JSON-ready
dict.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .canonical import (
    LevelSpec, canonical_to_noncanonical, complete_state_on_level, field4, grad_hamiltonian_nondim,
    hamiltonian4, hamiltonian_nondim, i2bar_kernel,
)
from .dynamics.dop853 import IntegratorConfig, integrate
from .dynamics.multipulse import field_reg, hamiltonian_reg
from .homoclinic import (
    BRANCH_CORRECTED, branch_errors, homoclinic_orbit, kirchhoff_orbit, orbit_closed_form,
    orbit_quadrature, planar_field, potential,
)
from .melnikov import (
    dh0_dp, dh0_dtheta, dh1_dp, dh1_dtheta, domega0_dtheta, h0, h1, melnikov_integrand, omega0, psi_bar,
)
from .model import DimensionlessParameters, RodParameters
from .noncanonical import (
    casimir_gradients, casimirs, field9, field_params, grad_hamiltonian9, hamiltonian9,
    structure_matrix,
)

JACOBI_TOL = 1e-12
CASIMIR_TOL = 1e-12
GRADIENT_TOL = 1e-6
ORBIT_TOL = 1e-8
ENERGY_TOL = 1e-10
KIRCHHOFF_TOL = 1e-3
I2_TOL = 1e-9
I2_BREAKING = 1e-3
EQUIVALENCE_TOL = 1e-6

SECTION_START = (0.1, 0.0, 0.5)
ORBIT_GAMMAS = (0.05, 1.0, 2.0, 5.0)


@dataclass
class Check:
    name: str
    value: float
    bound: float
    relation: str = "<"
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        if not math.isfinite(self.value):
            return False
        if self.relation == "<":
            return self.value < self.bound
        if self.relation == "<=":
            return self.value <= self.bound
        return self.value > self.bound


# ---------------------------------------------------------------- random samples

def random_states9(rng, n):
    return rng.normal(size=(n, 9))


def random_rods(rng, n):
    rods = []
    for _ in range(n):
        B1, B2, C, H, J, K = rng.uniform(0.5, 3.0, size=6)
        lam, C1, C2, m3 = rng.uniform(-1.0, 1.0, size=4)
        rods.append(RodParameters(B1, B2, C, H, J, K, lam, C1, C2, m3))
    return rods


def random_reduced(rng, n):
    """Pairs ``(state, params)`` with ``sin(theta) > 0.19`` and radicand above 0.1."""
    out = []
    for _ in range(n):
        dp = DimensionlessParameters(m=rng.uniform(0.5, 3.0), gamma=rng.uniform(0, 3),
                                     delta=rng.uniform(0, 3), lambda_bar=rng.uniform(-0.3, 0.3),
                                     mu=rng.uniform(0.7, 1.5))
        s = (rng.uniform(0.2, math.pi - 0.2), rng.uniform(0, 2 * math.pi),
             rng.uniform(-1, 1), rng.uniform(-1, 1))
        out.append((s, dp))
    return out


def central_gradient(f, x, rel_step=1e-6):
    """Central differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty(len(x))
    for i in range(len(x)):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros(len(x))
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=float)
    return float(np.max(np.abs(a - numeric)) / max(np.max(np.abs(a)), 1e-300))


# ---------------------------------------------------------------- bracket algebra

def structure_derivative(structure, s, lam):
    """``dJ[i, j, l] = d J_ij / d x_l`` by unit central differences (exact for affine ``J``)."""
    dJ = np.empty((9, 9, 9))
    for l in range(9):
        e = np.zeros(9)
        e[l] = 1.0
        dJ[:, :, l] = 0.5 * (structure(s + e, lam) - structure(s - e, lam))
    return dJ


def jacobi_tensor(structure, s, lam):
    """Cyclic sum ``J_il d_l J_jk + J_jl d_l J_ki + J_kl d_l J_ij`` for all triples."""
    Jm = structure(s, lam)
    dJ = structure_derivative(structure, s, lam)
    return (np.einsum("il,jkl->ijk", Jm, dJ) + np.einsum("jl,kil->ijk", Jm, dJ)
            + np.einsum("kl,ijl->ijk", Jm, dJ))


def check_antisymmetry(rng, structure=structure_matrix, n=100):
    worst = 0.0
    for s in random_states9(rng, n):
        Jm = structure(s, rng.uniform(-2, 2))
        worst = max(worst, float(np.max(np.abs(Jm + Jm.T))))
    return Check("bracket.antisymmetry", worst, 0.0, "<=", {"states": n})


def check_jacobi(rng, structure=structure_matrix, n=100):
    worst = 0.0
    for s in random_states9(rng, n):
        worst = max(worst, float(np.max(np.abs(jacobi_tensor(structure, s, rng.uniform(-2, 2))))))
    return Check("bracket.jacobi", worst, JACOBI_TOL, "<", {"states": n, "triples": 729})


def check_casimirs(rng, structure=structure_matrix, n=1000):
    worst = 0.0
    for s in random_states9(rng, n):
        lam = rng.uniform(-2, 2)
        worst = max(worst, float(np.max(np.abs(structure(s, lam) @ casimir_gradients(s, lam).T))))
    return Check("bracket.casimirs", worst, CASIMIR_TOL, "<", {"states": n})


# ---------------------------------------------------------------- gradients

def check_gradient_hamiltonian9(rng, n=1000):
    worst = 0.0
    for s, p in zip(random_states9(rng, n), random_rods(rng, n)):
        fd = central_gradient(lambda x: hamiltonian9(x, p), s)
        worst = max(worst, relative_error(grad_hamiltonian9(s, p), fd))
    return Check("gradient.hamiltonian9", worst, GRADIENT_TOL, "<", {"states": n})


def check_gradient_reduced(rng, n=1000):
    worst = 0.0
    for s, dp in random_reduced(rng, n):
        fd = central_gradient(lambda x: hamiltonian_nondim(x, dp), s)
        worst = max(worst, relative_error(grad_hamiltonian_nondim(s, dp), fd))
    return Check("gradient.reduced", worst, GRADIENT_TOL, "<", {"states": n})


def check_gradient_casimirs(rng, n=1000):
    worst = 0.0
    for s in random_states9(rng, n):
        lam = rng.uniform(-2, 2)
        G = casimir_gradients(s, lam)
        for i in range(3):
            fd = central_gradient(lambda x: casimirs(x, lam)[i], s)
            worst = max(worst, relative_error(G[i], fd))
    return Check("gradient.casimirs", worst, GRADIENT_TOL, "<", {"states": n})


def check_gradient_regularized(rng, n=1000):
    """Hamilton's equations of the regularized chart against the gradient of its Hamiltonian."""
    worst = 0.0
    for (theta, psi, P, Q), dp in random_reduced(rng, n):
        r = 0.5 * theta
        z = np.array([r * math.cos(psi), r * math.sin(psi), P, Q])
        par = np.append(dp.as_array(), 0.3)
        f = field_reg(0.0, z, par)
        fd = central_gradient(lambda x: hamiltonian_reg(x, par), z)
        # z' = (dH/dp_x, dH/dp_y, -dH/dx, -dH/dy)
        worst = max(worst, relative_error(np.array([-f[2], -f[3], f[0], f[1]]), fd))
    return Check("gradient.regularized", worst, GRADIENT_TOL, "<", {"states": n})


def check_gradient_perturbation(rng, n=1000):
    """Partial derivatives of the unperturbed and first-order Hamiltonians."""
    worst = 0.0
    for _ in range(n):
        m, g = rng.uniform(0.5, 3.0), rng.uniform(0, 5)
        a, b = rng.uniform(0.5, 2.0), rng.uniform(-0.2, 0.2)
        theta, psi, p = rng.uniform(0.2, 2.5), rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1)
        fd0 = central_gradient(lambda x: h0(x[0], x[1], 1.0, m, g), [theta, p])
        fd1 = central_gradient(lambda x: h1(x[0], psi, 1.0, m, g, a, b), [theta, p])
        worst = max(worst, relative_error([dh0_dtheta(theta, m, g), dh0_dp(p)], fd0))
        an1 = np.array([dh1_dtheta(theta, psi, m, g, a, b), dh1_dp(p)])
        worst = max(worst, float(np.max(np.abs(an1 - fd1)) / max(np.max(np.abs(an1)), 1e-3)))
        fdw = central_gradient(lambda x: omega0(x[0]), [theta])
        worst = max(worst, relative_error([domega0_dtheta(theta)], fdw))
    return Check("gradient.perturbation", worst, GRADIENT_TOL, "<", {"states": n})


# ---------------------------------------------------------------- homoclinic orbit

def check_orbit_quadrature(m=1.7, gammas=ORBIT_GAMMAS, times=np.linspace(0.25, 12.0, 24)):
    worst = 0.0
    for g in gammas:
        orbit = homoclinic_orbit(m, g)
        theta, _ = orbit_closed_form(times, orbit)
        for t, th in zip(times, theta):
            worst = max(worst, abs(orbit_quadrature(th, orbit) - t))
    return Check("homoclinic.quadrature", worst, ORBIT_TOL, "<", {"m": m, "gammas": list(gammas)})


def _derivative(f, t, h=1e-3):
    # sixth-order central difference
    c = (1 / 60, -3 / 20, 3 / 4)
    return sum(ck * (f(t + (3 - k) * h) - f(t - (3 - k) * h)) for k, ck in enumerate(c)) / h


def check_orbit_ode(m=1.7, gammas=ORBIT_GAMMAS, times=np.linspace(-10.0, 10.0, 81)):
    worst = 0.0
    for g in gammas:
        orbit = homoclinic_orbit(m, g)
        theta, p = orbit_closed_form(times, orbit)
        dtheta = _derivative(lambda t: orbit_closed_form(t, orbit)[0], times)
        dp = _derivative(lambda t: orbit_closed_form(t, orbit)[1], times)
        f_theta, f_p = planar_field(theta, p, m, g)
        worst = max(worst, float(np.max(np.abs(dtheta - f_theta))), float(np.max(np.abs(dp - f_p))))
    return Check("homoclinic.ode_residual", worst, ORBIT_TOL, "<", {"m": m, "gammas": list(gammas)})


def check_orbit_energy(m=1.7, gammas=ORBIT_GAMMAS, times=np.linspace(-20.0, 20.0, 401)):
    worst = 0.0
    for g in gammas:
        orbit = homoclinic_orbit(m, g)
        theta, p = orbit_closed_form(times, orbit)
        e = 0.5 * p * p + potential(theta, m, g) - (1.0 + 0.5 * g) / m ** 2
        worst = max(worst, float(np.max(np.abs(e))))
    return Check("homoclinic.energy", worst, ENERGY_TOL, "<", {"m": m, "gammas": list(gammas)})


def check_kirchhoff_limit(m=1.7, gamma=1e-4, times=np.linspace(-10.0, 10.0, 201)):
    theta, _ = orbit_closed_form(times, homoclinic_orbit(m, gamma))
    theta_k, _ = kirchhoff_orbit(times, m)
    return Check("homoclinic.kirchhoff_limit", float(np.max(np.abs(theta - theta_k))), KIRCHHOFF_TOL, "<",
                 {"m": m, "gamma": gamma})


def check_branch(m=1.7, gamma=1.0):
    """Which closed form reproduces the quadrature; records ``k`` and every candidate's error."""
    orbit = homoclinic_orbit(m, gamma)
    errors = branch_errors(orbit)
    detail = {"m": m, "gamma": gamma, "k": orbit.k, "k_below_one": orbit.k < 1.0,
              "selected": orbit.branch,
              "errors": {b: (e if math.isfinite(e) else "inf") for b, e in errors.items()}}
    value = errors.get(BRANCH_CORRECTED, math.inf) if orbit.branch == BRANCH_CORRECTED else math.inf
    return Check("homoclinic.branch", value, ORBIT_TOL, "<", detail)


# ---------------------------------------------------------------- integrals and formulations

def i2_variation(dp, h, t_end=1000.0, n=20001, start=SECTION_START):
    """Largest ``|I2(t) - I2(0)|`` sampled on ``n`` points of ``[0, t_end]``, and the energy drift."""
    s = complete_state_on_level(*start, LevelSpec(h, dp))
    par = dp.as_array()
    tr = integrate(field4, np.array(s), t_end, IntegratorConfig(), par=par, hamiltonian=hamiltonian4, h_ref=h)
    ys = tr(np.linspace(0.0, t_end, n))
    I = np.array([i2bar_kernel(y, par) for y in ys])
    return float(np.max(np.abs(I - I[0]))), tr.drift


I2_CASES = (
    ("integral.i2_field_free_rod", DimensionlessParameters(1.7, 0.0, 0.0, 0.186, 0.4), 0.9, "<", I2_TOL),
    ("integral.i2_no_field", DimensionlessParameters(1.7, 3.0, 3.0, 0.0, 0.4), 1.2, "<", I2_TOL),
    ("integral.i2_generic", DimensionlessParameters(1.7, 3.0, 3.0, 0.186, 0.4), 0.9, ">", I2_BREAKING),
)


def check_i2(t_end=1000.0):
    out = []
    for name, dp, h, rel, bound in I2_CASES:
        var, drift = i2_variation(dp, h, t_end)
        out.append(Check(name, var, bound, rel, {"params": dp.as_array().tolist(), "h": h,
                                                 "t_end": t_end, "energy_drift": drift}))
    return out


def formulation_difference(dp, h, t_end=100.0, n=2001, start=SECTION_START):
    """Largest ``|cos(theta)_4D - e3_3|`` between the reduced and the 9D integrations."""
    rod = RodParameters.from_dimensionless(dp)
    s = complete_state_on_level(*start, LevelSpec(h, dp))
    y9 = canonical_to_noncanonical(s, 0.0, rod)
    ts = np.linspace(0.0, t_end, n)
    tr4 = integrate(field4, np.array(s), t_end, IntegratorConfig(), par=dp.as_array())
    # arclength s = t B / m3 with B = 1
    tr9 = integrate(field9, y9, t_end / rod.m3, IntegratorConfig(), par=field_params(rod))
    c4 = np.cos(tr4(ts)[:, 0])
    c9 = tr9(ts / rod.m3)[:, 8]
    return float(np.max(np.abs(c4 - c9)))


def check_equivalence(dp=DimensionlessParameters(1.7, 3.0, 3.0, 0.135, 0.4), h=0.9, t_end=100.0):
    return Check("formulation.equivalence", formulation_difference(dp, h, t_end), EQUIVALENCE_TOL, "<",
                 {"params": dp.as_array().tolist(), "h": h, "t_end": t_end})


def check_melnikov_parity(m=1.7, gamma=1.0):
    orbit = homoclinic_orbit(m, gamma)
    t = np.linspace(0.1, 15.0, 60)
    f_plus = melnikov_integrand(t, orbit, psi_bar(t, orbit))
    f_minus = melnikov_integrand(-t, orbit, psi_bar(-t, orbit))
    return Check("melnikov.integrand_parity", float(np.max(np.abs(f_plus - f_minus))), 1e-12, "<",
                 {"m": m, "gamma": gamma})


# ---------------------------------------------------------------- suite

def run_checks(seed=0, structure=structure_matrix, n_states=1000, n_jacobi=100, t_integral=1000.0,
               include_dynamics=True):
    """Run the suite.

    Parameters
    ----------
    seed : int
        Seed of the state generator.
    structure : callable
        ``structure(s, lam)`` used by the bracket checks; replaceable to test
        that a corrupted bracket is detected.
    n_states, n_jacobi : int
        Random states for the Casimir and gradient checks and for the Jacobi check.
    t_integral : float
        Integration time of the first-integral runs.
    include_dynamics : bool
        Also run the orbit, integral and formulation checks.

    Returns
    -------
    list of Check
    """
    rng = np.random.default_rng(seed)
    checks = [
        check_antisymmetry(rng, structure, n_jacobi),
        check_jacobi(rng, structure, n_jacobi),
        check_casimirs(rng, structure, n_states),
        check_gradient_hamiltonian9(rng, n_states),
        check_gradient_reduced(rng, n_states),
        check_gradient_casimirs(rng, n_states),
        check_gradient_regularized(rng, n_states),
        check_gradient_perturbation(rng, n_states),
    ]
    if include_dynamics:
        checks += [check_orbit_quadrature(), check_orbit_ode(), check_orbit_energy(),
                   check_kirchhoff_limit(), check_branch(), check_melnikov_parity()]
        checks += check_i2(t_integral)
        checks.append(check_equivalence())
    return checks


def report(checks, seed=0):
    """JSON-ready summary; failed checks are listed with measured value and bound."""
    rows = [{"name": c.name, "value": c.value if math.isfinite(c.value) else str(c.value),
             "bound": c.bound, "relation": c.relation, "passed": c.passed, "detail": c.detail}
            for c in checks]
    return {"seed": seed, "passed": all(c.passed for c in checks), "checks": rows,
            "failed": [r["name"] for r in rows if not r["passed"]]}
