import math

import numpy as np
import pytest

from rodchaos.model import hat
from rodchaos.noncanonical import structure_matrix
from rodchaos.verify import (
    Check, check_antisymmetry, check_casimirs, check_jacobi, report, run_checks,
)


@pytest.fixture
def flipped_structure():
    """Structure matrix with the sign of the force-force block reversed."""
    def structure(s, lam):
        J = structure_matrix(s, lam).copy()
        J[3:6, 3:6] = -lam * hat(np.asarray(s)[6:9])
        return J
    return structure


@pytest.fixture(scope="module")
def default_report():
    checks = run_checks(seed=0)
    return checks, report(checks, 0)


def test_default_suite_passes(default_report):
    checks, rep = default_report
    assert rep["passed"], rep["failed"]
    names = [c["name"] for c in rep["checks"]]
    assert len(names) == len(set(names))
    for prefix in ("bracket.", "gradient.", "homoclinic.", "integral.", "formulation.", "melnikov."):
        assert any(n.startswith(prefix) for n in names)


def test_branch_resolution_is_reported(default_report):
    _, rep = default_report
    branch = next(c for c in rep["checks"] if c["name"] == "homoclinic.branch")
    assert branch["detail"]["selected"] == "corrected"
    assert branch["detail"]["k_below_one"] is True


def test_report_is_reproducible():
    a = report(run_checks(seed=3, n_states=50, include_dynamics=False), 3)
    b = report(run_checks(seed=3, n_states=50, include_dynamics=False), 3)
    assert a == b and a["seed"] == 3


def test_flipped_bracket_is_detected(rng, flipped_structure):
    assert check_antisymmetry(rng, flipped_structure).passed
    assert not check_casimirs(rng, flipped_structure, n=50).passed
    rep = report(run_checks(seed=0, structure=flipped_structure, n_states=50, include_dynamics=False))
    assert not rep["passed"]
    assert "bracket.casimirs" in rep["failed"]


def test_jacobi_detects_non_lie_structure(rng):
    def skewed(s, lam):
        J = structure_matrix(s, lam).copy()
        # quadratic entries break the Jacobi identity but keep antisymmetry
        J[0, 1] += s[0] * s[0]
        J[1, 0] -= s[0] * s[0]
        return J
    assert check_antisymmetry(rng, skewed).passed
    assert not check_jacobi(rng, skewed, n=10).passed


def test_check_relations():
    assert Check("a", 1e-13, 1e-12, "<").passed
    assert not Check("a", 1e-12, 1e-12, "<").passed
    assert Check("a", 1e-12, 1e-12, "<=").passed
    assert Check("a", 1.0, 1e-3, ">").passed
    assert not Check("a", math.nan, 1.0, "<").passed
    assert not Check("a", math.inf, 1.0, ">").passed
