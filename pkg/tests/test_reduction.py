"""Reduced boundary-value problem: oracle comparison, cross-method checks.

The oracle file was produced by an independent symbolic derivation
(tools/derive_reduction.py) and frozen; these tests compare the package's
hard-coded closed forms and solved profile against it node-wise.
"""

import json
import math
import pathlib

import numpy as np
import pytest

from crestwave import reduction
from crestwave.asymptotics import a1_from_lambda

ORACLE_PATH = pathlib.Path(__file__).parent / "data" / "reduction_oracle.json"


@pytest.fixture(scope="module")
def oracle():
    with open(ORACLE_PATH) as f:
        return json.load(f)


@pytest.fixture(scope="module")
def result():
    return reduction.compute_lambda(1.0)


def test_forcing_matches_oracle_node_wise(oracle):
    bvp = reduction.assemble_reduced_forcing(1.0)
    z = np.array(oracle["z"])
    assert np.max(np.abs(bvp.forcing_phi(z) - np.array(oracle["g1"]))) < 1e-12
    assert np.max(np.abs(bvp.forcing_psi(z) - np.array(oracle["g2"]))) < 1e-12
    assert abs(bvp.robin_data - oracle["g3_over_omega1_sq"]) < 1e-12
    assert bvp.bottom_data == 0.0


def test_lambda_matches_oracle(oracle, result):
    assert abs(result.lam - oracle["lambda"]) < 1e-12


def test_profile_matches_oracle_node_wise(oracle, result):
    z = np.array(oracle["z"])
    d = np.array(oracle["d_profile"])
    assert np.max(np.abs(result.d_of_z(z) - d)) < 1e-10


def test_backward_error_small(result):
    assert result.residual_norm < 1e-10
    assert math.isfinite(result.condition)


def test_profile_surface_value_equals_lambda(result):
    assert abs(result.d_of_z(0.5 * math.pi) - result.lam) < 1e-12


def test_profile_is_per_unit_omega_squared():
    """Regression: the reported profile must not scale with omega1.

    The far-field closure multiplies the profile by its own omega1^2; a
    profile that already carried the factor would enter the closure at
    omega1^4 and break the surface-node cancellation of the composite
    (observed as a ~1e-2 inflow defect before the normalization was
    pinned down).
    """
    z = np.linspace(0.0, 0.5 * math.pi, 33)
    base = reduction.compute_lambda(1.0).d_of_z(z)
    for w1 in (-1.0, 0.5, 2.0):
        other = reduction.compute_lambda(w1).d_of_z(z)
        assert np.max(np.abs(other - base)) < 1e-10, w1


def test_lambda_vorticity_independent():
    base = reduction.compute_lambda(1.0).lam
    for w1 in (-1.0, 0.5, 2.0):
        assert abs(reduction.compute_lambda(w1).lam - base) < 1e-10


def test_zero_vorticity_gives_zero_problem():
    res = reduction.compute_lambda(0.0)
    assert res.lam == 0.0
    z = np.linspace(0.0, 0.5 * math.pi, 17)
    assert np.max(np.abs(res.d_of_z(z))) < 1e-14


def test_cross_method_agreement():
    cheb = reduction.compute_lambda(1.0, method="chebyshev").lam
    fd = reduction.compute_lambda(1.0, method="fd4", nodes=512).lam
    assert abs(cheb - fd) < 1e-9


def test_fd_method_converges_at_fourth_order():
    """Halving the grid spacing shrinks the fd4 error ~16x."""
    ref = reduction.compute_lambda(1.0, method="chebyshev").lam
    e1 = abs(reduction.compute_lambda(1.0, method="fd4", nodes=129).lam - ref)
    e2 = abs(reduction.compute_lambda(1.0, method="fd4", nodes=257).lam - ref)
    assert 10.0 < e1 / e2 < 24.0


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        reduction.compute_lambda(1.0, method="spectral-magic")


def test_reference_gap_reported_not_tuned(result):
    """The previously reported value is kept visible as a gap, never
    folded into the computation."""
    assert reduction.REFERENCE_LAMBDA == 1.1869
    assert abs(result.reference_gap
               - (result.lam - reduction.REFERENCE_LAMBDA)) < 1e-15


def test_lambda_and_a1_helper(result):
    lam, a1 = reduction.lambda_and_a1()
    assert abs(lam - result.lam) < 1e-13
    assert a1 == a1_from_lambda(lam)


def test_provenance_log_complete():
    """Every term group is tagged with an explicit fate; the one dropped
    term sits one decay order beyond the reduction."""
    bvp = reduction.assemble_reduced_forcing(1.0)
    fates = {e.fate for e in bvp.provenance}
    assert fates == {"kept", "dropped", "cancels"}
    dropped = [e for e in bvp.provenance if e.fate == "dropped"]
    assert len(dropped) == 1
    assert dropped[0].q_order > reduction.REDUCED_ORDER


def test_solvability_guard():
    """The reduced order must sit below the first kernel exponent."""
    assert reduction.REDUCED_ORDER < 1.5 * 1.802679073767
