"""Assembly and solution of the reduced order-5/2 boundary-value problem.

The surface angle expands as xi(q) = (omega1/3) e^{-q/2} + lam*omega1^2
e^{-q} + ...; the coefficient lam is fixed by a linear two-point problem
on [0, pi/2] obtained by substituting the composite local solution
(corner background + angle-slaved pair + forced e^{-2q} correction) into
the transformed system and collecting everything at decay order e^{-5q/2}:

    d''(z) + (25/9) d(z) = (2/3) g2(z) - (10/9) g1(z)
    d'(0) = 0
    d'(pi/2) - d(pi/2)/sqrt(3) = g3

with lam = d(pi/2)/omega1^2.  The forcings g1, g2 and the Robin datum g3
are hard-coded closed forms below; tools/derive_reduction.py re-derives
them symbolically from the primitive system and freezes an oracle that
the test suite compares against node-wise.

The assembly reproducibly yields lam = 5*sqrt(3)/24 = 0.360844 (exact
within this formulation, confirmed by the symbolic route and by the
nonlinear strip solver).  A value of 1.1869 has previously been reported
for this constant; the gap is surfaced as `reference_gap` on every result
rather than tuned away.  Notably 1.1869 is within half a part in a
thousand of (pi^2/3) * 5*sqrt(3)/24 = 1.18722, which suggests a spurious
uniform factor in the earlier computation; the provenance log records
every term this assembly keeps, drops, or cancels so the two routes can
be compared term by term.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import spectrum
from .asymptotics import StripPoint, u_star, u_star_partner, a1_from_lambda

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
HALF_PI = 0.5 * math.pi
REDUCED_ORDER = 2.5
REFERENCE_LAMBDA = 1.1869  # previously reported value, kept for comparison


# ---------------------------------------------------------------------------
# Reduced forcing: closed forms (per unit omega1^2)


def _g1(z):
    """Forcing in the gradient relation at order e^{-5q/2}, omega1 = 1."""
    z = np.asarray(z, float)
    return (6.0 * z * (z * np.cos(z) - 3.0 * np.sin(z))
            + math.pi * (9.0 - 2.0 * z * np.sin(4.0 * z / 3.0)
                         - 6.0 * np.cos(4.0 * z / 3.0))) / (18.0 * math.pi ** 2)


def _g2(z):
    """Forcing in the divergence relation at order e^{-5q/2}, omega1 = 1."""
    z = np.asarray(z, float)
    return (-(z ** 2) * np.cos(z) / 3.0 + z * np.sin(z) / 3.0 - np.cos(z)
            + math.pi * (8.0 * z * np.sin(4.0 * z / 3.0)
                         + 18.0 * np.cos(4.0 * z / 3.0) + 45.0) / 54.0) \
        / math.pi ** 2


G3_UNIT = (math.pi + 2.0 * SQRT3) / (18.0 * math.pi)  # Robin datum, omega1=1


@dataclass(frozen=True)
class ProvenanceEntry:
    """One term group of the assembly and what happened to it.

    q_order is the decay exponent in the relation where the group lives
    (interior relations balance at e^{-5q/2}; the squared surface relation
    balances at e^{-4q}).
    """
    tag: str
    relation: str
    q_order: float
    fate: str  # "kept" | "dropped" | "cancels"
    detail: str


PROVENANCE = (
    ProvenanceEntry("corner-background", "all", 1.5, "cancels",
                    "the corner pair solves the homogeneous system exactly"),
    ProvenanceEntry("slaved-angle-linear", "interior", 2.0, "cancels",
                    "angle-linear slaved pair cancels the width dilation "
                    "of the corner at first order in the angle"),
    ProvenanceEntry("vorticity-source", "interior", 2.0, "cancels",
                    "omega(1) source absorbed by the forced correction"),
    ProvenanceEntry("slaved-angle-quadratic", "interior", 2.5, "kept",
                    "slaved pair times the leading angle and its derivative"),
    ProvenanceEntry("width-dilation-quadratic", "interior", 2.5, "kept",
                    "second-order expansion of the width factors against "
                    "the corner pair"),
    ProvenanceEntry("angle-advection", "interior", 2.5, "kept",
                    "angle-derivative advection of the corner gradient"),
    ProvenanceEntry("forced-angle-product", "interior", 2.5, "kept",
                    "forced correction times the leading angle"),
    ProvenanceEntry("vorticity-width-correction", "interior", 2.5, "kept",
                    "width-factor correction to the omega(1) source"),
    ProvenanceEntry("vorticity-taylor", "interior", 3.5, "dropped",
                    "variation of omega along streamlines rides on the "
                    "decaying background, so the omega'(1) term enters "
                    "one order beyond the reduction and is dropped"),
    ProvenanceEntry("surface-angle-quadratic", "surface", 4.0, "kept",
                    "second-order angle terms in the surface condition"),
    ProvenanceEntry("surface-forced-products", "surface", 4.0, "kept",
                    "products of the forced correction with the corner "
                    "and slaved surface gradients"),
    ProvenanceEntry("surface-profile-unknowns", "surface", 4.0, "kept",
                    "boundary values of the order-5/2 profile; these form "
                    "the Robin left-hand side"),
)


@dataclass(frozen=True)
class ReducedBVP:
    """The reduced problem: d'' + (25/9) d = forcing, Neumann bottom,
    Robin surface with inhomogeneity robin_data."""
    order: float
    omega1: float
    robin_data: float
    bottom_data: float
    provenance: tuple

    def forcing(self, z):
        """Right-hand side (2/3) g2 - (10/9) g1, scaled by omega1^2."""
        w2 = self.omega1 ** 2
        return w2 * ((2.0 / 3.0) * _g2(z) - (10.0 / 9.0) * _g1(z))

    def forcing_phi(self, z):
        """Gradient-relation forcing g1 (scaled); exposed for the
        node-wise comparison against the symbolic derivation."""
        return self.omega1 ** 2 * _g1(z)

    def forcing_psi(self, z):
        """Divergence-relation forcing g2 (scaled); see forcing_phi."""
        return self.omega1 ** 2 * _g2(z)


@dataclass(frozen=True)
class LambdaResult:
    lam: float
    profile_nodes: np.ndarray  # z samples, surface first
    profile_values: np.ndarray  # d(z) at the nodes, per unit omega1^2
    residual_norm: float  # relative max-norm defect of the solved ODE
    condition: float
    reference_gap: float  # lam - REFERENCE_LAMBDA, reported, never tuned

    def d_of_z(self, z):
        """Evaluate the solved profile anywhere on [0, pi/2].

        Values are per unit omega1^2, matching lam: the far-field closure
        multiplies this profile by omega1^2 itself, so d_of_z(pi/2) == lam
        regardless of which omega1 the problem was assembled with.
        """
        x = np.asarray(z, float) * (4.0 / math.pi) - 1.0
        return np.polynomial.chebyshev.chebval(x, self._chebcoef)

    @property
    def _chebcoef(self):
        x = self.profile_nodes * (4.0 / math.pi) - 1.0
        return _interp_coeffs(x, self.profile_values)


def assemble_reduced_forcing(omega1):
    """Collect everything the composite ansatz leaves at order e^{-5q/2}.

    Every term group is tagged in the provenance log; the omega'(1) Taylor
    term is verifiably one order too deep and is dropped (logged).  All
    surviving sources scale by omega1^2, so omega1 = 0 gives the zero
    problem.
    """
    if not math.isfinite(omega1):
        raise ValueError(f"omega1 must be finite, got {omega1}")
    return ReducedBVP(order=REDUCED_ORDER, omega1=float(omega1),
                      robin_data=G3_UNIT * omega1 ** 2, bottom_data=0.0,
                      provenance=PROVENANCE)


def _check_solvability(order):
    """The homogeneous reduced problem must be trivially solvable: the
    decay order must avoid the kernel exponents (3/2) tau_j."""
    for j in (1, 2, 3):
        rate = 1.5 * spectrum.solve_eigenpair(j).tau
        if abs(order - rate) < 1e-9:
            raise ArithmeticError(
                f"reduced order {order} collides with kernel exponent {rate}")
    margin = 1.5 * spectrum.solve_eigenpair(1).tau
    if not order < margin:
        raise ArithmeticError(
            f"reduced order {order} is not below the first kernel "
            f"exponent {margin}")


def _interp_coeffs(x, v):
    """Chebyshev-series coefficients of the interpolant through (x, v).

    At the extreme points x_j = cos(pi j/N) the coefficients come from the
    exact discrete cosine transform (well-conditioned at any degree); on
    other node sets a moderate-degree least-squares fit is used — the
    profiles here are analytic, so 30 coefficients already sit at
    rounding level.
    """
    n = len(x) - 1
    ref = np.cos(math.pi * np.arange(n + 1) / n)
    if np.allclose(x, ref, atol=1e-12):
        j = np.arange(n + 1)
        weights = np.ones(n + 1)
        weights[0] = weights[-1] = 0.5
        cosmat = np.cos(math.pi * np.outer(j, j) / n)
        coef = (2.0 / n) * (cosmat @ (weights * v))
        coef[0] *= 0.5
        coef[-1] *= 0.5
        return coef
    return np.polynomial.chebyshev.chebfit(x, v, min(30, n))


def _chebyshev_nodes_matrix(n):
    """Chebyshev extreme points on [-1, 1] (x_0 = 1 first) and the
    standard differentiation matrix on them."""
    if n < 2:
        raise ValueError("need at least 3 collocation nodes")
    j = np.arange(n + 1)
    x = np.cos(math.pi * j / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _solve_chebyshev(bvp, nodes):
    x, D = _chebyshev_nodes_matrix(nodes)
    z = (x + 1.0) * (math.pi / 4.0)  # z[0] = pi/2 (surface), z[-1] = 0
    Dz = (4.0 / math.pi) * D
    A = Dz @ Dz + (25.0 / 9.0) * np.eye(nodes + 1)
    b = bvp.forcing(z)
    # surface Robin row
    A[0, :] = Dz[0, :]
    A[0, 0] -= 1.0 / SQRT3
    b[0] = bvp.robin_data
    # bottom Neumann row
    A[-1, :] = Dz[-1, :]
    b[-1] = bvp.bottom_data
    cond = np.linalg.cond(A)
    if cond > 1e12:
        log.warning("reduced system badly conditioned: cond = %.3e", cond)
    d = np.linalg.solve(A, b)
    return z, d, cond, A, b


def _fd_weights(xs, x0, m):
    """Finite-difference weights for the m-th derivative at x0 on the
    stencil xs (Fornberg's recursion)."""
    n = len(xs)
    C = np.zeros((n, m + 1))
    C[0, 0] = 1.0
    c1 = 1.0
    c4 = xs[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for jj in range(i):
            c3 = xs[i] - xs[jj]
            c2 *= c3
            if jj == i - 1:
                for k in range(mn, 0, -1):
                    C[i, k] = c1 * (k * C[i - 1, k - 1] - c5 * C[i - 1, k]) / c2
                C[i, 0] = -c1 * c5 * C[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                C[jj, k] = (c4 * C[jj, k] - k * C[jj, k - 1]) / c3
            C[jj, 0] = c4 * C[jj, 0] / c3
        c1 = c2
    return C[:, m]


def _solve_fd4(bvp, nodes):
    """Fourth-order finite-difference fallback on a uniform grid.

    Node 0 is the surface (z = pi/2) to match the Chebyshev ordering.
    """
    n = nodes
    z = np.linspace(HALF_PI, 0.0, n + 1)
    h = z[0] - z[1]
    A = np.zeros((n + 1, n + 1))
    b = bvp.forcing(z)
    for i in range(1, n):
        if 2 <= i <= n - 2:
            sl = slice(i - 2, i + 3)
        elif i == 1:
            sl = slice(0, 6)
        else:
            sl = slice(n - 5, n + 1)
        idx = np.arange(n + 1)[sl]
        A[i, sl] = _fd_weights(z[idx], z[i], 2)
        A[i, i] += 25.0 / 9.0
    # Robin at the surface, one-sided 5-point first derivative
    A[0, 0:5] = _fd_weights(z[0:5], z[0], 1)
    A[0, 0] -= 1.0 / SQRT3
    b[0] = bvp.robin_data
    # Neumann at the bottom
    A[n, n - 4:] = _fd_weights(z[n - 4:], z[n], 1)
    b[n] = bvp.bottom_data
    cond = np.linalg.cond(A)
    d = np.linalg.solve(A, b)
    return z, d, cond, A, b


def _backward_error(A, d, b):
    """Componentwise relative backward error of the solved linear system
    (the standard |r| / (|A||x| + |b|) measure); stable under the severe
    but benign conditioning of spectral differentiation."""
    r = A @ d - b
    den = np.abs(A) @ np.abs(d) + np.abs(b)
    den[den == 0.0] = 1.0
    return float(np.max(np.abs(r) / den))


def solve_reduced_bvp(bvp, nodes=64, method="chebyshev"):
    """Solve the reduced problem and read off lam = d(pi/2)/omega1^2.

    method "chebyshev" (spectral collocation, default 64 nodes) or "fd4"
    (fourth-order finite differences, the cross-check fallback).

    residual_norm reports how well the returned profile solves the
    reduced problem: the larger of the componentwise backward error of
    the collocation system and the relative gap to a nodes -> 2*nodes
    refinement (so it captures algebraic and discretization error both;
    re-differentiating the degree-64 interpolant would drown the answer
    in rounding noise instead).
    """
    _check_solvability(bvp.order)
    solver = {"chebyshev": _solve_chebyshev, "fd4": _solve_fd4}.get(method)
    if solver is None:
        raise ValueError(f"unknown method {method!r}")
    z, d, cond, A, b = solver(bvp, nodes)
    w2 = bvp.omega1 ** 2
    lam = float(d[0] / w2) if w2 != 0.0 else 0.0
    if w2 != 0.0:
        z2, d2, _, _, _ = solver(bvp, 2 * nodes)
        x2 = z2 * (4.0 / math.pi) - 1.0
        fine = np.polynomial.chebyshev.chebval(
            z * (4.0 / math.pi) - 1.0, _interp_coeffs(x2, d2))
        self_gap = float(np.max(np.abs(fine - d)) / np.max(np.abs(d)))
        resid = max(_backward_error(A, d, b), self_gap)
        # Report the profile per unit omega1^2 so it matches lam; every
        # consumer (the far-field closure) applies its own omega1^2.
        d = d / w2
    else:
        resid = 0.0
    return LambdaResult(lam=lam, profile_nodes=z, profile_values=d,
                        residual_norm=resid, condition=float(cond),
                        reference_gap=lam - REFERENCE_LAMBDA)


def compute_lambda(omega1=1.0, nodes=64, method="chebyshev"):
    """Full pipeline: assemble the reduced forcing and solve for lam."""
    return solve_reduced_bvp(assemble_reduced_forcing(omega1),
                             nodes=nodes, method=method)


def lambda_and_a1(nodes=64):
    """(lam, a1) from the pipeline, as consumed by the CLI and the
    coefficient record."""
    lam = compute_lambda(1.0, nodes=nodes).lam
    return lam, a1_from_lambda(lam)


def verify_u_star(n=101, perturb=0.0):
    """Residual report for the forced correction pair (U*, V*).

    Checks, with exact derivatives on an n x n grid over q in [0, 4],
    z in [0, pi/2]:

        U*_q = (3/2) V*
        V*_q = -(3/2) U*_zz + (2/3)(1 + perturb) omega(1) e^{-2q}
        U*_z(q, 0) = 0
        U*_z(q, pi/2) - U*(q, pi/2)/sqrt(3) = 0

    perturb scales the source constant; a 1% perturbation must surface as
    a ~1% relative residual (sensitivity sanity check).  Returns a dict of
    max-norm defects, all for omega1 = 1.
    """
    omega1 = 1.0
    qs = np.linspace(0.0, 4.0, n)
    zs = np.linspace(0.0, HALF_PI, n)
    r_grad = r_div = r_bot = r_rob = 0.0
    forcing_scale = 0.0
    for q in qs:
        e2 = math.exp(-2.0 * q)
        forcing_scale = max(forcing_scale, (2.0 / 3.0) * omega1 * e2)
        for z in zs:
            p = StripPoint(q, z)
            us = u_star(p, omega1)
            vs = u_star_partner(p, omega1)
            us_q = -2.0 * us
            vs_q = -2.0 * vs
            us_z = (omega1 / 12.0) * (8.0 / 3.0) \
                * math.sin(4.0 * z / 3.0) * e2
            us_zz = (omega1 / 12.0) * (32.0 / 9.0) \
                * math.cos(4.0 * z / 3.0) * e2
            r_grad = max(r_grad, abs(us_q - 1.5 * vs))
            r_div = max(r_div, abs(
                vs_q + 1.5 * us_zz
                - (2.0 / 3.0) * (1.0 + perturb) * omega1 * e2))
        z0 = (omega1 / 12.0) * (8.0 / 3.0) * math.sin(0.0) * e2
        r_bot = max(r_bot, abs(z0))
        us_zP = (omega1 / 12.0) * (8.0 / 3.0) * math.sin(2 * math.pi / 3) * e2
        usP = u_star(StripPoint(q, HALF_PI), omega1)
        r_rob = max(r_rob, abs(us_zP - usP / SQRT3))
    return {
        "gradient": r_grad,
        "divergence": r_div,
        "bottom_neumann": r_bot,
        "surface_robin": r_rob,
        "forcing_scale": forcing_scale,
    }
