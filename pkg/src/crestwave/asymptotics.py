"""Closed-form local solutions and the crest expansions built from them.

Everything here evaluates explicit formulas: the Stokes corner flow (the
120-degree limit state in strip coordinates), the forced correction that
a nonzero surface vorticity omega(1) drives at order e^{-2q}, and the
truncated series for the surface angle xi(q), the surface slope eta_x(x),
and the stream function near the crest.
"""

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import transforms

SQRT3 = math.sqrt(3.0)
HALF_PI = 0.5 * math.pi
KAPPA_RATIO = 2.0 ** 1.5 / 3.0 ** 1.25  # kappa / omega(1), approx 0.7155


@dataclass(frozen=True)
class ExpansionCoefficients:
    """The constants of the surface-slope expansion

        eta_x = -1/sqrt(3) + kappa*sqrt(x) + a1*omega1^2*x + O(x^remainder_exp)

    together with the surface-angle coefficient lam of

        xi(q) = (omega1/3) e^{-q/2} + lam*omega1^2 e^{-q} + ...

    lam serializes under the JSON key "lambda".
    """
    omega1: float
    kappa: float
    lam: float
    a1: float
    tau1: float
    remainder_exp: float

    def to_json(self):
        obj = asdict(self)
        obj["lambda"] = obj.pop("lam")
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        obj["lam"] = obj.pop("lambda")
        return cls(**obj)


def a1_from_lambda(lam):
    """The x-coefficient a1 = -(1/18 + (2/sqrt(3)) (sqrt(3) - 24 lam) / 9)."""
    return -(1.0 / 18.0 + (2.0 / SQRT3) * (SQRT3 - 24.0 * lam) / 9.0)


def make_coefficients(omega1, lam, tau1):
    """Populate the coefficient record from (omega1, lam, tau1).

    Raises if a1 comes out nonpositive or tau1 leaves (1, 2): both would
    contradict structural facts the rest of the toolkit relies on.
    """
    if not math.isfinite(lam):
        raise ValueError(f"lam must be finite, got {lam}")
    if not 1.0 < tau1 < 2.0:
        raise ValueError(f"tau1 must lie in (1, 2), got {tau1}")
    a1 = a1_from_lambda(lam)
    if a1 <= 0:
        raise ValueError(f"a1 = {a1} <= 0 violates the positivity invariant")
    return ExpansionCoefficients(
        omega1=float(omega1),
        kappa=KAPPA_RATIO * float(omega1),
        lam=float(lam),
        a1=a1,
        tau1=float(tau1),
        remainder_exp=1.5 * (tau1 - 1.0),
    )


@dataclass(frozen=True)
class StripPoint:
    q: float
    z: float

    def __post_init__(self):
        if not -1e-12 <= self.z <= HALF_PI + 1e-12:
            raise ValueError(f"z = {self.z} outside [0, pi/2]")


# ---------------------------------------------------------------------------
# Stokes corner flow


def stokes_corner(p, sign=1):
    """The corner-flow stream function in strip coordinates:

        +- (2/3) e^{-(3/2)q} cos(z).

    The + branch is the physical one (positive below the surface).
    """
    return sign * (2.0 / 3.0) * math.exp(-1.5 * p.q) * math.cos(p.z)


def verify_stokes_corner(n=101):
    """Max residuals of the corner flow in its limit system on an n x n grid.

    Checks, with exact derivatives,
        (2/3) U_qq + (3/2) U_zz = 0         (interior),
        (4/9) U_q^2 + U_z^2 = (4/9) e^{-3q}  at z = pi/2 (Bernoulli),
    for both sign branches.  Returns a dict of max absolute defects.
    """
    interior = 0.0
    bern = 0.0
    for sign in (1, -1):
        for i in range(n):
            q = 4.0 * i / (n - 1)
            for k in range(n):
                z = HALF_PI * k / (n - 1)
                u = sign * (2.0 / 3.0) * math.exp(-1.5 * q)
                u_qq = 2.25 * u * math.cos(z)
                u_zz = -u * math.cos(z)
                interior = max(interior,
                               abs((2.0 / 3.0) * u_qq + 1.5 * u_zz))
            u = sign * (2.0 / 3.0) * math.exp(-1.5 * q)
            u_q = -1.5 * u * math.cos(HALF_PI)
            u_z = -u  # -sin(pi/2) * u
            bern = max(bern, abs((4.0 / 9.0) * u_q ** 2 + u_z ** 2
                                 - (4.0 / 9.0) * math.exp(-3.0 * q)))
    return {"interior": interior, "bernoulli": bern}


# ---------------------------------------------------------------------------
# Forced correction at order e^{-2q}


def u_star(p, omega1):
    """Separated solution absorbing the omega(1) source at order e^{-2q}:

        U*(q, z) = (1/12) (3 - 2 cos(4z/3)) omega1 e^{-2q}.
    """
    return (omega1 / 12.0) * (3.0 - 2.0 * math.cos(4.0 * p.z / 3.0)) \
        * math.exp(-2.0 * p.q)


def u_star_partner(p, omega1):
    """Companion field V* = (2/3) dU*/dq = -(4/3) U*."""
    return -(4.0 / 3.0) * u_star(p, omega1)


# ---------------------------------------------------------------------------
# Series


def _scalar_like(value, template):
    return float(value) if np.isscalar(template) else value


def xi_series(q, coeffs):
    """Two-term surface-angle deviation xi(q) = zeta(q) + pi/6."""
    w = coeffs.omega1
    qa = np.asarray(q, float)
    out = (w / 3.0) * np.exp(-0.5 * qa) + coeffs.lam * w * w * np.exp(-qa)
    return _scalar_like(out, q)


def xi_series_derivatives(q, coeffs):
    """(xi, xi_q, xi_qq) by term-wise differentiation of the two-term series."""
    w = coeffs.omega1
    qa = np.asarray(q, float)
    e1 = (w / 3.0) * np.exp(-0.5 * qa)
    e2 = coeffs.lam * w * w * np.exp(-qa)
    return (_scalar_like(e1 + e2, q), _scalar_like(-0.5 * e1 - e2, q),
            _scalar_like(0.25 * e1 + e2, q))


def eta_x_series(x, coeffs):
    """Three-term surface slope -1/sqrt(3) + kappa sqrt(x) + a1 omega1^2 x."""
    xa = np.asarray(x, float)
    if np.any(xa < 0):
        raise ValueError(f"x must be >= 0, got {x}")
    out = -1.0 / SQRT3 + coeffs.kappa * np.sqrt(xa) \
        + coeffs.a1 * coeffs.omega1 ** 2 * xa
    return _scalar_like(out, x)


def eta_xx_series(x, coeffs):
    """Term-wise x-derivative of eta_x_series (for curvature checks)."""
    xa = np.asarray(x, float)
    if np.any(xa <= 0):
        raise ValueError(f"x must be > 0, got {x}")
    out = 0.5 * coeffs.kappa / np.sqrt(xa) + coeffs.a1 * coeffs.omega1 ** 2
    return _scalar_like(out, x)


def eta_series(x, coeffs, r):
    """Surface elevation by term-wise integration, eta(0) = r."""
    xa = np.asarray(x, float)
    if np.any(xa < 0):
        raise ValueError(f"x must be >= 0, got {x}")
    out = r - xa / SQRT3 + (2.0 / 3.0) * coeffs.kappa * xa ** 1.5 \
        + 0.5 * coeffs.a1 * coeffs.omega1 ** 2 * xa * xa
    return _scalar_like(out, x)


def concavity_crossover(coeffs):
    """x0 = (kappa / (2 a1 omega1^2))^2, where the sqrt(x) and x terms of
    the curvature balance.  For omega1 < 0 the slope is concave on (0, x0).
    """
    w2 = coeffs.omega1 ** 2
    if w2 == 0 or coeffs.kappa == 0:
        raise ValueError("crossover undefined for vanishing omega1")
    return (coeffs.kappa / (2.0 * coeffs.a1 * w2)) ** 2


def eta_x_quadratic(xi, xi_t):
    """Quadratic polynomial expansion of the slope in the angle deviation:

        eta_x = -1/sqrt(3) + (4/3)(xi - xi_t)
                - (4/(3*sqrt(3))) (xi^2 - 2 xi xi_t + xi_t^2) + O(|xi|^3).

    Agrees with eta_x_from_zeta(-pi/6 + xi, xi_t) to cubic order.
    """
    d = xi - xi_t
    return -1.0 / SQRT3 + (4.0 / 3.0) * d - (4.0 / (3.0 * SQRT3)) * d * d


def psi_series(x, y, frame, coeffs=None, variant="default",
               include_forced=False):
    """Leading stream-function asymptotics near the crest.

    Default: psi = 1 - (2/3) rho^{3/2} cos((3/2)(theta + pi/2)), the corner
    flow pulled back to physical coordinates.  variant="cubic-radial"
    substitutes rho^3 for rho^{3/2}; it deliberately breaks the radial
    scaling and serves as the negative control in the manufactured-residual
    study.  include_forced additionally subtracts the e^{-2q} correction
    U* (needs coeffs for omega1).
    """
    t, theta = transforms.log_map(x, y, frame)
    rho = math.exp(-t)
    angle = 1.5 * (theta + HALF_PI)
    if variant == "default":
        radial = rho ** 1.5
    elif variant == "cubic-radial":
        radial = rho ** 3
    else:
        raise ValueError(f"unknown variant {variant!r}")
    psi = 1.0 - (2.0 / 3.0) * radial * math.cos(angle)
    if include_forced:
        if coeffs is None:
            raise ValueError("include_forced needs a coefficient record")
        z = min(max(angle, 0.0), HALF_PI)
        psi -= u_star(StripPoint(t, z), coeffs.omega1)
    return psi
