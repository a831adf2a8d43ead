"""Coordinate changes between the crest neighbourhood and the half-strip.

Physical coordinates (x, y) near the stagnation point (0, r) are mapped
logarithmically,

    x = e^{-t} cos(theta),   y = r + e^{-t} sin(theta),

so the crest sits at t = +infinity and the fluid occupies a curved strip
theta in [-pi/2, zeta(t)] below the surface ray angle zeta.  A second,
surface-dependent map flattens that strip onto z in [0, pi/2]:

    q = t,   z = (pi/2) (theta + pi/2) / (zeta(t) + pi/2).

The last two operations convert between the surface slope eta_x and the
angle pair (zeta, zeta_t); they are exact algebraic identities, mutually
inverse wherever the denominators are nonzero.
"""

import math
from dataclasses import dataclass

HALF_PI = 0.5 * math.pi
SING_TOL = 1e-12  # denominators of interest sit near cos(pi/6); this only
                  # guards pathological inputs


class DegeneratePointError(ValueError):
    """Raised at the stagnation point or a collapsed strip."""


class SingularDenominatorError(ZeroDivisionError):
    """Slope/angle conversion hit a (near-)zero denominator."""


@dataclass(frozen=True)
class CrestFrame:
    """Crest height r and radius delta1 of the neighbourhood of validity."""
    r: float
    delta1: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"crest height must be positive, got {self.r}")
        if not 0 < self.delta1 < self.r:
            raise ValueError(
                f"delta1 must lie in (0, r={self.r}), got {self.delta1}")


def log_map(x, y, frame):
    """(x, y) -> (t, theta) with t = -ln(rho), theta = atan2(y - r, x)."""
    dx = x
    dy = y - frame.r
    rho = math.hypot(dx, dy)
    if rho == 0.0:
        raise DegeneratePointError("log map undefined at the stagnation point")
    return -math.log(rho), math.atan2(dy, dx)


def log_unmap(t, theta, frame):
    """(t, theta) -> (x, y), inverse of log_map."""
    rho = math.exp(-t)
    return rho * math.cos(theta), frame.r + rho * math.sin(theta)


def flatten(t, theta, zeta_at_t):
    """(t, theta) -> (q, z); affine in theta, endpoints map exactly."""
    if zeta_at_t <= -HALF_PI:
        raise DegeneratePointError(
            f"surface angle {zeta_at_t} collapses the strip")
    z = HALF_PI * ((theta + HALF_PI) / (zeta_at_t + HALF_PI))
    return t, z


def unflatten(q, z, zeta_at_t):
    """(q, z) -> (t, theta), inverse of flatten for the same zeta."""
    if zeta_at_t <= -HALF_PI:
        raise DegeneratePointError(
            f"surface angle {zeta_at_t} collapses the strip")
    theta = (z / HALF_PI) * (zeta_at_t + HALF_PI) - HALF_PI
    return q, theta


def zeta_t_from_eta_x(eta_x, zeta):
    """Surface-angle derivative from the physical slope:

    zeta_t = -(eta_x cos(zeta) - sin(zeta)) / (eta_x sin(zeta) + cos(zeta)).
    """
    den = eta_x * math.sin(zeta) + math.cos(zeta)
    if abs(den) < SING_TOL:
        raise SingularDenominatorError(
            f"eta_x*sin(zeta)+cos(zeta) = {den} below threshold")
    return -(eta_x * math.cos(zeta) - math.sin(zeta)) / den


def eta_x_from_zeta(zeta, zeta_t):
    """Physical surface slope from the angle pair:

    eta_x = (sin(zeta) - zeta_t cos(zeta)) / (cos(zeta) + zeta_t sin(zeta)).
    """
    den = math.cos(zeta) + zeta_t * math.sin(zeta)
    if abs(den) < SING_TOL:
        raise SingularDenominatorError(
            f"cos(zeta)+zeta_t*sin(zeta) = {den} below threshold")
    return (math.sin(zeta) - zeta_t * math.cos(zeta)) / den


def t_of_x(x, eta_x_series_coeffs):
    """Strip coordinate t of the surface point above x, to O(x) relative.

    Inverts rho(x) along the surface using the two-term slope expansion:

        e^{-t} = (2/sqrt(3)) * x * (1 - kappa/(2*sqrt(3)) * sqrt(x)) ,

    where kappa is taken from the supplied coefficient record.  The
    neglected relative correction is O(x).  rho here is the full distance
    sqrt(x^2 + (r - eta(x))^2) to the stagnation point.
    """
    if x <= 0:
        raise ValueError(f"x must be positive, got {x}")
    kappa = eta_x_series_coeffs.kappa
    rho = (2.0 / math.sqrt(3.0)) * x * (
        1.0 - kappa / (2.0 * math.sqrt(3.0)) * math.sqrt(x))
    return -math.log(rho)
