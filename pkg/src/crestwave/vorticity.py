"""Vorticity distributions omega(psi) near the free surface.

The surface streamline carries psi = 1 and the model only ever sees psi in
a band [1 - delta, 1] below it.  Distributions are polynomials in psi
(coefficients in ascending powers), which makes the derivative and the
primitive exact and keeps every downstream computation quadrature-free.
"""

import json
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Evaluation outside [1 - delta, 1] under the strict policy."""


@dataclass
class VorticityModel:
    """Polynomial vorticity omega(psi) on the band [1 - delta, 1].

    coeffs : ascending power-basis coefficients (c0 + c1*psi + ...)
    delta  : half-width of the trusted band below the surface value psi = 1
    strict : if True, evaluations outside the band raise DomainError;
             by default the polynomial is evaluated as-is (analytic
             extension) and the crossing is recorded in `domain_extended`.
             Newton iterates of the strip solver transiently leave the
             band, so extension is the default.
    """

    coeffs: tuple
    delta: float = 0.5
    strict: bool = False
    domain_extended: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.coeffs = tuple(float(c) for c in self.coeffs)
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def omega_at_one(self):
        return float(np.polynomial.polynomial.polyval(1.0, self.coeffs))

    @property
    def omega_prime_at_one(self):
        der = np.polynomial.polynomial.polyder(self.coeffs)
        return float(np.polynomial.polynomial.polyval(1.0, der))

    def to_json(self):
        return json.dumps({"coeffs": list(self.coeffs), "delta": self.delta})

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(coeffs=tuple(obj["coeffs"]), delta=float(obj["delta"]))


def constant_model(value, delta=0.5):
    """Convenience: omega == value (the usual validation scenario)."""
    return VorticityModel(coeffs=(float(value),), delta=delta)


def _check_domain(model, psi):
    psi_arr = np.asarray(psi, dtype=float)
    lo = 1.0 - model.delta
    outside = (psi_arr < lo) | (psi_arr > 1.0)
    if np.any(outside):
        if model.strict:
            raise DomainError(
                f"psi outside [{lo}, 1] under strict policy: "
                f"min={psi_arr.min()}, max={psi_arr.max()}")
        model.domain_extended = True


def omega(model, psi):
    """Evaluate omega(psi).  Exact for the polynomial representation."""
    _check_domain(model, psi)
    out = np.polynomial.polynomial.polyval(np.asarray(psi, float), model.coeffs)
    return float(out) if np.isscalar(psi) else out


def omega_hat(model, p):
    """The reflected distribution: omega_hat(p) = omega(1 - p).

    p measures depth below the surface streamline, so omega_hat(0) is the
    surface value omega(1).
    """
    return omega(model, 1.0 - np.asarray(p, float) if np.ndim(p) else 1.0 - p)


def omega_hat_prime(model, p):
    """Derivative of the reflected distribution, d/dp omega(1 - p) = -omega'(1 - p).

    Needed by Newton solvers that linearize the vorticity source term.
    """
    _check_domain(model, 1.0 - np.asarray(p, float))
    der = np.polynomial.polynomial.polyder(model.coeffs)
    out = -np.polynomial.polynomial.polyval(1.0 - np.asarray(p, float), der)
    return float(out) if np.isscalar(p) else out


def omega_primitive(model, psi):
    """Primitive Omega(psi) = integral of omega from 0 to psi, Omega(0) = 0.

    Computed by exact polynomial antidifferentiation.  Values are trusted
    only where the integrand is, i.e. on [1 - delta, 1]; elsewhere the
    analytic extension of the polynomial is integrated.
    """
    _check_domain(model, psi)
    prim = np.polynomial.polynomial.polyint(model.coeffs)  # constant term 0
    out = np.polynomial.polynomial.polyval(np.asarray(psi, float), prim)
    return float(out) if np.isscalar(psi) else out
