"""Sturm-Liouville spectrum controlling the crest expansion remainders.

On [0, pi/2] with a Neumann bottom and the Robin surface condition
phi'(pi/2) = phi(pi/2)/sqrt(3), the eigenfunctions are cos(tau*z) with
tau a root of

    tau + cot(pi*tau/2)/sqrt(3) = 0 ,

one root per interval (2j-1, 2j).  The smallest positive root tau_1 sets
the remainder exponent (3/2)(tau_1 - 1) of the surface expansion.  There
is also a single negative eigenvalue mu_0 = -s^2 with eigenfunction
cosh(s*z), where s solves s*tanh(pi*s/2) = 1/sqrt(3); the corresponding
mode of the strip operator is purely oscillatory in q and is the main
numerical nuisance for the nonlinear solver.
"""

import math
from dataclasses import dataclass

INV_SQRT3 = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class Eigenpair:
    """index j, exponent tau (for j=0: the parameter s), eigenvalue mu.

    mu = tau^2 for j >= 1 and mu = -s^2 < 0 for j = 0.  Eigenfunctions are
    normalized to phi(0) = 1: cos(tau*z) for j >= 1, cosh(s*z) for j = 0.
    """
    index: int
    tau: float
    mu: float

    def phi(self, z):
        if self.index == 0:
            return math.cosh(self.tau * z)
        return math.cos(self.tau * z)

    def dphi(self, z):
        if self.index == 0:
            return self.tau * math.sinh(self.tau * z)
        return -self.tau * math.sin(self.tau * z)


def _dispersion(tau):
    return tau + INV_SQRT3 / math.tan(math.pi * tau / 2.0)


def _dispersion_prime(tau):
    s = math.sin(math.pi * tau / 2.0)
    return 1.0 - INV_SQRT3 * (math.pi / 2.0) / (s * s)


def _neutral(s):
    return s * math.tanh(math.pi * s / 2.0) - INV_SQRT3


def _neutral_prime(s):
    t = math.tanh(math.pi * s / 2.0)
    return t + s * (math.pi / 2.0) * (1.0 - t * t)


def _bisect_newton(f, fprime, lo, hi, tol=1e-15):
    """Bracketed bisection down to ~1e-6 width, then Newton polish.

    Raises RuntimeError if the bracket does not straddle a sign change —
    that is a programming error (the brackets are fixed by theory), not a
    data error.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise RuntimeError(
            f"no sign change on bracket [{lo}, {hi}]: f={flo}, {fhi}")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    x = 0.5 * (lo + hi)
    for _ in range(60):
        step = f(x) / fprime(x)
        x -= step
        if abs(step) < tol * max(1.0, abs(x)):
            break
    return x


def solve_eigenpair(j):
    """Compute the j-th eigenpair.

    j >= 1: tau_j bracketed in (2j-1, 2j - 1e-9); the upper end stays off
    the cotangent pole at the even integer.  j = 0: the parameter s of the
    negative eigenvalue, bracketed in (1e-9, 2).
    """
    if j < 0:
        raise ValueError(f"index must be >= 0, got {j}")
    if j == 0:
        s = _bisect_newton(_neutral, _neutral_prime, 1e-9, 2.0)
        return Eigenpair(index=0, tau=s, mu=-s * s)
    tau = _bisect_newton(_dispersion, _dispersion_prime,
                         2.0 * j - 1.0, 2.0 * j - 1e-9)
    return Eigenpair(index=j, tau=tau, mu=tau * tau)


def eigenfunction_value(pair, z):
    """phi_j(z) with the phi_j(0) = 1 normalization."""
    if not 0.0 <= z <= math.pi / 2.0 + 1e-15:
        raise ValueError(f"z = {z} outside [0, pi/2]")
    return pair.phi(z)


def remainder_exponent():
    """The exponent (3/2)(tau_1 - 1) of the surface-slope remainder."""
    return 1.5 * (solve_eigenpair(1).tau - 1.0)


def mode_decay_rate(j, sign):
    """q-exponent +-(3/2)tau_j of the j-th kernel mode of the strip operator."""
    if j < 1:
        raise ValueError("kernel modes are indexed from j = 1")
    if sign not in (1, -1, 1.0, -1.0):
        raise ValueError(f"sign must be +-1, got {sign}")
    return sign * 1.5 * solve_eigenpair(j).tau
