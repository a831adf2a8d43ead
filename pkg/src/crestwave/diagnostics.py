"""Fits and empirical checks on sampled decay curves and surfaces.

Everything here is pure postprocessing: least-squares fits of exponential
decay rates and surface-slope coefficients, the Hölder-type bound scan of
the vertical velocity near the crest, and the sign check for surface
concavity.  Fit windows default to the middle third of the sampled range —
near-field transients and far-field truncation pollution both live at the
ends, and a fixed convention keeps tolerances reproducible.

Truncated-strip fields carry one systematic contaminant that plain fits
cannot average away: the oscillatory mode of the linearized surface
condition, excited by the residual closure mismatch at the truncation end.
In the surface angle it oscillates in the strip coordinate with a known
frequency (1.5 times the borderline eigenvalue of the angular problem,
the one whose exponent pair is purely imaginary) under an e^{1.5 q}
envelope — it is flat only in the solver's rescaled variable, which is
why the solver tolerates it and fits cannot.  Growing toward the far end,
it shadows every decaying term in a tail fit, so `fit_tail_coefficient`
projects it out with a three-column regression instead of pretending it
is noise.  Use the returned fit to clean a series before rate fitting.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import spectrum, transforms

HALF_PI = 0.5 * math.pi

#: Curvature magnitudes below this are treated as "no sign information";
#: the degenerate vorticity-free surface is flat at series level and must
#: report indeterminate, not a sign verdict read from rounding noise.
CURVATURE_FLOOR = 1e-10


@dataclass(frozen=True)
class DecayFit:
    """Result of a log-linear decay fit: value ~ amplitude * e^{-rate*q}."""

    rate: float
    amplitude: float
    rms_residual: float
    window: tuple

    def __post_init__(self):
        if not math.isfinite(self.rms_residual):
            raise ValueError("rms_residual must be finite")


def _as_pairs(samples):
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(
            f"expected a sequence of (abscissa, value) pairs, got shape "
            f"{arr.shape}")
    return arr[:, 0], arr[:, 1]


def middle_third(lo, hi):
    """The default fit window of a sampled range."""
    span = hi - lo
    return lo + span / 3.0, hi - span / 3.0


def fit_decay(samples, window=None):
    """Least-squares line through (q, ln|value|); returns a DecayFit.

    samples: sequence of (q, value) pairs.  window: (q_lo, q_hi), default
    the middle third of the sampled q-range.  The values inside the window
    must be nonzero and of one sign — a sign change means the quantity is
    not a clean exponential there and the caller should clean or re-window
    first.
    """
    q, v = _as_pairs(samples)
    if window is None:
        window = middle_third(q.min(), q.max())
    lo, hi = float(window[0]), float(window[1])
    if not (lo < hi and q.min() <= lo and hi <= q.max()):
        raise ValueError(
            f"degenerate window ({lo}, {hi}) for samples on "
            f"[{q.min()}, {q.max()}]")
    mask = (q >= lo) & (q <= hi)
    if mask.sum() < 8:
        raise ValueError(
            f"need at least 8 samples in the window, have {int(mask.sum())}")
    qa, va = q[mask], v[mask]
    if np.any(va == 0.0) or (np.any(va > 0) and np.any(va < 0)):
        raise ValueError(
            "values change sign (or vanish) inside the fit window")
    sign = 1.0 if va[0] > 0 else -1.0
    slope, intercept = np.polyfit(qa, np.log(np.abs(va)), 1)
    resid = np.log(np.abs(va)) - (slope * qa + intercept)
    return DecayFit(rate=float(-slope),
                    amplitude=float(sign * math.exp(intercept)),
                    rms_residual=float(np.sqrt(np.mean(resid ** 2))),
                    window=(lo, hi))


def extract_surface_coeffs(samples, tau1):
    """Fit eta_x + 1/sqrt(3) against {sqrt(x), x, x^{(3/2)(tau1-1)}}.

    samples: sequence of (x, eta_x) pairs, x > 0, at least 12 of them
    spread over a decent range (log-spaced sampling recommended — the
    second and third basis columns are nearly collinear on narrow
    windows, and a rank-deficient system raises rather than returning
    garbage coefficients).

    Returns (kappa_hat, slope_x_hat, rms_residual): the sqrt(x)
    coefficient, the x coefficient (a1 * omega1^2 in the series model),
    and the root-mean-square fit residual.
    """
    x, ex = _as_pairs(samples)
    if len(x) < 12:
        raise ValueError(f"need at least 12 samples, have {len(x)}")
    if np.any(x <= 0):
        raise ValueError("x samples must be positive")
    basis = np.column_stack([np.sqrt(x), x, x ** (1.5 * (tau1 - 1.0))])
    rank = np.linalg.matrix_rank(basis)
    if rank < 3:
        raise ValueError(
            f"basis is rank deficient (rank {rank}) on this window; widen "
            "the x-range")
    y = ex + 1.0 / math.sqrt(3.0)
    coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
    resid = y - basis @ coef
    return (float(coef[0]), float(coef[1]),
            float(np.sqrt(np.mean(resid ** 2))))


@dataclass(frozen=True)
class TailFit:
    """Second-order tail of the surface angle with the trapped mode removed.

    coefficient : the e^{-q} coefficient of xi per omega1^2 (the angle
                  expansion's second constant)
    mode_cos, mode_sin : fitted quadrature amplitudes of the oscillatory
                  mode, per omega1^2, relative to the e^{1.5 q} envelope
                  (so the mode in xi is omega1^2 e^{1.5 q} times the
                  quadrature pair)
    mode_freq   : the q-frequency used for the projection
    rms         : fit rms in the subtracted-and-rescaled variable
    window      : (q_lo, q_hi) actually used
    """

    coefficient: float
    mode_cos: float
    mode_sin: float
    mode_freq: float
    rms: float
    window: tuple

    def mode_component(self, q, omega1):
        """The fitted oscillatory-mode contribution to xi at the given q."""
        q = np.asarray(q, float)
        return omega1 ** 2 * np.exp(1.5 * q) * (
            self.mode_cos * np.cos(self.mode_freq * q)
            + self.mode_sin * np.sin(self.mode_freq * q))

    def clean(self, q, xi, omega1):
        """xi with the fitted mode and the fitted e^{-q} term removed.

        What remains is the leading (omega1/3) e^{-q/2} part plus genuine
        higher-order corrections — the right input for a rate fit.
        """
        q = np.asarray(q, float)
        return (np.asarray(xi, float) - self.mode_component(q, omega1)
                - self.coefficient * omega1 ** 2 * np.exp(-q))


def fit_tail_coefficient(q, xi, omega1, window=None, mode_freq=None):
    """Extract the e^{-q} coefficient of the surface angle, per omega1^2.

    Subtracts the exact leading term (omega1/3) e^{-q/2}, rescales by
    e^{q} / omega1^2, and regresses on {1, e^{2.5 q} cos, e^{2.5 q} sin}
    at the trapped-mode frequency.  The oscillatory columns absorb the
    mode that truncated-strip solves always carry: it grows like
    e^{1.5 q} in the angle itself, so after the e^{q} rescaling it grows
    like e^{2.5 q} and would bury the constant if not projected out.

    Requires omega1 != 0 (the tail is defined per omega1^2).
    """
    if omega1 == 0.0:
        raise ValueError("tail coefficient undefined for omega1 = 0")
    q = np.asarray(q, float)
    xi = np.asarray(xi, float)
    if window is None:
        window = middle_third(q.min(), q.max())
    lo, hi = float(window[0]), float(window[1])
    mask = (q >= lo) & (q <= hi)
    if mask.sum() < 8:
        raise ValueError(
            f"need at least 8 samples in the window, have {int(mask.sum())}")
    if mode_freq is None:
        mode_freq = 1.5 * spectrum.solve_eigenpair(0).tau
    qa = q[mask]
    y = (xi[mask] - (omega1 / 3.0) * np.exp(-0.5 * qa)) * np.exp(qa) \
        / omega1 ** 2
    basis = np.column_stack([
        np.ones_like(qa),
        np.exp(2.5 * qa) * np.cos(mode_freq * qa),
        np.exp(2.5 * qa) * np.sin(mode_freq * qa),
    ])
    coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
    resid = y - basis @ coef
    return TailFit(coefficient=float(coef[0]), mode_cos=float(coef[1]),
                   mode_sin=float(coef[2]), mode_freq=float(mode_freq),
                   rms=float(np.sqrt(np.mean(resid ** 2))),
                   window=(lo, hi))


def holder_scan(field, rays=(-HALF_PI, -math.pi / 3.0, -math.pi / 4.0),
                n_rho=24, margin=0.1):
    """Scan psi_y / rho^{1/2} near the crest; returns (min, max, max/min).

    Pulls the stream function of a strip field back to physical
    coordinates and samples the vertical velocity on straight rays from
    the crest, log-spaced in the distance rho across the resolved range
    [e^{-Q+margin}, e^{-q0-margin}].  The scanned quantity should stay
    inside a fixed positive band whose width reflects only the angular
    variation of the corner flow (about 8%), so the max/min ratio is the
    empirical Hölder-bound check: well under 10 for healthy fields.

    psi_y is formed by central differencing in physical y with a
    relative step, on a cubic interpolant of psi_bar.
    """
    from scipy.interpolate import RegularGridInterpolator

    grid = field.grid
    interp = RegularGridInterpolator(
        (grid.q, grid.z), field.psi_bar, method="cubic",
        bounds_error=True)
    qs = grid.q

    def psi_bar_at(xp, yp):
        t, theta = transforms.log_map(xp, yp, field.frame)
        zeta_t = np.interp(t, qs, field.zeta)
        _, zz = transforms.flatten(t, theta, zeta_t)
        zz = min(max(zz, 0.0), HALF_PI)
        return float(interp([[t, zz]])[0])

    t_lo, t_hi = grid.q0 + margin, grid.Q - margin
    rhos = np.exp(-np.linspace(t_lo, t_hi, max(n_rho, 1)))
    values = []
    for theta in rays:
        for rho in rhos:
            xp = rho * math.cos(theta)
            yp = field.frame.r + rho * math.sin(theta)
            dy = 1e-3 * rho
            # psi = 1 - psi_bar, so psi_y = -d(psi_bar)/dy
            psi_y = -(psi_bar_at(xp, yp + dy)
                      - psi_bar_at(xp, yp - dy)) / (2.0 * dy)
            values.append(psi_y / math.sqrt(rho))
    c1_hat = float(min(values))
    c2_hat = float(max(values))
    if c1_hat <= 0.0:
        # the bound is one-sided positive; a nonpositive sample is already
        # the answer (ratio reported as infinite)
        return c1_hat, c2_hat, math.inf
    return c1_hat, c2_hat, c2_hat / c1_hat


def concavity_check(samples):
    """Three-valued surface concavity verdict from (x, eta_x) samples.

    Returns (verdict, first_violation):
      verdict True           — finite-difference eta_xx < 0 at every
                               interior sample (concave toward the crest)
      verdict False          — some interior sample has eta_xx >= 0;
                               first_violation = (x, eta_xx) at the first
      verdict "indeterminate"— every curvature sample is below the noise
                               floor (the vorticity-free case: the series
                               carries no sign information there)

    Requires >= 3 samples, strictly monotone in x.
    """
    x, ex = _as_pairs(samples)
    if len(x) < 3:
        raise ValueError(f"need at least 3 samples, have {len(x)}")
    dx = np.diff(x)
    if np.all(dx < 0):
        x, ex = x[::-1], ex[::-1]
        dx = np.diff(x)
    if not np.all(dx > 0):
        raise ValueError("x samples must be strictly monotone")
    # the samples are slopes, so eta_xx is their first divided difference,
    # centered at each interior sample
    fd = (ex[2:] - ex[:-2]) / (x[2:] - x[:-2])
    if np.max(np.abs(fd)) < CURVATURE_FLOOR:
        return "indeterminate", None
    bad = np.nonzero(fd >= 0.0)[0]
    if bad.size == 0:
        return True, None
    k = int(bad[0])
    return False, (float(x[k + 1]), float(fd[k]))
