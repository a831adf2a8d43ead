"""Fit diagnostics: exactness on synthetic data, policies, verdicts."""

import math

import numpy as np
import pytest

from crestwave import spectrum
from crestwave.asymptotics import (eta_x_series, concavity_crossover,
                                   make_coefficients)
from crestwave.diagnostics import (concavity_check, extract_surface_coeffs,
                                   fit_decay, fit_tail_coefficient,
                                   holder_scan, middle_third)

TAU1 = 1.802679073767
LAM_TRUE = 5.0 * math.sqrt(3.0) / 24.0


# ---------------------------------------------------------------------------
# fit_decay


def test_fit_decay_exact_on_pure_exponential():
    q = np.linspace(2.0, 8.0, 61)
    v = 0.37 * np.exp(-1.25 * q)
    fit = fit_decay(list(zip(q, v)))
    assert abs(fit.rate - 1.25) < 1e-12
    assert abs(fit.amplitude - 0.37) < 1e-12
    assert fit.rms_residual < 1e-13
    assert fit.window == middle_third(2.0, 8.0)


def test_fit_decay_preserves_sign_of_negative_data():
    q = np.linspace(1.0, 5.0, 41)
    fit = fit_decay(list(zip(q, -2.0 * np.exp(-0.5 * q))))
    assert abs(fit.rate - 0.5) < 1e-12
    assert abs(fit.amplitude + 2.0) < 1e-12


def test_fit_decay_explicit_window():
    q = np.linspace(0.0, 10.0, 101)
    v = np.exp(-q) + 50.0 * (q < 2.0)  # near-field transient
    fit = fit_decay(list(zip(q, v)), window=(4.0, 9.0))
    assert abs(fit.rate - 1.0) < 1e-12
    assert fit.window == (4.0, 9.0)


def test_fit_decay_rejects_sign_changes_and_thin_windows():
    q = np.linspace(0.0, 10.0, 101)
    with pytest.raises(ValueError):
        fit_decay(list(zip(q, np.cos(q))))  # sign changes
    with pytest.raises(ValueError):
        fit_decay(list(zip(q, np.exp(-q))), window=(4.0, 4.2))  # < 8 samples
    with pytest.raises(ValueError):
        fit_decay(list(zip(q, np.exp(-q))), window=(9.0, 12.0))  # past range
    with pytest.raises(ValueError):
        fit_decay([(1.0, 2.0, 3.0)])  # not pairs


def test_middle_third():
    assert middle_third(0.0, 9.0) == (3.0, 6.0)


# ---------------------------------------------------------------------------
# extract_surface_coeffs


def synthetic_surface(x, kappa, slope_x, c3):
    return (-1.0 / math.sqrt(3.0) + kappa * np.sqrt(x) + slope_x * x
            + c3 * x ** (1.5 * (TAU1 - 1.0)))


def test_surface_coeffs_exact_recovery():
    x = np.geomspace(1e-4, 1e-1, 40)
    y = synthetic_surface(x, 0.35, 0.21, -0.8)
    kap, ax, rms = extract_surface_coeffs(list(zip(x, y)), TAU1)
    assert abs(kap - 0.35) < 1e-10
    assert abs(ax - 0.21) < 1e-9
    assert rms < 1e-12


def test_surface_coeffs_affine_equivariance():
    """Rescaling x by s = 10 rescales the fitted coefficients by the
    corresponding basis powers (least-squares equivariance)."""
    x = np.geomspace(1e-4, 1e-1, 40)
    y = synthetic_surface(x, 0.35, 0.21, -0.8)
    k1, a1x, _ = extract_surface_coeffs(list(zip(x, y)), TAU1)
    s = 10.0
    k2, a2x, _ = extract_surface_coeffs(list(zip(s * x, y)), TAU1)
    assert abs(k2 - k1 / math.sqrt(s)) < 1e-10
    assert abs(a2x - a1x / s) < 1e-9


def test_surface_coeffs_guards():
    x = np.geomspace(1e-4, 1e-1, 40)
    y = synthetic_surface(x, 0.35, 0.21, -0.8)
    with pytest.raises(ValueError):
        extract_surface_coeffs(list(zip(x, y))[:10], TAU1)  # too few
    with pytest.raises(ValueError):
        extract_surface_coeffs(list(zip(x - 2e-4, y)), TAU1)  # x <= 0
    xn = np.full(20, 0.1)  # a single repeated abscissa: rank-1 basis
    with pytest.raises(ValueError):
        extract_surface_coeffs(list(zip(xn, synthetic_surface(
            xn, 0.35, 0.21, -0.8))), TAU1)


# ---------------------------------------------------------------------------
# fit_tail_coefficient


def test_tail_coefficient_exact_recovery_with_mode():
    """The e^{-q} coefficient is recovered through a synthetic trapped
    mode three orders of magnitude larger at the window's far end."""
    w1 = 0.5
    freq = 1.5 * spectrum.solve_eigenpair(0).tau
    q = np.linspace(4.0, 9.0, 101)
    mode_c, mode_s = 3e-7, -2e-7
    xi = ((w1 / 3.0) * np.exp(-0.5 * q) + LAM_TRUE * w1 ** 2 * np.exp(-q)
          + w1 ** 2 * np.exp(1.5 * q) * (mode_c * np.cos(freq * q)
                                         + mode_s * np.sin(freq * q)))
    tail = fit_tail_coefficient(q, xi, w1, window=(4.2, 6.0))
    assert abs(tail.coefficient - LAM_TRUE) < 1e-9
    assert abs(tail.mode_cos - mode_c) < 1e-12
    assert abs(tail.mode_sin - mode_s) < 1e-12
    cleaned = tail.clean(q, xi, w1)
    assert np.max(np.abs(cleaned - (w1 / 3.0) * np.exp(-0.5 * q))) < 1e-8


def test_tail_coefficient_guards():
    q = np.linspace(4.0, 9.0, 101)
    xi = np.exp(-0.5 * q)
    with pytest.raises(ValueError):
        fit_tail_coefficient(q, xi, 0.0)
    with pytest.raises(ValueError):
        fit_tail_coefficient(q, xi, 0.5, window=(4.0, 4.1))


# ---------------------------------------------------------------------------
# concavity_check


def series_samples(omega1, lo_frac=1e-3, hi_frac=0.9, n=60):
    c = make_coefficients(omega1, LAM_TRUE, TAU1)
    x0 = concavity_crossover(c)
    xs = np.linspace(lo_frac * x0, hi_frac * x0, n)
    return list(zip(xs, eta_x_series(xs, c)))


def test_concavity_negative_vorticity_true():
    verdict, violation = concavity_check(series_samples(-1.0))
    assert verdict is True
    assert violation is None


def test_concavity_positive_vorticity_false_with_witness():
    verdict, violation = concavity_check(series_samples(1.0))
    assert verdict is False
    x_bad, curv = violation
    assert curv >= 0.0
    assert x_bad > 0.0


def test_concavity_zero_vorticity_indeterminate():
    c = make_coefficients(0.0, LAM_TRUE, TAU1)
    xs = np.linspace(1e-4, 0.15, 40)
    verdict, violation = concavity_check(list(zip(xs, eta_x_series(xs, c))))
    assert verdict == "indeterminate"
    assert violation is None


def test_concavity_guards_and_descending_input():
    samples = series_samples(-1.0)
    assert concavity_check(samples[::-1])[0] is True  # descending x ok
    with pytest.raises(ValueError):
        concavity_check(samples[:2])
    shuffled = [samples[0], samples[2], samples[1]] + samples[3:]
    with pytest.raises(ValueError):
        concavity_check(shuffled)


# ---------------------------------------------------------------------------
# holder_scan (needs a field; uses the shared session solve)


def test_holder_scan_band_on_solved_field(solved_field):
    """The scaled vertical velocity stays in a tight positive band; the
    corner flow alone would give a ratio of about 1.083, and a healthy
    solve adds little on top."""
    c1, c2, ratio = holder_scan(solved_field)
    assert c1 > 0
    assert ratio < 1.2
    assert abs(ratio - 1.0889) < 0.01
