import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasecoupler import fitting
from phasecoupler.fitting import (CrossingFit, DegenerateFit, NoPeak, crosstalk_ratio,
                                  extract_peaks, fit_at_frequency, fit_avoided_crossing,
                                  fit_damped_sine, pure_decay_fit, resolvability_fratio,
                                  spectral_seed)

T = np.linspace(0, 200e-9, 401)


def lorentz(f, f0, hwhm, h):
    return h / (1 + ((f - f0) / hwhm) ** 2)


def test_single_peak_recovered():
    f = np.linspace(-50e6, 50e6, 401)
    y = lorentz(f, 7.3e6, 1.5e6, 0.4) + 0.01
    pk = extract_peaks(f, y)
    assert len(pk) == 1
    assert pk[0].frequency == pytest.approx(7.3e6, abs=1e3)


def test_two_peaks_sorted_and_resolved():
    f = np.linspace(-60e6, 60e6, 481)
    y = lorentz(f, -8.5e6, 1.5e6, 0.3) + lorentz(f, 8.5e6, 1.5e6, 0.25)
    pk = extract_peaks(f, y)
    assert [p.frequency for p in pk] == pytest.approx([-8.5e6, 8.5e6], abs=2e3)


def test_flat_trace_has_no_peak():
    with pytest.raises(NoPeak):
        extract_peaks(np.linspace(0, 1e8, 101), np.full(101, 0.2))


@pytest.mark.parametrize("omega_c", [0.0, 11e6, 40e6])
@pytest.mark.parametrize("tilt", [0.0, -0.5])
def test_crossing_fit_recovers_gap(omega_c, tilt):
    truth = CrossingFit(omega_c=omega_c, f_center=0.4e6, residual_rms=0.0, tilt=tilt)
    deltas = np.linspace(-60e6, 60e6, 13)
    lo, hi = truth.branches(deltas)
    rows = [(d, [a, b] if b - a > 3e6 else [0.5 * (a + b)]) for d, a, b in zip(deltas, lo, hi)]
    fit = fit_avoided_crossing(rows)
    assert abs(fit.omega_c - omega_c) < 0.05e6
    assert fit.tilt == pytest.approx(tilt, abs=1e-3)


def test_crossing_needs_rows():
    with pytest.raises(ValueError):
        fit_avoided_crossing([(0.0, [1.0])] * 3)


@given(st.floats(10e6, 80e6), st.floats(30e-9, 2e-6), st.floats(-math.pi, math.pi),
       st.floats(0.1, 0.5))
def test_damped_sine_exact_recovery(f, tau, phase, amp):
    y = 0.5 + amp * np.exp(-T / tau) * np.cos(2 * np.pi * f * T + phase)
    fit = fit_damped_sine(T, y)
    assert fit.frequency == pytest.approx(f, rel=1e-6)
    assert fit.decay_time == pytest.approx(tau, rel=1e-4)
    assert np.max(np.abs(fit(T) - y)) < 1e-7


def test_damped_sine_with_decaying_offset():
    t = np.linspace(0, 1e-6, 301)
    y = 0.02 + np.exp(-t / 350e-9) * (0.48 - 0.46 * np.cos(2 * np.pi * 3e6 * t))
    fit = fit_damped_sine(t, y, decaying_offset=True)
    assert fit.frequency == pytest.approx(3e6, rel=1e-8)
    assert fit.decaying_offset == pytest.approx(0.48, rel=1e-6)


def test_damped_sine_noise_tolerant():
    rng = np.random.default_rng(5)
    y = 0.5 - 0.5 * np.cos(2 * np.pi * 40e6 * T) * np.exp(-T / 350e-9) + rng.normal(0, 0.02, T.size)
    assert fit_damped_sine(T, y).frequency == pytest.approx(40e6, rel=2e-3)


def test_subperiod_trace_rejected():
    y = np.cos(2 * np.pi * 1e6 * T)
    with pytest.raises(ValueError):
        fit_damped_sine(T, y)
    with pytest.raises(ValueError):
        fit_damped_sine(T[:5], y[:5])


def test_spectral_seed_prefers_lower_on_tie():
    y = np.cos(2 * np.pi * 20e6 * T) + np.cos(2 * np.pi * 60e6 * T)
    assert spectral_seed(T, y) == pytest.approx(20e6, rel=0.02)


def test_fit_at_frequency_amplitude_and_sigma():
    y = 0.1 + 0.03 * np.cos(2 * np.pi * 25e6 * T + 0.4)
    fit, sig = fit_at_frequency(T, y, 25e6)
    assert fit.amplitude == pytest.approx(0.03, rel=1e-9)
    assert sig < 1e-12


def test_crosstalk_ratio_and_clamp():
    drv = 0.5 - 0.5 * np.cos(2 * np.pi * 20e6 * T)
    und = 0.01 - 0.01 * np.cos(2 * np.pi * 20e6 * T)
    ratio, info = crosstalk_ratio(T, drv, und)
    assert ratio == pytest.approx(0.02, rel=1e-6) and not info["clamped"]
    rng = np.random.default_rng(1)
    ratio0, info0 = crosstalk_ratio(T, drv, rng.normal(0, 1e-4, T.size))
    assert ratio0 == 0.0 and info0["clamped"]


def test_pure_decay_fit():
    t = np.linspace(0, 1e-6, 101)
    c, b, tau, rss = pure_decay_fit(t, 0.1 + 0.7 * np.exp(-t / 350e-9))
    assert (c, b, tau) == pytest.approx((0.1, 0.7, 350e-9), rel=1e-6)
    assert rss < 1e-16


def test_fratio_orders_with_oscillation_size():
    t = np.linspace(0, 1e-6, 101)
    decay = np.exp(-t / 350e-9)
    flat = 0.2 * (1 - decay)
    assert resolvability_fratio(t, flat, 0.5e6, 1e-4) == pytest.approx(1.0, abs=1e-3)
    small = flat + 0.002 * decay * np.sin(np.pi * 0.5e6 * t) ** 2
    big = flat + 0.02 * decay * np.sin(np.pi * 0.5e6 * t) ** 2
    assert 1.0 < resolvability_fratio(t, small, 0.5e6, 1e-6) < resolvability_fratio(t, big, 0.5e6, 1e-6)
    assert resolvability_fratio(t, big, 0.0, 1e-6) == 1.0


def test_error_types():
    assert issubclass(NoPeak, ValueError) and issubclass(DegenerateFit, ValueError)
    assert issubclass(fitting.FitDiverged, RuntimeError)
