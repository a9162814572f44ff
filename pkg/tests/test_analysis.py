import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagnacsim.analysis import (
    FitError,
    TimingError,
    extract_phase,
    fit_otdr,
    fit_power_law,
    psd,
    qber_from_variance,
    recover_burst_timing,
    subset_variance,
    subtract_floor,
    variance_from_visibility,
    visibility,
    visibility_from_variance,
)
from sagnacsim.detection import DetectorParams, Histogram, InterferenceParams, TimeSeries, TimestampSeries
from sagnacsim.units import GroupVelocity, TimeGrid, attenuation_natural


def _series(values, dt=1e-8):
    values = np.asarray(values, float)
    return TimeSeries(TimeGrid(dt, values.size), values)


def test_extract_phase_extremes():
    p = InterferenceParams(2.0, 0.5)
    assert extract_phase(_series([2.0]), p).values[0] == pytest.approx(0.0)
    assert abs(extract_phase(_series([0.5]), p).values[0]) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        extract_phase(_series([1.0]), InterferenceParams(1.0, 1.0))


def test_extract_phase_tracks_smooth_excursion():
    p = InterferenceParams(1.0, 0.0, 0.5 * math.pi)
    truth = 2.5 * np.sin(np.linspace(0, 4 * math.pi, 4000))
    vals = 0.5 * (1 + np.cos(p.phi + truth))
    np.testing.assert_allclose(extract_phase(_series(vals), p).values, truth, atol=1e-6)


def test_subset_variance():
    assert subset_variance(np.full(100, 3.0), 10).sigma2 == 0.0
    x = np.random.default_rng(0).normal(size=1000)
    a = subset_variance(x, 50)
    b = subset_variance(x + 7.0, 50)
    assert a.sigma2 == pytest.approx(b.sigma2, rel=1e-12)
    assert a.n_subsets == 20 and a.subset_size == 50
    with pytest.raises(ValueError):
        subset_variance(x, 1)
    with pytest.raises(ValueError):
        subset_variance(x, 600)


def test_subtract_floor():
    assert subtract_floor(0.02, 0.0072) == pytest.approx(0.0128)
    assert subtract_floor(0.02, 0.0072, 0.0003) == pytest.approx(0.0131)
    assert subtract_floor(0.005, 0.0072) == 0.0
    with pytest.raises(ValueError):
        subtract_floor(-1.0, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 4.0), st.floats(1e-9, 1e-6))
def test_power_law_exact_recovery(b, a):
    L = np.array([25.0, 50.0, 100.0, 150.0, 200.0])
    fit = fit_power_law(L, a * L**b)
    assert fit["b"] == pytest.approx(b, abs=1e-6)
    assert fit["a"] == pytest.approx(a, rel=1e-5)


def test_power_law_with_offset():
    L = np.array([10.0, 25.0, 50.0, 100.0, 150.0, 200.0])
    y = 1e-7 * L**2.6 + 0.0072
    fit = fit_power_law(L, y, with_offset=True)
    assert fit["b"] == pytest.approx(2.6, abs=1e-6)
    assert fit["c"] == pytest.approx(0.0072, abs=1e-9)


def test_power_law_degenerate():
    with pytest.raises(FitError):
        fit_power_law([50.0, 50.0, 50.0], [1.0, 1.1, 0.9])
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_power_law([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])


def test_psd_of_sinusoid():
    dt = 1e-7
    n = 1_000_000
    t = np.arange(n) * dt
    A, f0 = 0.3, 100e3
    tr = TimeSeries(TimeGrid(dt, n), A * np.sin(2 * math.pi * f0 * t))
    f, p = psd(tr, rbw=100.0)
    assert f[0] >= 9e3 and f[-1] <= 1e6
    df = f[1] - f[0]
    near = np.abs(f - f0) < 5 * 100.0
    assert p[near].sum() * df == pytest.approx(A**2 / 2, rel=0.01)
    with pytest.raises(ValueError):
        psd(TimeSeries(TimeGrid(dt, 1000), np.zeros(1000)))


def _analytic_histogram(alpha_db, eta, L_km, det, energy, dt=10e-9, period=200e-6, n_periods=1e8):
    v = GroupVelocity().v_g
    k = attenuation_natural(alpha_db) * v
    t0 = np.arange(int(round(period / dt))) * dt
    t1 = t0 + dt
    t_end = 2 * L_km / v
    hi = np.minimum(t1, t_end)
    mean = np.where(t0 < t_end, eta * (np.exp(-k * t0) - np.exp(-k * np.maximum(hi, t0))) / (k * dt), 0.0)
    rate = mean * energy * det.detections_per_joule() + det.dark_hz
    return Histogram(t0, rate * n_periods * dt, dt, period, n_periods)


def test_fit_otdr_exact_on_noiseless_histogram():
    det = DetectorParams(dead_time=0.0)
    energy = 1e-15
    hist = _analytic_histogram(0.202, 8.0, 20.0, det, energy)
    fit = fit_otdr(hist, det, energy, rep_period=200e-6)
    assert fit["alpha_db_per_km"] == pytest.approx(0.202, rel=1e-6)
    assert fit["eta"] == pytest.approx(8.0, rel=1e-6)
    assert fit.extras["fit_end"] <= 2 * 20.0 / GroupVelocity().v_g + 1e-12
    with pytest.raises(ValueError):
        fit_otdr(hist, det, energy, rep_period=100e-6)


def test_fit_otdr_flags_wrong_dark_rate():
    det = DetectorParams(dead_time=0.0)
    energy = 1e-17
    hist = _analytic_histogram(0.202, 8.0, 20.0, det, energy)
    with pytest.raises(FitError):
        fit_otdr(hist, DetectorParams(dead_time=0.0, dark_rate=7e-5), energy)


def _events(period, offset, n, jitter=1e-9, seed=0):
    rng = np.random.default_rng(seed)
    return np.sort(offset + period * np.arange(n) + rng.normal(0, jitter, n))


def test_timing_from_periodic_events():
    T = 1.475e-3
    t = _events(T, 3.1e-4, 2000)
    timing = recover_burst_timing(TimestampSeries(t, "D0", t[-1] + T), 1.47e-3)
    assert timing.period == pytest.approx(T, rel=1e-6)
    assert timing.offset == pytest.approx(3.1e-4, abs=5e-9)


@given(st.floats(0.0, 1e-2))
@settings(max_examples=15, deadline=None)
def test_timing_translation_invariance(shift):
    T = 1.475e-3
    t = _events(T, 2e-4, 1000)
    a = recover_burst_timing(t, T)
    b = recover_burst_timing(t + shift, T)
    d = (b.offset - a.offset - shift) % T
    assert min(d, T - d) < 1e-9


def test_timing_on_pure_dark_counts():
    t = np.sort(np.random.default_rng(3).uniform(0, 1.0, 5000))
    with pytest.raises(TimingError):
        recover_burst_timing(t, 1.475e-3)
    with pytest.raises(TimingError):
        recover_burst_timing(t[:50], 1.475e-3)


def test_visibility():
    assert visibility(5.0, 5.0) == 0.0
    assert visibility(3.5e-3, 7e-7) == pytest.approx(0.9996, abs=1e-5)
    with pytest.raises(ValueError):
        visibility(0.0, 0.0)


def test_variance_visibility_relations():
    assert visibility_from_variance(0.06) == pytest.approx(0.97045, abs=1e-5)
    assert variance_from_visibility(0.97401) == pytest.approx(0.0527, abs=1e-4)
    assert variance_from_visibility(visibility_from_variance(0.06)) == pytest.approx(0.06)
    assert qber_from_variance(0.06) == pytest.approx(0.015)
    assert qber_from_variance(0.08) == pytest.approx(0.02)
    with pytest.raises(ValueError):
        visibility_from_variance(-0.1)
    with pytest.raises(ValueError):
        variance_from_visibility(0.0)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_visibility_monotone_in_variance(a, b):
    lo, hi = sorted((a, b))
    assert visibility_from_variance(hi) <= visibility_from_variance(lo)
