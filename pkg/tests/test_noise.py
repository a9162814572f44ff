import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagnacsim.loop import LossPoint, build_layout, smf28, ull
from sagnacsim.noise import (
    ULL_MODEL,
    BackscatterEngine,
    ChunkedPhase,
    PhaseNoiseModel,
    backscatter_response,
    band_limited_noise,
    smf28_model,
    synthesize_phase,
    synthesize_phase_variance,
    variance_model,
)
from sagnacsim.signals import make_pulse_train
from sagnacsim.units import TimeGrid


def test_single_pulse_response_matches_closed_form():
    lay = build_layout([smf28(20)])
    g = TimeGrid(1e-8, 40_000)  # 400 us: one isolated pulse, tail dies at 196 us
    p = make_pulse_train(1.0 / g.span, 1e-8, 1.0, g)
    bs = backscatter_response(lay, p)
    E = p.pulse_energy
    t = g.times[1:19_000]
    alpha = smf28(1).alpha.per_length_natural
    expect = E * 8.0 * np.exp(-alpha * lay.v_g * t)
    np.testing.assert_allclose(bs.power[1:19_000], expect, rtol=1e-9)
    assert bs.cw[5] == pytest.approx(bs.ccw[5], rel=1e-12)


def test_zero_pattern_gives_zero():
    lay = build_layout([smf28(20)])
    g = TimeGrid(1e-8, 1000)
    eng = BackscatterEngine(lay, g)
    assert np.all(eng.response(np.zeros(g.n)).power == 0)
    with pytest.raises(ValueError):
        eng.response(np.zeros(10))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 999))
def test_engine_linear_and_time_invariant(seed, shift):
    lay = build_layout([smf28(3), ull(4)], [LossPoint(2.0, 0.5)])
    g = TimeGrid(1e-8, 1000)
    eng = BackscatterEngine(lay, g)
    rng = np.random.default_rng(seed)
    a, b = rng.random(g.n), rng.random(g.n)
    ya, yb, yab = eng.response(a).power, eng.response(b).power, eng.response(a + b).power
    np.testing.assert_allclose(yab, ya + yb, rtol=1e-12, atol=1e-12 * yab.max())
    ys = eng.response(np.roll(a, shift)).power
    np.testing.assert_allclose(ys, np.roll(ya, shift), rtol=1e-12, atol=1e-12 * ya.max())


def test_mirror_symmetric_loop_equal_directions():
    lay = build_layout([ull(5), smf28(10), ull(5)])
    g = TimeGrid(1e-8, 5000)
    p = make_pulse_train(1e6, 1e-8, 1.0, g)
    bs = backscatter_response(lay, p)
    np.testing.assert_allclose(bs.cw, bs.ccw, rtol=1e-12, atol=1e-15 * bs.cw.max())


def test_variance_model_examples():
    assert variance_model(200, ULL_MODEL) == pytest.approx(0.06, rel=1e-12)
    assert ULL_MODEL.a == pytest.approx(6.2e-8, rel=0.01)
    assert variance_model(100, ULL_MODEL) == pytest.approx(0.06 * 2**-2.6)
    assert variance_model(100, ULL_MODEL) == pytest.approx(0.0099, abs=1e-4)
    assert variance_model(0, ULL_MODEL) == 0
    m = PhaseNoiseModel("x", 1e-7, 3.0)
    assert variance_model(50, m) / variance_model(100, m) == pytest.approx(1 / 8)
    with pytest.raises(ValueError):
        variance_model(-1, m)
    assert smf28_model(1e-7).c == 0.0072
    with pytest.raises(ValueError):
        PhaseNoiseModel("x", -1.0, 3.0)


def test_band_limited_noise_spectrum_support():
    g = TimeGrid(1e-8, 4096)
    x = band_limited_noise(1.0, 1e6, g, np.random.default_rng(1))
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(g.n, g.dt)
    assert spec[f > 1.01e6].max() < 1e-20 * spec.max()
    with pytest.raises(ValueError):
        band_limited_noise(1.0, 1e9, g, np.random.default_rng(1))


def test_phase_variance_over_seeds():
    # 1 ms at 100 MHz, 100 seeds: mean sample variance within 3 standard errors
    g = TimeGrid(1e-8, 100_000)
    v = np.array([synthesize_phase(ULL_MODEL, 200, g, s).values.var() for s in range(100)])
    assert abs(v.mean() - 0.06) <= 3 * v.std(ddof=1) / math.sqrt(v.size)


def test_phase_stationarity():
    g = TimeGrid(1e-8, 200_000)
    x = synthesize_phase_variance(0.06, 1e6, g, 3).values
    first, second = x[:100_000].var(), x[100_000:].var()
    # about 200 independent samples per microsecond window -> relative error of a few percent
    assert abs(first - second) / 0.06 < 0.1


def test_phase_requires_long_enough_grid():
    with pytest.raises(ValueError):
        synthesize_phase_variance(0.06, 1e6, TimeGrid(1e-8, 100), 0)
    with pytest.raises(ValueError):
        synthesize_phase(ULL_MODEL, 0.0, TimeGrid(1e-8, 10_000), 0)


def test_phase_trace_zero_order_hold():
    g = TimeGrid(1e-8, 10_000)
    tr = synthesize_phase_variance(0.06, 1e6, g, 4)
    assert tr.at(g.times[7] + 0.3e-8) == tr.values[7]
    np.testing.assert_array_equal(tr.at(g.times), tr.values)


def test_chunked_phase_is_order_independent():
    c = ChunkedPhase(0.06, 1e6, 4e-7, np.random.SeedSequence(5))
    t = np.random.default_rng(0).uniform(0, 0.2, 50_000)
    v = c.at(t)
    np.testing.assert_array_equal(v, c.at(t[::-1])[::-1])
    assert abs(v.var() - 0.06) < 0.006
    with pytest.raises(ValueError):
        ChunkedPhase(0.06, 1e6, 4e-7, np.random.SeedSequence(5), chunk_n=4)
