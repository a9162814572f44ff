import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sagnacsim.loop import (
    FiberSegment,
    LossPoint,
    LoopLayout,
    build_layout,
    impulse_response,
    round_trip_horizon,
    smf28,
    total_loss,
    transit_time,
    ull,
)
from sagnacsim.units import Attenuation, TimeGrid


def test_layout_examples():
    one = build_layout([smf28(20)])
    assert one.length == 20.0
    assert total_loss(one) == pytest.approx(4.04)
    two = build_layout([ull(100), ull(100)])
    assert two.length == 200.0
    assert total_loss(two) == pytest.approx(31.8)
    pt = build_layout([ull(50)], [LossPoint(25.0, 3.0)])
    assert total_loss(pt) == pytest.approx(50 * 0.159 + 3.0)


def test_adding_component_loss():
    base = build_layout([ull(100), ull(100)])
    extra = build_layout([ull(100), ull(100)], [LossPoint(10.0, 4.0), LossPoint(150.0, 6.0)])
    assert total_loss(extra) - total_loss(base) == pytest.approx(10.0)


def test_transit_times():
    assert transit_time(build_layout([smf28(5)])) == pytest.approx(24.5e-6, abs=0.1e-6)
    assert transit_time(build_layout([ull(125)])) == pytest.approx(0.612e-3, abs=0.001e-3)
    assert transit_time(build_layout([ull(200)])) == pytest.approx(0.979e-3, abs=0.001e-3)


def test_layout_validation():
    with pytest.raises(ValueError):
        FiberSegment(0.0, Attenuation(0.2), 8.0)
    with pytest.raises(ValueError):
        LoopLayout(())
    with pytest.raises(ValueError):
        build_layout([smf28(10)], [LossPoint(12.0, 1.0)])
    with pytest.raises(ValueError):
        LossPoint(1.0, -1.0)


def test_loss_points_are_sorted():
    lay = build_layout([smf28(10)], [LossPoint(8.0, 1.0), LossPoint(2.0, 1.0)])
    assert [p.position for p in lay.loss_points] == [2.0, 8.0]


def _grid(layout, dt=1e-7):
    return TimeGrid.covering(round_trip_horizon(layout) + dt, dt)


def test_impulse_response_anchor():
    lay = build_layout([smf28(20)])
    g = TimeGrid(1e-7, 2000)
    h = impulse_response(lay, "cw", g).values
    assert h[0] == 8.0
    assert h[1000] == pytest.approx(3.094, abs=5e-4)
    assert np.all(h[g.times > round_trip_horizon(lay) + 1e-12] == 0)


def test_impulse_response_grid_checks():
    lay = build_layout([smf28(20)])
    with pytest.raises(ValueError):
        impulse_response(lay, "cw", TimeGrid(1e-7, 100))
    with pytest.raises(ValueError):
        impulse_response(lay, "cw", TimeGrid(1e-7, 3000, t0=1e-7))
    with pytest.raises(ValueError):
        impulse_response(lay, "up", TimeGrid(1e-7, 3000))


def test_loss_point_scales_tail_by_double_pass():
    z0, X = 7.0, 2.0
    plain = build_layout([smf28(20)])
    lossy = build_layout([smf28(20)], [LossPoint(z0, X)])
    g = _grid(plain)
    h0 = impulse_response(plain, "cw", g).values
    h1 = impulse_response(lossy, "cw", g).values
    t_cross = 2 * z0 / plain.v_g
    after = (g.times > t_cross) & (h0 > 0)
    before = g.times < t_cross
    np.testing.assert_allclose(h1[after] / h0[after], 10 ** (-2 * X / 10), rtol=1e-12)
    np.testing.assert_array_equal(h1[before], h0[before])
    assert h1.sum() < h0.sum()


def test_mirror_symmetric_layout_gives_equal_directions():
    lay = build_layout([smf28(5), ull(10), smf28(5)], [LossPoint(4.0, 1.0), LossPoint(16.0, 1.0)])
    g = _grid(lay)
    np.testing.assert_array_equal(impulse_response(lay, "cw", g).values, impulse_response(lay, "ccw", g).values)


def test_two_segments_use_local_eta():
    lay = build_layout([smf28(10), ull(10)])
    g = _grid(lay)
    t = g.times
    z = 0.5 * lay.v_g * t
    h = impulse_response(lay, "cw", g).values
    a1 = smf28(1).alpha.per_length_natural
    a2 = ull(1).alpha.per_length_natural
    first = z < 10
    second = (z > 10) & (z <= 20)
    np.testing.assert_allclose(h[first], 8.0 * np.exp(-2 * a1 * z[first]), rtol=1e-12)
    expect = 6.54 * np.exp(-2 * a1 * 10 - 2 * a2 * (z[second] - 10))
    np.testing.assert_allclose(h[second], expect, rtol=1e-12)
    hc = impulse_response(lay, "ccw", g).values
    assert hc[0] == 6.54


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 50.0), st.floats(0.0, 1.0), st.floats(0.1, 10.0))
def test_adding_a_loss_point_lowers_integral(L, frac, X):
    plain = build_layout([ull(L)])
    lossy = build_layout([ull(L)], [LossPoint(frac * L, X)])
    g = _grid(plain, dt=round_trip_horizon(plain) / 500)
    s0 = impulse_response(plain, "cw", g).values.sum()
    s1 = impulse_response(lossy, "cw", g).values.sum()
    assert math.isfinite(s0) and s1 <= s0
