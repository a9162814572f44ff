"""End-to-end simulated measurements built from the model and analysis layers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import (
    BurstTiming,
    VarianceEstimate,
    VisibilityResult,
    extract_phase,
    psd,
    recover_burst_timing,
    subset_variance,
    subtract_floor,
    windowed_visibility,
)
from .detection import (
    DetectorParams,
    Histogram,
    InterferenceParams,
    TimeSeries,
    TimestampSeries,
    classical_trace,
    fold_histogram,
    fringe,
    spad_detect,
)
from .loop import DIRECTIONS, LoopLayout, impulse_response, round_trip_horizon, total_loss, transit_time
from .noise import BackscatterEngine, ChunkedPhase, PhaseNoiseModel, synthesize_phase
from .signals import SignalPattern
from .units import TimeGrid, db_to_linear


def child_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


# ---------------------------------------------------------------- photon counting


@dataclass(frozen=True)
class PortModel:
    """Mean optical powers (W) reaching the detection stage over one pattern period."""

    pattern: SignalPattern
    signal: np.ndarray  # interfering signal at the beam splitter, before the fringe
    backscatter: np.ndarray  # total, split evenly between D0 and D1
    shift: int  # transit delay, samples
    detector: DetectorParams
    i_min_fraction: float = 0.0

    @property
    def grid(self) -> TimeGrid:
        return self.pattern.grid

    @property
    def truth_offset(self) -> float:
        """Arrival time of the first pulse of a burst at the detectors, mod the pattern period."""
        return (self.shift * self.grid.dt) % self.pattern.period

    @property
    def window(self) -> float | None:
        if self.pattern.pulse_width is None:
            return None
        return self.pattern.pulse_width + 2.0 * self.grid.dt


def port_model(
    layout: LoopLayout,
    pattern: SignalPattern,
    detector: DetectorParams,
    engine: BackscatterEngine | None = None,
    i_min_fraction: float = 0.0,
) -> PortModel:
    engine = engine or BackscatterEngine(layout, pattern.grid)
    shift = int(round(transit_time(layout) / pattern.grid.dt))
    sig = np.roll(pattern.power, shift) * db_to_linear(-total_loss(layout))
    bs = engine.response(pattern.power).power
    return PortModel(pattern, sig, bs, shift, detector, i_min_fraction)


def simulate_ports(
    model: PortModel,
    phi: float,
    span: float,
    seed,
    sigma2: float = 0.0,
    bandwidth: float = 1e6,
) -> tuple[TimestampSeries, TimestampSeries]:
    """Click streams of D0 and D1 for static phase `phi`.

    Candidate events are drawn from the phase-free upper bound of each
    port's intensity and thinned with the fringe evaluated at the event
    time, so the phase trace is only needed on its own (coarser) grid.
    """
    s_phase, s0, s1 = child_seeds(seed, 3)
    grid = model.grid
    det = model.detector
    k = grid.dt * det.detections_per_joule()
    dark = det.dark_hz * grid.dt
    half_bs = 0.5 * model.backscatter
    upper = (model.signal + half_bs) * k + dark

    phase: ChunkedPhase | None = None
    if sigma2 > 0:
        phase = ChunkedPhase(sigma2, bandwidth, 1.0 / (2.5 * bandwidth), s_phase)
    params = InterferenceParams(1.0, model.i_min_fraction, phi)

    out = []
    for port, s in (("D0", s0), ("D1", s1)):

        def thin(times, idx, port=port):
            dphi = phase.at(times) if phase is not None else 0.0
            sig = fringe(model.signal[idx], dphi, params, port)
            return ((sig + half_bs[idx]) * k + dark) / upper[idx]

        out.append(spad_detect(upper, grid, det, span, s, port, thin=thin))
    return out[0], out[1]


@dataclass(frozen=True)
class VisibilityRun:
    result: VisibilityResult
    timing_0: BurstTiming | None
    timing_pi: BurstTiming | None
    truth_offset: float
    series_0: tuple[TimestampSeries, TimestampSeries]
    series_pi: tuple[TimestampSeries, TimestampSeries]


def recover_timing(model: PortModel, series, known: bool = False) -> BurstTiming | None:
    pat = model.pattern
    if pat.pulse_width is None:
        return None
    p = 1.0 / pat.pulse_rate
    if known:
        if pat.on_time is None:
            return BurstTiming(p, model.truth_offset % p)
        return BurstTiming(pat.period, model.truth_offset, p, pat.on_time)
    if pat.on_time is None:
        return recover_burst_timing(series, p, pulse_width=pat.pulse_width)
    return recover_burst_timing(
        series, pat.period, pulse_period=p, on_time=pat.on_time, pulse_width=pat.pulse_width
    )


def visibility_run(
    model: PortModel,
    span: float,
    seed,
    sigma2: float = 0.0,
    bandwidth: float = 1e6,
    known_timing: bool = False,
    window: float | None = None,
    phis: tuple[float, float] = (0.0, math.pi),
) -> VisibilityRun:
    """Constructive and destructive runs, timing recovery on each, windowed visibility."""
    s0, spi = child_seeds(seed, 2)
    run0 = simulate_ports(model, phis[0], span, s0, sigma2, bandwidth)
    runpi = simulate_ports(model, phis[1], span, spi, sigma2, bandwidth)
    t0 = recover_timing(model, run0, known_timing)
    tpi = recover_timing(model, runpi, known_timing)
    win = window if window is not None else model.window
    width = model.pattern.pulse_width or 0.0
    res = windowed_visibility(run0, runpi, t0, tpi, win, width)
    return VisibilityRun(res, t0, tpi, model.truth_offset, run0, runpi)


# ---------------------------------------------------------------- OTDR


def otdr_response(layout: LoopLayout, rep_period: float, bin: float, oversample: int = 8) -> np.ndarray:
    """Clockwise impulse response averaged over each bin and folded onto one period (1/s)."""
    n_bins = int(round(rep_period / bin))
    if abs(n_bins * bin - rep_period) > 1e-9 * rep_period:
        raise ValueError("repetition period must hold a whole number of bins")
    fine = TimeGrid.covering(round_trip_horizon(layout) + bin, bin / oversample)
    n_fine = int(math.ceil(fine.n / oversample)) * oversample
    fine = TimeGrid(fine.dt, n_fine)
    h = impulse_response(layout, DIRECTIONS[0], fine).values.reshape(-1, oversample).mean(axis=1)
    return np.bincount(np.arange(h.size) % n_bins, weights=h, minlength=n_bins)


def otdr_measurement(
    layout: LoopLayout,
    pulse_energy: float,
    rep_rate: float,
    detector: DetectorParams,
    span: float,
    seed,
    bin: float = 10e-9,
) -> tuple[Histogram, TimestampSeries]:
    """Photon-counting OTDR: one pulse per period into the fiber, backscatter onto one SPAD."""
    period = 1.0 / rep_rate
    h = otdr_response(layout, period, bin)
    grid = TimeGrid(bin, h.size)
    prob = h * pulse_energy * bin * detector.detections_per_joule() + detector.dark_hz * bin
    series = spad_detect(prob, grid, detector, span, seed, "D0")
    return fold_histogram(series, period, bin), series


# ---------------------------------------------------------------- classical phase measurements


@dataclass(frozen=True)
class SweepPoint:
    length: float
    sigma2_raw: float  # mean over trials of the extracted-phase variance
    sigma2: float  # same, after floor subtraction when a floor is set
    error: float  # mean std of the per-subset variances
    trials: tuple[float, ...]


def measure_phase_variance(
    model: PhaseNoiseModel,
    length: float,
    seed,
    fs: float = 100e6,
    duration: float = 1e-3,
    n_subsets: int = 10,
    phi: float = 0.5 * math.pi,
    with_floor: bool = True,
) -> VarianceEstimate:
    """Synthesize, detect classically, extract the phase and estimate its variance."""
    s_phase, s_noise = child_seeds(seed, 2)
    grid = TimeGrid.covering(duration, 1.0 / fs)
    phase = synthesize_phase(model, length, grid, s_phase)
    params = InterferenceParams(1.0, 0.0, phi)
    flux = fringe(1.0, phase.values, params, "D0")
    floor = model.c if with_floor else 0.0
    trace = classical_trace(flux, params, floor, s_noise, grid)
    return subset_variance(extract_phase(trace, params), grid.n // n_subsets)


def phase_sweep(
    model: PhaseNoiseModel,
    lengths,
    trials: int,
    seed,
    fs: float = 100e6,
    duration: float = 1e-3,
    n_subsets: int = 10,
    with_floor: bool = True,
) -> list[SweepPoint]:
    seeds = child_seeds(seed, len(lengths))
    rows = []
    for L, s in zip(lengths, seeds):
        ests = [
            measure_phase_variance(model, L, c, fs, duration, n_subsets, with_floor=with_floor)
            for c in s.spawn(trials)
        ]
        raw = [e.sigma2 for e in ests]
        vals = [subtract_floor(v, model.c, model.c_uncertainty) for v in raw] if with_floor else raw
        spread = float(np.mean([e.std_across_subsets for e in ests]))
        rows.append(SweepPoint(float(L), float(np.mean(raw)), float(np.mean(vals)), spread, tuple(vals)))
    return rows


def intensity_psd(
    model: PhaseNoiseModel,
    length: float,
    seed,
    fs: float = 4e6,
    duration: float = 0.1,
    rbw: float = 100.0,
    f_lo: float = 9e3,
    f_hi: float = 1e6,
    phi: float = 0.5 * math.pi,
):
    """PSD of the D0 intensity with phase noise and equipment noise (units of I_max^2/Hz)."""
    s_phase, s_noise = child_seeds(seed, 2)
    grid = TimeGrid.covering(duration, 1.0 / fs)
    phase = synthesize_phase(model, length, grid, s_phase)
    params = InterferenceParams(1.0, 0.0, phi)
    trace = classical_trace(fringe(1.0, phase.values, params, "D0"), params, model.c, s_noise, grid)
    return psd(TimeSeries(grid, trace.values), rbw, f_lo, f_hi)
