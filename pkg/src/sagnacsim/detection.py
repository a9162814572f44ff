"""Detector observables: interference fluxes, SPAD timestamp streams, classical traces."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np

from .noise import BackscatterWaveform, PhaseTrace
from .units import DEFAULT_WAVELENGTH_M, TimeGrid, photon_energy

DetectorId = Literal["D0", "D1"]


@dataclass(frozen=True)
class InterferenceParams:
    """Fringe extremes (W, or any consistent unit) and static phase of the loop."""

    i_max: float
    i_min: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (self.i_max >= self.i_min >= 0):
            raise ValueError(f"need i_max >= i_min >= 0, got {self.i_max}, {self.i_min}")


@dataclass(frozen=True)
class DetectorParams:
    """Free-running SPAD (or classical photodiode) description.

    `dark_rate` is the dark-count probability per pulse detection window of
    duration `gate`; the equivalent rate in Hz is dark_rate / gate.
    """

    efficiency: float = 0.10
    dark_rate: float = 7e-7
    dead_time: float = 10e-6
    gate: float = 3e-9
    mode: Literal["photon-counting", "classical"] = "photon-counting"
    wavelength: float = DEFAULT_WAVELENGTH_M

    def __post_init__(self):
        if not (0 < self.efficiency <= 1):
            raise ValueError(f"detector.efficiency must be in (0, 1], got {self.efficiency}")
        if not self.dark_rate >= 0:
            raise ValueError(f"detector.dark_rate must be >= 0, got {self.dark_rate}")
        if not self.dead_time >= 0:
            raise ValueError(f"detector.dead_time must be >= 0, got {self.dead_time}")
        if not self.gate > 0:
            raise ValueError(f"detector.gate must be > 0, got {self.gate}")

    @property
    def dark_hz(self) -> float:
        return self.dark_rate / self.gate

    @property
    def photon_energy(self) -> float:
        return photon_energy(self.wavelength)

    def detections_per_joule(self) -> float:
        return self.efficiency / self.photon_energy


@dataclass(frozen=True)
class TimestampSeries:
    times: np.ndarray  # s, ascending
    detector: DetectorId
    span: float  # acquisition span, s
    dead_time: float = 0.0

    def __post_init__(self):
        t = self.times
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return int(self.times.size)


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray


@dataclass(frozen=True)
class Histogram:
    bin_starts: np.ndarray
    counts: np.ndarray
    bin: float
    period: float
    n_periods: float  # acquisition span / period


def fringe(envelope, dphi, params: InterferenceParams, port: DetectorId = "D0"):
    """Two-beam interference at either output; D1 is the complementary port."""
    sign = 1.0 if port == "D0" else -1.0
    half = 0.5 * (params.i_max - params.i_min)
    return envelope * (half * (1.0 + sign * np.cos(params.phi + dphi)) + params.i_min)


def interference_flux(signal, phase: PhaseTrace, params: InterferenceParams):
    """Sagnac output fluxes for both ports, scaled by the normalized signal envelope.

    `signal` is a SignalPattern (envelope = power / peak power) or a plain
    array already normalized to 1 at the fringe extremes.
    """
    if hasattr(signal, "power"):
        if signal.grid != phase.grid:
            raise ValueError("signal and phase traces must share a grid")
        peak = signal.power.max()
        env = signal.power / peak if peak > 0 else np.zeros_like(signal.power)
    else:
        env = np.asarray(signal, dtype=float)
        if env.shape != phase.values.shape:
            raise ValueError("signal and phase traces must share a grid")
    return fringe(env, phase.values, params, "D0"), fringe(env, phase.values, params, "D1")


def add_backscatter(fluxes, backscatter: BackscatterWaveform):
    """Backscatter is unpolarized w.r.t. the signal and splits evenly between D0 and D1."""
    d0, d1 = fluxes
    half = 0.5 * backscatter.power
    if np.shape(d0) != half.shape or np.shape(d1) != half.shape:
        raise ValueError("fluxes and backscatter waveform must share a grid")
    return d0 + half, d1 + half


def detection_probability(power_w, dt: float, detector: DetectorParams, include_dark: bool = True):
    """Expected detections per sample for optical power (W) on a grid of spacing dt."""
    p = np.asarray(power_w, dtype=float) * dt * detector.detections_per_joule()
    if include_dark:
        p = p + detector.dark_hz * dt
    return p


def apply_dead_time(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Non-paralyzable dead time: drop events closer than dead_time to the last kept event."""
    if dead_time <= 0 or times.size < 2:
        return times
    if np.all(np.diff(times) >= dead_time):
        return times
    kept = []
    last = -math.inf
    for x in times.tolist():
        if x - last >= dead_time:
            kept.append(x)
            last = x
    return np.asarray(kept)


def spad_detect(
    prob: np.ndarray,
    grid: TimeGrid,
    detector: DetectorParams,
    span: float,
    seed,
    detector_id: DetectorId = "D0",
    thin: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> TimestampSeries:
    """Sample a free-running SPAD click stream.

    `prob` holds expected detections per grid sample (signal plus dark) for
    one period; it is repeated to cover `span`. Events are drawn from the
    piecewise-constant intensity by cumulative inversion, optionally thinned
    by `thin(times, sample_index) -> acceptance probability`, and finally
    filtered by the dead time.
    """
    prob = np.asarray(prob, dtype=float)
    if prob.shape != (grid.n,):
        raise ValueError("probability array does not match the grid")
    if np.any(prob < 0):
        raise ValueError("detection probabilities must be non-negative")
    if prob.max(initial=0.0) > 0.1:
        raise ValueError(
            f"per-sample detection probability {prob.max():.3g} > 0.1; refine the grid"
        )
    rng = np.random.default_rng(seed)
    cum = np.cumsum(prob)
    lam_p = float(cum[-1])
    n_total_samples = int(round(span / grid.dt))
    n_full, rem = divmod(n_total_samples, grid.n)
    total = n_full * lam_p + (float(cum[rem - 1]) if rem else 0.0)
    if total <= 0:
        return TimestampSeries(np.zeros(0), detector_id, span, detector.dead_time)
    n = rng.poisson(total)
    u = np.sort(rng.uniform(0.0, total, n))
    per = np.floor(u / lam_p).astype(np.int64) if lam_p > 0 else np.zeros(n, dtype=np.int64)
    res = u - per * lam_p
    idx = np.minimum(np.searchsorted(cum, res, side="right"), grid.n - 1)
    times = grid.t0 + (per * grid.n + idx + rng.random(n)) * grid.dt
    if thin is not None and n:
        keep = rng.random(n) < thin(times, idx)
        times = times[keep]
    times = np.unique(times)
    times = apply_dead_time(times, detector.dead_time)
    return TimestampSeries(times, detector_id, n_total_samples * grid.dt, detector.dead_time)


@functools.lru_cache(maxsize=64)
def _noise_std_for_floor(i_max: float, i_min: float, phi: float, floor_c: float) -> float:
    from scipy.optimize import brentq

    from .analysis import extract_phase

    z = np.random.default_rng(20240611).standard_normal(20000)
    params = InterferenceParams(i_max, i_min, phi)
    base = fringe(1.0, 0.0, params, "D0")
    grid = TimeGrid(1.0, z.size)

    def excess(log_sigma):
        trace = TimeSeries(grid, base + math.exp(log_sigma) * z)
        try:
            return float(np.var(extract_phase(trace, params).values)) - floor_c
        except ValueError:
            return 1.0  # too noisy to unwrap: certainly above any usable floor

    span = i_max - i_min
    lo, hi = math.log(span * 1e-9), math.log(span * 0.2)
    return math.exp(brentq(excess, lo, hi, xtol=1e-6))


def classical_trace(
    flux: np.ndarray, params: InterferenceParams, floor_c: float, seed, grid: TimeGrid | None = None
) -> TimeSeries:
    """Photodiode trace: noise-free flux plus white equipment noise.

    The noise amplitude is calibrated so that phase extraction on a trace
    with zero fiber phase returns variance `floor_c` (rad^2).
    """
    flux = np.asarray(flux, dtype=float)
    grid = grid or TimeGrid(1.0, flux.size)
    if floor_c <= 0:
        return TimeSeries(grid, flux.copy())
    sigma = _noise_std_for_floor(float(params.i_max), float(params.i_min), float(params.phi), float(floor_c))
    rng = np.random.default_rng(seed)
    return TimeSeries(grid, flux + sigma * rng.standard_normal(flux.size))


def fold_histogram(series: TimestampSeries, period: float, bin: float) -> Histogram:
    """Counts by arrival time modulo `period`."""
    if not (period > bin > 0):
        raise ValueError("need period > bin > 0")
    n_bins = int(math.ceil(period / bin - 1e-9))
    phase = np.mod(series.times, period)
    idx = np.minimum((phase / bin).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    return Histogram(np.arange(n_bins) * bin, counts, bin, period, series.span / period)


def write_timestamps(path: str | Path, series: Sequence[TimestampSeries], header: str = "") -> None:
    """Two-column text: time_seconds,detector (merged and time-ordered)."""
    rows = []
    for s in series:
        rows.extend((t, s.detector) for t in s.times.tolist())
    rows.sort()
    with open(path, "w") as fh:
        if header:
            fh.write(header)
        fh.write("time_seconds,detector\n")
        for t, d in rows:
            fh.write(f"{t:.12e},{d}\n")


def read_timestamps(path: str | Path, span: float, dead_time: float = 0.0) -> dict[str, TimestampSeries]:
    times: dict[str, list[float]] = {"D0": [], "D1": []}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("time_seconds") or not line.strip():
                continue
            t, d = line.strip().split(",")
            times[d].append(float(t))
    return {d: TimestampSeries(np.asarray(v), d, span, dead_time) for d, v in times.items()}


def write_histogram(path: str | Path, hist: Histogram, header: str = "") -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(header)
        fh.write("bin_start_seconds,count\n")
        for b, c in zip(hist.bin_starts.tolist(), hist.counts.tolist()):
            fh.write(f"{b:.12e},{int(c)}\n")
