"""Backscatter power waveforms and stochastic phase-noise realizations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .loop import DIRECTIONS, LoopLayout, impulse_response, round_trip_horizon
from .signals import SignalPattern
from .units import TimeGrid


@dataclass(frozen=True)
class BackscatterWaveform:
    grid: TimeGrid
    cw: np.ndarray
    ccw: np.ndarray

    @property
    def power(self) -> np.ndarray:
        return self.cw + self.ccw


class BackscatterEngine:
    """Periodic convolution of launched patterns with a loop's impulse responses.

    The responses are folded modulo the pattern period, which is exact for a
    periodic input: every preceding period's tail lands in the fold. Each
    propagation direction receives half the launched power.
    """

    def __init__(self, layout: LoopLayout, grid: TimeGrid):
        self.layout = layout
        self.grid = grid
        n = grid.n
        h_grid = TimeGrid.covering(round_trip_horizon(layout) + grid.dt, grid.dt)
        self._spectra = {}
        for d in DIRECTIONS:
            h = impulse_response(layout, d, h_grid).values
            folded = np.bincount(np.arange(h.size) % n, weights=h, minlength=n)
            self._spectra[d] = sfft.rfft(folded)

    def response(self, power: np.ndarray) -> BackscatterWaveform:
        if power.shape != (self.grid.n,):
            raise ValueError("pattern and impulse-response grids do not match")
        energy = sfft.rfft(0.5 * power * self.grid.dt)
        out = {}
        for d, H in self._spectra.items():
            y = sfft.irfft(energy * H, n=self.grid.n)
            out[d] = np.maximum(y, 0.0)
        return BackscatterWaveform(self.grid, out["cw"], out["ccw"])


def backscatter_response(layout: LoopLayout, pattern: SignalPattern) -> BackscatterWaveform:
    """Steady-state backscatter power (W) returned to the beam splitter."""
    n_per = pattern.grid.span / pattern.period
    if abs(n_per - round(n_per)) > 1e-9:
        raise ValueError("pattern grid does not hold a whole number of periods")
    return BackscatterEngine(layout, pattern.grid).response(pattern.power)


@dataclass(frozen=True)
class PhaseNoiseModel:
    """Residual Sagnac phase noise: variance a * L**b (rad^2, L in km)."""

    fiber_label: str
    a: float
    b: float
    c: float = 0.0  # equipment floor, rad^2
    c_uncertainty: float = 0.0
    bandwidth: float = 1e6  # Hz

    def __post_init__(self):
        if not (self.a >= 0 and self.b > 0 and self.c >= 0 and self.bandwidth > 0):
            raise ValueError("phase-noise model needs a >= 0, b > 0, c >= 0, bandwidth > 0")


# Anchored on 0.06 rad^2 at 200 km with the fitted ULL exponent 2.6.
ULL_MODEL = PhaseNoiseModel("SMF-28-ULL", a=0.06 / 200.0**2.6, b=2.6, c=0.0073, c_uncertainty=0.0006)


def smf28_model(a: float, bandwidth: float = 1e6) -> PhaseNoiseModel:
    """SMF-28 model; the amplitude has no published default and must be given."""
    return PhaseNoiseModel("SMF-28", a=a, b=3.1, c=0.0072, c_uncertainty=0.0003, bandwidth=bandwidth)


def variance_model(L: float, model: PhaseNoiseModel) -> float:
    if L < 0:
        raise ValueError(f"loop length must be >= 0 km, got {L}")
    return model.a * L**model.b


@dataclass(frozen=True)
class PhaseTrace:
    grid: TimeGrid
    values: np.ndarray  # rad
    target_variance: float

    def at(self, t) -> np.ndarray:
        """Zero-order-hold lookup at arbitrary times (keeps the marginal law exact)."""
        # the small guard keeps t = t0 + k*dt on sample k despite rounding
        k = np.floor((np.asarray(t) - self.grid.t0) / self.grid.dt + 1e-9).astype(np.int64)
        return self.values[np.clip(k, 0, self.grid.n - 1)]


def band_limited_noise(variance: float, bandwidth: float, grid: TimeGrid, rng) -> np.ndarray:
    """Gaussian noise with a flat spectrum on [0, bandwidth] and exact ensemble variance."""
    n = grid.n
    nyquist = 0.5 / grid.dt
    if bandwidth > nyquist * (1 + 1e-12):
        raise ValueError(f"bandwidth {bandwidth:g} Hz exceeds the grid Nyquist {nyquist:g} Hz")
    if variance == 0:
        return np.zeros(n)
    n_bins = n // 2 + 1
    kmax = min(int(math.floor(bandwidth * n * grid.dt + 1e-9)), n_bins - 1)
    spec = np.zeros(n_bins, dtype=complex)
    spec[0] = rng.standard_normal() * math.sqrt(n)
    re = rng.standard_normal(kmax)
    im = rng.standard_normal(kmax)
    spec[1 : kmax + 1] = (re + 1j * im) * math.sqrt(n / 2)
    unit_var = 1.0 + 2.0 * kmax
    if n % 2 == 0 and kmax == n_bins - 1:
        # the Nyquist bin of a real signal is real
        spec[-1] = rng.standard_normal() * math.sqrt(n)
        unit_var = 1.0 + 2.0 * (kmax - 1) + 1.0
    # irfft of this spectrum has per-sample variance unit_var / n
    return sfft.irfft(spec, n=n) * math.sqrt(variance * n / unit_var)


def synthesize_phase(model: PhaseNoiseModel, L: float, grid: TimeGrid, seed) -> PhaseTrace:
    """Band-limited white Gaussian phase noise scaled to the model variance at length L."""
    if not L > 0:
        raise ValueError(f"loop length must be > 0 km, got {L}")
    return synthesize_phase_variance(variance_model(L, model), model.bandwidth, grid, seed)


def synthesize_phase_variance(variance: float, bandwidth: float, grid: TimeGrid, seed) -> PhaseTrace:
    corr_time = 1.0 / (2.0 * bandwidth)
    if grid.span < 10.0 * corr_time:
        raise ValueError("grid span must cover at least ten correlation times")
    rng = np.random.default_rng(seed)
    return PhaseTrace(grid, band_limited_noise(variance, bandwidth, grid, rng), variance)


@dataclass(frozen=True)
class ChunkedPhase:
    """Band-limited phase noise generated on demand in independent chunks.

    Each chunk of `chunk_n` samples is an independent circular realization
    seeded from (seed, chunk index), so lookups over long spans need memory
    for one chunk only and give the same values in any order. Correlation
    is cut at chunk boundaries; chunks span many correlation times.
    """

    variance: float
    bandwidth: float
    dt: float
    seed: np.random.SeedSequence
    chunk_n: int = 1 << 14

    def __post_init__(self):
        if self.chunk_n * self.dt < 10.0 / (2.0 * self.bandwidth):
            raise ValueError("chunk must cover at least ten correlation times")

    def chunk(self, j: int) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed.entropy, spawn_key=tuple(self.seed.spawn_key) + (int(j),))
        grid = TimeGrid(self.dt, self.chunk_n)
        return band_limited_noise(self.variance, self.bandwidth, grid, np.random.default_rng(ss))

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.floor(t / self.dt + 1e-9).astype(np.int64)
        j = k // self.chunk_n
        out = np.empty(t.shape)
        order = np.argsort(j, kind="stable")
        js, starts = np.unique(j[order], return_index=True)
        bounds = np.append(starts, order.size)
        for jj, a, b in zip(js, bounds[:-1], bounds[1:]):
            sel = order[a:b]
            out[sel] = self.chunk(jj)[k[sel] - jj * self.chunk_n]
        return out
