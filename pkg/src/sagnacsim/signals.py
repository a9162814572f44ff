"""Sampled optical input patterns: CW, rectangular pulse trains and bursts."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .units import TimeGrid


@dataclass(frozen=True)
class SignalPattern:
    """One or more whole periods of a launched power waveform x(t).

    `power` is in watts per sample. The grid span is a whole number of
    `period`s, so the pattern may be extended periodically without seams.
    """

    grid: TimeGrid
    power: np.ndarray
    period: float
    pulse_rate: float | None = None  # Hz; nominal slot rate for CW
    pulse_width: float | None = None  # s, after grid quantization
    pulse_energy: float | None = None  # J per pulse (per slot for CW)
    on_time: float | None = None
    off_time: float | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.power.shape != (self.grid.n,):
            raise ValueError("power array does not match the grid")
        if np.any(self.power < 0):
            raise ValueError("optical power must be non-negative")

    @property
    def duty(self) -> float:
        if self.on_time is None or self.off_time is None:
            return 1.0
        return self.on_time / (self.on_time + self.off_time)

    @property
    def period_samples(self) -> int:
        return self.grid.samples(self.period)

    @property
    def energy(self) -> float:
        return float(self.power.sum() * self.grid.dt)

    @property
    def mean_power(self) -> float:
        return float(self.power.mean())

    @property
    def pulse_width_samples(self) -> int:
        if self.pulse_width is None:
            return 0
        return int(round(self.pulse_width / self.grid.dt))

    def pulse_starts(self) -> np.ndarray:
        """Sample indices where (unblanked) pulses start, within one grid span."""
        if self.pulse_width is None or self.pulse_rate is None:
            return np.zeros(0, dtype=int)
        n_p = self.grid.samples(1.0 / self.pulse_rate)
        starts = np.arange(0, self.grid.n, n_p)
        return starts[self.power[starts] > 0]

    def scaled(self, factor: float) -> "SignalPattern":
        e = None if self.pulse_energy is None else self.pulse_energy * factor
        return replace(self, power=self.power * factor, pulse_energy=e)


def make_pulse_train(rate: float, width: float, peak_power: float, grid: TimeGrid) -> SignalPattern:
    """Rectangular pulses every 1/rate seconds starting at sample 0.

    The width is rounded to a whole number of samples (at least one); the
    per-sample power is adjusted so that each pulse carries exactly
    peak_power * width joules.
    """
    if not (rate > 0 and width > 0 and peak_power >= 0):
        raise ValueError("rate and width must be positive and peak power non-negative")
    if width >= 1.0 / rate:
        raise ValueError(f"pulse width {width:g} s does not fit in the pulse period {1 / rate:g} s")
    n_p = grid.samples(1.0 / rate)
    if grid.n % n_p:
        raise ValueError("grid span must hold a whole number of pulse periods")
    n_w = max(1, int(round(width / grid.dt)))
    if n_w >= n_p:
        raise ValueError("pulse width is unresolvable on this grid: it fills the whole pulse period")
    energy = peak_power * width
    power = np.zeros(grid.n)
    phase = np.arange(grid.n) % n_p
    power[phase < n_w] = energy / (n_w * grid.dt)
    notes = ()
    if abs(n_w * grid.dt - width) > 1e-6 * width:
        notes = (f"pulse width {width:g} s quantized to {n_w} sample(s) of {grid.dt:g} s",)
    return SignalPattern(
        grid=grid,
        power=power,
        period=1.0 / rate,
        pulse_rate=rate,
        pulse_width=n_w * grid.dt,
        pulse_energy=energy,
        notes=notes,
    )


def make_cw(power: float, grid: TimeGrid, slot_rate: float | None = None) -> SignalPattern:
    """Constant power; `slot_rate` sets what "per pulse" means for CW light."""
    if power < 0:
        raise ValueError("power must be non-negative")
    e = None if slot_rate is None else power / slot_rate
    return SignalPattern(grid, np.full(grid.n, float(power)), grid.span, pulse_rate=slot_rate, pulse_energy=e)


def apply_burst(pattern: SignalPattern, on_time: float, off_time: float) -> SignalPattern:
    """Blank the pattern outside [k*T, k*T + on_time), T = on_time + off_time."""
    if off_time < 0 or on_time <= 0:
        raise ValueError("on_time must be > 0 and off_time >= 0")
    if off_time == 0:
        return pattern
    grid = pattern.grid
    if on_time + off_time > grid.span * (1 + 1e-12):
        raise ValueError("burst period exceeds the pattern grid span")
    if pattern.pulse_rate is not None and on_time < (1.0 / pattern.pulse_rate) * (1 - 1e-9):
        raise ValueError("burst on-time must hold at least one pulse period")
    n_b = int(round((on_time + off_time) / grid.dt))
    n_on = int(round(on_time / grid.dt))
    notes = list(pattern.notes)
    if abs(n_b * grid.dt - (on_time + off_time)) > 1e-9 * n_b * grid.dt or abs(
        n_on * grid.dt - on_time
    ) > 1e-9 * n_on * grid.dt:
        notes.append(f"burst timing rounded to {n_on}/{n_b} samples")
    if grid.n % n_b:
        raise ValueError("burst period is incommensurate with the pattern grid span")
    mask = (np.arange(grid.n) % n_b) < n_on
    return replace(
        pattern,
        power=np.where(mask, pattern.power, 0.0),
        period=n_b * grid.dt,
        on_time=n_on * grid.dt,
        off_time=(n_b - n_on) * grid.dt,
        notes=tuple(notes),
    )


def burst_pattern(
    rate: float,
    width: float,
    peak_power: float,
    on_time: float,
    off_time: float,
    dt: float = 1e-9,
) -> SignalPattern:
    """Convenience: one burst period of a pulse train on a fresh grid."""
    grid = TimeGrid(dt, int(round((on_time + off_time) / dt)))
    return apply_burst(make_pulse_train(rate, width, peak_power, grid), on_time, off_time)
