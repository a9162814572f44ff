"""Burst timing design: keep signal bursts and their backscatter apart in time."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detection import DetectorParams
from .loop import LoopLayout, total_loss, transit_time
from .noise import BackscatterEngine
from .signals import SignalPattern, make_pulse_train
from .units import TimeGrid, db_to_linear


class InfeasibleBurst(ValueError):
    pass


@dataclass(frozen=True)
class BurstPlan:
    on_time: float  # s
    off_time: float  # s
    n_pulses: int
    worst_backscatter: float  # detections per window per detector, at the worst on-window
    threshold: float
    predicted_snr: float  # 1/W, see `snr`
    margin: float

    @property
    def period(self) -> float:
        return self.on_time + self.off_time

    @property
    def duty(self) -> float:
        return self.on_time / self.period


def optimal_duty_two_user() -> float:
    """Duty maximizing the shared-loop rate for two users alternating on one fiber."""
    return 1.0 / 3.0


def burst_period(layout: LoopLayout) -> float:
    """Nominal burst period 3 L / (2 v_g)."""
    return 1.5 * transit_time(layout)


def snr(layout: LoopLayout, pattern: SignalPattern, t: float, engine: BackscatterEngine | None = None) -> float:
    """Signal transmission over backscatter power at detector time t (1/W).

    Multiply by the launched power to get a dimensionless ratio. Infinite
    where the backscatter vanishes.
    """
    engine = engine or BackscatterEngine(layout, pattern.grid)
    bs = engine.response(pattern.power).power
    k = int(math.floor((t % pattern.grid.span) / pattern.grid.dt)) % pattern.grid.n
    trans = db_to_linear(-total_loss(layout))
    return math.inf if bs[k] <= 0 else trans / bs[k]


def launch_energy_for_rate(layout: LoopLayout, detector: DetectorParams, per_pulse: float) -> float:
    """Pulse energy at the loop input giving `per_pulse` detections at the far port."""
    if not per_pulse > 0:
        raise ValueError("detection rate per pulse must be > 0")
    return per_pulse / (detector.detections_per_joule() * db_to_linear(-total_loss(layout)))


def _window_offsets(detector: DetectorParams, pulse: SignalPattern) -> int:
    """Detection window length in samples: the pulse plus one sample either side."""
    return pulse.pulse_width_samples + 2


def design_burst(
    layout: LoopLayout,
    source_power: float,
    detector: DetectorParams,
    margin: float = 1.0,
    pulse_rate: float = 1e7,
    pulse_width: float = 900e-12,
    dt: float = 1e-9,
) -> BurstPlan:
    """Longest on-time whose backscatter stays below dark_rate / margin.

    The burst period is 3L/(2 v_g) rounded to whole pulse periods. For n
    on-pulses the steady-state backscatter is computed and its expected
    detections per detector, summed over each detection window while the
    signal arrives, must stay below the threshold for every window. The
    worst window grows with n, so n is found by bisection.

    `source_power` is the peak launched power in W.
    """
    if margin <= 0:
        raise ValueError("margin must be > 0")
    if source_power < 0:
        raise ValueError("source power must be >= 0")
    n_p = int(round(1.0 / (pulse_rate * dt)))
    M = max(1, int(round(burst_period(layout) * pulse_rate)))
    grid = TimeGrid(dt, M * n_p)
    train = make_pulse_train(pulse_rate, pulse_width, source_power, grid)
    engine = BackscatterEngine(layout, grid)
    threshold = detector.dark_rate / margin
    n_w = _window_offsets(detector, train)
    shift = int(round(transit_time(layout) / dt))
    scale = dt * detector.detections_per_joule()
    slot = np.arange(grid.n) // n_p

    def worst(n_on: int):
        power = np.where(slot < n_on, train.power, 0.0)
        per_det = 0.5 * engine.response(power).power * scale
        c = np.concatenate([[0.0], np.cumsum(np.concatenate([per_det, per_det[:n_w]]))])
        starts = (np.arange(n_on) * n_p + shift - 1) % grid.n
        sums = c[starts + n_w] - c[starts]
        j = int(np.argmax(sums))
        return float(sums[j]), int(starts[j])

    w1, _ = worst(1)
    if w1 > threshold:
        raise InfeasibleBurst(
            f"a single pulse already gives {w1:.3g} backscatter detections per window "
            f"(threshold {threshold:.3g})"
        )
    if worst(M)[0] <= threshold:
        n_best = M
    else:
        lo, hi = 1, M  # lo feasible, hi infeasible
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if worst(mid)[0] <= threshold:
                lo = mid
            else:
                hi = mid
        n_best = lo
    w, k = worst(n_best)
    power = np.where(slot < n_best, train.power, 0.0)
    bs = engine.response(power).power
    peak_bs = float(bs[k : k + n_w].max()) if k + n_w <= grid.n else float(bs[k])
    trans = db_to_linear(-total_loss(layout))
    predicted = math.inf if peak_bs <= 0 else trans / peak_bs
    on = n_best / pulse_rate
    return BurstPlan(on, M / pulse_rate - on, n_best, w, threshold, predicted, margin)
