"""Estimators and fits applied to simulated (or measured) detector data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy import optimize, signal

from .detection import DetectorParams, Histogram, InterferenceParams, TimeSeries, TimestampSeries
from .noise import PhaseTrace
from .units import GroupVelocity, attenuation_db

TWO_PI = 2.0 * math.pi


class FitError(RuntimeError):
    pass


class TimingError(RuntimeError):
    pass


@dataclass(frozen=True)
class VarianceEstimate:
    sigma2: float
    n_subsets: int
    subset_size: int
    std_across_subsets: float


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    uncertainties: dict[str, float]
    residual_norm: float
    converged: bool
    covariance: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]


@dataclass(frozen=True)
class BurstTiming:
    """Recovered timing; `offset` is the start of the first pulse of a burst, mod `period`."""

    period: float
    offset: float
    pulse_period: float | None = None
    on_time: float | None = None
    rayleigh_z: float = 0.0

    def __iter__(self):
        yield self.period
        yield self.offset


@dataclass(frozen=True)
class VisibilityResult:
    v_d0: float
    v_d1: float
    i_max: dict[str, float]
    i_min: dict[str, float]
    window: float | None
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def v(self) -> float:
        return 0.5 * (self.v_d0 + self.v_d1)


# ---------------------------------------------------------------- phase


def extract_phase(trace: TimeSeries, params: InterferenceParams) -> PhaseTrace:
    """Invert the fringe equation sample by sample.

    Samples outside [i_min, i_max] are clamped. The two arccos branches and
    2*pi images are resolved by nearest-branch continuation from a linear
    prediction of the previous two samples; the first sample takes the
    branch closest to zero.
    """
    span = params.i_max - params.i_min
    if span <= 0:
        raise ValueError("zero fringe: i_max == i_min")
    y = np.clip(2.0 * (np.asarray(trace.values, float) - params.i_min) / span - 1.0, -1.0, 1.0)
    a = np.arccos(y)
    phi = params.phi
    first = [_wrap(a[0] - phi), _wrap(-a[0] - phi)]
    x0 = min(first, key=abs)
    sign = 1.0 if x0 == first[0] else -1.0
    if a.size > 1:
        margin = min(float(a.min()), math.pi - float(a.max()))
        if margin > 4.0 * float(np.abs(np.diff(a)).max()):
            # never reaches a fringe extreme: one branch throughout
            vals = sign * a - phi
            vals += TWO_PI * round((x0 - vals[0]) / TWO_PI)
            return PhaseTrace(trace.grid, vals, float("nan"))
    out = _continue_branches(a.tolist(), phi, x0)
    return PhaseTrace(trace.grid, np.asarray(out), float("nan"))


def _wrap(x: float) -> float:
    return (x + math.pi) % TWO_PI - math.pi


def _continue_branches(a: list, phi: float, x0: float) -> list:
    out = [x0]
    prev2 = prev = x0
    limit = 0.5 * math.pi
    for n in range(1, len(a)):
        pred = prev if n == 1 else 2.0 * prev - prev2
        best = None
        for c in (a[n] - phi, -a[n] - phi):
            c += TWO_PI * round((pred - c) / TWO_PI)
            if best is None or abs(c - pred) < abs(best - pred):
                best = c
        if abs(best - prev) > limit:
            raise ValueError(f"phase jump > pi/2 between samples {n - 1} and {n}; cannot unwrap")
        out.append(best)
        prev2, prev = prev, best
    return out


def subset_variance(phase, n: int) -> VarianceEstimate:
    """Average sample variance over time-ordered subsets of n points."""
    values = np.asarray(getattr(phase, "values", phase), dtype=float)
    if n < 2:
        raise ValueError("subset size must be >= 2")
    m = values.size // n
    if m < 2:
        raise ValueError(f"need at least 2n = {2 * n} samples, got {values.size}")
    per = values[: m * n].reshape(m, n).var(axis=1, ddof=1)
    return VarianceEstimate(float(per.mean()), m, n, float(per.std(ddof=1)))


def subtract_floor(est, c: float, c_uncertainty: float = 0.0) -> float:
    """Remove the equipment floor using its lower bound c - c_uncertainty."""
    s2 = float(getattr(est, "sigma2", est))
    if s2 < 0:
        raise ValueError("variance estimate must be >= 0")
    return max(s2 - (c - c_uncertainty), 0.0)


# ---------------------------------------------------------------- fits


def fit_power_law(L, y, sigma=None, with_offset: bool = False, max_nfev: int = 2000) -> FitResult:
    """Least-squares fit of y = a * L**b (+ c).

    Starts from b = 3 with `a` matched to the two extreme points. With
    `sigma`, residuals are weighted and uncertainties are absolute;
    otherwise the covariance is scaled by the reduced chi-square.
    """
    L = np.asarray(L, dtype=float)
    y = np.asarray(y, dtype=float)
    if L.shape != y.shape or L.ndim != 1:
        raise ValueError("L and y must be matching 1-D arrays")
    need = 4 if with_offset else 3
    if L.size < need:
        raise ValueError(f"need at least {need} points")
    if np.any(L <= 0):
        raise ValueError("lengths must be > 0")
    if np.unique(L).size < (3 if with_offset else 2):
        raise FitError("degenerate design: not enough distinct lengths")
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("sigma must be finite and > 0")

    lnL = np.log(L)
    i0, i1 = int(np.argmin(L)), int(np.argmax(L))
    b0 = 3.0
    ends = np.abs(y[[i0, i1]]) / L[[i0, i1]] ** b0
    ends = ends[ends > 0]
    la0 = float(np.mean(np.log(ends))) if ends.size else 0.0
    p0 = [la0, b0] + ([0.0] if with_offset else [])

    def model(p):
        out = np.exp(p[0] + p[1] * lnL)
        return out + p[2] if with_offset else out

    def resid(p):
        return (model(p) - y) * w

    def jac(p):
        core = np.exp(p[0] + p[1] * lnL)
        cols = [core, core * lnL] + ([np.ones_like(L)] if with_offset else [])
        return np.column_stack(cols) * w[:, None]

    scale = [1.0, 1.0] + ([max(float(np.abs(y).max()), 1e-300)] if with_offset else [])
    sol = optimize.least_squares(
        resid, p0, jac=jac, method="lm", x_scale=scale, xtol=1e-15, ftol=1e-15, gtol=1e-15,
        max_nfev=max_nfev,
    )
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitError(f"power-law fit did not converge: {sol.message}")
    J = sol.jac
    dof = max(L.size - len(p0), 1)
    chi2 = float(np.sum(sol.fun**2))
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError as exc:
        raise FitError("singular normal matrix") from exc
    if sigma is None:
        cov = cov * chi2 / dof
    a = math.exp(sol.x[0])
    params = {"a": a, "b": float(sol.x[1])}
    unc = {"a": a * math.sqrt(max(cov[0, 0], 0.0)), "b": math.sqrt(max(cov[1, 1], 0.0))}
    if with_offset:
        params["c"] = float(sol.x[2])
        unc["c"] = math.sqrt(max(cov[2, 2], 0.0))
    return FitResult(params, unc, math.sqrt(chi2), True, cov, {"chi2_dof": chi2 / dof})


def psd(trace: TimeSeries, rbw: float = 100.0, f_lo: float = 9e3, f_hi: float = 1e6):
    """Averaged Hann-window periodogram (one-sided density, units^2/Hz).

    The segment length is set so the window's equivalent noise bandwidth
    equals `rbw`.
    """
    fs = 1.0 / trace.grid.dt
    if f_hi > 0.5 * fs * (1 + 1e-12):
        raise ValueError(f"f_hi {f_hi:g} Hz exceeds Nyquist {0.5 * fs:g} Hz")
    nperseg = int(round(1.5 * fs / rbw))
    if trace.values.size < nperseg:
        raise ValueError(
            f"trace span {trace.grid.span:g} s too short for a {rbw:g} Hz resolution bandwidth"
        )
    f, p = signal.welch(
        trace.values, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
        detrend="constant", scaling="density",
    )
    keep = (f >= f_lo) & (f <= f_hi)
    return f[keep], p[keep]


def _dead_fraction(hist: Histogram, dead_time: float) -> np.ndarray:
    """Probability the detector is dead at each bin centre (non-paralyzable).

    At most one recorded event fits in any interval of length dead_time, so
    the dead probability equals the expected number of recorded events in
    the preceding dead_time window.
    """
    if dead_time <= 0:
        return np.zeros_like(hist.counts)
    per_period = hist.counts / hist.n_periods
    edges = np.concatenate([[0.0], np.cumsum(per_period)])
    total = edges[-1]
    grid = np.arange(edges.size) * hist.bin

    def cum(t):
        k = np.floor(t / hist.period)
        r = t - k * hist.period
        return k * total + np.interp(r, grid, edges)

    centres = hist.bin_starts + 0.5 * hist.bin
    return cum(centres) - cum(centres - dead_time)


def _otdr_calibration(hist: Histogram, detector: DetectorParams, pulse_energy: float):
    dead = _dead_fraction(hist, detector.dead_time)
    if np.any(dead >= 1):
        raise FitError("dead-time correction diverges (detector saturated)")
    exposure = hist.n_periods * hist.bin * (1.0 - dead)  # live seconds per bin
    scale = 1.0 / (detector.detections_per_joule() * pulse_energy)
    return exposure, scale


def otdr_corrected_response(hist: Histogram, detector: DetectorParams, pulse_energy: float):
    """Histogram -> backscatter power per launched pulse energy (1/s), with 1-sigma errors.

    Each bin's observed rate is divided by its live fraction (the detector
    is dead with probability equal to the expected number of recorded
    events in the preceding dead time), then dark counts are removed and
    the efficiency and photon energy undone.
    """
    exposure, scale = _otdr_calibration(hist, detector, pulse_energy)
    rate = hist.counts / exposure - detector.dark_hz
    err = np.sqrt(np.maximum(hist.counts, 1.0)) / exposure
    return rate * scale, err * scale


def _fiber_end_bin(h: np.ndarray, err: np.ndarray, n_blocks: int = 200) -> int:
    """First bin of the block preceding the sharpest significant drop of the response."""
    size = max(1, h.size // n_blocks)
    m = h.size // size
    blocks = h[: m * size].reshape(m, size).mean(axis=1)
    berr = np.sqrt((err[: m * size].reshape(m, size) ** 2).sum(axis=1)) / size
    drop = (blocks[:-1] - blocks[1:]) / np.hypot(berr[:-1], berr[1:])
    j = int(np.argmax(drop))
    return j * size


def fit_otdr(
    hist: Histogram,
    detector: DetectorParams,
    pulse_energy: float,
    rep_period: float | None = None,
    group: GroupVelocity | None = None,
    fit_range: tuple[float, float] | None = None,
    n_reweight: int = 6,
) -> FitResult:
    """Fit eta * exp(-alpha v_g t) to a corrected OTDR histogram.

    Counts are corrected for dead time, dark counts and efficiency, then
    converted to backscatter power per unit pulse energy; the model is
    averaged over each bin. Weights come from the model-predicted counts
    and are refreshed `n_reweight` times (weights from the observed
    counts bias sparse histograms). By default the fit stops before the
    fiber end, located as the sharpest drop of the block-averaged
    response. Returns alpha in dB/km and eta in 1/s.
    """
    group = group or GroupVelocity()
    if rep_period is not None and abs(rep_period - hist.period) > 1e-9 * rep_period:
        raise ValueError("histogram period does not match the repetition period")
    h, err = otdr_corrected_response(hist, detector, pulse_energy)
    exposure, scale = _otdr_calibration(hist, detector, pulse_energy)
    t0 = hist.bin_starts
    t1 = t0 + hist.bin
    if fit_range is None:
        sel = np.arange(hist.counts.size) < _fiber_end_bin(h, err)
    else:
        sel = (t0 >= fit_range[0]) & (t1 <= fit_range[1])
    if sel.sum() < 3:
        raise FitError("fewer than three bins in the fit range")
    # single empty bins go negative after dark subtraction; whole blocks should not
    hs, es = h[sel], err[sel]
    size = max(1, hs.size // 50)
    m = hs.size // size
    blk = hs[: m * size].reshape(m, size).mean(axis=1)
    blk_err = np.sqrt((es[: m * size].reshape(m, size) ** 2).sum(axis=1)) / size
    if np.any(blk < -4.0 * blk_err):
        raise FitError("dark-count subtraction leaves significantly negative rates; check the dark rate")
    t0, t1, y, s = t0[sel], t1[sel], h[sel], err[sel]
    expo = exposure[sel]
    width = hist.bin

    pos = y > 0
    slope, icpt = np.polyfit(0.5 * (t0 + t1)[pos], np.log(y[pos]), 1)
    p = np.array([math.exp(icpt), max(-slope, 1e-6 / width)])

    def model(p):
        eta, k = p
        return eta * (np.exp(-k * t0) - np.exp(-k * t1)) / (k * width)

    def jac(p, s):
        eta, k = p
        e0, e1 = np.exp(-k * t0), np.exp(-k * t1)
        base = (e0 - e1) / (k * width)
        dk = eta * ((-t0 * e0 + t1 * e1) / (k * width) - base / k)
        return np.column_stack([base, dk]) / s[:, None]

    for it in range(n_reweight + 1):
        sol = optimize.least_squares(
            lambda q: (model(q) - y) / s, p, jac=lambda q: jac(q, s), method="lm",
            x_scale=np.abs(p), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
        )
        if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
            raise FitError(f"OTDR fit did not converge: {sol.message}")
        p = sol.x
        # expected recorded counts under the current model -> Poisson errors
        mu = (model(p) / scale + detector.dark_hz) * expo
        s = np.sqrt(np.maximum(mu, 1e-3)) / expo * scale
    eta, k = p
    J = jac(p, s)
    cov = np.linalg.inv(J.T @ J)
    conv = 1.0 / group.v_g
    params = {"alpha_db_per_km": float(attenuation_db(k * conv)), "eta": float(eta)}
    unc = {
        "alpha_db_per_km": float(attenuation_db(math.sqrt(cov[1, 1]) * conv)),
        "eta": float(math.sqrt(cov[0, 0])),
    }
    chi2 = float(np.sum(((model(p) - y) / s) ** 2))
    return FitResult(
        params, unc, math.sqrt(chi2), True, cov,
        {"chi2_dof": chi2 / max(y.size - 2, 1), "n_bins": int(y.size), "fit_end": float(t1[-1])},
    )


# ---------------------------------------------------------------- timing


def _merge_times(series) -> tuple[np.ndarray, float]:
    if isinstance(series, TimestampSeries):
        return series.times, series.span
    if isinstance(series, np.ndarray):
        return np.sort(series), float(series.max() - series.min()) if series.size else 0.0
    items = list(series)
    t = np.sort(np.concatenate([s.times for s in items]))
    return t, max(s.span for s in items)


def _fourier_sum(t: np.ndarray, freq: float) -> complex:
    return complex(np.exp(1j * TWO_PI * freq * t).sum())


def _scan_frequency(t: np.ndarray, f0: float, half_range: float, max_bins: int = 1 << 20) -> float:
    """Frequency in [f0 - half_range, f0 + half_range] maximizing |sum_k exp(2 pi i f t_k)|.

    Events are mixed down by f0, binned at 8x the half range and
    transformed with a zero-padded FFT, so every candidate frequency uses
    all events at O(N + bins log bins) cost. If the span needs more than
    `max_bins` bins, a leading subset narrows the range first. The FFT
    peak is polished on the exact sum.
    """
    t_ref = t[0]
    total = max(t[-1] - t_ref, 1e-300)
    f, half = f0, half_range
    while True:
        fs = 8.0 * half
        sub = min(total, max_bins / fs)
        ts = t[t <= t_ref + sub]
        nb = int(math.ceil(sub * fs)) + 1
        w = np.exp(1j * TWO_PI * f * ts)
        idx = np.minimum(((ts - t_ref) * fs).astype(np.int64), nb - 1)
        W = np.bincount(idx, w.real, nb) + 1j * np.bincount(idx, w.imag, nb)
        nfft = sfft.next_fast_len(2 * nb)
        mag = np.abs(sfft.ifft(W, nfft))
        nu = sfft.fftfreq(nfft, d=1.0 / fs)
        mag[np.abs(nu) > half] = -1.0
        k = int(np.argmax(mag))
        f_best = f + nu[k]
        if sub >= total:
            step = fs / nfft
            res = optimize.minimize_scalar(
                lambda u: -abs(_fourier_sum(t, f_best + u * step)),
                bounds=(-1.0, 1.0), method="bounded", options={"xatol": 1e-6},
            )
            return float(f_best + res.x * step)
        f, half = f_best, 4.0 / sub


def recover_burst_timing(
    series,
    nominal_period: float,
    pulse_period: float | None = None,
    on_time: float | None = None,
    pulse_width: float = 0.0,
    rel_tol: float = 0.01,
    false_alarm: float = 1e-6,
    gate: float | None = None,
) -> BurstTiming:
    """Recover burst period and phase from free-running detections.

    The period maximizes |sum_k exp(2 pi i t_k / T)| within rel_tol of
    `nominal_period`; its argument gives the event centroid. With
    `pulse_period`, the pulse-rate harmonic then locks the pulse grid (T is
    assumed to hold a whole number of pulses) and the burst start is found
    by a matched filter of width `on_time` on the folded pulse slots.
    A peak counts only if its Rayleigh statistic z = |sum|^2 / N exceeds
    ln(n_trials / false_alarm), n_trials being the number of independent
    frequencies in the searched range. Only events within `gate` (default
    three pulse widths) of a pulse centre enter the edge search.
    """
    t, span = _merge_times(series)
    if t.size < 100:
        raise TimingError(f"need at least 100 events, got {t.size}")
    duration = max(t[-1] - t[0], nominal_period)

    def z_min(half):
        return math.log(max(2.0 * half * duration, 1.0) / false_alarm)

    half1 = rel_tol / nominal_period
    f1 = _scan_frequency(t, 1.0 / nominal_period, half1)
    T = 1.0 / f1
    s1 = _fourier_sum(t, f1)
    z1 = abs(s1) ** 2 / t.size
    if z1 < z_min(half1):
        raise TimingError(f"no significant periodicity near {nominal_period:g} s (z = {z1:.1f})")
    centroid = (np.angle(s1) / TWO_PI * T) % T

    if pulse_period is None:
        return BurstTiming(T, (centroid - 0.5 * pulse_width) % T, None, on_time, z1)

    M = int(round(T / pulse_period))
    # 1-sigma frequency error of the fundamental from its phase noise
    R1 = abs(s1) / t.size
    sig_f = math.sqrt(12.0) / (TWO_PI * duration * R1 * math.sqrt(2.0 * t.size))
    half_p = max(8.0 * M * sig_f, 4.0 / duration)
    fp = _scan_frequency(t, M * f1, half_p)
    sp = _fourier_sum(t, fp)
    z_p = abs(sp) ** 2 / t.size
    if z_p < z_min(half_p):
        raise TimingError(f"no significant pulse-rate component (z = {z_p:.1f})")
    p = 1.0 / fp
    T = M * p
    pulse_centre = (np.angle(sp) / TWO_PI * p) % p

    if gate is None:
        gate = min(3.0 * pulse_width, p) if pulse_width > 0 else p
    n_on = None if on_time is None else max(1, int(round(on_time / p)))
    # locate the burst, then re-centre the pulse grid on the events inside it
    # (far less background than the whole period) and locate again
    j0, n_on = _burst_edge(t, pulse_centre, p, M, gate, n_on)
    for _ in range(2):
        if n_on >= M:
            break
        rel = (t - pulse_centre - (j0 - 0.5) * p) % T
        inside = t[rel < (n_on + 1) * p]
        if inside.size < 10:
            break
        pulse_centre = (np.angle(_fourier_sum(inside, fp)) / TWO_PI * p) % p
        j0, n_on = _burst_edge(t, pulse_centre, p, M, gate, n_on)
    offset = (pulse_centre + j0 * p - 0.5 * pulse_width) % T
    return BurstTiming(T, offset, p, n_on * p, z1)


def _burst_edge(t, pulse_centre, p, M, gate, n_on):
    """First pulse slot of the burst by a circular matched filter on gated slot counts."""
    u = (t - pulse_centre) / p
    k = np.rint(u)
    # only events near a pulse centre vote for the burst edge
    keep = np.abs(u - k) * p <= 0.5 * gate
    counts = np.bincount(k[keep].astype(np.int64) % M, minlength=M).astype(float)
    if n_on is None:
        n_on = _estimate_on_slots(counts)
    if n_on >= M:
        return 0, M
    ext = np.concatenate([counts, counts[: n_on - 1]]) if n_on > 1 else counts
    c = np.concatenate([[0.0], np.cumsum(ext)])
    return _plateau_centre(c[n_on : n_on + M] - c[:M]), n_on


def _plateau_centre(x: np.ndarray) -> int:
    """Index of the maximum of a circular array; ties resolved to the middle of the longest tied run."""
    top = x >= x.max() - 1e-9
    n = x.size
    if top.all():
        return 0
    # rotate so the array starts just after a non-maximal element
    start = int(np.argmin(top)) + 1
    r = np.roll(top, -start)
    best_len = best_pos = run = 0
    for i, v in enumerate(r):
        run = run + 1 if v else 0
        if run > best_len:
            best_len, best_pos = run, i - run + 1
    return (start + best_pos + (best_len - 1) // 2) % n


def _estimate_on_slots(counts: np.ndarray) -> int:
    M = counts.size
    k = max(1, M // 200)
    sm = np.convolve(np.concatenate([counts[-k:], counts, counts[:k]]), np.ones(2 * k + 1), "same")[k:-k]
    on = sm > 0.5 * sm.max()
    if on.all():
        return M
    # longest circular run of "on" slots
    ext = np.concatenate([on, on])
    best = run = 0
    for v in ext:
        run = run + 1 if v else 0
        best = max(best, run)
    return int(min(best, M))


# ---------------------------------------------------------------- visibility


def visibility(i_max: float, i_min: float) -> float:
    if i_max + i_min <= 0:
        raise ValueError("empty windows: no counts at either setting")
    return (i_max - i_min) / (i_max + i_min)


def visibility_from_variance(sigma2: float) -> float:
    if sigma2 < 0:
        raise ValueError("variance must be >= 0")
    return math.exp(-0.5 * sigma2)


def variance_from_visibility(v: float) -> float:
    if not 0 < v <= 1:
        raise ValueError("visibility must be in (0, 1]")
    return -2.0 * math.log(v)


def qber_from_variance(sigma2: float) -> float:
    if sigma2 < 0:
        raise ValueError("variance must be >= 0")
    return 0.25 * sigma2


def _window_counter(timing: BurstTiming, window: float, pulse_width: float):
    """Start-time bookkeeping for detection windows centred on each pulse."""
    p = timing.pulse_period
    T = timing.period
    if p is None:
        p, n_on = T, 1
    else:
        n_on = max(1, int(round((timing.on_time or T) / p)))
    s0 = timing.offset + 0.5 * pulse_width - 0.5 * window

    def n_starts_upto(x):
        # windows with start <= x, counted from an arbitrary origin
        x = np.asarray(x, dtype=float) - s0
        K = np.floor(x / T)
        r = x - K * T
        return K * n_on + np.minimum(n_on, np.floor(r / p) + 1)

    def in_window(t):
        x = t - s0
        r = np.mod(x, T)
        j = np.floor(r / p)
        return (j < n_on) & ((r - j * p) < window)

    return n_starts_upto, in_window


def window_rate(series: TimestampSeries, timing: BurstTiming | None, window: float | None, pulse_width: float = 0.0):
    """Detections per live window (dead-time corrected) and the raw in-window count.

    A window is live if no recorded event precedes its start by less than
    the dead time; the dead intervals of different events never overlap.
    With window=None the whole record counts and the result is per second.
    """
    t = series.times
    td = series.dead_time
    if window is None:
        live = series.span - t.size * td
        if live <= 0:
            raise ValueError("dead time exceeds the acquisition span")
        return t.size / live, int(t.size)
    n_upto, in_win = _window_counter(timing, window, pulse_width)
    hits = int(np.count_nonzero(in_win(t)))
    total = float(n_upto(series.span - window) - n_upto(-1e-15))
    dead = float(np.sum(n_upto(t + td) - n_upto(t))) if td > 0 else 0.0
    live = total - dead
    if live <= 0:
        raise ValueError("empty windows: no live detection windows")
    return hits / live, hits


def windowed_visibility(
    run_0: Sequence[TimestampSeries],
    run_pi: Sequence[TimestampSeries],
    timing_0: BurstTiming | None,
    timing_pi: BurstTiming | None,
    window: float | None,
    pulse_width: float = 0.0,
) -> VisibilityResult:
    """Per-detector and averaged visibility from a phi = 0 / phi = pi run pair.

    Each run is (D0, D1). D0 peaks at phi = 0 and D1 at phi = pi.
    """
    r0 = {s.detector: window_rate(s, timing_0, window, pulse_width) for s in run_0}
    rp = {s.detector: window_rate(s, timing_pi, window, pulse_width) for s in run_pi}
    i_max = {"D0": r0["D0"][0], "D1": rp["D1"][0]}
    i_min = {"D0": rp["D0"][0], "D1": r0["D1"][0]}
    counts = {"D0@0": r0["D0"][1], "D1@0": r0["D1"][1], "D0@pi": rp["D0"][1], "D1@pi": rp["D1"][1]}
    return VisibilityResult(
        visibility(i_max["D0"], i_min["D0"]),
        visibility(i_max["D1"], i_min["D1"]),
        i_max, i_min, window, counts,
    )
