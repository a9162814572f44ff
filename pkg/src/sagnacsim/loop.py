"""Sagnac ring layout and directional Rayleigh backscatter impulse responses."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .units import Attenuation, GroupVelocity, TimeGrid

Direction = Literal["cw", "ccw"]
DIRECTIONS: tuple[Direction, Direction] = ("cw", "ccw")

# Backscatter coefficients and attenuation measured by OTDR at 1550 nm.
SMF28_ALPHA_DB = 0.202
SMF28_ETA = 8.0
ULL_ALPHA_DB = 0.159
ULL_ETA = 6.54


@dataclass(frozen=True)
class FiberSegment:
    length: float  # km
    alpha: Attenuation
    eta: float  # 1/s
    fiber_label: str = ""

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"segment length must be > 0 km, got {self.length}")
        if not self.eta >= 0:
            raise ValueError(f"backscatter coefficient must be >= 0, got {self.eta}")
        if not isinstance(self.alpha, Attenuation):
            object.__setattr__(self, "alpha", Attenuation(float(self.alpha)))

    @property
    def loss_db(self) -> float:
        return self.length * self.alpha.per_length_db


def smf28(length: float) -> FiberSegment:
    return FiberSegment(length, Attenuation(SMF28_ALPHA_DB), SMF28_ETA, "SMF-28")


def ull(length: float) -> FiberSegment:
    return FiberSegment(length, Attenuation(ULL_ALPHA_DB), ULL_ETA, "SMF-28-ULL")


@dataclass(frozen=True)
class LossPoint:
    position: float  # km, clockwise from the beam splitter port
    loss_db: float

    def __post_init__(self):
        if not self.loss_db >= 0:
            raise ValueError(f"loss point loss must be >= 0 dB, got {self.loss_db}")


@dataclass(frozen=True)
class LoopLayout:
    segments: tuple[FiberSegment, ...]
    loss_points: tuple[LossPoint, ...] = ()
    group: GroupVelocity = field(default_factory=GroupVelocity)

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ValueError("a loop needs at least one fiber segment")
        L = self.length
        for lp in self.loss_points:
            if not (0.0 <= lp.position <= L):
                raise ValueError(
                    f"loss point at {lp.position} km lies outside the loop [0, {L}] km"
                )

    @property
    def length(self) -> float:
        return float(sum(s.length for s in self.segments))

    @property
    def v_g(self) -> float:
        return self.group.v_g


def build_layout(
    segments: Sequence[FiberSegment],
    loss_points: Sequence[LossPoint] = (),
    group: GroupVelocity | None = None,
) -> LoopLayout:
    """Assemble a loop; loss points are sorted by clockwise position."""
    pts = tuple(sorted(loss_points, key=lambda p: p.position))
    return LoopLayout(tuple(segments), pts, group or GroupVelocity())


def total_loss(layout: LoopLayout) -> float:
    """One-pass loop loss in dB (fiber plus discrete components)."""
    return float(
        sum(s.loss_db for s in layout.segments) + sum(p.loss_db for p in layout.loss_points)
    )


def transit_time(layout: LoopLayout) -> float:
    """One-way transit time around the loop, seconds."""
    return layout.length / layout.v_g


def round_trip_horizon(layout: LoopLayout) -> float:
    return 2.0 * transit_time(layout)


def _directional_profile(layout: LoopLayout, direction: Direction):
    if direction == "cw":
        segs = list(layout.segments)
        pts = [(p.position, p.loss_db) for p in layout.loss_points]
    elif direction == "ccw":
        L = layout.length
        segs = list(reversed(layout.segments))
        pts = sorted((L - p.position, p.loss_db) for p in layout.loss_points)
    else:
        raise ValueError(f"direction must be 'cw' or 'ccw', got {direction!r}")
    ends = np.cumsum([s.length for s in segs])
    starts = np.concatenate([[0.0], ends[:-1]])
    alphas = np.array([s.alpha.per_length_natural for s in segs])
    etas = np.array([s.eta for s in segs])
    return starts, ends, alphas, etas, pts


def round_trip_transmittance(layout: LoopLayout, direction: Direction, z) -> np.ndarray:
    """Squared one-way power transmittance from the entry port to arc distance z."""
    starts, ends, alphas, _, pts = _directional_profile(layout, direction)
    z = np.asarray(z, dtype=float)
    # fiber attenuation integrated over [0, z]
    covered = np.clip(z[..., None] - starts, 0.0, ends - starts)
    neper = covered @ alphas
    db = np.zeros_like(z)
    for pos, loss in pts:
        db = db + np.where(z > pos, loss, 0.0)
    return np.exp(-2.0 * neper) * np.power(10.0, -2.0 * db / 10.0)


def backscatter_density(layout: LoopLayout, direction: Direction, z) -> np.ndarray:
    """eta of the segment holding z; the segment ending exactly at L owns z = L."""
    starts, ends, _, etas, _ = _directional_profile(layout, direction)
    z = np.asarray(z, dtype=float)
    idx = np.searchsorted(ends, z, side="right")
    idx = np.minimum(idx, len(etas) - 1)
    return etas[idx]


@dataclass(frozen=True)
class ImpulseResponse:
    grid: TimeGrid
    values: np.ndarray  # 1/s, backscatter power per unit launched pulse energy
    direction: Direction


def impulse_response(layout: LoopLayout, direction: Direction, grid: TimeGrid) -> ImpulseResponse:
    """Sample the directional backscatter response eta(z) * A(z)**2 at t = 2z/v_g.

    The grid must start at t = 0 and reach the round-trip horizon 2L/v_g;
    the response is zero beyond the horizon (no recirculation).
    """
    horizon = round_trip_horizon(layout)
    if grid.t0 != 0.0:
        raise ValueError("impulse-response grid must start at t = 0")
    if grid.span < horizon * (1 - 1e-12):
        raise ValueError(
            f"grid span {grid.span:.6g} s is shorter than the round-trip horizon {horizon:.6g} s"
        )
    t = grid.times
    z = 0.5 * layout.v_g * t
    inside = z <= layout.length
    zc = np.where(inside, z, 0.0)
    h = backscatter_density(layout, direction, zc) * round_trip_transmittance(layout, direction, zc)
    h = np.where(inside, h, 0.0)
    return ImpulseResponse(grid, h, direction)
