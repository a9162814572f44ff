"""Unit conversions and small value types shared across the package.

Internal units are seconds, watts, kilometres and natural (1/km) power
attenuation. Decibel quantities are converted at the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_KM_PER_S = 299792.458
PLANCK = 6.62607015e-34
C_M_PER_S = 299792458.0
DEFAULT_GROUP_INDEX = 1.468
DEFAULT_WAVELENGTH_M = 1545.3e-9

_DB_TO_NEPER = math.log(10.0) / 10.0


def db_to_linear(x):
    """Power ratio for a value in dB (10**(x/10))."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"dB value must be finite, got {x!r}")
    out = np.power(10.0, arr / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"linear ratio must be positive and finite, got {r!r}")
    out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


def dbm_to_watts(p_dbm):
    return 1e-3 * db_to_linear(p_dbm)


def watts_to_dbm(p_w):
    return linear_to_db(np.asarray(p_w, dtype=float) / 1e-3)


def attenuation_natural(alpha_db_per_km: float) -> float:
    """Convert a dB/km power attenuation to natural units (1/km)."""
    if not math.isfinite(alpha_db_per_km) or alpha_db_per_km < 0:
        raise ValueError(f"attenuation must be finite and >= 0 dB/km, got {alpha_db_per_km}")
    return alpha_db_per_km * _DB_TO_NEPER


def attenuation_db(alpha_natural: float) -> float:
    return alpha_natural / _DB_TO_NEPER


def group_velocity(group_index: float) -> float:
    """Group velocity in km/s for a group index strictly between 1 and 2."""
    if not (1.0 < group_index < 2.0):
        raise ValueError(f"group index must satisfy 1 < n_g < 2, got {group_index}")
    return C_KM_PER_S / group_index


def photon_energy(wavelength_m: float = DEFAULT_WAVELENGTH_M) -> float:
    return PLANCK * C_M_PER_S / wavelength_m


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sample grid t_k = t0 + k*dt, k = 0..n-1."""

    dt: float
    n: int
    t0: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def covering(cls, span: float, dt: float, t0: float = 0.0) -> "TimeGrid":
        """Smallest grid with spacing dt whose span n*dt is at least `span`."""
        n = max(1, int(math.ceil(span / dt - 1e-9)))
        return cls(dt=dt, n=n, t0=t0)

    @property
    def span(self) -> float:
        return self.n * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def samples(self, duration: float, tol: float = 1e-6) -> int:
        """Number of samples in `duration`; raises if not a whole number."""
        k = duration / self.dt
        kr = round(k)
        if kr < 1 or abs(k - kr) > tol * max(1.0, k):
            raise ValueError(
                f"duration {duration:g} s is not a whole number of {self.dt:g} s samples"
            )
        return int(kr)


@dataclass(frozen=True)
class OpticalPower:
    watts: float

    def __post_init__(self):
        if not self.watts >= 0:
            raise ValueError(f"optical power must be >= 0 W, got {self.watts}")

    @classmethod
    def from_dbm(cls, p_dbm: float) -> "OpticalPower":
        return cls(dbm_to_watts(p_dbm))

    @property
    def dbm(self) -> float:
        return watts_to_dbm(self.watts)


@dataclass(frozen=True)
class Attenuation:
    per_length_db: float

    def __post_init__(self):
        attenuation_natural(self.per_length_db)

    @property
    def per_length_natural(self) -> float:
        return attenuation_natural(self.per_length_db)


@dataclass(frozen=True)
class GroupVelocity:
    group_index: float = DEFAULT_GROUP_INDEX

    def __post_init__(self):
        group_velocity(self.group_index)

    @property
    def v_g(self) -> float:
        """km/s"""
        return group_velocity(self.group_index)
