"""Scenario documents: JSON schema, defaults, validation and hashing."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .detection import DetectorParams
from .loop import (
    SMF28_ALPHA_DB,
    SMF28_ETA,
    ULL_ALPHA_DB,
    ULL_ETA,
    FiberSegment,
    LoopLayout,
    LossPoint,
    build_layout,
)
from .noise import ULL_MODEL, PhaseNoiseModel, smf28_model, variance_model
from .units import Attenuation, GroupVelocity

SCHEMA_VERSION = 1

FIBERS = {
    "SMF-28": (SMF28_ALPHA_DB, SMF28_ETA),
    "SMF-28-ULL": (ULL_ALPHA_DB, ULL_ETA),
    "ULL": (ULL_ALPHA_DB, ULL_ETA),
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "",
    "layout": {"group_index": 1.468, "segments": [], "loss_points": []},
    "signal": {
        "pulse_rate_hz": 1e7,
        "pulse_width_s": 9e-10,
        "detection_rate_per_pulse": 3.5e-3,
        "peak_power_w": None,
        "burst": {"on_s": 75e-6, "off_s": 1400e-6},
        "design_margin": 20.0,
    },
    "phase_noise": {
        "model": "ULL",
        "a": None,
        "b": None,
        "c": None,
        "c_uncertainty": None,
        "bandwidth_hz": 1e6,
        "sigma2": None,
    },
    "detector": {"efficiency": 0.1, "dark_rate": 7e-7, "dead_time_s": 10e-6, "gate_s": 3e-9},
    "run": {
        "dt_s": 1e-9,
        "modes": ["cw", "pulsed", "burst"],
        "span_s": {"cw": 0.5, "pulsed": 0.5, "burst": 4.0},
        "phi": [0.0, math.pi],
        "known_timing": False,
    },
    "otdr": {
        "fiber": "SMF-28",
        "length_km": 20.0,
        "pulse_width_s": 4.5e-10,
        "rep_rate_hz": 5e3,
        "average_power_dbm": -72.0,
        "span_s": 10.0,
        "bin_s": 1e-8,
    },
    "phase_sweep": {
        "lengths_km": [5, 10, 15, 20, 25, 50, 75, 100, 125],
        "trials": 10,
        "sample_rate_hz": 1e8,
        "duration_s": 1e-3,
        "n_subsets": 10,
        "with_floor": True,
    },
    "psd": {
        "length_km": None,
        "sample_rate_hz": 4e6,
        "duration_s": 0.1,
        "rbw_hz": 100.0,
        "f_lo_hz": 9e3,
        "f_hi_hz": 1e6,
    },
}

MODES = ("cw", "pulsed", "burst")


class ScenarioError(ValueError):
    pass


def _merge(defaults, given, where: str):
    if not isinstance(given, dict):
        raise ScenarioError(f"{where or 'scenario'}: expected an object")
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        path = f"{where}.{key}" if where else key
        if key not in defaults:
            raise ScenarioError(f"{path}: unknown field")
        if isinstance(defaults[key], dict) and key not in ("span_s", "burst"):
            out[key] = _merge(defaults[key], val, path)
        else:
            out[key] = val
    return out


def _num(data, path: str, lo=None, hi=None, lo_open=False, allow_none=False):
    node = data
    for part in path.split("."):
        node = node[part]
    if node is None and allow_none:
        return None
    if isinstance(node, bool) or not isinstance(node, (int, float)) or not math.isfinite(node):
        raise ScenarioError(f"{path}: expected a finite number, got {node!r}")
    if lo is not None and (node <= lo if lo_open else node < lo):
        raise ScenarioError(f"{path}: must be {'>' if lo_open else '>='} {lo}, got {node}")
    if hi is not None and node > hi:
        raise ScenarioError(f"{path}: must be <= {hi}, got {node}")
    return float(node)


@dataclass(frozen=True)
class Scenario:
    data: dict  # fully defaulted document

    @property
    def name(self) -> str:
        return self.data["name"]

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # -- built model objects

    def layout(self) -> LoopLayout:
        lay = self.data["layout"]
        segs = [_segment(s) for s in lay["segments"]]
        pts = [LossPoint(float(p["position_km"]), float(p["loss_db"])) for p in lay["loss_points"]]
        return build_layout(segs, pts, GroupVelocity(float(lay["group_index"])))

    def detector(self) -> DetectorParams:
        d = self.data["detector"]
        return DetectorParams(
            efficiency=d["efficiency"], dark_rate=d["dark_rate"], dead_time=d["dead_time_s"], gate=d["gate_s"]
        )

    def phase_model(self) -> PhaseNoiseModel:
        p = self.data["phase_noise"]
        bw = p["bandwidth_hz"]
        if p["model"] == "ULL":
            m = ULL_MODEL
            return PhaseNoiseModel(
                m.fiber_label,
                m.a if p["a"] is None else p["a"],
                m.b if p["b"] is None else p["b"],
                m.c if p["c"] is None else p["c"],
                m.c_uncertainty if p["c_uncertainty"] is None else p["c_uncertainty"],
                bw,
            )
        if p["model"] == "SMF-28":
            m = smf28_model(p["a"], bw)
            return PhaseNoiseModel(
                m.fiber_label, m.a,
                m.b if p["b"] is None else p["b"],
                m.c if p["c"] is None else p["c"],
                m.c_uncertainty if p["c_uncertainty"] is None else p["c_uncertainty"],
                bw,
            )
        return PhaseNoiseModel("custom", p["a"], p["b"], p["c"] or 0.0, p["c_uncertainty"] or 0.0, bw)

    def loop_variance(self) -> float:
        s2 = self.data["phase_noise"]["sigma2"]
        return float(s2) if s2 is not None else variance_model(self.layout().length, self.phase_model())

    def span(self, mode: str) -> float:
        s = self.data["run"]["span_s"]
        return float(s[mode]) if isinstance(s, dict) else float(s)


def _segment(s: dict) -> FiberSegment:
    fiber = s.get("fiber", "ULL")
    alpha, eta = FIBERS.get(fiber, (None, None))
    alpha = s.get("alpha_db_per_km", alpha)
    eta = s.get("eta_per_s", eta)
    label = "SMF-28-ULL" if fiber == "ULL" else fiber
    return FiberSegment(float(s["length_km"]), Attenuation(float(alpha)), float(eta), label)


def validate(data: dict) -> None:
    if data["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: unsupported version {data['schema_version']!r}")
    lay = data["layout"]
    g = _num(data, "layout.group_index")
    if not 1.0 < g < 2.0:
        raise ScenarioError(f"layout.group_index: must satisfy 1 < n_g < 2, got {g}")
    if not isinstance(lay["segments"], list) or not lay["segments"]:
        raise ScenarioError("layout.segments: at least one fiber segment is required")
    total = 0.0
    for i, s in enumerate(lay["segments"]):
        where = f"layout.segments[{i}]"
        if not isinstance(s, dict):
            raise ScenarioError(f"{where}: expected an object")
        extra = set(s) - {"fiber", "length_km", "alpha_db_per_km", "eta_per_s"}
        if extra:
            raise ScenarioError(f"{where}.{sorted(extra)[0]}: unknown field")
        fiber = s.get("fiber", "ULL")
        if fiber not in FIBERS and ("alpha_db_per_km" not in s or "eta_per_s" not in s):
            raise ScenarioError(f"{where}.fiber: unknown fiber {fiber!r} needs alpha_db_per_km and eta_per_s")
        L = s.get("length_km")
        if isinstance(L, bool) or not isinstance(L, (int, float)) or not L > 0:
            raise ScenarioError(f"{where}.length_km: must be > 0, got {L!r}")
        for key in ("alpha_db_per_km", "eta_per_s"):
            if key in s and (not isinstance(s[key], (int, float)) or s[key] < 0):
                raise ScenarioError(f"{where}.{key}: must be >= 0, got {s[key]!r}")
        total += L
    for i, p in enumerate(lay["loss_points"]):
        where = f"layout.loss_points[{i}]"
        if not isinstance(p, dict) or set(p) != {"position_km", "loss_db"}:
            raise ScenarioError(f"{where}: needs exactly position_km and loss_db")
        if not 0 <= p["position_km"] <= total:
            raise ScenarioError(f"{where}.position_km: outside the loop [0, {total}] km")
        if p["loss_db"] < 0:
            raise ScenarioError(f"{where}.loss_db: must be >= 0")

    sig = data["signal"]
    rate = _num(data, "signal.pulse_rate_hz", 0, lo_open=True)
    width = _num(data, "signal.pulse_width_s", 0, lo_open=True)
    if width >= 1.0 / rate:
        raise ScenarioError("signal.pulse_width_s: pulse does not fit in the pulse period")
    _num(data, "signal.detection_rate_per_pulse", 0, 0.5, lo_open=True, allow_none=True)
    _num(data, "signal.peak_power_w", 0, allow_none=True)
    if sig["detection_rate_per_pulse"] is None and sig["peak_power_w"] is None:
        raise ScenarioError("signal: set detection_rate_per_pulse or peak_power_w")
    _num(data, "signal.design_margin", 1)
    b = sig["burst"]
    if b != "design":
        if not isinstance(b, dict) or set(b) != {"on_s", "off_s"}:
            raise ScenarioError('signal.burst: expected {"on_s", "off_s"} or "design"')
        if not (isinstance(b["on_s"], (int, float)) and b["on_s"] >= 1.0 / rate):
            raise ScenarioError("signal.burst.on_s: must hold at least one pulse period")
        if not (isinstance(b["off_s"], (int, float)) and b["off_s"] >= 0):
            raise ScenarioError("signal.burst.off_s: must be >= 0")

    pn = data["phase_noise"]
    if pn["model"] not in ("ULL", "SMF-28", "custom"):
        raise ScenarioError(f"phase_noise.model: expected ULL, SMF-28 or custom, got {pn['model']!r}")
    if pn["model"] in ("SMF-28", "custom") and pn["a"] is None:
        raise ScenarioError(f"phase_noise.a: required for the {pn['model']} model (no published default)")
    if pn["model"] == "custom" and pn["b"] is None:
        raise ScenarioError("phase_noise.b: required for the custom model")
    for key in ("a", "c", "c_uncertainty", "sigma2"):
        _num(data, f"phase_noise.{key}", 0, allow_none=True)
    _num(data, "phase_noise.b", 0, lo_open=True, allow_none=True)
    _num(data, "phase_noise.bandwidth_hz", 0, lo_open=True)

    _num(data, "detector.efficiency", 0, 1, lo_open=True)
    _num(data, "detector.dark_rate", 0)
    _num(data, "detector.dead_time_s", 0)
    _num(data, "detector.gate_s", 0, lo_open=True)

    run = data["run"]
    dt = _num(data, "run.dt_s", 0, lo_open=True)
    if abs(1.0 / (rate * dt) - round(1.0 / (rate * dt))) > 1e-6:
        raise ScenarioError("run.dt_s: pulse period must be a whole number of samples")
    if not isinstance(run["modes"], list) or not run["modes"] or set(run["modes"]) - set(MODES):
        raise ScenarioError(f"run.modes: expected a non-empty subset of {list(MODES)}")
    spans = run["span_s"]
    if isinstance(spans, dict):
        for m in run["modes"]:
            if m not in spans:
                raise ScenarioError(f"run.span_s.{m}: missing span for mode {m}")
        for m, v in spans.items():
            _num(spans, m, 0, lo_open=True)
    else:
        _num(data, "run.span_s", 0, lo_open=True)
    phi = run["phi"]
    if not (isinstance(phi, list) and len(phi) == 2 and all(isinstance(x, (int, float)) for x in phi)):
        raise ScenarioError("run.phi: expected two static phases [constructive, destructive]")

    if data["otdr"]["fiber"] not in FIBERS:
        raise ScenarioError(f"otdr.fiber: unknown fiber {data['otdr']['fiber']!r}")
    for key in ("length_km", "pulse_width_s", "rep_rate_hz", "span_s", "bin_s"):
        _num(data, f"otdr.{key}", 0, lo_open=True)
    _num(data, "otdr.average_power_dbm")

    sw = data["phase_sweep"]
    if not isinstance(sw["lengths_km"], list) or len(sw["lengths_km"]) < 3:
        raise ScenarioError("phase_sweep.lengths_km: need at least three lengths")
    if any(not isinstance(x, (int, float)) or x <= 0 for x in sw["lengths_km"]):
        raise ScenarioError("phase_sweep.lengths_km: lengths must be > 0")
    for key in ("trials", "n_subsets"):
        v = sw[key]
        if not isinstance(v, int) or v < (2 if key == "n_subsets" else 1):
            raise ScenarioError(f"phase_sweep.{key}: must be a positive integer")
    _num(data, "phase_sweep.sample_rate_hz", 0, lo_open=True)
    _num(data, "phase_sweep.duration_s", 0, lo_open=True)

    _num(data, "psd.length_km", 0, lo_open=True, allow_none=True)
    for key in ("sample_rate_hz", "duration_s", "rbw_hz", "f_hi_hz"):
        _num(data, f"psd.{key}", 0, lo_open=True)
    _num(data, "psd.f_lo_hz", 0)
    if data["psd"]["f_hi_hz"] > 0.5 * data["psd"]["sample_rate_hz"]:
        raise ScenarioError("psd.f_hi_hz: exceeds the Nyquist frequency of psd.sample_rate_hz")


def from_dict(doc: dict) -> Scenario:
    data = _merge(DEFAULTS, doc, "")
    validate(data)
    return Scenario(data)


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return from_dict(doc)


def golden_path() -> Path:
    return Path(__file__).with_name("scenarios") / "golden_200km.json"
