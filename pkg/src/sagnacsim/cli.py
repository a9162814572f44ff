"""Command-line entry point: one subcommand per simulated experiment."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FitError,
    fit_otdr,
    fit_power_law,
    otdr_corrected_response,
    qber_from_variance,
    visibility_from_variance,
)
from .burst import burst_period, design_burst, launch_energy_for_rate, optimal_duty_two_user
from .detection import fold_histogram, write_timestamps
from .experiments import intensity_psd, otdr_measurement, phase_sweep, port_model, visibility_run
from .loop import FiberSegment, build_layout, total_loss, transit_time
from .noise import BackscatterEngine
from .scenario import FIBERS, Scenario, ScenarioError, golden_path, load_scenario
from .signals import burst_pattern, make_cw, make_pulse_train
from .units import Attenuation, TimeGrid, db_to_linear, dbm_to_watts

log = logging.getLogger("sagnacsim")

SUBCOMMANDS = ("simulate", "analyze-phase", "fit-otdr", "optimize-burst", "psd")


class Context:
    """Output directory, seeds and provenance shared by one invocation."""

    def __init__(self, scenario: Scenario, command: str, out: Path, seed: int, n_seeds: int):
        self.scenario = scenario
        self.command = command
        self.out = out
        self.seed = seed
        self.n_seeds = n_seeds
        out.mkdir(parents=True, exist_ok=True)

    def seeds(self, *tag: int):
        for i in range(self.n_seeds):
            yield i, np.random.SeedSequence([self.seed, i, *tag])

    @property
    def provenance(self) -> dict:
        return {
            "version": __version__,
            "subcommand": self.command,
            "scenario_sha256": self.scenario.sha256,
            "seed": self.seed,
            "n_seeds": self.n_seeds,
        }

    def header(self) -> str:
        return "".join(f"# {k}: {v}\n" for k, v in self.provenance.items())

    def write_csv(self, name: str, columns, rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(self.header())
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
        return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------- subcommands


def _pulse_energy(sc: Scenario, layout, det) -> float:
    sig = sc.data["signal"]
    if sig["peak_power_w"] is not None:
        return sig["peak_power_w"] * sig["pulse_width_s"]
    return launch_energy_for_rate(layout, det, sig["detection_rate_per_pulse"])


def _burst_plan(sc: Scenario, layout, det, energy):
    sig = sc.data["signal"]
    return design_burst(
        layout, energy / sig["pulse_width_s"], det, sig["design_margin"],
        sig["pulse_rate_hz"], sig["pulse_width_s"], sc.data["run"]["dt_s"],
    )


def _patterns(sc: Scenario, layout, det, energy):
    sig = sc.data["signal"]
    rate, width, dt = sig["pulse_rate_hz"], sig["pulse_width_s"], sc.data["run"]["dt_s"]
    peak = energy / width
    slot = TimeGrid(dt, int(round(1.0 / (rate * dt))))
    plan = None
    if sig["burst"] == "design":
        plan = _burst_plan(sc, layout, det, energy)
        on, off = plan.on_time, plan.off_time
    else:
        on, off = sig["burst"]["on_s"], sig["burst"]["off_s"]
    pats = {
        "cw": lambda: make_cw(energy * rate, slot, rate),
        "pulsed": lambda: make_pulse_train(rate, width, peak, slot),
        "burst": lambda: burst_pattern(rate, width, peak, on, off, dt),
    }
    return pats, plan, (on, off)


def cmd_simulate(ctx: Context) -> dict:
    sc = ctx.scenario
    layout, det = sc.layout(), sc.detector()
    energy = _pulse_energy(sc, layout, det)
    sigma2 = sc.loop_variance()
    bw = sc.data["phase_noise"]["bandwidth_hz"]
    phis = tuple(sc.data["run"]["phi"])
    pats, plan, (on, off) = _patterns(sc, layout, det, energy)
    rows, summary = [], {}
    for mi, mode in enumerate(sc.data["run"]["modes"]):
        pattern = pats[mode]()
        model = port_model(layout, pattern, det)
        vs = []
        for i, ss in ctx.seeds(mi):
            log.info("simulate %s run %d", mode, i)
            r = visibility_run(
                model, sc.span(mode), ss, sigma2, bw, sc.data["run"]["known_timing"], phis=phis
            )
            res = r.result
            err = ""
            if r.timing_0 is not None:
                p = r.timing_0.period
                d = (r.timing_0.offset - r.truth_offset) % p
                err = min(d, p - d)
            rows.append(
                [mode, i, res.v_d0, res.v_d1, res.v, res.i_max["D0"], res.i_min["D0"],
                 res.i_max["D1"], res.i_min["D1"], sum(res.counts.values()), err]
            )
            vs.append(res.v)
            if i == 0:
                tag = mode
                write_timestamps(ctx.out / f"timestamps_{tag}_phi0.txt", r.series_0, ctx.header())
                write_timestamps(ctx.out / f"timestamps_{tag}_phipi.txt", r.series_pi, ctx.header())
                if mode == "burst":
                    _write_counts(ctx, r, pattern.period)
        summary[mode] = {"visibility_mean": float(np.mean(vs)), "visibility_runs": vs}
    ctx.write_csv(
        "visibility.csv",
        ["mode", "run", "v_d0", "v_d1", "v_avg", "imax_d0", "imin_d0", "imax_d1", "imin_d1",
         "window_counts", "timing_offset_error_s"],
        rows,
    )
    return {
        "loop_length_km": layout.length,
        "total_loss_db": total_loss(layout),
        "launch_pulse_energy_j": energy,
        "phase_variance_rad2": sigma2,
        "predicted_visibility": visibility_from_variance(sigma2),
        "qber": qber_from_variance(sigma2),
        "burst": {"on_s": on, "off_s": off, "duty": on / (on + off)},
        "burst_plan": None if plan is None else _plan_dict(plan),
        "modes": summary,
    }


def _write_counts(ctx: Context, run, period: float, bin: float = 1e-6):
    hists = [fold_histogram(s, period, bin) for s in run.series_0]
    rows = zip(hists[0].bin_starts, hists[0].counts.astype(int), hists[1].counts.astype(int))
    ctx.write_csv("counts_vs_time.csv", ["time_s", "d0_counts", "d1_counts"], rows)


def _plan_dict(plan) -> dict:
    return {
        "on_s": plan.on_time,
        "off_s": plan.off_time,
        "period_s": plan.period,
        "duty": plan.duty,
        "n_pulses": plan.n_pulses,
        "worst_window_backscatter_per_detector": plan.worst_backscatter,
        "threshold": plan.threshold,
        "predicted_snr_per_w": plan.predicted_snr,
        "margin": plan.margin,
    }


def cmd_optimize_burst(ctx: Context) -> dict:
    sc = ctx.scenario
    layout, det = sc.layout(), sc.detector()
    energy = _pulse_energy(sc, layout, det)
    plan = _burst_plan(sc, layout, det, energy)
    sig = sc.data["signal"]
    dt = sc.data["run"]["dt_s"]
    pat = burst_pattern(sig["pulse_rate_hz"], sig["pulse_width_s"], energy / sig["pulse_width_s"],
                        plan.on_time, plan.off_time, dt)
    cw = make_cw(pat.mean_power, pat.grid, sig["pulse_rate_hz"])
    engine = BackscatterEngine(layout, pat.grid)
    trans = db_to_linear(-total_loss(layout))
    step = max(1, int(round(1e-6 / dt)))
    bs_b = engine.response(pat.power).power[::step]
    bs_c = engine.response(cw.power).power[::step]
    t = pat.grid.times[::step]
    with np.errstate(divide="ignore"):
        rows = zip(t, trans / bs_b, trans / bs_c)
    ctx.write_csv("snr.csv", ["time_s", "snr_burst_per_w", "snr_cw_same_mean_power_per_w"], rows)
    return {
        "nominal_period_s": burst_period(layout),
        "transit_time_s": transit_time(layout),
        "launch_pulse_energy_j": energy,
        "plan": _plan_dict(plan),
        "optimal_duty_two_user": optimal_duty_two_user(),
    }


def cmd_analyze_phase(ctx: Context) -> dict:
    sc = ctx.scenario
    model = sc.phase_model()
    sw = sc.data["phase_sweep"]
    rows, fits = [], []
    for i, ss in ctx.seeds():
        pts = phase_sweep(model, sw["lengths_km"], sw["trials"], ss, sw["sample_rate_hz"],
                          sw["duration_s"], sw["n_subsets"], sw["with_floor"])
        for p in pts:
            rows.append([i, p.length, p.sigma2_raw, p.sigma2, p.error,
                         visibility_from_variance(p.sigma2), qber_from_variance(p.sigma2)])
        L = [p.length for p in pts]
        err = [max(p.error, 1e-12) for p in pts]
        entry = {"run": i}
        for key, y, offset in (("raw_with_offset", [p.sigma2_raw for p in pts], True),
                               ("power_law", [p.sigma2 for p in pts], False)):
            try:
                f = fit_power_law(L, y, err, with_offset=offset)
                entry[key] = {**f.params, **{f"{k}_err": v for k, v in f.uncertainties.items()}}
            except (FitError, ValueError) as exc:
                entry[key] = {"error": str(exc)}
        fits.append(entry)
    ctx.write_csv("variance_vs_length.csv",
                  ["run", "length_km", "sigma2_raw_rad2", "sigma2_rad2", "error_rad2", "visibility", "qber"],
                  rows)
    return {
        "model": {"a": model.a, "b": model.b, "c": model.c, "c_uncertainty": model.c_uncertainty,
                  "bandwidth_hz": model.bandwidth},
        "floor_subtracted": sw["with_floor"],
        "fits": fits,
    }


def cmd_fit_otdr(ctx: Context) -> dict:
    sc = ctx.scenario
    o = sc.data["otdr"]
    det = sc.detector()
    alpha, eta = FIBERS[o["fiber"]]
    seg = FiberSegment(o["length_km"], Attenuation(alpha), eta, o["fiber"])
    layout = build_layout([seg], group=sc.layout().group)
    energy = dbm_to_watts(o["average_power_dbm"]) / o["rep_rate_hz"]
    rows, fits = [], []
    for i, ss in ctx.seeds():
        hist, series = otdr_measurement(layout, energy, o["rep_rate_hz"], det, o["span_s"], ss, o["bin_s"])
        f = fit_otdr(hist, det, energy, 1.0 / o["rep_rate_hz"], layout.group)
        fits.append({"run": i, "events": len(series), **f.params,
                     **{f"{k}_err": v for k, v in f.uncertainties.items()}, **f.extras})
        if i == 0:
            corr, err = otdr_corrected_response(hist, det, energy)
            rows = zip(hist.bin_starts, hist.counts.astype(int), corr, err)
    ctx.write_csv("otdr_histogram.csv", ["bin_start_s", "counts", "response_per_s", "error_per_s"], rows)
    return {
        "truth": {"alpha_db_per_km": alpha, "eta": eta},
        "pulse_energy_j": energy,
        "fits": fits,
    }


def cmd_psd(ctx: Context) -> dict:
    sc = ctx.scenario
    p = sc.data["psd"]
    L = p["length_km"] or sc.layout().length
    model = sc.phase_model()
    out = []
    rows = []
    for i, ss in ctx.seeds():
        f, s = intensity_psd(model, L, ss, p["sample_rate_hz"], p["duration_s"], p["rbw_hz"],
                             p["f_lo_hz"], p["f_hi_hz"])
        rows.extend(zip([i] * f.size, f, s))
        out.append({"run": i, "mean_psd_per_hz": float(s.mean()),
                    "relative_spread": float(s.std() / s.mean())})
    ctx.write_csv("psd.csv", ["run", "frequency_hz", "psd_per_hz"], rows)
    return {"length_km": L, "rbw_hz": p["rbw_hz"], "band_hz": [p["f_lo_hz"], p["f_hi_hz"]], "runs": out}


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze-phase": cmd_analyze_phase,
    "fit-otdr": cmd_fit_otdr,
    "optimize-burst": cmd_optimize_burst,
    "psd": cmd_psd,
}


def run(scenario: Scenario, subcommand: str, out: str | Path, seed: int = 0, n_seeds: int = 1) -> dict:
    """Execute one subcommand and write report.json plus its CSV tables into `out`."""
    if subcommand not in COMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    ctx = Context(scenario, subcommand, Path(out), seed, n_seeds)
    try:
        results = COMMANDS[subcommand](ctx)
    except (ValueError, RuntimeError) as exc:
        raise type(exc)(f"{subcommand} on scenario {scenario.name or scenario.sha256[:12]}: {exc}") from exc
    report = {"provenance": ctx.provenance, "scenario": scenario.data, "results": results}
    with open(ctx.out / "report.json", "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sagnacsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", type=Path, default=None,
                       help="scenario JSON (default: the bundled 200 km scenario)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--seeds", type=int, default=1, help="number of independent runs")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.seed < 0 or args.seeds < 1:
        print("error: --seed must be >= 0 and --seeds >= 1", file=sys.stderr)
        return 2
    try:
        scenario = load_scenario(args.scenario or golden_path())
        report = run(scenario, args.command, args.out, args.seed, args.seeds)
    except (ScenarioError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(_jsonable(report["results"]), indent=2, sort_keys=True)[:2000])
    return 0


if __name__ == "__main__":
    sys.exit(main())
