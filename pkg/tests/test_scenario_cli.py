import copy
import json

import pytest

from sagnacsim.cli import main, run
from sagnacsim.scenario import DEFAULTS, ScenarioError, from_dict, golden_path, load_scenario

MINIMAL = {"layout": {"segments": [{"fiber": "SMF-28", "length_km": 5}]}}


def test_minimal_scenario_gets_defaults():
    sc = from_dict(copy.deepcopy(MINIMAL))
    assert sc.data["detector"] == DEFAULTS["detector"]
    assert sc.layout().length == 5.0
    assert sc.detector().dark_rate == 7e-7


def test_validation_names_the_field():
    doc = copy.deepcopy(MINIMAL)
    doc["detector"] = {"dark_rate": -1e-7}
    with pytest.raises(ScenarioError, match=r"detector\.dark_rate"):
        from_dict(doc)
    with pytest.raises(ScenarioError, match=r"detector\.colour: unknown field"):
        from_dict({**MINIMAL, "detector": {"colour": 1}})
    with pytest.raises(ScenarioError, match="layout.segments"):
        from_dict({})
    with pytest.raises(ScenarioError, match=r"phase_noise\.a"):
        from_dict({**MINIMAL, "phase_noise": {"model": "SMF-28"}})


def test_golden_scenario():
    sc = load_scenario(golden_path())
    assert sc.layout().length == 200.0
    assert sc.data["signal"]["burst"] == {"on_s": 75e-6, "off_s": 1400e-6}
    assert sc.detector().efficiency == 0.1
    assert sc.loop_variance() == pytest.approx(0.06, rel=1e-12)


def test_hash_tracks_content():
    a = from_dict(copy.deepcopy(MINIMAL))
    b = from_dict(copy.deepcopy(MINIMAL))
    assert a.sha256 == b.sha256
    doc = copy.deepcopy(MINIMAL)
    doc["run"] = {"dt_s": 5e-10}
    assert from_dict(doc).sha256 != a.sha256


def test_json_error_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "name": "x",\n  oops\n}\n')
    with pytest.raises(ScenarioError, match=r"bad\.json:3:3"):
        load_scenario(path)


def _small(tmp_path):
    doc = copy.deepcopy(MINIMAL)
    doc["run"] = {"span_s": {"cw": 0.01, "pulsed": 0.01, "burst": 0.3}}
    doc["signal"] = {"burst": {"on_s": 5e-6, "off_s": 32e-6}}
    doc["otdr"] = {"span_s": 0.5, "length_km": 5.0}
    doc["phase_sweep"] = {"lengths_km": [5, 25, 50], "trials": 2}
    doc["psd"] = {"duration_s": 0.02}
    path = tmp_path / "small.json"
    path.write_text(json.dumps(doc))
    return path


def test_optimize_burst_period(tmp_path):
    sc = from_dict(json.loads(_small(tmp_path).read_text()))
    rep = run(sc, "optimize-burst", tmp_path / "ob")
    lay = sc.layout()
    assert rep["results"]["nominal_period_s"] == pytest.approx(1.5 * 5 / lay.v_g)
    plan = rep["results"]["plan"]
    assert plan["on_s"] + plan["off_s"] == pytest.approx(rep["results"]["nominal_period_s"], rel=0.01)
    assert (tmp_path / "ob" / "report.json").exists()
    assert (tmp_path / "ob" / "snr.csv").read_text().startswith("# version:")


@pytest.mark.parametrize("cmd", ["simulate", "fit-otdr", "analyze-phase", "psd", "optimize-burst"])
def test_cli_main_runs(cmd, tmp_path, capsys):
    path = _small(tmp_path)
    out = tmp_path / cmd
    assert main([cmd, "--scenario", str(path), "--out", str(out), "--seed", "3"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["provenance"]["subcommand"] == cmd
    assert report["provenance"]["seed"] == 3
    assert json.loads(capsys.readouterr().out)


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({**MINIMAL, "detector": {"efficiency": 2}}))
    assert main(["simulate", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "detector.efficiency" in capsys.readouterr().err
    assert main(["simulate", "--out", str(tmp_path / "o"), "--seeds", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["nonsense", "--out", str(tmp_path)])
    with pytest.raises(ValueError):
        run(from_dict(copy.deepcopy(MINIMAL)), "nonsense", tmp_path / "x")
