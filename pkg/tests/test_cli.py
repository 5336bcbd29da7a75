"""Command-line workflow tests, run in process through main()."""

import json
import subprocess

import numpy as np
import pytest

from besscap import validate as validate_mod
from besscap.cli import main
from besscap.series import read_canonical

START = np.datetime64("2024-01-01T00:00:00")


def _write_raw_pair(tmp_path, n=12):
    times = [str(START + np.timedelta64(10 * k, "m")) for k in range(n)]
    wind = tmp_path / "wind.csv"
    rows = ["timestamp,speed_mps"]
    rows += [f"{t},{7.0 + 3.0 * np.sin(0.7 * k):.3f}"
             for k, t in enumerate(times)]
    wind.write_text("\n".join(rows) + "\n")
    demand = tmp_path / "demand.csv"
    rows = ["timestamp,load_mw"]
    rows += [f"{t},{5.0 + 1.5 * np.cos(0.5 * k):.3f}"
             for k, t in enumerate(times)]
    demand.write_text("\n".join(rows) + "\n")
    return str(wind), str(demand)


def _ingest(tmp_path, out=None, extra=()):
    wind, demand = _write_raw_pair(tmp_path)
    out = str(tmp_path / "out") if out is None else out
    rc = main(["ingest", "--wind-csv", wind, "--demand-csv", demand,
               "--output-dir", out, *extra])
    assert rc == 0
    return out


def test_ingest_writes_canonical(tmp_path, capsys):
    out = _ingest(tmp_path)
    _, wind = read_canonical(f"{out}/wind_canonical.csv", "wind")
    _, demand = read_canonical(f"{out}/demand_canonical.csv", "demand")
    assert len(wind) == 12
    assert wind.delta == pytest.approx(1.0 / 6.0)
    # demand is rescaled so the averages match
    assert demand.average_power == pytest.approx(wind.average_power,
                                                 rel=1e-12)
    echoed = capsys.readouterr().out
    assert "N = 12 steps" in echoed
    assert "scaled to equal averages" in echoed


def test_ingest_exit_codes(tmp_path, capsys):
    wind, demand = _write_raw_pair(tmp_path)
    out = str(tmp_path / "out")

    rc = main(["ingest", "--wind-csv", str(tmp_path / "nope.csv"),
               "--demand-csv", demand, "--output-dir", out])
    assert rc == 7

    empty = tmp_path / "empty.csv"
    empty.write_text("timestamp,speed_mps\n")
    rc = main(["ingest", "--wind-csv", str(empty), "--demand-csv", demand,
               "--output-dir", out])
    assert rc == 6

    unordered = tmp_path / "unordered.csv"
    unordered.write_text(
        "timestamp,speed_mps\n"
        "2024-01-01T00:10:00,5.0\n"
        "2024-01-01T00:00:00,6.0\n"
        "2024-01-01T00:20:00,7.0\n")
    rc = main(["ingest", "--wind-csv", str(unordered), "--demand-csv",
               demand, "--output-dir", out])
    assert rc == 4

    badcfg = tmp_path / "bad.yaml"
    badcfg.write_text("objective: avg\nunknown_key: 1\n")
    rc = main(["ingest", "--config", str(badcfg), "--wind-csv", wind,
               "--demand-csv", demand, "--output-dir", out])
    assert rc == 2

    conflict = tmp_path / "conflict.yaml"
    conflict.write_text("retention: 0.99\nloss_per_24h: 0.05\n")
    rc = main(["ingest", "--config", str(conflict), "--wind-csv", wind,
               "--demand-csv", demand, "--output-dir", out])
    assert rc == 2

    capsys.readouterr()


def test_size_without_ingest_is_an_input_error(tmp_path, capsys):
    rc = main(["size", "--output-dir", str(tmp_path / "missing")])
    assert rc == 7
    assert "error (input)" in capsys.readouterr().err


def test_size_outputs(tmp_path, capsys):
    out = _ingest(tmp_path)
    rc = main(["size", "--output-dir", out, "--no-timestamp"])
    assert rc == 0
    doc = json.loads((tmp_path / "out" / "size.json").read_text())
    assert doc["n_steps"] == 12
    assert doc["g_av00_mw"] >= 0.0
    assert doc["g_peak00_mw"] >= doc["g_av00_mw"]
    assert doc["b_sharp_g_mwh"] >= 0.0
    assert doc["ea_satisfied"] is True
    assert doc["b_sharp_mwh"] >= doc["b_sharp_g_mwh"] - 1e-12
    assert "created_at" not in doc
    echoed = capsys.readouterr().out
    assert "B#" in echoed


def test_surface_deterministic_and_capacity(tmp_path, capsys):
    out = _ingest(tmp_path)
    wind = f"{out}/wind_canonical.csv"
    demand = f"{out}/demand_canonical.csv"
    grids = ["--b-grid", "0,1,2,3", "--p-grid", "0,0.5,1"]

    for run_dir in ("runA", "runB"):
        rc = main(["surface", "--wind", wind, "--demand", demand,
                   "--output-dir", str(tmp_path / run_dir),
                   "--no-timestamp", *grids])
        assert rc == 0
    a_json = (tmp_path / "runA" / "surface.json").read_bytes()
    b_json = (tmp_path / "runB" / "surface.json").read_bytes()
    assert a_json == b_json
    a_csv = (tmp_path / "runA" / "surface.csv").read_bytes()
    assert a_csv == (tmp_path / "runB" / "surface.csv").read_bytes()

    doc = json.loads(a_json)
    assert doc["g00_mw"] == max(max(row) for row in doc["g_mw"])
    assert a_csv.splitlines()[0] == b"b_mwh,p_mw,g_mw"

    rc = main(["capacity", "--wind", wind, "--demand", demand,
               "--output-dir", str(tmp_path / "cap"), "--no-timestamp",
               "--b-grid", "0,1,2,3", "--hours", "4"])
    assert rc == 0
    cap_csv = (tmp_path / "cap" / "capacity.csv").read_text().splitlines()
    assert cap_csv[0] == ("b_mwh,p_mw,g_mw,kappa_mw,normalized,"
                          "incremental_mw_per_mw,reduced_accuracy")
    assert len(cap_csv) > 1
    capsys.readouterr()


def test_capacity_efficiency_line(tmp_path, capsys):
    out = _ingest(tmp_path)
    rc = main(["capacity", "--output-dir", out, "--no-timestamp",
               "--target", "0.1"])
    assert rc == 0
    doc = json.loads((tmp_path / "out" / "capacity.json").read_text())
    assert doc["efficiency"] is not None
    assert doc["efficiency"]["efficiency"] > 0.0
    assert "recovering 0.1 of g(0,0)" in capsys.readouterr().out


def test_validate_cmd(tmp_path, capsys, monkeypatch):
    out = _ingest(tmp_path)
    rc = main(["validate", "--output-dir", out, "--no-timestamp",
               "--b-values", "0,1,2"])
    assert rc == 0
    doc = json.loads((tmp_path / "out" / "validation.json").read_text())
    assert doc["passed"] is True
    assert len(doc["rows"]) == 3
    assert "PASS" in capsys.readouterr().out

    # engine drift must surface as the tolerance exit code
    monkeypatch.setattr(validate_mod, "dp_peaker_energy",
                        lambda dec, b: 1e6)
    rc = main(["validate", "--output-dir", out, "--no-timestamp"])
    assert rc == 10
    assert "error (tolerance)" in capsys.readouterr().err


def test_objective_flag_overrides_config(tmp_path, capsys):
    out = _ingest(tmp_path)
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("objective: peak\nengine: lp\n")
    rc = main(["surface", "--config", str(cfg), "--output-dir", out,
               "--no-timestamp", "--objective", "avg",
               "--b-grid", "0,1", "--p-grid", "0,1"])
    assert rc == 0
    doc = json.loads((tmp_path / "out" / "surface.json").read_text())
    assert doc["objective"] == "avg"
    assert doc["engine"] == "lp"
    capsys.readouterr()


def test_greedy_peak_surface_is_rejected(tmp_path, capsys):
    out = _ingest(tmp_path)
    rc = main(["surface", "--output-dir", out, "--objective", "peak",
               "--b-grid", "0,1", "--p-grid", "0,1"])
    assert rc == 7
    assert "engine='lp'" in capsys.readouterr().err


def test_console_script_help():
    proc = subprocess.run(["besscap", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    for sub in ("ingest", "surface", "capacity", "size", "validate"):
        assert sub in proc.stdout


def test_size_on_reference_pattern(tmp_path, capsys, fixture_r):
    from besscap.series import EnergySeries, write_canonical
    from conftest import split_runs
    from datetime import datetime

    w, d = split_runs(fixture_r)
    out = tmp_path / "canon"
    out.mkdir()
    start = datetime(2024, 1, 1)
    write_canonical(str(out / "wind_canonical.csv"), start,
                    EnergySeries(w, 1.0, "wind"))
    write_canonical(str(out / "demand_canonical.csv"), start,
                    EnergySeries(d, 1.0, "demand"))
    rc = main(["size", "--output-dir", str(out)])
    assert rc == 0
    echoed = capsys.readouterr().out
    assert "B#_g = 6 MWh" in echoed
    assert "B# = 8 MWh" in echoed


def test_surface_single_cell_is_endpoint(tmp_path, capsys):
    out = _ingest(tmp_path)
    _, wind = read_canonical(f"{out}/wind_canonical.csv", "wind")
    _, demand = read_canonical(f"{out}/demand_canonical.csv", "demand")
    rc = main(["surface", "--output-dir", out, "--b-grid", "0",
               "--p-grid", "0", "--no-timestamp"])
    assert rc == 0
    doc = json.loads((tmp_path / "out" / "surface.json").read_text())
    assert np.shape(doc["g_mw"]) == (1, 1)
    # storage-free endpoint: average positive excess demand over the window
    r = demand.values - wind.values
    expected = r[r > 0.0].sum() / (len(wind) * wind.delta)
    assert doc["g_mw"][0][0] == pytest.approx(expected, abs=1e-12)
    assert doc["g_mw"][0][0] == pytest.approx(doc["g00_mw"], abs=0.0)
