import json

import numpy as np
import pytest

from stratflow import snapshot
from stratflow.cli import EXIT_CONFIG, EXIT_GUARD, EXIT_OK, main, read_series_csv
from stratflow.diagnostics import COLUMNS


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("quick")
    code = main(["run", "--preset", "ipm-quick", "--out", str(out), "--snapshots-every", "20"])
    return code, out


def test_run_outputs(quick_run):
    code, out = quick_run
    assert code == EXIT_OK
    lines = (out / "diagnostics.csv").read_text().splitlines()
    meta = json.loads(lines[0][2:])
    assert meta["preset"] == "ipm-quick" and meta["grid"]["n2"] == 33
    assert lines[1].split(",") == list(COLUMNS)
    assert len(lines) == 2 + 41
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert all(v["pass"] for v in summary["properties"].values())
    index = json.loads((out / "snapshots" / "index.json").read_text())
    assert [s["sample"] for s in index["snapshots"]] == [0, 20, 40]
    assert snapshot.read(out / "snapshots" / "theta_0000040.bin").shape == (16, 33)


def test_rearrange(quick_run, tmp_path, capsys):
    _, out = quick_run
    snap = out / "snapshots" / "theta_0000020.bin"
    assert main(["rearrange", str(snap), "--rho-s", "1-x2", "--out", str(tmp_path)]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["levels_valid"] and info["gap"]["gap"] > 0
    assert abs(info["half_h2_integral"] - info["gap"]["gap"]) < 0.1 * info["gap"]["gap"]
    prof = np.loadtxt(tmp_path / "rearrangement.csv", delimiter=",", skiprows=1)
    assert prof.shape == (33, 2) and np.all(np.diff(prof[:, 1]) <= 0)


def test_lemmas_on_run(quick_run, capsys):
    _, out = quick_run
    code = main(["lemmas", str(out / "diagnostics.csv"), "--t-min", "0.5", "--t-max", "2"])
    rep = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK and rep["lemma22_g"]["status"] == "holds"


def test_lemmas_on_plain_series(tmp_path, capsys):
    t = np.linspace(1, 50, 491)
    path = tmp_path / "f.csv"
    np.savetxt(path, np.column_stack([t, 2 * t**-2.0]), delimiter=",", header="t,f", comments="")
    assert main(["lemmas", str(path), "--n", "2", "--E", "4.02"]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["exponent"] == pytest.approx(-2.0, abs=1e-9)
    assert rep["lemma23"]["status"] == "holds"


def test_report(quick_run, tmp_path):
    _, out = quick_run
    dest = tmp_path / "long.csv"
    assert main(["report", str(out), "--series", "E", "--series", "K", "--out", str(dest)]) == EXIT_OK
    lines = dest.read_text().splitlines()
    assert lines[0] == "t,series_name,value" and len(lines) == 1 + 2 * 41
    assert read_series_csv(out / "diagnostics.csv")["E"].shape == (41,)


def test_manufactured(capsys):
    assert main(["manufactured", "--model", "ipm", "--levels", "2", "--fd-order", "2"]) == EXIT_OK
    assert "observed order" in capsys.readouterr().out


def test_presets_listing(capsys):
    assert main(["presets"]) == EXIT_OK
    names = [p["name"] for p in json.loads(capsys.readouterr().out)]
    assert "stokes-baseline" in names


def test_exit_codes(tmp_path):
    assert main(["run", "--preset", "nope", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["run", "--preset", "ipm-quick", "--set", "cfl=2", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["run", "--preset", "ipm-quick", "--set", "cfl", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["run", "--preset", "ipm-quick", "--set", "max_linf=1e-3",
                 "--out", str(tmp_path)]) == EXIT_GUARD
    assert main(["rearrange", str(tmp_path / "missing.bin")]) == EXIT_CONFIG


def test_config_file(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n1 = 16\nn2 = 17\nt_end = 0.2\nsample_dt = 0.1\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    meta = json.loads((tmp_path / "o" / "diagnostics.csv").read_text().splitlines()[0][2:])
    assert meta["config"]["n1"] == 16 and meta["preset"] == "custom"
