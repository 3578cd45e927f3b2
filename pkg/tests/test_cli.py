import csv
import json
import subprocess
import sys

import pytest

from jordanflow.cli import main, preset_names, preset_text

PRESETS = ["blowup-catastrophe", "calibrate-n2", "epsilon-characteristics", "euler-trivial",
           "identities", "integrate-crossval", "jordan-n2-exact", "solve-travelling-wave"]


def _report(path):
    with open(path) as fh:
        return {row["equation"]: float(row["linf"]) for row in csv.DictReader(fh)}


def _write(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_presets_listing(capsys):
    assert preset_names() == PRESETS
    assert main(["presets"]) == 0
    assert capsys.readouterr().out.split() == PRESETS
    assert main(["presets", "euler-trivial"]) == 0
    assert json.loads(capsys.readouterr().out)["mode"] == "verify"
    assert main(["presets", "nope"]) == 2


@pytest.mark.parametrize("name", PRESETS)
def test_every_preset_runs(tmp_path, name):
    assert main(["run", name, "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "run.json").read_text())
    assert meta["status"] == "ok" and meta["config"] == json.loads(preset_text(name))
    assert all((tmp_path / f).is_file() for f in meta["outputs"])


def test_jordan_exact_preset_residuals(tmp_path):
    assert main(["run", "jordan-n2-exact", "--out", str(tmp_path)]) == 0
    assert max(_report(tmp_path / "analytic.csv").values()) <= 1e-12
    assert max(_report(tmp_path / "grid.csv").values()) <= 1e-10


def test_blowup_preset_time(tmp_path):
    assert main(["run", "blowup-catastrophe", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "blowup.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 11
    assert all(r["status"] == "fold" and abs(float(r["t_star"]) - 1) <= 1e-6 for r in rows)


def test_integrate_preset_matches_hodograph_oracle(tmp_path):
    assert main(["run", "integrate-crossval", "--out", str(tmp_path)]) == 0
    assert max(_report(tmp_path / "oracle.csv").values()) <= 1e-5


def test_outputs_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert main(["run", "calibrate-n2", "--out", str(tmp_path / sub), "--seed", "9"]) == 0
    for f in ("calibration.json", "trace.csv", "run.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_invalid_configs_exit_2(tmp_path, capsys):
    base = json.loads(preset_text("euler-trivial"))
    bad_key = dict(base, colour="red")
    assert main(["run", _write(tmp_path, bad_key), "--out", str(tmp_path / "o")]) == 2
    bad_expr = json.loads(preset_text("euler-trivial"))
    bad_expr["system"]["f"] = ["u1 +"]
    assert main(["run", _write(tmp_path, bad_expr), "--out", str(tmp_path / "o")]) == 2
    no_section = {"mode": "solve"}
    assert main(["run", _write(tmp_path, no_section), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert main(["run", "euler-trivial", "--threads", "0"]) == 2
    assert not (tmp_path / "o" / "error.json").exists()
    assert "error" in capsys.readouterr().err


def test_cfl_violation_exit_3(tmp_path):
    cfg = json.loads(preset_text("integrate-crossval"))
    cfg["grid"]["dt"] = 0.5
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, cfg), "--out", str(out)]) == 3
    err = json.loads((out / "error.json").read_text())
    assert err["status"] == "error" and err["error"] == "CFLError"
    assert not (out / "run.json").exists()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "jordanflow.cli", "run", "euler-trivial",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert _report(tmp_path / "analytic.csv")["euler[i=1]"] == 0.0
