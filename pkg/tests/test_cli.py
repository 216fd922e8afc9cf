import json

import pytest

from blowup_control.cli import main

SCALAR = {"kind": "power", "p": 2, "beta": 2, "n": 1, "y0": [2.0],
          "controls": {"ball": {"B": [[1.0]], "radius": 1.0}}}


def write(tmp_path, doc, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if isinstance(doc, dict) else doc)
    return str(path)


def test_simulate_closed_form(tmp_path, capsys):
    cfg = write(tmp_path, {"kind": "power", "p": 2, "beta": 2, "n": 1, "y0": [1.0]})
    out = tmp_path / "run"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert abs(summary["T_hat"] - 1.0) < 1e-6 and summary["err"] <= 1e-6
    assert (out / "trajectory.csv").exists() and (out / "config.json").exists()
    assert "1.0000000" in capsys.readouterr().out


def test_simulate_no_blowup(tmp_path):
    cfg = write(tmp_path, {"kind": "zero", "n": 1, "y0": [1.0], "options": {"t_max": 1.0}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")]) == 0
    assert json.loads((tmp_path / "run" / "summary.json").read_text())["blowup"] is None


def test_malformed_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, '{"kind": "power",\n "p": }')
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    cfg = write(tmp_path, dict(SCALAR, options={"max_steps": 2}))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")]) == 3


@pytest.mark.parametrize("mode,T", [("ti", 0.463648), ("ts", 0.549306)])
def test_optimize_sweep(tmp_path, mode, T):
    cfg = write(tmp_path, dict(SCALAR, zeta={}))
    out = tmp_path / "run"
    assert main(["optimize", "--config", cfg, "--mode", mode, "--out", str(out), "--jobs", "1"]) == 0
    first = json.loads((out / "results.jsonl").read_text().splitlines()[0])
    assert abs(first["T_hat"] - T) < 1e-6
    assert json.loads((out / "report.json").read_text())["verdicts"]["H_max"] == "pass"


def test_ts_gate(tmp_path):
    cfg = write(tmp_path, SCALAR)
    assert main(["optimize", "--config", cfg, "--mode", "ts", "--out", str(tmp_path / "run")]) == 4
    assert main(["optimize", "--config", cfg, "--mode", "ts", "--force", "--jobs", "1",
                 "--out", str(tmp_path / "run")]) == 0


def test_optimize_brute(tmp_path):
    cfg = write(tmp_path, dict(SCALAR, optimize={"k": 2}))
    out = tmp_path / "run"
    assert main(["optimize", "--config", cfg, "--method", "brute", "--out", str(out)]) == 0
    line = json.loads((out / "results.jsonl").read_text())
    assert line["law"]["values"] == [[1.0]]


def test_audit(tmp_path):
    cfg = write(tmp_path, {"kind": "power", "p": 2, "beta": 2, "n": 2, "y0": [1.0, 0.0], "A": {"rotation": 1.0}})
    out = tmp_path / "run"
    assert main(["audit", "--config", cfg, "--out", str(out)]) == 0
    recs = json.loads((out / "report.json").read_text())
    assert all(r["status"] == "pass" for r in recs if r["id"] in ("S2", "S3"))


def test_certify_shoot_then_from_files(tmp_path):
    cfg = write(tmp_path, SCALAR)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["certify", "--config", cfg, "--shoot", "1", "--out", str(a)]) == 0
    assert main(["certify", "--config", cfg, "--from", str(a), "--out", str(b)]) == 0
    for d in (a, b):
        v = json.loads((d / "report.json").read_text())["verdicts"]
        assert v == {"H_max": "pass", "transversality": "pass", "sign": "pass", "weighted_monotone": True}


def test_monotone(tmp_path, capsys):
    cfg = write(tmp_path, {"kind": "power", "p": 2, "beta": 2, "n": 2, "y0": [1.0, 0.0]})
    out = tmp_path / "run"
    assert main(["monotone", "--config", cfg, "--seeds", "4", "--out", str(out)]) == 0
    assert "4/4 instances pass" in capsys.readouterr().out
    assert len((out / "results.jsonl").read_text().splitlines()) == 4


def test_outputs_are_deterministic(tmp_path):
    cfg = write(tmp_path, dict(SCALAR, zeta={}))
    runs = []
    for name in ("x", "y"):
        out = tmp_path / name
        assert main(["optimize", "--config", cfg, "--out", str(out), "--jobs", "2"]) == 0
        runs.append(((out / "results.jsonl").read_text(), (out / "trajectory.csv").read_text()))
    assert runs[0] == runs[1]
