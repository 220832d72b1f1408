from __future__ import annotations

import json
import os
import re
import shlex
import subprocess
import sys
from pathlib import Path

import pytest

from idealsurf.cli import RunConfig, dumps_report, run_cli, write_report

README = Path(__file__).resolve().parents[1] / "README.md"


def run(args, capsys):
    code = run_cli(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_plane(capsys):
    code, out, err = run(["analyze", "--surface", "plane", "--resolution", "16"], capsys)
    assert code == 0 and err == ""
    doc = json.loads(out)
    assert doc["schema"] == 1
    assert doc["config"]["surface"] == "plane" and doc["config"]["resolution"] == 16
    assert doc["energy"]["F"] == 0 and doc["energy"]["A2"] == 0
    assert {"F", "A2", "A02", "area"} <= set(doc["energy"])


def test_reports_are_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(["variation-check", "--surface", "cubic-graph", "--resolution", "24",
                    "--probes", "2", "--seed", "4", "--out", str(tmp_path / d)],
                   capsys)[0] in (0, 1)
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    assert a.replace(b"/a", b"/b") == b


def test_float_format_round_trips():
    text = dumps_report({"x": 0.1, "y": 1.0, "z": float("inf"), "w": [1, True, None]})
    doc = json.loads(text)
    assert doc["x"] == 0.1 and isinstance(doc["y"], float) and doc["z"] == "inf"
    assert '"x": 0.10000000000000001' in text


def test_empty_report_schema(tmp_path):
    p = tmp_path / "r.json"
    write_report({}, str(p))
    assert json.loads(p.read_text()) == {"schema": 1, "config": {}}


def test_audit_sphere(capsys):
    code, out, _ = run(["audit", "--surface", "sphere", "--r", "1", "--resolution", "32",
                        "--rho", "inf", "--p", "4"], capsys)
    assert code == 0
    doc = json.loads(out)
    ident = doc["records"]["weighted-identity"]
    assert all(abs(v) <= 1e-3 for v in ident["quantities"].values())
    assert all(v["ratio"] < 1 for v in doc["sobolev"].values())
    assert set(doc["records"]) == {"weighted-identity", "hessian-H",
                                   "hessian-H-umbilic", "hessian-A", "absorbed"}


def test_sample_writes_obj_and_sidecar(tmp_path, capsys):
    code, out, _ = run(["sample", "--surface", "cylinder", "--r", "0.5",
                        "--resolution", "8", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "mesh.obj").exists()
    lines = (tmp_path / "exact_fields.csv").read_text().splitlines()
    assert lines[0].startswith("vertex,u,v,H,")
    assert float(lines[1].split(",")[3]) == pytest.approx(2.0)


def test_convergence_orders(capsys):
    code, out, _ = run(["convergence", "--surface", "cubic-graph", "--target", "H",
                        "--resolutions", "8", "16", "32"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["monotone"]
    assert len(doc["observed_orders"]) == 2 and min(doc["observed_orders"]) > 1.5


def test_variation_check_verdict(capsys):
    args = ["variation-check", "--surface", "cubic-graph", "--resolution", "24",
            "--probes", "2"]
    assert run(args, capsys)[0] == 0
    assert run(args + ["--tol", "1e-9"], capsys)[0] == 1


def test_flow_not_converged_exit_code(tmp_path, capsys):
    code, out, _ = run(["flow", "--surface", "cubic-graph", "--resolution", "8",
                        "--max-steps", "2"], capsys)
    assert code == 1
    assert json.loads(out)["verdict"] == "not-converged"


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[run]\nsurface = sphere\nresolution = 8\n[audit]\np = 6\n")
    code, out, _ = run(["audit", "--config", str(cfg), "--resolution", "12"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["config"]["p"] == 6.0 and doc["config"]["resolution"] == 12


@pytest.mark.parametrize("args, fragment", [
    (["analyze", "--surface", "plane", "--bogus"], "unrecognized"),
    (["analyze"], "exactly one"),
    (["analyze", "--surface", "plane", "--input", "x.obj"], "exactly one"),
    (["analyze", "--input", "/no/such.obj"], "cannot read"),
    (["flow", "--surface", "plane", "--dt", "-3"], "--dt"),
    (["analyze", "--surface", "torus"], "invalid choice"),
    (["sample", "--surface", "plane"], "--out"),
    (["analyze", "--surface", "plane", "--resolution", "1"], "resolution"),
])
def test_input_errors(args, fragment, capsys):
    code, out, err = run(args, capsys)
    assert code == 2 and out == ""
    assert err.count("\n") == 1 and fragment in err


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[run]\ncolour = blue\n")
    code, _, err = run(["analyze", "--surface", "plane", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err


def test_malformed_obj(tmp_path, capsys):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0\n")
    code, _, err = run(["analyze", "--input", str(p)], capsys)
    assert code == 2 and err.count("\n") == 1


def test_thread_env(monkeypatch, capsys):
    monkeypatch.setenv("IDEALSURF_THREADS", "1")
    assert run(["analyze", "--surface", "plane", "--resolution", "4"], capsys)[0] == 0
    monkeypatch.setenv("IDEALSURF_THREADS", "many")
    assert run(["analyze", "--surface", "plane", "--resolution", "4"], capsys)[0] == 2


def test_run_config_invariants():
    with pytest.raises(Exception):
        RunConfig("analyze")
    c = RunConfig("analyze", surface="plane")
    assert c.to_dict()["center"] == [0.0, 0.0, 0.0]


def _readme_commands():
    text = README.read_text()
    blocks = re.findall(r"```(?:bash|sh|console)\n(.*?)```", text, re.S)
    cmds = []
    for block in blocks:
        for line in block.splitlines():
            line = line.strip()
            if line.startswith("idealsurf "):
                cmds.append(line)
    return cmds


def test_readme_examples_run(tmp_path):
    cmds = _readme_commands()
    assert len(cmds) >= 6
    exe = [sys.executable, "-m", "idealsurf.cli"]
    for cmd in cmds:
        args = shlex.split(cmd)[1:]
        proc = subprocess.run(exe + args, cwd=tmp_path, capture_output=True, text=True,
                              env={**os.environ, "IDEALSURF_THREADS": "2"})
        assert proc.returncode == 0, f"{cmd}: {proc.stderr}"
