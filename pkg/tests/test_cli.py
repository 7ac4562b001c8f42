from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from conftest import LAGRANGIANS
from unimech import __version__
from unimech.cli import main

PU = str(LAGRANGIANS / "pais_uhlenbeck.lag")
REL = str(LAGRANGIANS / "relativistic_particle.lag")
FREE = str(LAGRANGIANS / "free_particle.lag")


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_reports_momenta(capsys):
    code, out, _ = _run(capsys, "analyze", PU)
    assert code == 0
    doc = json.loads(out)
    assert set(doc["report"]["momenta"].values()) == {"q1 + g*q3", "-g*q2"}
    assert doc["provenance"]["version"] == __version__
    assert doc["provenance"]["config"]["command"] == "analyze"
    assert doc["report"]["regular"]["X_h"]["q1"] == "-p1/g"


def test_constraints_ledger(capsys):
    code, out, _ = _run(capsys, "constraints", REL, "--semispray1")
    assert code == 0
    ledger = json.loads(out)["report"]["ledger"]
    assert ledger["status"] == "stabilized"
    labels = [e["label"] for gen in ledger["generations"] for e in gen if e["label"].startswith("phi")]
    assert labels == ["phi^(0)_1", "phi^(0)_2", "phi^(1)_1", "phi^(1)_2", "phi^(2)_1"]


def test_simulate_free_particle_csv(capsys):
    code, out, _ = _run(capsys, "simulate", FREE, "--t-end", "1", "--h", "0.001", "--init", "q0=0,q1=1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1001
    assert float(rows[-1]["t"]) == 1.0 and abs(float(rows[-1]["q0"]) - 1.0) < 1e-12


def test_simulate_hamiltonian_space(capsys):
    code, out, _ = _run(capsys, "simulate", PU, "--t-end", "0.01", "--h", "0.001", "--param", "w=1,g=1",
                        "--init", "q0=1,q1=0,q2=0,q3=0", "--space", "hamiltonian")
    assert code == 0
    assert out.splitlines()[0] == "t,q0,q1,p0,p1"


def test_simulate_singular_system_on_the_surface(capsys):
    code, out, _ = _run(capsys, "simulate", REL, "--space", "unified", "--param", "a=1",
                        "--t-end", "0.05", "--h", "0.01", "--semispray1", "--format", "json")
    assert code == 0
    report = json.loads(out)["report"]
    assert report["space"] == "unified" and len(report["times"]) == 6


@pytest.mark.parametrize("command,extra", [
    ("analyze", []), ("momenta", []), ("eom", []), ("unified", []),
    ("constraints", ["--semispray1"]), ("simulate", ["--param", "w=1,g=1", "--init", "q0=1,q1=0,q2=0,q3=0"]),
])
def test_reports_are_byte_identical(capsys, tmp_path, command, extra):
    outs = []
    path = tmp_path / "report"
    for _ in range(2):
        assert main([command, PU, "--out", str(path), *extra]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] and outs[0]


def test_csv_reports(capsys):
    code, out, _ = _run(capsys, "momenta", PU, "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "key,value"
    assert "provenance.tool,unimech" in lines


def test_missing_file_exits_2(capsys, tmp_path):
    code, _, err = _run(capsys, "analyze", str(tmp_path / "nope.lag"))
    assert code == 2 and "cannot read" in err


def test_parse_error_reports_position(capsys, tmp_path):
    src = tmp_path / "bad.lag"
    src.write_text("system(dim=1, order=1)\nL = q1^2 +\n")
    code, _, err = _run(capsys, "analyze", str(src))
    assert code == 2 and "bad.lag:2:" in err


@pytest.mark.parametrize("argv", [
    ["simulate", PU, "--init", "q0"],
    ["simulate", PU, "--init", "q0=x"],
    ["simulate", PU, "--param", "zeta=1"],
    ["simulate", PU, "--param", "w=1,g=1", "--init", "q0=1"],
    ["simulate", FREE, "--init", "q0=0,q1=1", "--t-end", "1", "--h", "0.3"],
    ["analyze", PU, "--tol", "0"],
    ["simulate", REL, "--param", "a=1"],
])
def test_validation_errors_exit_2(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2 and err.startswith("unimech:")


def test_inconsistent_constraints_exit_3(capsys, tmp_path):
    src = tmp_path / "linear.lag"
    src.write_text("system(dim=1, order=1)\nL = q0\n")
    code, out, _ = _run(capsys, "constraints", str(src))
    assert code == 3
    assert json.loads(out)["report"]["ledger"]["status"] == "inconsistent"


def test_blow_up_exits_4(capsys, tmp_path):
    src = tmp_path / "cubic.lag"
    src.write_text("system(dim=1, order=1)\nL = 1/2*q1^2 + 1/3*q0^3\n")
    code, out, err = _run(capsys, "simulate", str(src), "--init", "q0=1,q1=0", "--t-end", "20", "--h", "0.01")
    assert code == 4 and "truncated" in err
    assert out.startswith("t,q0,q1")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "unimech", "momenta", FREE], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["report"]["momenta"] == {"p0": "q1"}
