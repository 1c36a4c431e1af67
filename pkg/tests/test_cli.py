from __future__ import annotations

import json
import subprocess
import sys

import pytest

from rpmlab.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main

TRIANGLE = {"vertices": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"], ["a", "c"]]}
EDGE = {"vertices": ["x", "y"], "edges": [["x", "y"]]}


@pytest.fixture
def files(tmp_path):
    tri = tmp_path / "tri.json"
    tri.write_text(json.dumps(TRIANGLE))
    edge = tmp_path / "edge.json"
    edge.write_text(json.dumps(EDGE))
    model = tmp_path / "m.json"
    model.write_text(json.dumps({"N": 2, "J": {"0": {"1": "1/3", "2": "1/4"}, "1": {"1": "1/5"}, "2": {"2": "1/6"}}}))
    return tmp_path, tri, edge, model


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_verify_weights(capsys):
    code, out = run(["verify-weights", "--N", "2", "--kmax", "8"], capsys)
    assert code == EXIT_OK
    report = json.loads(out.out)
    assert report["holds"] and len(report["rows"]) == 45


def test_weights_csv(capsys):
    code, out = run(["verify-weights", "--N", "3", "--kmax", "2", "--format", "csv"], capsys)
    assert code == EXIT_OK
    assert out.out.splitlines()[0] == "N,equal,k,lhs,r,rhs"


def test_usage_errors(files, capsys):
    _, tri, _, _ = files
    assert run(["verify-weights", "--N", "1"], capsys)[0] == EXIT_USAGE
    assert run(["no-such-command"], capsys)[0] == EXIT_USAGE
    assert run(["griffiths", "--graph", str(tri), "--A", "q", "--B", "a"], capsys)[0] == EXIT_USAGE
    assert run(["griffiths", "--graph", str(tri) + ".missing", "--B", "a"], capsys)[0] == EXIT_USAGE
    assert run(["verify-switching", "--graph", str(tri), "--A", "a"], capsys)[0] == EXIT_USAGE


def test_switching_report(files, capsys):
    _, tri, _, model = files
    argv = ["verify-switching", "--graph", str(tri), "--model", str(model), "--A", "a", "--B", "c", "--cap", "2"]
    code, out = run(argv, capsys)
    report = json.loads(out.out)
    assert code == EXIT_OK and report["holds"] and report["violating_totals"] == 0


def test_switching_violation_exit(files, capsys):
    _, _, edge, _ = files
    argv = ["verify-switching", "--graph", str(edge), "--A", "x,y", "--B", "x,y", "--cap", "2"]
    code, out = run(argv, capsys)
    report = json.loads(out.out)
    assert code == (EXIT_OK if report["holds"] else EXIT_VIOLATION)
    if not report["holds"]:
        assert report["witness"]


def test_griffiths_odd(files, capsys):
    _, tri, _, _ = files
    code, out = run(["griffiths", "--graph", str(tri), "--A", "a", "--B", "a", "--tol", "1e-9"], capsys)
    report = json.loads(out.out)
    assert report["G_A"] == "0" and report["G_B"] == "0"
    assert code in (EXIT_OK, EXIT_VIOLATION)


def test_equivalence_and_derivative(files, capsys):
    _, _, edge, _ = files
    code, out = run(["verify-equivalence", "--graph", str(edge), "--A", "x,y", "--cap", "2"], capsys)
    assert code == EXIT_OK and json.loads(out.out)["holds"]
    code, out = run(["derivative", "--graph", str(edge), "--A", "x,y", "--edge", "0"], capsys)
    assert code == EXIT_OK and json.loads(out.out)["float"] > 0


def test_injectivity_and_spin(files, capsys):
    _, _, edge, _ = files
    code, out = run(["verify-injectivity", "--graph", str(edge), "--B", "x,y", "--cap", "2"], capsys)
    report = json.loads(out.out)
    assert code == (EXIT_OK if report["injective"] else EXIT_VIOLATION)
    code, out = run(["spin-compare", "--graph", str(edge), "--A", "x,y", "--samples", "10000"], capsys)
    assert code == EXIT_OK and json.loads(out.out)["abs_diff"] < 1e-8


def test_reports_are_byte_identical(files):
    tmp, tri, _, model = files
    argv = ["rpmlab", "verify-switching", "--graph", str(tri), "--model", str(model), "--A", "a,b", "--B", "b,c"]
    a, b = tmp / "a.json", tmp / "b.json"
    for path in (a, b):
        subprocess.run([sys.executable, "-m", "rpmlab.cli", *argv[1:], "--out", str(path)], check=False)
    assert a.read_bytes() == b.read_bytes() and a.read_bytes()


def test_max_states_env(files, monkeypatch, capsys):
    _, tri, _, _ = files
    monkeypatch.setenv("RPMLAB_MAX_STATES", "5")
    code, out = run(["verify-equivalence", "--graph", str(tri), "--N", "3", "--cap", "2"], capsys)
    assert code == EXIT_USAGE and "colour sequences" in out.err
    monkeypatch.setenv("RPMLAB_MAX_STATES", "lots")
    assert run(["verify-equivalence", "--graph", str(tri)], capsys)[0] == EXIT_USAGE
