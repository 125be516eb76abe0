import json
import subprocess
import sys

import pytest

from qoptlab.cli import main
from qoptlab.fixtures import corpus


def _run(argv, capsys):
    status = main(argv)
    out = capsys.readouterr()
    return status, json.loads(out.out), out.err


@pytest.fixture
def data():
    return corpus.package_corpus()


def test_check_exit_codes(data, capsys):
    status, doc, err = _run(["check", str(data / "coin.json")], capsys)
    assert status == 0 and doc["outputs"]["passed"] and "well-formed" in err
    status, doc, _ = _run(["check", str(data / "bad-separability.json"), "--global"], capsys)
    assert status == 1 and not doc["outputs"]["passed"]


def test_qopt_solve_projector(data, capsys):
    status, doc, _ = _run(["qopt", "solve", str(data / "projector.json"), "--input", "0"], capsys)
    assert status == 0
    assert doc["outputs"]["lambdaMax"] == pytest.approx(1.0, abs=1e-12)
    assert doc["outputs"]["samplingLowerBound"] <= 1.0 + 1e-12


def test_manifest_fields(data, capsys):
    _, doc, _ = _run(["run", str(data / "coin.json"), "--input", "0", "--steps", "2"], capsys)
    assert {"command", "arguments", "seed", "toolVersion", "outputs"} <= set(doc)
    assert doc["outputs"]["acceptProbability"] == pytest.approx(0.5)


def test_wall_time_goes_to_manifest_file(data, capsys, tmp_path):
    path = tmp_path / "m.json"
    _run(["--manifest", str(path), "decide", "search", "--bits", "4", "--value", "0.3"], capsys)
    assert "wallTime" in json.loads(path.read_text())


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
    status, doc, _ = _run(["check", "/no/such/file.json"], capsys)
    assert status == 2 and "error" in doc["outputs"]


def test_promise_violation_exit(capsys):
    status, _, _ = _run(["decide", "classify", "--values", "0.5"], capsys)
    assert status == 1


def test_qop_spec(data, capsys, tmp_path):
    spec = {"f": str(data / "index-ignoring-0.75.json"), "g": str(data / "index-ignoring-0.25.json"), "bits": 3}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    status, doc, _ = _run(["decide", "qop", str(path), "--x", "0"], capsys)
    # both values sit exactly on the 2^-3 lattice, so the verdict is flagged
    assert status == 1 and doc["outputs"]["flagged"]
    spec["bits"] = 1
    path.write_text(json.dumps(spec))
    status, doc, _ = _run(["decide", "qop", str(path), "--x", "0"], capsys)
    assert doc["outputs"]["result"] and status == 0


def test_construct_and_regen(data, capsys):
    status, doc, _ = _run(
        ["construct", "convexCombine", str(data / "family-max.json"), "--source", str(data / "source-one.json"), "--x", "1"],
        capsys,
    )
    assert status == 0
    assert doc["outputs"]["verification"][0]["constructed"] == pytest.approx(0.6)
    status, doc, _ = _run(["fixtures", "regen"], capsys)
    assert status == 0 and doc["outputs"]["passed"]


def test_console_entry_point(data):
    proc = subprocess.run(
        [sys.executable, "-m", "qoptlab.cli", "maxqtm", str(data / "lookup.json"), "--x", "01", "-m", "4"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert abs(json.loads(proc.stdout)["outputs"]["value"] - 0.5) <= 0.25
