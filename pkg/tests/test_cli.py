import json
import math

import pytest
import yaml

from geophase import acceptance, cli
from geophase.scenario import builtin_document


def test_list_builtins(capsys):
    assert cli.main(["list-builtins"]) == 0
    out = capsys.readouterr().out
    for name in ("qubit_precession", "qubit_dephasing", "qubit_amplitude_damping",
                 "qutrit_degenerate", "random_unitary", "random_lindblad"):
        assert name in out


def test_run_builtin_csv_to_stdout(capsys):
    assert cli.main(["run-builtin", "qubit_precession", "--steps", "100"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("time,gamma_kinematic,gamma_generalized")
    assert len(lines) == 102


def test_run_builtin_with_parameters_json(tmp_path):
    out = tmp_path / "r.json"
    rc = cli.main(["run-builtin", "qubit_precession", "--set", "r=0.5", "--set", "theta=1.0471975511965976",
                   "--format", "json", "--final-only", "-o", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert len(doc["table"]["time"]) == 1
    half = math.pi * (1 - math.cos(math.pi / 3))
    assert abs(doc["final"]["kinematic"]["gamma_g"] - math.atan2(-0.5 * math.sin(half), math.cos(half))) < 1e-3


def test_run_file_with_methods(tmp_path, capsys):
    path = tmp_path / "s.yaml"
    path.write_text(yaml.safe_dump(builtin_document("qubit_dephasing", steps=200)))
    assert cli.main(["run", str(path), "--methods", "kinematic", "--final-only"]) == 0
    header, row = capsys.readouterr().out.splitlines()
    cells = dict(zip(header.split(","), row.split(",")))
    assert cells["gamma_kinematic"] != "" and cells["gamma_generalized"] == ""


def test_show_builtin(capsys):
    assert cli.main(["show-builtin", "random_lindblad", "--set", "seed=3"]) == 0
    doc = yaml.safe_load(capsys.readouterr().out)
    assert doc["name"] == "random_lindblad" and doc["dimension"] == 3


def test_validation_error_exit_code(tmp_path, capsys):
    doc = builtin_document("qubit_dephasing")
    doc["evolution"]["jump_ops"][0]["rate"] = -0.1
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(doc))
    assert cli.main(["run", str(path)]) == 1
    assert "negative rate" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.yaml")]) == 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run-builtin", "qubit_precession", "--methods", "nonsense"])
    assert exc.value.code == 1


def test_numerical_error_exit_code(capsys):
    rc = cli.main(["run-builtin", "qubit_amplitude_damping", "--set", "gamma=20", "--steps", "2000"])
    assert rc == 2
    assert "numerical error" in capsys.readouterr().err


@pytest.mark.parametrize("passed, code", [(True, 0), (False, 2)])
def test_verify_exit_code(monkeypatch, passed, code):
    fake = [acceptance.CheckResult(1, "stub", passed, "stubbed")]
    monkeypatch.setattr(acceptance, "run_all", lambda echo=False: fake)
    assert cli.main(["verify"]) == code
