import json
import subprocess
import sys
from pathlib import Path

import pytest

from egren.cli import EXIT_NUMERIC, EXIT_OK, EXIT_SPEC, main
from egren.jobs import SCHEMA_VERSION, SCHEMAS, JobSpec, SpecError, run_job, validate

SPECS = Path(__file__).resolve().parent.parent / "specs"
FAST = ["classify", "cover", "cover_coincident", "glue", "wick", "wf_hadamard", "wf_gamma_to", "wf_digamma",
        "wf_hormander", "wf_restriction", "sd_delta", "extend_unique", "extend_w", "probe"]


def run(tmp_path, command, payload, *extra):
    spec = tmp_path / "job.json"
    spec.write_text(json.dumps(payload))
    out = tmp_path / "report.json"
    code = main([command, "--spec", str(spec), "--out", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


@pytest.mark.parametrize("name", FAST)
def test_example_specs_validate_and_run(tmp_path, name):
    command = name.split("_")[0]
    payload = json.loads((SPECS / f"{name}.json").read_text())
    validate(command, payload)
    out = tmp_path / "r.json"
    assert main([command, "--spec", str(SPECS / f"{name}.json"), "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["echo"]["payload"] == payload
    assert report["provenance"]["schema_version"] == SCHEMA_VERSION


def test_every_command_has_an_example():
    names = {p.stem.split("_")[0] for p in SPECS.glob("*.json")}
    assert names == set(SCHEMAS)


def test_sd_of_delta_is_dimension(tmp_path):
    for d in (1, 2, 3):
        code, rep = run(tmp_path, "sd", {"schema_version": 1, "dim": d, "delta": [{"alpha": [0] * d}]})
        assert code == EXIT_OK and rep["result"]["estimate"] == d


def test_classify_shorthand(tmp_path):
    code, rep = run(tmp_path, "classify", {"schema_version": 1, "d": 4, "k": 4})
    assert code == EXIT_OK and rep["result"]["verdict"] == "Renormalizable"


def test_verdicts_are_not_errors(tmp_path):
    code, rep = run(tmp_path, "classify", {"schema_version": 1, "d": 4, "k": 6})
    assert code == EXIT_OK and rep["result"]["verdict"] == "NonRenormalizable"
    code, rep = run(tmp_path, "wf", {"schema_version": 1, "mode": "gamma_to", "d": 2,
                                     "points": [[0, 0], [0, 3]], "covectors": [[1, 1], [-1, -1]]})
    assert code == EXIT_OK and rep["result"]["verdict"] == "Infeasible"
    code, rep = run(tmp_path, "cover", {"schema_version": 1, "d": 2, "points": [[1, 1], [1, 1]]})
    assert code == EXIT_OK and rep["result"]["verdict"] == "OnDiagonal"


@pytest.mark.parametrize("payload", [
    {"schema_version": 2, "d": 4, "k": 4},
    {"d": 4, "k": 4},
    {"schema_version": 1, "d": 4, "terms": [{"power": "four"}]},
    {"schema_version": 1, "d": 4, "k": 4, "extra": True},
    {"schema_version": "1", "d": 4, "k": 4},
])
def test_schema_problems_exit_2(tmp_path, payload):
    assert run(tmp_path, "classify", payload)[0] == EXIT_SPEC


def test_bad_kernel_text_exits_2(tmp_path):
    assert run(tmp_path, "sd", {"schema_version": 1, "kernel": "pow(x1,", "dim": 1})[0] == EXIT_SPEC


def test_invalid_json_exits_2(tmp_path):
    spec = tmp_path / "bad.json"
    spec.write_text("{not json")
    assert main(["wick", "--spec", str(spec)]) == EXIT_SPEC
    assert main(["wick", "--spec", str(tmp_path / "missing.json")]) == EXIT_SPEC


def test_semantic_problems_exit_2(tmp_path):
    # glue pair outside the joint membership is an input problem, not a numerical one
    payload = {"schema_version": 1, "d": 2, "points": [[0, 0], [1, 0]], "I1": [1], "I2": [2]}
    assert run(tmp_path, "glue", payload)[0] == EXIT_SPEC


def test_numerical_failure_exits_3(tmp_path):
    payload = {"schema_version": 1, "kernel": "pow(abs(x1), -1.5)", "dim": 1, "sd": 0.5,
               "probes": [{"radius": 1.0}]}
    code, rep = run(tmp_path, "extend", payload)
    assert code == EXIT_NUMERIC and rep is None


def test_report_rerun_is_bitwise_identical(tmp_path):
    payload = json.loads((SPECS / "extend_unique.json").read_text())
    payload["random_probes"] = 2
    spec = tmp_path / "job.json"
    spec.write_text(json.dumps(payload))
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["extend", "--spec", str(spec), "--seed", "7", "--out", str(first)]) == EXIT_OK
    assert main(["extend", "--spec", str(first), "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_report_of_other_command_is_rejected(tmp_path):
    code, _ = run(tmp_path, "wick", {"schema_version": 1, "degrees": [2, 2]})
    assert main(["classify", "--spec", str(tmp_path / "report.json")]) == EXIT_SPEC


def test_csv_output(tmp_path):
    out, csv = tmp_path / "r.json", tmp_path / "s.csv"
    assert main(["sd", "--spec", str(SPECS / "sd_power.json"), "--out", str(out), "--csv", str(csv)]) == EXIT_OK
    lines = csv.read_text().splitlines()
    assert lines[0] == "probe,lambda,abs_pairing"
    assert len(lines) > 10


def test_output_written_atomically(tmp_path):
    run(tmp_path, "wick", {"schema_version": 1, "degrees": [2, 2]})
    assert sorted(p.name for p in tmp_path.iterdir()) == ["job.json", "report.json"]


def test_tolerance_profiles(monkeypatch):
    job = JobSpec("wick", {"schema_version": 1, "degrees": [1, 1]})
    monkeypatch.setenv("EGREN_TOL_PROFILE", "strict")
    assert run_job(job).provenance["tolerance_profile"] == "strict"
    monkeypatch.setenv("EGREN_TOL_PROFILE", "bogus")
    with pytest.raises(SpecError):
        run_job(job)
    job.tol = 1e-5
    assert run_job(job).provenance["tolerance"] == 1e-5


def test_console_script(tmp_path):
    out = tmp_path / "r.json"
    res = subprocess.run([sys.executable, "-m", "egren.cli", "wick", "--spec", str(SPECS / "wick.json"),
                          "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert json.loads(out.read_text())["result"]["count"] == 3
