import json
from pathlib import Path

import pytest

from app.main import EXIT_FAILED, EXIT_INPUT, EXIT_OK, main
from app.schemas import Report

SPECS = Path(__file__).resolve().parents[1] / "specs"


def _run(tmp_path, *argv):
    return main(["--out", str(tmp_path), "--log-level", "WARNING", *argv])


def test_milnor_command_writes_report(tmp_path, capsys):
    assert _run(tmp_path, "milnor", "x^3 + y^3", "--vars", "x,y") == EXIT_OK
    reports = list(tmp_path.glob("*.json"))
    assert len(reports) == 1
    report = Report.model_validate_json(reports[0].read_text(encoding="utf-8"))
    assert report.sections["milnor"]["mu"] == "4"
    assert "mu: 4" in capsys.readouterr().out


def test_reports_are_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _run(first, "verify", str(SPECS / "e1.json"), "--samples", "5", "--seed", "3") == EXIT_OK
    assert _run(second, "verify", str(SPECS / "e1.json"), "--samples", "5", "--seed", "3") == EXIT_OK
    name = "verify_E1.json"
    assert (first / name).read_bytes() == (second / name).read_bytes()
    assert (first / "verify_E1.txt").exists()


def test_verify_reports_options(tmp_path):
    assert _run(tmp_path, "verify", str(SPECS / "e2.json"), "--samples", "3") == EXIT_OK
    data = json.loads((tmp_path / "verify_E2.json").read_text(encoding="utf-8"))
    assert data["options"]["samples"] == 3
    assert data["counters"]["failures"] == 0


def test_cohomology_command(tmp_path):
    assert _run(tmp_path, "cohomology", str(SPECS / "e1.json"), "--deg", "3") == EXIT_OK
    report = Report.model_validate_json((tmp_path / "cohomology_E1.json").read_text(encoding="utf-8"))
    assert report.passed
    assert any(r.p == 1 and r.s == 1 and r.zero for r in report.cohomology)


def test_glue_command(tmp_path):
    assert _run(tmp_path, "glue", str(SPECS / "e1.json"), str(SPECS / "e1_aux.json"), "--deg", "3") == EXIT_OK


def test_missing_file_is_an_input_error(tmp_path):
    assert _run(tmp_path, "verify", str(tmp_path / "missing.json")) == EXIT_INPUT


def test_undeclared_variable_is_an_input_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps({"label": "bad", "fiber_vars": ["x"], "base_vars": ["t"], "phi": ["x^2"], "f": ["t - y"]}),
        encoding="utf-8",
    )
    assert _run(tmp_path / "out", "verify", str(bad)) == EXIT_INPUT


def test_nerve_must_be_closed(tmp_path):
    bad = tmp_path / "atlas.json"
    bad.write_text(
        json.dumps(
            {
                "kind": "atlas",
                "label": "open",
                "model_vars": ["x"],
                "base_vars": ["t"],
                "phi": ["x^2"],
                "charts": [{"map": ["x"]}, {"map": ["x + 1"]}, {"map": ["x + 2"]}],
                "nerve": [[0], [1], [2], [0, 1, 2]],
            }
        ),
        encoding="utf-8",
    )
    assert _run(tmp_path / "out", "cech", str(bad)) == EXIT_INPUT


def test_malformed_json_is_an_input_error(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{"label": "x",\n  "fiber_vars": [}', encoding="utf-8")
    assert _run(tmp_path / "out", "verify", str(bad)) == EXIT_INPUT


def test_failed_check_exits_with_failure(tmp_path):
    bad = tmp_path / "zd.json"
    bad.write_text(
        json.dumps({"label": "zd", "fiber_vars": ["x", "y"], "base_vars": ["t"], "phi": ["x"], "f": ["x", "x*y"]}),
        encoding="utf-8",
    )
    assert _run(tmp_path / "out", "verify", str(bad), "--samples", "2") == EXIT_FAILED


def test_report_summarizes_directory(tmp_path):
    assert _run(tmp_path, "milnor", "x^2", "--vars", "x") == EXIT_OK
    assert _run(tmp_path, "report", str(tmp_path)) == EXIT_OK
    assert (tmp_path / "summary.txt").exists()
    assert (tmp_path / "summary.pdf").exists()
    assert list(tmp_path.glob("summary.xlsx")) or list(tmp_path.glob("summary.csv"))


def test_unknown_command_exits_by_argparse(tmp_path):
    with pytest.raises(SystemExit):
        _run(tmp_path, "frobnicate")
