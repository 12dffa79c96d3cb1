import json
from pathlib import Path

from click.testing import CliRunner

from guidenav.cli import main
from guidenav.suites import destination_suite, write_suite

DEMO_DIR = Path(__file__).parent.parent / "src" / "guidenav" / "fixtures" / "scenarios" / "demo"
MAPS_DIR = Path(__file__).parent.parent / "src" / "guidenav" / "fixtures" / "maps"


def test_map_validate_ok():
    runner = CliRunner()
    result = runner.invoke(main, ["map", "validate", str(MAPS_DIR / "office.map")])
    assert result.exit_code == 0, result.output
    assert "OK" in result.output
    assert "26 nodes" in result.output


def test_map_validate_flags_geometry(tmp_path):
    bad = tmp_path / "bad.map"
    bad.write_text("MAP v1\nNODE A 0 0\nNODE B 4 0\nEDGE A B dist=5 dir=0\nEDGE B A dist=5 dir=180\n")
    runner = CliRunner()
    result = runner.invoke(main, ["map", "validate", str(bad)])
    assert result.exit_code == 1
    assert "VIOLATION" in result.output


def test_map_validate_parse_error(tmp_path):
    broken = tmp_path / "broken.map"
    broken.write_text("MAP v1\nEDGE A B dist=4 dir=45\n")
    runner = CliRunner()
    result = runner.invoke(main, ["map", "validate", str(broken)])
    assert result.exit_code == 1
    assert "PARSE ERROR" in result.output


def test_run_demo_scenario(tmp_path):
    runner = CliRunner()
    report_path = tmp_path / "report.json"
    result = runner.invoke(
        main,
        ["run", "--scenario", str(DEMO_DIR / "office_kidnap.json"), "--seed", "3", "--report", str(report_path)],
    )
    assert result.exit_code == 0, result.output
    assert "success=True" in result.output
    assert "detected_kidnap=True" in result.output
    payload = json.loads(report_path.read_text())
    assert payload["scenario"] == "office_kidnap"
    assert payload["transcript"]


def test_run_expectation_failure_sets_exit_code(tmp_path):
    spec_path = tmp_path / "wrong.json"
    spec_path.write_text(
        json.dumps(
            {
                "name": "wrong",
                "map_path": "builtin:house",
                "start_node": "entry",
                "script": [{"say": "take me to the kitchen"}],
                "expected": {"goal_node": "stairs"},
            }
        )
    )
    runner = CliRunner()
    result = runner.invoke(main, ["run", "--scenario", str(spec_path)])
    assert result.exit_code == 1
    assert "EXPECTATION FAILED" in result.output


def test_suite_command(tmp_path):
    write_suite(destination_suite("house", 3, seed=11), tmp_path / "suite")
    runner = CliRunner()
    report_path = tmp_path / "suite_report.json"
    result = runner.invoke(
        main,
        ["suite", "--dir", str(tmp_path / "suite"), "--reps", "2", "--seed-base", "5", "--report", str(report_path)],
    )
    assert result.exit_code == 0, result.output
    assert "== Navigation success ==" in result.output
    assert "TOTAL  6/6 (100.0%)" in result.output
    payload = json.loads(report_path.read_text())
    assert payload["metrics"]["navigation"]["runs"] == 6


def test_suite_demo_directory():
    runner = CliRunner()
    result = runner.invoke(main, ["suite", "--dir", str(DEMO_DIR)])
    assert result.exit_code == 0, result.output
    assert "detection  1/1 (100.0%)" in result.output
