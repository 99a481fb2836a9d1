"""CLI subcommands: run, scenario validate (serve is exercised via the gateway tests)."""

import json

from dynaplan.cli import main
from dynaplan.scenarios import scenario_to_doc, static_corpus


def test_run_builtin_corpus_csv(tmp_path, capsys):
    out = tmp_path / "report.csv"
    code = main(["run", "--trials", "1", "--seed", "0", "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("scenario_id,trials,plan_rate,success_rate")
    assert len(lines) == 13  # header + 12 builtin scenarios
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[2] == "1.0000" and cells[3] == "1.0000"


def test_run_with_corpus_dir(tmp_path, capsys):
    scenario = static_corpus()[0]
    (tmp_path / "s.json").write_text(json.dumps(scenario_to_doc(scenario)))
    code = main(["run", "--corpus", str(tmp_path), "--trials", "1", "--format", "table"])
    assert code == 0
    assert scenario.id in capsys.readouterr().out


def test_run_remote_requires_url(capsys):
    code = main(["run", "--planner", "remote", "--trials", "1"])
    assert code == 2
    assert "--remote-url" in capsys.readouterr().err


def test_run_bad_corpus(tmp_path, capsys):
    code = main(["run", "--corpus", str(tmp_path / "nope")])
    assert code == 2


def test_scenario_validate_ok(tmp_path, capsys):
    scenario = static_corpus()[0]
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(scenario_to_doc(scenario)))
    assert main(["scenario", "validate", str(path)]) == 0
    assert "OK" in capsys.readouterr().out


def test_scenario_validate_invalid(tmp_path, capsys):
    path = tmp_path / "bad.json"
    doc = scenario_to_doc(static_corpus()[0])
    doc.pop("goal")
    path.write_text(json.dumps(doc))
    assert main(["scenario", "validate", str(path)]) == 1
    assert "INVALID" in capsys.readouterr().err


def test_scenario_validate_missing_file(capsys):
    assert main(["scenario", "validate", "/does/not/exist.json"]) == 2
