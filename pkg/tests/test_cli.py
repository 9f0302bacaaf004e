import json

import pytest

from sgreplan.cli import bundled_suite_path, main
from sgreplan.simworld.scenarios import dump_suite, load_suite, save_suite


@pytest.fixture(scope="module")
def small_suite(tmp_path_factory, suite):
    path = tmp_path_factory.mktemp("suite") / "heat.yaml"
    save_suite(suite.filter(lambda s: s.task.name == "heat_potato"), path)
    return path


def test_bundled_suite_matches_builtin(suite):
    assert bundled_suite_path().read_text() == dump_suite(suite)


def test_run_writes_report_csv_and_traces(small_suite, tmp_path, capsys):
    report = tmp_path / "out" / "report.json"
    buf = tmp_path / "buffer.jsonl"
    rc = main(["run", "--suite", str(small_suite), "--strategies", "none,proactive",
               "--report", str(report), "--traces", str(tmp_path / "traces"),
               "--buffer", str(buf), "--seed", "2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "section,threshold,toggles,strategy,SR,FDR,TET,episodes"
    doc = json.loads(report.read_text())
    assert doc["seed"] == 2 and [r["strategy"] for r in doc["sections"][0]["rows"]] == ["none", "proactive"]
    assert report.with_suffix(".csv").read_text() == out
    n_eps = len(load_suite(small_suite).scenarios) * 2
    assert len(list((tmp_path / "traces").rglob("*.jsonl"))) == n_eps
    assert buf.exists()
    # second run reuses the saved buffer and reproduces the report
    rc = main(["run", "--suite", str(small_suite), "--strategies", "none,proactive",
               "--report", str(tmp_path / "again.json"), "--buffer", str(buf), "--seed", "2"])
    assert rc == 0 and (tmp_path / "again.json").read_text() == report.read_text()


def test_sweep_flag_adds_sections(small_suite, tmp_path):
    report = tmp_path / "r.json"
    assert main(["run", "--suite", str(small_suite), "--strategies", "proactive", "--sweep",
                 "--report", str(report)]) == 0
    labels = [s["label"] for s in json.loads(report.read_text())["sections"]]
    assert labels == ["benchmark", "threshold=0.90", "threshold=0.85", "threshold=0.80"]


@pytest.mark.parametrize("argv", [
    ["--threshold", "1.5"],
    ["--threshold", "0"],
    ["--strategies", "sometimes"],
    ["--strategies", "none:object_count"],
    ["--noise", "2"],
    ["--suite", "/nonexistent/suite.yaml"],
])
def test_configuration_errors_exit_nonzero(small_suite, tmp_path, argv, capsys):
    base = ["run", "--suite", str(small_suite), "--report", str(tmp_path / "r.json")]
    assert main(base + argv) == 2
    assert "configuration error" in capsys.readouterr().err
    assert not (tmp_path / "r.json").exists()


def test_bad_buffer_file(small_suite, tmp_path, capsys):
    buf = tmp_path / "b.jsonl"
    buf.write_text('{"vocab_version": "old", "created_at": "x", "record_count": 0}\n')
    assert main(["run", "--suite", str(small_suite), "--buffer", str(buf),
                 "--report", str(tmp_path / "r.json")]) == 2
    assert "old" in capsys.readouterr().err
