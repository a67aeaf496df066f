import csv
import json

import pytest

from batchsim.cli import main
from batchsim.experiment import (
    DEFAULT_MACHINES,
    ExperimentConfig,
    ExperimentError,
    emit_report,
    machine_reduction_pct,
    parse_machines,
    run_experiment,
)
from batchsim.strategies import StrategyConfig
from batchsim.trace import SyntheticConfig, generate_synthetic, save_trace
from conftest import make_trace, unit


@pytest.fixture
def five_changes_file(tmp_path):
    trace = make_trace([(f"c{i + 1}", i, unit("ABC")) for i in range(5)], actual_ends=[3, 5, 6, 6, 9])
    path = tmp_path / "five_changes.jsonl"
    save_trace(trace, path)
    return path


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "synth.jsonl"
    save_trace(generate_synthetic(SyntheticConfig(change_count=120, seed=5)), path)
    return path


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1,2,4", [1, 2, 4]),
        ("25..100:25", [25, 50, 75, 100]),
        ("1..3", [1, 2, 3]),
        ("8,1..3,8", [1, 2, 3, 8]),
        ([3, 1], [1, 3]),
    ],
)
def test_parse_machines(text, expected):
    assert parse_machines(text) == expected


@pytest.mark.parametrize("text", ["", "0", "5..1", "a,b", "1..4:0"])
def test_parse_machines_rejects(text):
    with pytest.raises(ExperimentError):
        parse_machines(text)


def test_default_grid():
    assert DEFAULT_MACHINES == (8, 16, 25, 50, 75, 100, 125, 150, 175, 200, 225, 250, 275, 300, 325, 350, 375)


def test_config_validation():
    algos = [StrategyConfig.parse("testall")]
    with pytest.raises(ExperimentError):
        ExperimentConfig("t.jsonl", [])
    with pytest.raises(ExperimentError):
        ExperimentConfig("t.jsonl", algos, machine_counts=[0])
    with pytest.raises(ExperimentError):
        ExperimentConfig("t.jsonl", algos * 2)
    with pytest.raises(ExperimentError):
        ExperimentConfig.from_dict({"trace_path": "t", "algorithms": ["testall"], "colour": "red"})


def test_machine_reduction_pct():
    assert round(machine_reduction_pct(20, 217), 2) == 90.78


def test_batchall_testcase_metrics_rows(five_changes_file, tmp_path):
    cfg = ExperimentConfig(str(five_changes_file), [StrategyConfig.parse("batchall"), StrategyConfig.parse("testcase")],
                           machine_counts=[1])
    res = run_experiment(cfg)
    emit_report(res, tmp_path / "out")
    rows = list(csv.DictReader(open(tmp_path / "out" / "metrics.csv")))
    assert [(r["algorithm"], r["avg_feedback_ms"]) for r in rows] == [("batchall", "4.00"), ("testcase", "3.00")]
    assert res.baseline == (3 + 4 + 4 + 3 + 5) / 5


def test_stats_rows_and_cutoff_header(synth_file, tmp_path):
    cfg = ExperimentConfig(str(synth_file), [StrategyConfig.parse("testall"), StrategyConfig.parse("batchall")],
                           machine_counts=[2, 4, 8])
    emit_report(run_experiment(cfg), tmp_path / "out")
    lines = (tmp_path / "out" / "stats.csv").read_text().splitlines()
    assert lines[0].startswith(f"# bonferroni_cutoff={0.05 / 3:.8g} ")
    assert "comparisons=3" in lines[0]
    assert len(lines) == 2 + 3


def test_summary_and_plotdata(synth_file, tmp_path):
    cfg = ExperimentConfig(str(synth_file), [StrategyConfig.parse(a) for a in ("testall", "batch:2", "batchall")],
                           machine_counts=parse_machines("1..12"))
    cfg.plateau = type(cfg.plateau)(threshold_pct=2, machine_step=1)
    res = run_experiment(cfg)
    emit_report(res, tmp_path / "out", format="json")
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    ta = summary["algorithms"]["testall"]
    assert ta["machines_to_hold_baseline"] == summary["testall_baseline_machines"]
    assert ta["machine_reduction_pct"] == 0.0
    assert summary["bonferroni"]["comparisons"] == 3 * 12
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert len(metrics) == 36 and metrics[0]["execution_reduction_pct"] == "0.00"
    for name in ("feedback_vs_machines", "execution_reduction_vs_machines", "batch_size_vs_machines"):
        rows = list(csv.DictReader(open(tmp_path / "out" / "plotdata" / f"{name}.csv")))
        assert len(rows) == 36
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["tool_version"] and len(manifest["config_sha256"]) == 64


def test_emit_refuses_non_empty_dir(five_changes_file, tmp_path):
    cfg = ExperimentConfig(str(five_changes_file), [StrategyConfig.parse("testall")], machine_counts=[1])
    res = run_experiment(cfg)
    emit_report(res, tmp_path / "o")
    before = (tmp_path / "o" / "metrics.csv").read_bytes()
    with pytest.raises(ExperimentError):
        emit_report(res, tmp_path / "o")
    assert (tmp_path / "o" / "metrics.csv").read_bytes() == before
    emit_report(res, tmp_path / "o", overwrite=True)


def read_tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_cli_run_deterministic_across_workers(synth_file, tmp_path):
    args = ["run", "--trace", str(synth_file), "--algo", "testall", "--algo", "batch:4", "--algo", "testcase",
            "--machines", "1..4", "--plateau-step", "1"]
    assert main(args + ["--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a, b = read_tree(tmp_path / "a"), read_tree(tmp_path / "b")
    assert a == b and "samples.csv" in a


def test_cli_config_file_with_override(synth_file, tmp_path):
    cfg = {"trace_path": str(synth_file), "algorithms": ["testall", "batchall"], "machine_counts": "2..3",
           "plateau": {"threshold_pct": 5, "machine_step": 1}, "format": "json"}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path), "--format", "csv", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "metrics.csv").exists()
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["machine_counts"] == [2, 3]
    assert manifest["config"]["plateau"] == {"threshold_pct": 5, "machine_step": 1}


def test_cli_usage_errors(synth_file, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--trace", str(synth_file), "--algo", "nope"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert main(["run", "--algo", "testall"]) == 1  # no trace
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    out = tmp_path / "full"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    assert main(["run", "--trace", str(synth_file), "--algo", "testall", "--machines", "1", "--out", str(out)]) == 1
    assert (out / "keep.txt").read_text() == "x"


def test_cli_data_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"change_id": "c1"}\n')
    assert main(["validate", "--trace", str(bad)]) == 2
    assert main(["run", "--trace", str(bad), "--algo", "testall", "--out", str(tmp_path / "o")]) == 2
    assert main(["baseline", "--trace", str(tmp_path / "missing.jsonl")]) == 2


def test_cli_partial_failure_exit_code(tmp_path):
    # with no tail flush a single change is never tested, so that cell fails
    path = tmp_path / "one.jsonl"
    save_trace(make_trace([("c1", 0, unit("A"))], actual_ends=[1]), path)
    code = main(["run", "--trace", str(path), "--algo", "testall", "--algo", "batch:4:noflush",
                 "--machines", "1", "--out", str(tmp_path / "o")])
    assert code == 3
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["failed_cells"][0]["algorithm"] == "batch:4:noflush"


def test_cli_gen_validate_baseline(tmp_path, capsys):
    path = tmp_path / "g.csv"
    assert main(["gen", "--out", str(path), "--changes", "50", "--seed", "1", "--tests-per-change", "2,5"]) == 0
    capsys.readouterr()
    assert main(["validate", "--trace", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["changes"] == 50 and report["ok"]
    assert main(["baseline", "--trace", str(path)]) == 0
    assert "ms" in capsys.readouterr().out
    assert main(["gen", "--out", str(tmp_path / "x.jsonl"), "--failure-rate", "2"]) == 1


def test_cli_stats_from_samples(synth_file, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--trace", str(synth_file), "--algo", "testall", "--algo", "batchall",
                 "--machines", "2,4", "--out", str(out)]) == 0
    assert main(["stats", "--samples", str(out / "samples.csv"), "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_bytes() == (out / "stats.csv").read_bytes()


def test_cli_simulate_json(five_changes_file, capsys):
    assert main(["simulate", "--trace", str(five_changes_file), "--algo", "batchall", "--machines", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["strategy"] == "batchall" and len(doc["runs"]) == 9
