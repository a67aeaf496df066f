"""Run (algorithm x machines) grids and write reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence, Union

from . import __version__
from .engine import simulate
from .metrics import (
    MetricsError,
    MetricsRow,
    Plateau,
    PlateauCriterion,
    detect_plateau,
    machines_to_hold,
    metrics_row,
)
from .stats import ComparisonResult, bonferroni_cutoff, compare, confidence_interval
from .strategies import StrategyConfig, StrategyKind
from .trace import Trace, compute_actual_baseline, load_trace

log = logging.getLogger(__name__)

DEFAULT_MACHINES = (8, 16) + tuple(range(25, 376, 25))


class ExperimentError(ValueError):
    """Invalid experiment configuration or output location."""


def parse_machines(spec: Union[str, Sequence[int]]) -> list[int]:
    """``"1,2,4"``, ``"25..375:25"``, ``"1..9"`` or a list; sorted and unique."""
    if not isinstance(spec, str):
        values = [int(v) for v in spec]
    else:
        values = []
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            m = re.fullmatch(r"(\d+)\.\.(\d+)(?::(\d+))?", part)
            if m:
                lo, hi, step = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
                if step < 1 or hi < lo:
                    raise ExperimentError(f"bad machine range {part!r}")
                values.extend(range(lo, hi + 1, step))
            elif part.isdigit():
                values.append(int(part))
            else:
                raise ExperimentError(f"bad machine count {part!r}")
    if not values:
        raise ExperimentError("no machine counts given")
    if any(v < 1 for v in values):
        raise ExperimentError("machine counts must be >= 1")
    return sorted(set(values))


@dataclass
class ExperimentConfig:
    trace_path: str
    algorithms: list[StrategyConfig]
    machine_counts: list[int] = field(default_factory=lambda: list(DEFAULT_MACHINES))
    plateau: PlateauCriterion = field(default_factory=PlateauCriterion)
    baseline: Union[str, float] = "auto"
    output_dir: str = "results"
    parallel_workers: int = 1
    format: str = "csv"
    trace_format: Optional[str] = None
    alpha: float = 0.05
    overwrite: bool = False

    def __post_init__(self):
        if not self.algorithms:
            raise ExperimentError("no algorithms given")
        if not self.machine_counts or any(m < 1 for m in self.machine_counts):
            raise ExperimentError("machine counts must be non-empty and >= 1")
        if self.format not in ("csv", "json"):
            raise ExperimentError(f"format must be csv or json, got {self.format!r}")
        if self.parallel_workers < 1:
            raise ExperimentError("parallel_workers must be >= 1")
        if not (self.baseline == "auto" or isinstance(self.baseline, (int, float))):
            raise ExperimentError(f"baseline must be 'auto' or milliseconds, got {self.baseline!r}")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ExperimentError(f"duplicate algorithms in {labels}")

    def to_dict(self) -> dict:
        """Settings that determine the outputs (paths and worker count excluded)."""
        return {
            "algorithms": [a.label for a in self.algorithms],
            "machine_counts": list(self.machine_counts),
            "plateau": {"threshold_pct": self.plateau.threshold_pct, "machine_step": self.plateau.machine_step},
            "baseline": self.baseline,
            "format": self.format,
            "trace_format": self.trace_format,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        if "algorithms" in data:
            data["algorithms"] = [
                a if isinstance(a, StrategyConfig) else StrategyConfig.parse(a) for a in data["algorithms"]
            ]
        if "machine_counts" in data:
            data["machine_counts"] = parse_machines(data["machine_counts"])
        if isinstance(data.get("plateau"), dict):
            data["plateau"] = PlateauCriterion(**data["plateau"])
        if isinstance(data.get("baseline"), str) and data["baseline"] != "auto":
            data["baseline"] = float(data["baseline"])
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ExperimentError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)


@dataclass
class Cell:
    algorithm: StrategyConfig
    machines: int
    row: Optional[MetricsRow] = None
    error: Optional[str] = None


@dataclass
class AlgorithmSummary:
    label: str
    plateau: Optional[Plateau]
    plateau_error: Optional[str]
    machines_to_hold: Optional[int]
    machine_reduction_pct: Optional[float]


@dataclass
class ExperimentResults:
    config: ExperimentConfig
    trace: Trace = field(repr=False)
    trace_sha256: str
    baseline: float
    baseline_source: str
    cells: list[Cell]
    comparisons: list[ComparisonResult]
    comparison_count: int
    cutoff: float
    summaries: list[AlgorithmSummary]
    testall_machines: Optional[int]

    @property
    def failed_cells(self) -> list[Cell]:
        return [c for c in self.cells if c.error is not None]


def machine_reduction_pct(machines: int, reference: int) -> float:
    """Machines saved relative to the TestAll machine count, in %."""
    return (1 - machines / reference) * 100


_worker_trace: Optional[Trace] = None


def _init_worker(trace: Trace) -> None:
    global _worker_trace
    _worker_trace = trace


def _run_cell(task: tuple[str, int]) -> tuple[Optional[MetricsRow], Optional[str]]:
    label, machines = task
    try:
        result = simulate(_worker_trace, StrategyConfig.parse(label), machines)
        return metrics_row(result), None
    except Exception as exc:  # per-cell failures are reported, not fatal
        return None, f"{type(exc).__name__}: {exc}"


def _run_cells(trace: Trace, tasks: list[tuple[str, int]], workers: int):
    if workers <= 1 or len(tasks) <= 1:
        _init_worker(trace)
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(trace,)) as pool:
        return list(pool.map(_run_cell, tasks))


def run_experiment(config: ExperimentConfig, trace: Optional[Trace] = None) -> ExperimentResults:
    """Simulate every cell of the grid and derive stats, plateaus and holds."""
    raw = Path(config.trace_path).read_bytes() if trace is None else None
    if trace is None:
        trace = load_trace(config.trace_path, config.trace_format)
        trace_sha = hashlib.sha256(raw).hexdigest()
    else:
        from .trace import serialize_trace

        trace_sha = hashlib.sha256(serialize_trace(trace)).hexdigest()

    if config.baseline == "auto":
        baseline = compute_actual_baseline(trace)
        source = "trace_actuals"
    else:
        baseline = float(config.baseline)
        source = "explicit"

    tasks = [(a.label, m) for a in config.algorithms for m in config.machine_counts]
    log.info("running %d cells with %d worker(s)", len(tasks), config.parallel_workers)
    outcomes = _run_cells(trace, tasks, config.parallel_workers)
    cells = []
    i = 0
    for a in config.algorithms:
        for m in config.machine_counts:
            row, err = outcomes[i]
            i += 1
            if err:
                log.warning("cell %s x %d failed: %s", a.label, m, err)
            cells.append(Cell(a, m, row, err))

    by_key = {(c.algorithm.label, c.machines): c for c in cells}
    pairs = list(combinations(config.algorithms, 2))
    n_comparisons = max(1, len(pairs) * len(config.machine_counts))
    cutoff = bonferroni_cutoff(config.alpha, n_comparisons)
    comparisons = []
    for m in config.machine_counts:
        for a, b in pairs:
            ca, cb = by_key[(a.label, m)], by_key[(b.label, m)]
            if ca.row is None or cb.row is None:
                continue
            comparisons.append(
                compare(a.label, b.label, m, ca.row.feedback_samples, cb.row.feedback_samples, cutoff)
            )

    summaries = []
    holds = {}
    for a in config.algorithms:
        series = {c.machines: c.row.avg_feedback for c in cells if c.algorithm == a and c.row is not None}
        plateau = plateau_err = None
        if series:
            try:
                plateau = detect_plateau(series, baseline, config.plateau)
            except MetricsError as exc:
                plateau_err = str(exc)
        else:
            plateau_err = "no successful cells"
        holds[a.label] = machines_to_hold(series, baseline) if baseline > 0 else None
        summaries.append(AlgorithmSummary(a.label, plateau, plateau_err, holds[a.label], None))

    testall = next((a.label for a in config.algorithms if a.kind is StrategyKind.TEST_ALL), None)
    ref = holds.get(testall) if testall else None
    for s in summaries:
        if ref and s.machines_to_hold is not None:
            s.machine_reduction_pct = machine_reduction_pct(s.machines_to_hold, ref)

    return ExperimentResults(
        config=config,
        trace=trace,
        trace_sha256=trace_sha,
        baseline=baseline,
        baseline_source=source,
        cells=cells,
        comparisons=comparisons,
        comparison_count=n_comparisons,
        cutoff=cutoff,
        summaries=summaries,
        testall_machines=ref,
    )


def _r2(x: Optional[float]) -> Optional[float]:
    return None if x is None else float(f"{x:.2f}")


def summary_dict(results: ExperimentResults) -> dict:
    algos = {}
    for s in results.summaries:
        algos[s.label] = {
            "plateau": None
            if s.plateau is None
            else {
                "machines": s.plateau.machines,
                "avg_feedback_ms": _r2(s.plateau.avg_feedback),
                "plateaued": s.plateau.plateaued,
            },
            "plateau_error": s.plateau_error,
            "machines_to_hold_baseline": s.machines_to_hold,
            "machine_reduction_pct": _r2(s.machine_reduction_pct),
        }
    return {
        "baseline_ms": _r2(results.baseline),
        "baseline_source": results.baseline_source,
        "testall_baseline_machines": results.testall_machines,
        "plateau_criterion": {
            "threshold_pct": results.config.plateau.threshold_pct,
            "machine_step": results.config.plateau.machine_step,
        },
        "bonferroni": {
            "alpha": results.config.alpha,
            "comparisons": results.comparison_count,
            "cutoff": results.cutoff,
        },
        "algorithms": algos,
        "failed_cells": [
            {"algorithm": c.algorithm.label, "machines": c.machines, "error": c.error} for c in results.failed_cells
        ],
    }


def _csv_text(header: Sequence[str], rows: Sequence[Sequence], comment: Optional[str] = None) -> str:
    buf = io.StringIO(newline="")
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def report_files(results: ExperimentResults, format: Optional[str] = None) -> dict[str, str]:
    """Relative path -> file contents for every report output."""
    fmt = format or results.config.format
    ok = [c for c in results.cells if c.row is not None]
    files: dict[str, str] = {}
    cutoff_note = (
        f"bonferroni_cutoff={results.cutoff:.8g} alpha={results.config.alpha:g} "
        f"comparisons={results.comparison_count}"
    )
    if fmt == "csv":
        files["metrics.csv"] = _csv_text(MetricsRow.CSV_HEADER, [c.row.csv_row() for c in ok])
        files["stats.csv"] = _csv_text(
            ComparisonResult.CSV_HEADER, [r.csv_row() for r in results.comparisons], cutoff_note
        )
    else:
        files["metrics.json"] = _json_text([c.row.to_dict() for c in ok])
        files["stats.json"] = _json_text(
            {
                "bonferroni_cutoff": results.cutoff,
                "alpha": results.config.alpha,
                "comparisons": results.comparison_count,
                "rows": [dict(zip(ComparisonResult.CSV_HEADER, r.csv_row())) for r in results.comparisons],
            }
        )
    files["summary.json"] = _json_text(summary_dict(results))

    fb_rows = []
    for c in ok:
        samples = c.row.feedback_samples
        if len(samples) >= 2:
            lo, hi = confidence_interval(samples, 0.95)
            ci = [f"{lo:.2f}", f"{hi:.2f}"]
        else:
            ci = ["", ""]
        fb_rows.append([c.algorithm.label, c.machines, f"{c.row.avg_feedback:.2f}", *ci])
    files["plotdata/feedback_vs_machines.csv"] = _csv_text(
        ("algorithm", "machines", "avg_feedback_ms", "ci95_low_ms", "ci95_high_ms"), fb_rows
    )
    files["plotdata/execution_reduction_vs_machines.csv"] = _csv_text(
        ("algorithm", "machines", "execution_reduction_pct"),
        [[c.algorithm.label, c.machines, f"{c.row.execution_reduction_pct:.2f}"] for c in ok],
    )
    files["plotdata/batch_size_vs_machines.csv"] = _csv_text(
        ("algorithm", "machines", "avg_batch_size"),
        [[c.algorithm.label, c.machines, f"{c.row.avg_batch_size:.2f}"] for c in ok],
    )
    sample_rows = []
    for c in ok:
        skip = set(c.row.untested)
        tested = [ch.change_id for ch in results.trace.changes if ch.change_id not in skip]
        for cid, fb in zip(tested, c.row.feedback_samples):
            sample_rows.append([c.algorithm.label, c.machines, cid, fb])
    files["samples.csv"] = _csv_text(("algorithm", "machines", "change_id", "feedback_ms"), sample_rows)

    config_blob = json.dumps(results.config.to_dict(), sort_keys=True)
    files["manifest.json"] = _json_text(
        {
            "tool": "batchsim",
            "tool_version": __version__,
            "config": results.config.to_dict(),
            "config_sha256": hashlib.sha256(config_blob.encode()).hexdigest(),
            "trace_sha256": results.trace_sha256,
            "changes": len(results.trace),
            "cells": len(results.cells),
            "failed_cells": len(results.failed_cells),
        }
    )
    return files


def emit_report(results: ExperimentResults, out_dir: Union[str, Path], format: Optional[str] = None,
                overwrite: bool = False) -> list[Path]:
    """Write all report files under ``out_dir``.

    Refuses to touch a non-empty directory unless ``overwrite`` is set, so
    earlier outputs are never modified by accident.
    """
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise ExperimentError(f"output directory {out} is not empty (use --overwrite)")
    written = []
    for rel, text in report_files(results, format).items():
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)
    return written


def default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))
