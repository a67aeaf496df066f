"""Adapter for the published Chrome test-result dataset (CSV export).

Column mapping, one row per test execution:

=====================  ==========================================
dataset column         trace field
=====================  ==========================================
``build_id``           ``change_id`` (one change per build)
``build_start_time``   ``commit_time`` (relative to the earliest)
``build_end_time``     ``actual_end_time``
``test_id``            ``test_id``
``test_duration``      ``duration`` (seconds unless configured)
``final_result``       ``outcome``
``status``             rows with a non-terminal status are dropped
=====================  ==========================================

Timestamps may be ISO-8601 strings or numeric epoch seconds. Builds are kept
separate even when several belong to the same change list; pass
``change_column="change_id"`` (or whatever column identifies the change list)
to merge them instead. Dropped rows are counted per status/result value in
the returned :class:`~batchsim.trace.io.ParseStats`.
"""

from __future__ import annotations

import csv
from datetime import datetime, timezone
from typing import IO, Optional

from .io import ParseStats, Row, assemble
from .model import TestOutcome, Trace, TraceError

PASS_RESULTS = frozenset({"pass", "passed", "success", "expected", "ok"})
FAIL_RESULTS = frozenset({"fail", "failed", "failure", "crash", "timeout", "abort", "unexpected", "error"})
NON_TERMINAL_STATUSES = frozenset(
    {"scheduled", "pending", "started", "running", "canceled", "cancelled", "skip", "skipped", "not_run"}
)

DEFAULT_COLUMNS = {
    "change": "build_id",
    "start": "build_start_time",
    "end": "build_end_time",
    "test": "test_id",
    "duration": "test_duration",
    "result": "final_result",
    "status": "status",
}

_UNIT_MS = {"ms": 1, "s": 1000, "min": 60_000}


def parse_timestamp_ms(value: str) -> int:
    value = value.strip()
    try:
        return round(float(value) * 1000)
    except ValueError:
        pass
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return round(dt.timestamp() * 1000)


def iter_chrome_rows(
    text: IO[str],
    stats: ParseStats,
    *,
    change_column: Optional[str] = None,
    duration_unit: str = "s",
    columns: Optional[dict] = None,
) -> tuple[Trace, ParseStats]:
    cols = dict(DEFAULT_COLUMNS)
    if columns:
        cols.update(columns)
    if change_column:
        cols["change"] = change_column
    if duration_unit not in _UNIT_MS:
        raise ValueError(f"duration_unit must be one of {sorted(_UNIT_MS)}")
    scale = _UNIT_MS[duration_unit]

    reader = csv.DictReader(text)
    if reader.fieldnames is None:
        raise TraceError("empty trace")
    required = [cols[k] for k in ("change", "start", "test", "duration", "result")]
    missing = [c for c in required if c not in reader.fieldnames]
    if missing:
        raise TraceError(f"missing columns {missing}", 1)
    has_status = cols["status"] in reader.fieldnames
    has_end = cols["end"] in reader.fieldnames

    rows = []
    for rec in reader:
        line = reader.line_num
        stats.rows += 1
        if has_status:
            status = (rec[cols["status"]] or "").strip().lower()
            if status in NON_TERMINAL_STATUSES:
                stats.dropped_non_terminal += 1
                stats.dropped_statuses[status] = stats.dropped_statuses.get(status, 0) + 1
                continue
        result = (rec[cols["result"]] or "").strip().lower()
        if result in PASS_RESULTS:
            outcome = TestOutcome.PASS
        elif result in FAIL_RESULTS:
            outcome = TestOutcome.FAIL
        else:
            stats.dropped_non_terminal += 1
            key = result or "<empty>"
            stats.dropped_statuses[key] = stats.dropped_statuses.get(key, 0) + 1
            continue
        try:
            start = parse_timestamp_ms(rec[cols["start"]])
            end_raw = rec[cols["end"]] if has_end else ""
            end = parse_timestamp_ms(end_raw) if end_raw and end_raw.strip() else None
            duration = round(float(rec[cols["duration"]]) * scale)
        except (TypeError, ValueError) as exc:
            raise TraceError(f"malformed row: {exc}", line) from None
        change_id = (rec[cols["change"]] or "").strip()
        test_id = (rec[cols["test"]] or "").strip()
        if not change_id or not test_id:
            raise TraceError("missing change or test id", line)
        rows.append(Row(line, change_id, start, end, test_id, duration, outcome))

    if not rows:
        raise TraceError("empty trace")
    epoch = min(r.commit_time for r in rows)
    for r in rows:
        r.commit_time -= epoch
        if r.actual_end_time is not None:
            r.actual_end_time -= epoch
    return assemble(rows, stats, epoch=epoch), stats
