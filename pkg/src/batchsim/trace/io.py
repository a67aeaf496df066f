"""Reading and writing traces in the canonical JSONL and CSV formats."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Union

from .model import ChangeSpec, RequestedTest, TestOutcome, Trace, TraceError

CSV_COLUMNS = ("change_id", "commit_time_ms", "actual_end_time_ms", "test_id", "duration_ms", "outcome")
FORMATS = ("canonical_jsonl", "canonical_csv", "chrome_dataset")


@dataclass
class ParseStats:
    rows: int = 0
    dropped_non_terminal: int = 0
    collapsed_duplicates: int = 0
    dropped_statuses: dict = field(default_factory=dict)


@dataclass
class Row:
    line: int
    change_id: str
    commit_time: int
    actual_end_time: Optional[int]
    test_id: str
    duration: int
    outcome: TestOutcome


class _ChangeBuilder:
    __slots__ = ("change_id", "commit_time", "actual_end_time", "tests")

    def __init__(self, row: Row):
        self.change_id = row.change_id
        self.commit_time = row.commit_time
        self.actual_end_time = row.actual_end_time
        self.tests: dict[str, list] = {}


def assemble(rows: Iterable[Row], stats: Optional[ParseStats] = None, epoch: int = 0) -> Trace:
    """Group rows into changes; collapse duplicate (change, test) rows.

    A duplicate keeps the worst outcome and the longest duration. Rows of one
    change must agree on the commit time.
    """
    stats = stats if stats is not None else ParseStats()
    builders: dict[str, _ChangeBuilder] = {}
    for row in rows:
        b = builders.get(row.change_id)
        if b is None:
            b = builders[row.change_id] = _ChangeBuilder(row)
        elif row.commit_time != b.commit_time:
            raise TraceError(
                f"change {row.change_id!r} has inconsistent commit times "
                f"{b.commit_time} and {row.commit_time} (clock error)",
                row.line,
            )
        if row.actual_end_time is not None:
            if row.actual_end_time < row.commit_time:
                raise TraceError(
                    f"change {row.change_id!r} ends at {row.actual_end_time} "
                    f"before its commit {row.commit_time} (clock error)",
                    row.line,
                )
            if b.actual_end_time is None or row.actual_end_time > b.actual_end_time:
                b.actual_end_time = row.actual_end_time
        if row.duration < 0:
            raise TraceError(f"negative duration {row.duration}", row.line)
        prev = b.tests.get(row.test_id)
        if prev is None:
            b.tests[row.test_id] = [row.duration, row.outcome]
        else:
            stats.collapsed_duplicates += 1
            prev[0] = max(prev[0], row.duration)
            prev[1] = prev[1].worst(row.outcome)
    if not builders:
        raise TraceError("empty trace")
    changes = [
        ChangeSpec(
            b.change_id,
            b.commit_time,
            tuple(RequestedTest(t, d, o) for t, (d, o) in b.tests.items()),
            b.actual_end_time,
        )
        for b in builders.values()
    ]
    return Trace.from_changes(changes, epoch)


def _as_text(stream: Union[IO[bytes], IO[str]]) -> IO[str]:
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _int_field(value, name: str, line: int, optional: bool = False) -> Optional[int]:
    if value is None or value == "":
        if optional:
            return None
        raise TraceError(f"missing {name}", line)
    if isinstance(value, bool):
        raise TraceError(f"{name} must be an integer, got {value!r}", line)
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    raise TraceError(f"{name} must be an integer, got {value!r}", line)


def _str_field(value, name: str, line: int) -> str:
    if value is None or value == "":
        raise TraceError(f"missing {name}", line)
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise TraceError(f"{name} must be a string, got {value!r}", line)
    return str(value)


def _row(record: dict, line: int) -> Row:
    try:
        outcome = TestOutcome.parse(_str_field(record.get("outcome"), "outcome", line))
    except ValueError as exc:
        raise TraceError(str(exc), line) from None
    return Row(
        line=line,
        change_id=_str_field(record.get("change_id"), "change_id", line),
        commit_time=_int_field(record.get("commit_time_ms"), "commit_time_ms", line),
        actual_end_time=_int_field(record.get("actual_end_time_ms"), "actual_end_time_ms", line, optional=True),
        test_id=_str_field(record.get("test_id"), "test_id", line),
        duration=_int_field(record.get("duration_ms"), "duration_ms", line),
        outcome=outcome,
    )


def iter_jsonl_rows(text: IO[str]) -> Iterator[Row]:
    for lineno, raw in enumerate(text, start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(record, dict):
            raise TraceError("expected a JSON object", lineno)
        yield _row(record, lineno)


def iter_csv_rows(text: IO[str]) -> Iterator[Row]:
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None:
        return
    header = [h.strip() for h in header]
    if tuple(header) != CSV_COLUMNS:
        raise TraceError(f"unexpected header {header}; want {','.join(CSV_COLUMNS)}", 1)
    for fields in reader:
        lineno = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(CSV_COLUMNS):
            raise TraceError(f"expected {len(CSV_COLUMNS)} fields, got {len(fields)}", lineno)
        yield _row(dict(zip(CSV_COLUMNS, fields)), lineno)


def parse_trace_with_stats(stream, format: str = "canonical_jsonl", **options) -> tuple[Trace, ParseStats]:
    """Parse a byte or text stream; return the trace and ingestion counts."""
    stats = ParseStats()
    text = _as_text(stream)
    if format == "canonical_jsonl":
        rows = iter_jsonl_rows(text)
    elif format == "canonical_csv":
        rows = iter_csv_rows(text)
    elif format == "chrome_dataset":
        from .chrome import iter_chrome_rows

        return iter_chrome_rows(text, stats, **options)
    else:
        raise ValueError(f"unknown trace format {format!r}; choose from {FORMATS}")

    def counted(it):
        for r in it:
            stats.rows += 1
            yield r

    return assemble(counted(rows), stats), stats


def parse_trace(stream, format: str = "canonical_jsonl", **options) -> Trace:
    return parse_trace_with_stats(stream, format, **options)[0]


def guess_format(path: Union[str, Path]) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "canonical_jsonl"
    if suffix == ".csv":
        return "canonical_csv"
    raise ValueError(f"cannot infer trace format from {str(path)!r}; pass it explicitly")


def load_trace(path: Union[str, Path], format: Optional[str] = None, **options) -> Trace:
    fmt = format or guess_format(path)
    with open(path, "rb") as fh:
        return parse_trace(fh, fmt, **options)


def _records(trace: Trace):
    for ch in trace.changes:
        for rt in ch.requested:
            yield ch, rt


def dump_jsonl(trace: Trace, out: IO[str]) -> None:
    for ch, rt in _records(trace):
        record = {"change_id": ch.change_id, "commit_time_ms": ch.commit_time}
        if ch.actual_end_time is not None:
            record["actual_end_time_ms"] = ch.actual_end_time
        record.update(test_id=rt.test_id, duration_ms=rt.duration, outcome=rt.outcome.value)
        out.write(json.dumps(record, separators=(",", ":")) + "\n")


def dump_csv(trace: Trace, out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for ch, rt in _records(trace):
        end = "" if ch.actual_end_time is None else ch.actual_end_time
        writer.writerow([ch.change_id, ch.commit_time, end, rt.test_id, rt.duration, rt.outcome.value])


def serialize_trace(trace: Trace, format: str = "canonical_jsonl") -> bytes:
    buf = io.StringIO(newline="")
    if format == "canonical_jsonl":
        dump_jsonl(trace, buf)
    elif format == "canonical_csv":
        dump_csv(trace, buf)
    else:
        raise ValueError(f"cannot serialize to {format!r}")
    return buf.getvalue().encode("utf-8")


def save_trace(trace: Trace, path: Union[str, Path], format: Optional[str] = None) -> None:
    fmt = format or guess_format(path)
    Path(path).write_bytes(serialize_trace(trace, fmt))
