from __future__ import annotations

from dataclasses import dataclass, field

from .model import TestOutcome, Trace, TraceError


@dataclass
class ValidationReport:
    changes: int = 0
    distinct_tests: int = 0
    test_executions: int = 0
    failing_records: int = 0
    total_execution_time: int = 0
    changes_with_actuals: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "changes": self.changes,
            "distinct_tests": self.distinct_tests,
            "test_executions": self.test_executions,
            "failing_records": self.failing_records,
            "total_execution_time_ms": self.total_execution_time,
            "changes_with_actuals": self.changes_with_actuals,
            "violations": list(self.violations),
            "ok": self.ok,
        }


def validate_trace(trace: Trace) -> ValidationReport:
    """Summarize a trace and list invariant violations instead of raising."""
    report = ValidationReport()
    changes = getattr(trace, "changes", None) or ()
    if not changes:
        report.violations.append("empty trace")
        return report
    tests = set()
    seen_ids = set()
    prev = None
    for ch in changes:
        report.changes += 1
        if ch.change_id in seen_ids:
            report.violations.append(f"duplicate change id {ch.change_id!r}")
        seen_ids.add(ch.change_id)
        key = (ch.commit_time, ch.change_id)
        if prev is not None and key < prev:
            report.violations.append(f"change {ch.change_id!r} out of commit order")
        prev = key
        if not ch.requested:
            report.violations.append(f"change {ch.change_id!r} requests no tests")
        if ch.actual_end_time is not None:
            report.changes_with_actuals += 1
            if ch.actual_end_time < ch.commit_time:
                report.violations.append(f"change {ch.change_id!r} ends before its commit")
        local = set()
        for rt in ch.requested:
            if rt.test_id in local:
                report.violations.append(f"change {ch.change_id!r} requests {rt.test_id!r} twice")
            local.add(rt.test_id)
            tests.add(rt.test_id)
            report.test_executions += 1
            report.total_execution_time += rt.duration
            if rt.duration < 0:
                report.violations.append(f"change {ch.change_id!r} test {rt.test_id!r} has negative duration")
            if rt.outcome is TestOutcome.FAIL:
                report.failing_records += 1
    report.distinct_tests = len(tests)
    return report


def compute_actual_baseline(trace: Trace) -> float:
    """Mean observed feedback time, ``actual_end_time - commit_time``."""
    if not trace.changes:
        raise TraceError("empty trace")
    total = 0
    for ch in trace.changes:
        if ch.actual_end_time is None:
            raise TraceError(f"change {ch.change_id!r} has no actual_end_time")
        total += ch.actual_end_time - ch.commit_time
    return total / len(trace.changes)
