"""Trace data model, ingestion, synthetic generation and validation."""

from .io import (
    FORMATS,
    ParseStats,
    guess_format,
    load_trace,
    parse_trace,
    parse_trace_with_stats,
    save_trace,
    serialize_trace,
)
from .model import ChangeSpec, RequestedTest, TestOutcome, Trace, TraceError
from .synthetic import SyntheticConfig, generate_synthetic
from .validate import ValidationReport, compute_actual_baseline, validate_trace

__all__ = [
    "FORMATS",
    "ChangeSpec",
    "ParseStats",
    "RequestedTest",
    "SyntheticConfig",
    "TestOutcome",
    "Trace",
    "TraceError",
    "ValidationReport",
    "compute_actual_baseline",
    "generate_synthetic",
    "guess_format",
    "load_trace",
    "parse_trace",
    "parse_trace_with_stats",
    "save_trace",
    "serialize_trace",
    "validate_trace",
]
