"""Trace-driven simulation of batched CI testing on parallel machines."""

from .culprit import culprit_run_bounds, plan_culprit
from .engine import SimResult, replay_order_check, simulate
from .strategies import StrategyConfig, StrategyKind, form_batch
from .trace import (
    ChangeSpec,
    RequestedTest,
    SyntheticConfig,
    TestOutcome,
    Trace,
    compute_actual_baseline,
    generate_synthetic,
    load_trace,
    parse_trace,
    validate_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ChangeSpec",
    "RequestedTest",
    "SimResult",
    "StrategyConfig",
    "StrategyKind",
    "SyntheticConfig",
    "TestOutcome",
    "Trace",
    "compute_actual_baseline",
    "culprit_run_bounds",
    "form_batch",
    "generate_synthetic",
    "load_trace",
    "parse_trace",
    "plan_culprit",
    "replay_order_check",
    "simulate",
    "validate_trace",
]
