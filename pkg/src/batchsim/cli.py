"""Command-line entry point: ``batchsim run|gen|validate|stats|baseline|simulate``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from itertools import combinations
from pathlib import Path

from . import __version__
from .engine import simulate
from .experiment import (
    ExperimentConfig,
    ExperimentError,
    emit_report,
    parse_machines,
    run_experiment,
)
from .stats import ComparisonResult, StatsError, bonferroni_cutoff, compare
from .strategies import StrategyConfig
from .trace import (
    FORMATS,
    SyntheticConfig,
    TraceError,
    compute_actual_baseline,
    generate_synthetic,
    guess_format,
    parse_trace_with_stats,
    save_trace,
    validate_trace,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3

log = logging.getLogger("batchsim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _algo(text: str) -> StrategyConfig:
    try:
        return StrategyConfig.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _machines(text: str) -> list[int]:
    try:
        return parse_machines(text)
    except ExperimentError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _baseline(text: str):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"baseline must be 'auto' or milliseconds, got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError("baseline must be positive")
    return value


def _int_pair(text: str) -> tuple[int, int]:
    parts = text.replace("..", ",").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return int(parts[0]), int(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="batchsim", description="Trace-driven simulation of batched CI testing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    run = sub.add_parser("run", help="simulate an (algorithm x machines) grid and write reports")
    run.add_argument("--config", help="JSON file mirroring the experiment config; flags override it")
    run.add_argument("--trace", help="trace file (.jsonl or .csv, or see --trace-format)")
    run.add_argument("--trace-format", choices=FORMATS)
    run.add_argument("--algo", action="append", type=_algo, dest="algorithms",
                     help="testall | batch:<n> | batchall | testcase (repeatable)")
    run.add_argument("--machines", type=_machines, help="LIST or START..END:STEP, comma-combinable")
    run.add_argument("--plateau-threshold", type=float, help="improvement percentage (default 2)")
    run.add_argument("--plateau-step", type=int, help="machine step for the plateau rule (default 25)")
    run.add_argument("--baseline", type=_baseline, help="auto (from trace actuals) or milliseconds")
    run.add_argument("--out", help="output directory (default results)")
    run.add_argument("--workers", type=int, help="parallel simulation processes")
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--alpha", type=float)
    run.add_argument("--overwrite", action="store_true", default=None,
                     help="allow writing into a non-empty output directory")

    gen = sub.add_parser("gen", help="write a synthetic trace")
    gen.add_argument("--out", required=True, help="destination (.jsonl or .csv)")
    defaults = SyntheticConfig()
    gen.add_argument("--changes", type=int, default=defaults.change_count)
    gen.add_argument("--pool", type=int, default=defaults.test_pool_size, help="distinct tests")
    gen.add_argument("--tests-per-change", type=_int_pair, default=defaults.tests_per_change, metavar="LO,HI")
    gen.add_argument("--interarrival-ms", type=float, default=defaults.mean_interarrival)
    gen.add_argument("--duration-ms", type=float, default=defaults.mean_duration)
    gen.add_argument("--failure-rate", type=float, default=defaults.failure_rate)
    gen.add_argument("--history-machines", type=int, default=defaults.history_machines)
    gen.add_argument("--seed", type=int, default=defaults.seed)

    val = sub.add_parser("validate", help="parse a trace and report its shape and problems")
    val.add_argument("--trace", required=True)
    val.add_argument("--trace-format", choices=FORMATS)

    st = sub.add_parser("stats", help="pairwise comparisons from a saved samples.csv")
    st.add_argument("--samples", required=True)
    st.add_argument("--alpha", type=float, default=0.05)
    st.add_argument("--out", help="write stats CSV here instead of stdout")

    base = sub.add_parser("baseline", help="mean actual feedback time of a trace")
    base.add_argument("--trace", required=True)
    base.add_argument("--trace-format", choices=FORMATS)

    sim = sub.add_parser("simulate", help="one cell; dump the full result as JSON")
    sim.add_argument("--trace", required=True)
    sim.add_argument("--trace-format", choices=FORMATS)
    sim.add_argument("--algo", required=True, type=_algo)
    sim.add_argument("--machines", required=True, type=int)
    sim.add_argument("--out", help="JSON destination (default stdout)")
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    overrides = {
        "trace_path": args.trace,
        "trace_format": args.trace_format,
        "algorithms": args.algorithms,
        "machine_counts": args.machines,
        "baseline": args.baseline,
        "output_dir": args.out,
        "parallel_workers": args.workers,
        "format": args.format,
        "alpha": args.alpha,
        "overwrite": args.overwrite,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    plateau = dict(data.get("plateau") or {})
    if args.plateau_threshold is not None:
        plateau["threshold_pct"] = args.plateau_threshold
    if args.plateau_step is not None:
        plateau["machine_step"] = args.plateau_step
    if plateau:
        data["plateau"] = plateau
    if "trace_path" not in data:
        raise UsageError("no trace given (--trace or trace_path in --config)")
    if "algorithms" not in data:
        raise UsageError("no algorithms given (--algo or algorithms in --config)")
    try:
        return ExperimentConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config: {exc}")


def cmd_run(args) -> int:
    config = config_from_args(args)
    out = Path(config.output_dir)
    if out.exists() and any(out.iterdir()) and not config.overwrite:
        raise UsageError(f"output directory {out} is not empty (use --overwrite)")
    results = run_experiment(config)
    emit_report(results, out, config.format, overwrite=config.overwrite)
    failed = results.failed_cells
    print(f"{len(results.cells) - len(failed)}/{len(results.cells)} cells ok; reports in {out}")
    for c in failed:
        print(f"failed: {c.algorithm.label} x {c.machines}: {c.error}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_gen(args) -> int:
    try:
        config = SyntheticConfig(
            change_count=args.changes,
            test_pool_size=args.pool,
            tests_per_change=args.tests_per_change,
            mean_interarrival=args.interarrival_ms,
            mean_duration=args.duration_ms,
            failure_rate=args.failure_rate,
            seed=args.seed,
            history_machines=args.history_machines,
        )
        trace = generate_synthetic(config)
        save_trace(trace, args.out)
    except ValueError as exc:
        raise UsageError(str(exc))
    print(f"wrote {len(trace)} changes to {args.out}")
    return EXIT_OK


def _open_trace(args):
    try:
        fmt = args.trace_format or guess_format(args.trace)
    except ValueError as exc:
        raise UsageError(str(exc))
    with open(args.trace, "rb") as fh:
        return parse_trace_with_stats(fh, fmt)


def cmd_validate(args) -> int:
    trace, parse_stats = _open_trace(args)
    report = validate_trace(trace)
    out = report.to_dict()
    out["parse"] = asdict(parse_stats)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_baseline(args) -> int:
    trace, _ = _open_trace(args)
    value = compute_actual_baseline(trace)
    print(f"{value:.2f} ms ({value / 60000:.2f} min)")
    return EXIT_OK


def read_samples(path) -> dict[int, dict[str, list[float]]]:
    """machines -> algorithm -> feedback samples, algorithms in file order."""
    grid: dict[int, dict[str, list[float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"algorithm", "machines", "feedback_ms"}
        if not reader.fieldnames or not need <= set(reader.fieldnames):
            raise TraceError(f"samples file needs columns {sorted(need)}")
        for i, row in enumerate(reader, start=2):
            try:
                m = int(row["machines"])
                fb = float(row["feedback_ms"])
            except ValueError:
                raise TraceError("bad number in samples row", i)
            grid.setdefault(m, {}).setdefault(row["algorithm"], []).append(fb)
    if not grid:
        raise TraceError("samples file has no rows")
    return grid


def cmd_stats(args) -> int:
    grid = read_samples(args.samples)
    algos: list[str] = []
    for per_m in grid.values():
        for a in per_m:
            if a not in algos:
                algos.append(a)
    pairs = list(combinations(algos, 2))
    count = max(1, len(pairs) * len(grid))
    cutoff = bonferroni_cutoff(args.alpha, count)
    rows = []
    for m in sorted(grid):
        for a, b in pairs:
            if a in grid[m] and b in grid[m]:
                rows.append(compare(a, b, m, grid[m][a], grid[m][b], cutoff).csv_row())
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        fh.write(f"# bonferroni_cutoff={cutoff:.8g} alpha={args.alpha:g} comparisons={count}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ComparisonResult.CSV_HEADER)
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_simulate(args) -> int:
    trace, _ = _open_trace(args)
    if args.machines < 1:
        raise UsageError("--machines must be >= 1")
    text = simulate(trace, args.algo, args.machines).to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "gen": cmd_gen,
    "validate": cmd_validate,
    "stats": cmd_stats,
    "baseline": cmd_baseline,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ExperimentError) as exc:
        print(f"batchsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceError, StatsError, OSError, UnicodeDecodeError) as exc:
        print(f"batchsim: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
