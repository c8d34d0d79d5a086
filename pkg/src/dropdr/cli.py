"""Command-line entry point: ``dropdr <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 TLB target not achievable.
Set ``DROP_LOG`` to ``error``, ``info`` or ``debug`` for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import data_io
from .config import DEFAULT_CONFIDENCE, DEFAULT_TLB_TARGET
from .data_io import DataError, LabeledDataset
from .downstream import CostModel, CostModelFormatError, fit_cost_model
from .driver import Termination, drop, format_schedule, parse_schedule
from .experiments import (
    METHODS,
    TASKS,
    Ratio,
    bench,
    downstream_model,
    lesion,
    run_dr,
)
from .pca import engine_from_name

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UNACHIEVABLE = 0, 1, 2, 3

log = logging.getLogger("dropdr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_data_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="UCR-style delimited file (label first)")
    src.add_argument("--synthetic", help="m=..,d=..,intrinsic=..[,spectrum=flat|linear|geo:R][,noise=..][,seed=..]")


def _add_common(p: argparse.ArgumentParser) -> None:
    _add_data_args(p)
    p.add_argument("--tlb", type=float, default=DEFAULT_TLB_TARGET, help="TLB target B")
    p.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path")
    p.add_argument("--analytic-time", action="store_true",
                   help="charge operation counts instead of wall-clock time")
    p.add_argument("--task", choices=TASKS, default="knn")
    p.add_argument("--schedule", default=None, help="pct:S:T | fixed:S:T | esc:S:T:F:N")
    p.add_argument("--engine", choices=("exact", "halko", "subspace"), default=None)
    reuse = p.add_mutually_exclusive_group()
    reuse.add_argument("--reuse", dest="reuse", action="store_true", default=None)
    reuse.add_argument("--no-reuse", dest="reuse", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dropdr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run DROP and write a report")
    _add_common(p)
    p.add_argument("--cost-model", help="cost-model file (default: profile on the fly)")
    p.add_argument("--ratio", default="1:1", help="index:query ratio N:M")

    p = sub.add_parser("baseline", help="smallest k for a comparison reducer")
    p.add_argument("method", choices=[m for m in METHODS if m != "drop"])
    _add_common(p)

    p = sub.add_parser("bench", help="end-to-end DR + downstream comparison")
    _add_common(p)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--ratio", action="append", help="index:query ratio N:M (repeatable)")

    p = sub.add_parser("lesion", help="switch off one DROP component at a time")
    _add_common(p)
    p.add_argument("--ratio", default="1:1")

    p = sub.add_parser("aggregate", help="print the table for saved reports")
    p.add_argument("reports", nargs="+", help="report files or directories of *.json")

    p = sub.add_parser("gen", help="write a synthetic dataset")
    p.add_argument("--synthetic", required=True)
    p.add_argument("--classes", type=int, default=0, help="labeled data with this many classes")
    p.add_argument("--out", required=True)

    p = sub.add_parser("profile-cost", help="fit and save a downstream cost model")
    _add_data_args(p)
    p.add_argument("--task", choices=TASKS, default="knn")
    p.add_argument("--dims", required=True, help="comma-separated dimensions, e.g. 1,2,4,8")
    p.add_argument("--q", type=int, default=100)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _load(args) -> tuple[str, np.ndarray]:
    if args.dataset:
        return Path(args.dataset).stem, data_io.parse_delimited(args.dataset).X
    if args.synthetic:
        try:
            spec = data_io.parse_synthetic(args.synthetic)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return "synthetic", data_io.generate_synthetic(spec)
    raise UsageError("one of --dataset or --synthetic is required")


def _validate(args) -> None:
    if hasattr(args, "tlb") and not 0 < args.tlb <= 1:
        raise UsageError(f"--tlb must be in (0, 1], got {args.tlb}")
    if hasattr(args, "confidence") and not 0 < args.confidence < 1:
        raise UsageError(f"--confidence must be in (0, 1), got {args.confidence}")


def _drop_options(args):
    try:
        schedule = parse_schedule(args.schedule) if args.schedule else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    engine = engine_from_name(args.engine) if args.engine else None
    return schedule, engine, args.reuse is not False


def _ratio(text: str) -> Ratio:
    try:
        return Ratio.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_run(args) -> int:
    schedule, engine, reuse = _drop_options(args)
    ratio = _ratio(args.ratio)
    name, X = _load(args)
    q = ratio.queries(X.shape[0]) if args.task == "knn" else 1
    if args.cost_model:
        model = CostModel.load(args.cost_model)
    else:
        model = downstream_model(args.task, X, q, args.analytic_time, seed=args.seed)
    result = drop(X, args.tlb, model, schedule, engine, reuse, args.confidence, args.seed,
                  analytic_time=args.analytic_time)
    report = data_io.report_from_result(
        result, dataset=name, method="drop", B=args.tlb, confidence=args.confidence,
        seed=args.seed, downstream_seconds=model(result.k) if result.k else None,
        ratio=str(ratio), task=args.task, queries=q, schedule=format_schedule(schedule) if schedule else "pct:0.01:0.01",
        analytic_time=args.analytic_time,
    )
    _write_report(report, args.out)
    log.info("k=%s termination=%s dr_seconds=%.4g", result.k, result.termination.value,
             result.total_dr_seconds)
    return EXIT_UNACHIEVABLE if result.termination is Termination.NEVER_ACHIEVED else EXIT_OK


def _write_report(report, out) -> None:
    if out:
        data_io.write_report(report, out)
    else:
        sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")


def cmd_baseline(args) -> int:
    if args.engine or args.schedule or args.reuse is not None:
        raise UsageError(f"--engine, --schedule and --reuse/--no-reuse do not apply to {args.method}")
    name, X = _load(args)
    run = run_dr(args.method, X, args.tlb, confidence=args.confidence, seed=args.seed,
                 analytic_time=args.analytic_time)
    report = data_io.report_from_result(
        run.outcome, dataset=name, method=args.method, B=args.tlb, confidence=args.confidence,
        seed=args.seed, dr_seconds=run.dr_seconds, analytic_time=args.analytic_time,
    )
    _write_report(report, args.out)
    return EXIT_OK if run.found else EXIT_UNACHIEVABLE


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown methods {bad}; expected a subset of {list(METHODS)}")
    return methods


def _save_reports(reports, out: str | None) -> None:
    table = data_io.aggregate(reports)
    if out:
        outdir = Path(out)
        if not outdir.is_dir():
            raise DataError(f"{outdir}: output directory does not exist")
        for n, rep in enumerate(reports):
            slug = f"{n:03d}_{rep.method}_{str(rep.extra.get('ratio', '-')).replace(':', '-')}.json"
            data_io.write_report(rep, outdir / slug)
        (outdir / "table.txt").write_text(table)
    sys.stdout.write(table)


def cmd_bench(args) -> int:
    methods = _methods(args.methods)
    schedule, engine, reuse = _drop_options(args)
    ratios = [_ratio(r) for r in (args.ratio or ["1:1", "1:5", "1:50"])]
    name, X = _load(args)
    reports = bench(X, name, args.tlb, methods=methods, ratios=ratios, task=args.task,
                    confidence=args.confidence, seed=args.seed, analytic_time=args.analytic_time,
                    schedule=schedule, engine=engine, reuse=reuse)
    _save_reports(reports, args.out)
    return EXIT_OK if all(r.k is not None for r in reports) else EXIT_UNACHIEVABLE


def cmd_lesion(args) -> int:
    schedule, engine, reuse = _drop_options(args)
    if engine is not None or args.reuse is not None:
        raise UsageError("lesion toggles --engine and reuse itself; do not pass them")
    ratio = _ratio(args.ratio)
    name, X = _load(args)
    reports = lesion(X, name, args.tlb, ratio=ratio, task=args.task, confidence=args.confidence,
                     seed=args.seed, analytic_time=args.analytic_time, schedule=schedule)
    _save_reports(reports, args.out)
    return EXIT_OK if all(r.k is not None for r in reports) else EXIT_UNACHIEVABLE


def cmd_aggregate(args) -> int:
    paths = []
    for item in map(Path, args.reports):
        paths.extend(sorted(item.glob("*.json")) if item.is_dir() else [item])
    if not paths:
        raise DataError("no report files found")
    sys.stdout.write(data_io.aggregate([data_io.read_report(p) for p in paths]))
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        spec = data_io.parse_synthetic(args.synthetic)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.classes < 0:
        raise UsageError("--classes must be >= 0")
    if args.classes:
        data = data_io.generate_labeled(spec, args.classes)
    else:
        X = data_io.generate_synthetic(spec)
        data = LabeledDataset(np.zeros(spec.m, dtype=np.int64), X)
    data_io.write_delimited(args.out, data)
    return EXIT_OK


def cmd_profile_cost(args) -> int:
    try:
        dims = [int(t) for t in args.dims.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--dims must be comma-separated integers, got {args.dims!r}") from None
    if not dims or min(dims) < 1:
        raise UsageError("--dims must list positive dimensions")
    if args.q < 1 or args.repetitions < 1:
        raise UsageError("--q and --repetitions must be >= 1")
    _, X = _load(args)
    if max(dims) > X.shape[1]:
        raise UsageError(f"--dims exceed the data's {X.shape[1]} columns")
    model = fit_cost_model(args.task, X, dims, q=args.q, repetitions=args.repetitions, seed=args.seed)
    model.save(args.out)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "baseline": cmd_baseline,
    "bench": cmd_bench,
    "lesion": cmd_lesion,
    "aggregate": cmd_aggregate,
    "gen": cmd_gen,
    "profile-cost": cmd_profile_cost,
}


def _configure_logging() -> None:
    level = os.environ.get("DROP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dropdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CostModelFormatError, OSError) as exc:
        print(f"dropdr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"dropdr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
