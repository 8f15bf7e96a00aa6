"""Command-line entry point.

Verbs: gen, ingest, index build/show, query, analyze stats/ma/dist/split/
event, bench.  Results print to stdout as JSON unless --out names a file;
bench writes per-mode reports plus a comparison into a directory.  Exit
codes: 0 success, 1 validation or usage error, 2 I/O error.  All
randomness flows through explicit --seed flags, so identical invocations
produce identical bytes (bench wall-clock fields excepted).  The
OSEBA_THREADS environment variable caps scan parallelism; 0 or unset
means the implementation default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import analysis, bench, dataset as ds, range_index as rix
from .errors import OsebaError


class CliUsageError(OsebaError):
    """Bad command line; the message names the offending token."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise CliUsageError(message)


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_periods(text: str) -> list[tuple[int, int]]:
    periods = []
    for token in text.split(","):
        token = token.strip()
        lo, sep, hi = token.partition(":")
        if not sep:
            raise CliUsageError(f"period {token!r} must look like lo:hi")
        try:
            periods.append((int(lo, 10), int(hi, 10)))
        except ValueError:
            raise CliUsageError(f"period {token!r} must use base-10 integers") from None
    return periods


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliUsageError(f"ratios {text!r} must be three comma-separated numbers")
    try:
        a, b, c = (float(p) for p in parts)
    except ValueError:
        raise CliUsageError(f"ratios {text!r} must be numbers") from None
    return (a, b, c)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="oseba",
        description=(
            "Partitioned in-memory time-series engine: range-pruned selective "
            "analysis and a full-scan baseline to compare it against."
        ),
        epilog=(
            "Environment: OSEBA_THREADS caps scan parallelism "
            "(0 or unset = implementation default)."
        ),
    )
    sub = parser.add_subparsers(dest="verb", required=True, metavar="verb")

    p = sub.add_parser("gen", help="generate a deterministic synthetic dataset CSV")
    p.add_argument("--n", type=int, required=True, help="record count")
    p.add_argument("--key-start", type=int, default=0)
    p.add_argument("--key-stride", type=int, default=1)
    p.add_argument("--capacity", type=int, required=True, help="records per partition")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV path to write")

    p = sub.add_parser("ingest", help="load a CSV and print a validation report")
    p.add_argument("--data", required=True, help="CSV path")
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--out", default=None, help="write the report here instead of stdout")

    p = sub.add_parser("index", help="build or inspect a partition range index")
    index_sub = p.add_subparsers(dest="index_verb", required=True, metavar="build|show")

    b = index_sub.add_parser("build", help="build an index from a CSV and save it")
    b.add_argument("--data", required=True)
    b.add_argument("--capacity", type=int, default=10000)
    b.add_argument("--kind", choices=rix_kinds(), default="table")
    b.add_argument("--out", required=True, help="index JSON path to write")

    s = index_sub.add_parser("show", help="print a saved index with its size")
    s.add_argument("--index", required=True)
    s.add_argument("--out", default=None)

    p = sub.add_parser("query", help="resolve a key range against a saved index")
    p.add_argument("--index", required=True)
    p.add_argument("--lo", type=int, required=True)
    p.add_argument("--hi", type=int, required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("analyze", help="run one analysis over a selection")
    an_sub = p.add_subparsers(dest="analysis_verb", required=True,
                              metavar="stats|ma|dist|split|event")

    def _common(sp, with_range=True):
        sp.add_argument("--data", required=True)
        sp.add_argument("--capacity", type=int, default=10000)
        sp.add_argument("--index", default=None,
                        help="saved index path; omitted builds a table in memory")
        sp.add_argument("--field", choices=ds.MEASUREMENT_FIELDS, default="temperature")
        sp.add_argument("--out", default=None)
        if with_range:
            sp.add_argument("--lo", type=int, required=True)
            sp.add_argument("--hi", type=int, required=True)

    sp = an_sub.add_parser("stats", help="count, max, mean, stddev over a range")
    _common(sp)

    sp = an_sub.add_parser("ma", help="trailing moving average over a range")
    _common(sp)
    sp.add_argument("--window", type=int, required=True)

    sp = an_sub.add_parser("dist", help="positional distance between two ranges")
    _common(sp, with_range=False)
    sp.add_argument("--a-lo", type=int, required=True)
    sp.add_argument("--a-hi", type=int, required=True)
    sp.add_argument("--b-lo", type=int, required=True)
    sp.add_argument("--b-hi", type=int, required=True)
    sp.add_argument("--pointwise", action="store_true",
                    help="include the pointwise vector even when large")

    sp = an_sub.add_parser("split", help="assign periods to training/tests/validation")
    _common(sp, with_range=False)
    sp.add_argument("--periods", required=True,
                    help="comma-separated closed ranges, e.g. 0:99,100:199")
    sp.add_argument("--ratios", default="0.6,0.2,0.2",
                    help="train,test,validation fractions summing to 1")
    sp.add_argument("--seed", type=int, required=True)

    sp = an_sub.add_parser("event", help="distribution shift around an event key")
    _common(sp, with_range=False)
    sp.add_argument("--event-key", type=int, required=True)
    sp.add_argument("--before", type=int, required=True, help="keys before the event")
    sp.add_argument("--after", type=int, required=True, help="keys from the event on")
    sp.add_argument("--bins", type=int, default=10)

    p = sub.add_parser("bench", help="run both modes over a workload and compare")
    p.add_argument("--data", required=True)
    p.add_argument("--capacity", type=int, default=10000)
    p.add_argument("--workload", default="default",
                   help="'default' or a workload JSON path")
    p.add_argument("--kind", choices=rix_kinds(), default="table",
                   help="index kind for the pruned mode")
    p.add_argument("--evict", action="store_true",
                   help="baseline releases the previous phase's output")
    p.add_argument("--out", required=True, help="directory for report files")

    return parser


def rix_kinds() -> tuple[str, ...]:
    return bench.INDEX_KINDS


def _load_index_or_build(ns, dataset) -> rix.Index:
    if ns.index:
        return rix.load_index(ns.index)
    return rix.build_table(dataset)


def _cmd_gen(ns) -> int:
    data = ds.generate_synthetic(ns.n, ns.key_start, ns.key_stride, ns.capacity, ns.seed)
    ds.export_csv(data, ns.out)
    _emit(
        {
            "records": data.record_count,
            "partitions": data.partition_count,
            "key_lo": data.key_lo,
            "key_hi": data.key_hi,
            "path": ns.out,
        },
        None,
    )
    return 0


def _cmd_ingest(ns) -> int:
    data = ds.ingest_csv(ns.data, ns.capacity)
    _emit(
        {
            "records": data.record_count,
            "partitions": data.partition_count,
            "capacity": data.capacity,
            "key_lo": data.key_lo,
            "key_hi": data.key_hi,
            "accounted_bytes": data.accounted_bytes,
        },
        ns.out,
    )
    return 0


def _cmd_index(ns) -> int:
    if ns.index_verb == "build":
        data = ds.ingest_csv(ns.data, ns.capacity)
        index = rix.build_table(data)
        if ns.kind == "cias":
            index = rix.compress(index)
        rix.save_index(index, ns.out)
        payload = rix.index_to_json(index)
        summary = {
            "kind": payload["kind"],
            "partitions": data.partition_count,
            "accounted_bytes": rix.index_accounted_bytes(index),
            "path": ns.out,
        }
        if payload["kind"] == "cias":
            summary["runs"] = len(payload["runs"])
        else:
            summary["entries"] = len(payload["entries"])
        _emit(summary, None)
        return 0
    index = rix.load_index(ns.index)
    payload = rix.index_to_json(index)
    payload["accounted_bytes"] = rix.index_accounted_bytes(index)
    _emit(payload, ns.out)
    return 0


def _cmd_query(ns) -> int:
    index = rix.load_index(ns.index)
    if isinstance(index, rix.PartitionRangeTable):
        interval = rix.table_lookup_range(index, ns.lo, ns.hi)
    else:
        interval = rix.cias_lookup_range(index, ns.lo, ns.hi)
    if interval is None:
        _emit({"first_ordinal": None, "last_ordinal": None, "overlap": 0}, ns.out)
    else:
        first, last = interval
        _emit(
            {"first_ordinal": first, "last_ordinal": last, "overlap": last - first + 1},
            ns.out,
        )
    return 0


def _cmd_analyze(ns) -> int:
    data = ds.ingest_csv(ns.data, ns.capacity)
    index = _load_index_or_build(ns, data)
    verb = ns.analysis_verb
    if verb == "stats":
        selection = analysis.select_period(data, index, ns.lo, ns.hi)
        _emit(analysis.descriptive_stats(selection, ns.field).to_json(), ns.out)
    elif verb == "ma":
        selection = analysis.select_period(data, index, ns.lo, ns.hi)
        points = analysis.moving_average(selection, ns.window, ns.field)
        _emit(
            {
                "field": ns.field,
                "window": ns.window,
                "points": [[k, v] for k, v in points],
            },
            ns.out,
        )
    elif verb == "dist":
        sel_a = analysis.select_period(data, index, ns.a_lo, ns.a_hi)
        sel_b = analysis.select_period(data, index, ns.b_lo, ns.b_hi)
        report = analysis.distance_comparison(sel_a, sel_b, ns.field)
        _emit(report.to_json(include_pointwise=True if ns.pointwise else None), ns.out)
    elif verb == "split":
        result = analysis.split_tvt(
            data, index, _parse_periods(ns.periods), _parse_ratios(ns.ratios), ns.seed
        )
        _emit(result.assignment.to_json(), ns.out)
    elif verb == "event":
        report = analysis.event_analysis(
            data, index, ns.event_key, ns.before, ns.after, ns.field, ns.bins
        )
        _emit(report.to_json(), ns.out)
    else:  # unreachable, argparse enforces the choices
        raise CliUsageError(f"unknown analysis {verb!r}")
    return 0


def _cmd_bench(ns) -> int:
    data = ds.ingest_csv(ns.data, ns.capacity)
    if ns.workload == "default":
        workload = bench.default_workload(data)
    else:
        workload = bench.load_workload(ns.workload)
    baseline = bench.run_workload(data, workload, bench.BASELINE_MODE, evict=ns.evict)
    oseba = bench.run_workload(data, workload, bench.OSEBA_MODE, index_kind=ns.kind)
    os.makedirs(ns.out, exist_ok=True)
    for report in (baseline, oseba):
        bench.emit_report(report, "json", os.path.join(ns.out, f"{report.mode}.json"))
        bench.emit_report(report, "csv", os.path.join(ns.out, f"{report.mode}.csv"))
    comparison = bench.compare_runs(baseline, oseba)
    comparison_path = os.path.join(ns.out, "comparison.json")
    with open(comparison_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(comparison.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(comparison.to_json(), None)
    if not comparison.stats_all_match:
        print(
            "error: baseline and pruned runs disagree on phase statistics",
            file=sys.stderr,
        )
        return 1
    return 0


_DISPATCH = {
    "gen": _cmd_gen,
    "ingest": _cmd_ingest,
    "index": _cmd_index,
    "query": _cmd_query,
    "analyze": _cmd_analyze,
    "bench": _cmd_bench,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return _DISPATCH[ns.verb](ns)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OsebaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
