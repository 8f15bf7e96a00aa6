#!/usr/bin/env python3
"""Run the phased workload in both modes and print a comparison table.

Generates a synthetic dataset, replays the same five-phase workload through
the full-scan baseline and the index-pruned path, and reports per-phase
accounted bytes, cumulative partition scans, cumulative wall time, and the
baseline-over-pruned ratios.  Optionally writes the full reports to a
directory as JSON and CSV.
"""
from __future__ import annotations

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from oseba import (
    compare_runs,
    default_workload,
    emit_report,
    generate_synthetic,
    run_workload,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--records", type=int, default=150_000)
    parser.add_argument("--capacity", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--kind", choices=("table", "cias"), default="table")
    parser.add_argument("--evict", action="store_true",
                        help="baseline drops earlier phase results")
    parser.add_argument("--out", help="directory for JSON/CSV reports")
    args = parser.parse_args()

    dataset = generate_synthetic(args.records, 0, 1, args.capacity, seed=args.seed)
    workload = default_workload(dataset)
    print(f"dataset: {dataset.record_count} records in "
          f"{dataset.partition_count} partitions "
          f"({dataset.accounted_bytes} raw bytes)")

    base = run_workload(dataset, workload, "baseline", evict=args.evict)
    pruned = run_workload(dataset, workload, "oseba", index_kind=args.kind)
    cmp = compare_runs(base, pruned)

    header = (f"{'phase':<6} {'base bytes':>12} {'pruned bytes':>12} "
              f"{'mem ratio':>9} {'base scans':>10} {'pruned scans':>12} "
              f"{'speedup':>8}")
    print(header)
    print("-" * len(header))
    for pb, po, pc in zip(base.per_phase, pruned.per_phase, cmp.per_phase):
        print(f"{pc.label:<6} {pb.accounted_bytes:>12} {po.accounted_bytes:>12} "
              f"{pc.memory_ratio:>9.3f} {pb.partition_scans_cum:>10} "
              f"{po.partition_scans_cum:>12} {pc.speedup:>8.2f}")
    print(f"index: {args.kind}, {pruned.index_bytes} bytes")
    print(f"answers agree across modes: {cmp.stats_all_match}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for report in (base, pruned):
            emit_report(report, "json", os.path.join(args.out, f"{report.mode}.json"))
            emit_report(report, "csv", os.path.join(args.out, f"{report.mode}.csv"))
        print(f"reports written to {args.out}")

    return 0 if cmp.stats_all_match else 1


if __name__ == "__main__":
    raise SystemExit(main())
