#!/usr/bin/env python3
"""Show how range-table and compressed-index sizes scale with partition count.

Builds datasets with regularly spaced keys at several partition counts and
prints the accounted bytes of the per-partition range table next to the
compressed form.  Regular spacing compresses to a single run, so the
compressed size stays constant while the table grows linearly.
"""
from __future__ import annotations

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from oseba import build_table, compress, generate_synthetic, index_accounted_bytes


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--partitions", type=int, nargs="+",
                        default=[15, 1_500, 150_000])
    parser.add_argument("--capacity", type=int, default=10)
    args = parser.parse_args()

    header = f"{'partitions':>10} {'table bytes':>12} {'cias bytes':>10} {'runs':>5}"
    print(header)
    print("-" * len(header))
    for m in args.partitions:
        dataset = generate_synthetic(m * args.capacity, 0, 1, args.capacity, seed=1)
        table = build_table(dataset)
        cias = compress(table)
        print(f"{m:>10} {index_accounted_bytes(table):>12} "
              f"{index_accounted_bytes(cias):>10} {len(cias.runs):>5}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
