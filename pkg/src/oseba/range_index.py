"""Partition range metadata in two shapes: an explicit table and a
run-compressed form.

Both answer the same question: which partition's half-open [key_lo,
key_hi) range contains an integer key, and which contiguous stretch of
partitions a closed query range [lo, hi] touches.  The table keeps one
entry per partition and binary-searches it.  The compressed form (kind
"cias" in the file format) collapses consecutive equal-width partitions
into (start_key, stride, count, base_ordinal) runs and keeps an anchor
search list: one start key per run plus a terminal exclusive end key.  A
lookup binary-searches the anchors for the right run, then lands on the
exact partition with one integer divide.

Index sizes are charged deterministically: 24 bytes per table entry
(three 8-byte integers), 32 bytes per run plus 8 per anchor.  That makes
"how much memory does the metadata cost" an assertable number instead of
an allocator artifact.
"""

from __future__ import annotations

import json
import os
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence, Union

from .errors import (
    EmptyInputError,
    IndexFormatError,
    InvalidRangeError,
    TilingGapError,
)

TABLE_ENTRY_BYTES = 24
RUN_BYTES = 32
ANCHOR_BYTES = 8
INDEX_FORMAT_VERSION = 1


class ComparisonCounter:
    """Counts index entries probed during a lookup."""

    __slots__ = ("probes",)

    def __init__(self) -> None:
        self.probes = 0


@dataclass(frozen=True)
class RangeEntry:
    """One partition's key range: [key_lo, key_hi)."""

    ordinal: int
    key_lo: int
    key_hi: int


class PartitionRangeTable:
    """Ordered per-partition range entries, binary-searchable by key."""

    __slots__ = ("entries", "_los", "_his")

    def __init__(self, entries: Sequence[RangeEntry | Sequence[int]]):
        normalized = tuple(
            e if isinstance(e, RangeEntry) else RangeEntry(*map(int, e))
            for e in entries
        )
        if not normalized:
            raise IndexFormatError("a range table needs at least one entry")
        for i, e in enumerate(normalized):
            if e.ordinal != i:
                raise IndexFormatError(
                    f"entry {i} carries ordinal {e.ordinal}; entries must be "
                    "ordered 0..m-1"
                )
            if e.key_lo >= e.key_hi:
                raise IndexFormatError(
                    f"entry {i}: key_lo {e.key_lo} must be < key_hi {e.key_hi}"
                )
            if i and normalized[i - 1].key_hi > e.key_lo:
                raise IndexFormatError(
                    f"entries {i - 1} and {i} overlap or are out of key order"
                )
        self.entries = normalized
        self._los = [e.key_lo for e in normalized]
        self._his = [e.key_hi for e in normalized]

    @property
    def m(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartitionRangeTable):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:
        return f"PartitionRangeTable(m={self.m}, span=[{self._los[0]}, {self._his[-1]}))"


@dataclass(frozen=True)
class Run:
    """``count`` consecutive partitions of equal key width ``stride``.

    Partition ``base_ordinal + j`` covers
    [start_key + j*stride, start_key + (j+1)*stride).
    """

    start_key: int
    stride: int
    count: int
    base_ordinal: int

    @property
    def end_key(self) -> int:
        return self.start_key + self.stride * self.count


class CIAS:
    """Run-compressed range index plus its anchor search list.

    ``asl`` holds each run's start key and, last, the exclusive end key of
    the final run; it is strictly increasing and one longer than ``runs``.
    Runs tile contiguously in both keys and ordinals, starting at
    ordinal 0.
    """

    __slots__ = ("runs", "asl")

    def __init__(self, runs: Sequence[Run | Sequence[int]]):
        normalized = tuple(
            r if isinstance(r, Run) else Run(*map(int, r)) for r in runs
        )
        if not normalized:
            raise IndexFormatError("a compressed index needs at least one run")
        if normalized[0].base_ordinal != 0:
            raise IndexFormatError(
                f"first run must start at ordinal 0, got {normalized[0].base_ordinal}"
            )
        for i, r in enumerate(normalized):
            if r.stride < 1:
                raise IndexFormatError(f"run {i}: stride must be >= 1, got {r.stride}")
            if r.count < 1:
                raise IndexFormatError(f"run {i}: count must be >= 1, got {r.count}")
            if i:
                prev = normalized[i - 1]
                if r.base_ordinal != prev.base_ordinal + prev.count:
                    raise IndexFormatError(
                        f"run {i} starts at ordinal {r.base_ordinal}; expected "
                        f"{prev.base_ordinal + prev.count}"
                    )
                if r.start_key != prev.end_key:
                    raise IndexFormatError(
                        f"run {i} starts at key {r.start_key}; expected the "
                        f"previous run's end key {prev.end_key}"
                    )
        self.runs = normalized
        self.asl = tuple(r.start_key for r in normalized) + (normalized[-1].end_key,)

    @property
    def partition_count(self) -> int:
        last = self.runs[-1]
        return last.base_ordinal + last.count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CIAS):
            return NotImplemented
        return self.runs == other.runs

    def __hash__(self) -> int:
        return hash(self.runs)

    def __repr__(self) -> str:
        return (
            f"CIAS(runs={len(self.runs)}, partitions={self.partition_count}, "
            f"span=[{self.asl[0]}, {self.asl[-1]}))"
        )


Index = Union[PartitionRangeTable, CIAS]


def build_table(dataset) -> PartitionRangeTable:
    """Read each partition's range into a table, in ordinal order."""
    if not getattr(dataset, "partitions", ()):
        raise EmptyInputError("cannot index an empty dataset")
    return PartitionRangeTable(
        [RangeEntry(p.ordinal, p.key_lo, p.key_hi) for p in dataset.partitions]
    )


def table_lookup(
    table: PartitionRangeTable, key: int, counter: ComparisonCounter | None = None
) -> int | None:
    """Ordinal of the partition whose range contains ``key``, else None.

    Classic binary search over the entries; each loop iteration probes one
    entry and decides left/right/hit, so at most ceil(log2(m)) + 1 entries
    are ever examined.
    """
    entries = table.entries
    lo, hi = 0, len(entries) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        if counter is not None:
            counter.probes += 1
        e = entries[mid]
        if key < e.key_lo:
            hi = mid - 1
        elif key >= e.key_hi:
            lo = mid + 1
        else:
            return e.ordinal
    return None


def table_lookup_range(
    table: PartitionRangeTable, key_lo: int, key_hi: int
) -> tuple[int, int] | None:
    """Contiguous ordinal interval of partitions intersecting [key_lo, key_hi].

    Two binary searches: the first partition whose range extends past
    key_lo, and the last whose range starts at or before key_hi.  Bounds
    outside the indexed span clamp to it; None when nothing intersects.
    """
    if key_lo > key_hi:
        raise InvalidRangeError(f"query range [{key_lo}, {key_hi}] is empty")
    first = bisect_right(table._his, key_lo)
    last = bisect_right(table._los, key_hi) - 1
    if first >= table.m or last < 0 or first > last:
        return None
    return first, last


def compress(table: PartitionRangeTable) -> CIAS:
    """Greedily merge consecutive equal-width entries into maximal runs.

    Requires the table to tile contiguously (each entry starts exactly
    where the previous one ends); a gap or overlap raises TilingGapError
    naming the first offending ordinal.
    """
    entries = table.entries
    for i in range(1, len(entries)):
        if entries[i - 1].key_hi != entries[i].key_lo:
            raise TilingGapError(
                f"cannot compress: partition {i} starts at key "
                f"{entries[i].key_lo} but partition {i - 1} ends at "
                f"{entries[i - 1].key_hi}",
                ordinal=i,
            )
    runs: list[Run] = []
    run_start = entries[0].key_lo
    run_stride = entries[0].key_hi - entries[0].key_lo
    run_count = 1
    run_base = 0
    for e in entries[1:]:
        width = e.key_hi - e.key_lo
        if width == run_stride:
            run_count += 1
        else:
            runs.append(Run(run_start, run_stride, run_count, run_base))
            run_base += run_count
            run_start = e.key_lo
            run_stride = width
            run_count = 1
    runs.append(Run(run_start, run_stride, run_count, run_base))
    return CIAS(runs)


def decompress(cias: CIAS) -> PartitionRangeTable:
    """Expand runs back into one explicit entry per partition."""
    entries: list[RangeEntry] = []
    for r in cias.runs:
        for j in range(r.count):
            lo = r.start_key + j * r.stride
            entries.append(RangeEntry(r.base_ordinal + j, lo, lo + r.stride))
    return PartitionRangeTable(entries)


def cias_lookup(
    cias: CIAS, key: int, counter: ComparisonCounter | None = None
) -> int | None:
    """Ordinal of the partition containing ``key``, else None.

    Binary search over the anchor list finds the run covering the key
    (at most ceil(log2(runs + 1)) + 1 anchors probed), then the offset
    within the run is pure arithmetic: (key - start_key) // stride.
    """
    runs = cias.runs
    asl = cias.asl
    lo, hi = 0, len(runs) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        if counter is not None:
            counter.probes += 1
        if key < asl[mid]:
            hi = mid - 1
        elif key >= asl[mid + 1]:
            lo = mid + 1
        else:
            r = runs[mid]
            return r.base_ordinal + (key - r.start_key) // r.stride
    return None


def cias_lookup_range(
    cias: CIAS, key_lo: int, key_hi: int
) -> tuple[int, int] | None:
    """Same contract as table_lookup_range, resolved against the runs.

    Each bound resolves with a point lookup; bounds outside the covered
    span clamp to the first or last partition.
    """
    if key_lo > key_hi:
        raise InvalidRangeError(f"query range [{key_lo}, {key_hi}] is empty")
    asl = cias.asl
    if key_hi < asl[0] or key_lo >= asl[-1]:
        return None
    first = cias.runs[0].base_ordinal if key_lo < asl[0] else cias_lookup(cias, key_lo)
    last = cias.partition_count - 1 if key_hi >= asl[-1] else cias_lookup(cias, key_hi)
    return first, last


def index_accounted_bytes(index: Index) -> int:
    """Deterministic size charge for index metadata."""
    if isinstance(index, PartitionRangeTable):
        return TABLE_ENTRY_BYTES * index.m
    if isinstance(index, CIAS):
        return RUN_BYTES * len(index.runs) + ANCHOR_BYTES * len(index.asl)
    raise TypeError(f"not an index: {type(index).__name__}")


def index_to_json(index: Index) -> dict:
    """Versioned, kind-tagged JSON payload for either index shape."""
    if isinstance(index, PartitionRangeTable):
        return {
            "kind": "table",
            "version": INDEX_FORMAT_VERSION,
            "entries": [[e.ordinal, e.key_lo, e.key_hi] for e in index.entries],
        }
    if isinstance(index, CIAS):
        return {
            "kind": "cias",
            "version": INDEX_FORMAT_VERSION,
            "runs": [
                [r.start_key, r.stride, r.count, r.base_ordinal] for r in index.runs
            ],
            "asl": list(index.asl),
        }
    raise TypeError(f"not an index: {type(index).__name__}")


def index_from_json(obj: dict) -> Index:
    """Parse and fully validate a payload produced by index_to_json."""
    if not isinstance(obj, dict):
        raise IndexFormatError("index payload must be a JSON object")
    kind = obj.get("kind")
    version = obj.get("version")
    if version != INDEX_FORMAT_VERSION:
        raise IndexFormatError(
            f"unsupported index format version {version!r}; expected "
            f"{INDEX_FORMAT_VERSION}"
        )
    if kind == "table":
        entries = obj.get("entries")
        if not isinstance(entries, list):
            raise IndexFormatError("table payload needs an 'entries' list")
        try:
            return PartitionRangeTable([tuple(map(int, e)) for e in entries])
        except (TypeError, ValueError) as exc:
            raise IndexFormatError(f"malformed table entry: {exc}") from None
    if kind == "cias":
        runs = obj.get("runs")
        asl = obj.get("asl")
        if not isinstance(runs, list) or not isinstance(asl, list):
            raise IndexFormatError("cias payload needs 'runs' and 'asl' lists")
        try:
            cias = CIAS([tuple(map(int, r)) for r in runs])
        except (TypeError, ValueError) as exc:
            raise IndexFormatError(f"malformed run: {exc}") from None
        if tuple(int(a) for a in asl) != cias.asl:
            raise IndexFormatError(
                "stored anchor list disagrees with the anchors derived from "
                "the runs"
            )
        return cias
    raise IndexFormatError(f"unknown index kind {kind!r}")


def save_index(index: Index, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(index_to_json(index), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_index(path: str | os.PathLike) -> Index:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IndexFormatError(f"{path}: not valid JSON: {exc}") from None
    return index_from_json(obj)
