"""In-memory partitioned time-series storage and its two access paths.

Records are keyed by a signed 64-bit integer (epoch seconds, a sample
index, anything ordered) and carry four float64 measurement fields.  A
dataset is an immutable ordered list of key-sorted partitions; every
partition except possibly the last holds exactly ``capacity`` records and
covers a half-open key range [key_lo, key_hi).  Queries always use closed
[lo, hi] key ranges.

Two ways to read data coexist on purpose:

* ``full_scan_filter`` visits every partition, applies the range predicate
  to each record, and copies the matches out.  This is the thorough
  baseline: it is correct with no metadata at all, and its output stays
  resident.
* ``scan_selection`` folds a reducer over only the partitions named by a
  ``Selection``.  Interior partitions stream through without per-record
  checks (their ranges are fully inside the query), the two boundary
  partitions are trimmed by key, and nothing is materialized.

Memory is never sampled from the operating system.  Every resident record
is charged ``RECORD_WIDTH_BYTES`` so that memory numbers are exact,
reproducible, and assertable in tests.
"""

from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce
from typing import Any, Callable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    CsvFormatError,
    DuplicateKeyError,
    EmptyInputError,
    InvalidRangeError,
    NonFiniteValueError,
    OsebaError,
    UnknownFieldError,
)

MEASUREMENT_FIELDS = ("temperature", "humidity", "wind_speed", "wind_direction")
CSV_HEADER = ("time",) + MEASUREMENT_FIELDS

# Accounting width of one resident record: one int64 key plus four float64
# measurements.  Object headers and allocator slack are deliberately not
# modeled.
RECORD_WIDTH_BYTES = 40

_dataset_ids = itertools.count()


def _check_field(field: str) -> str:
    if field not in MEASUREMENT_FIELDS:
        raise UnknownFieldError(
            f"unknown field {field!r}; expected one of {', '.join(MEASUREMENT_FIELDS)}"
        )
    return field


@dataclass(frozen=True)
class Record:
    """One keyed observation."""

    key: int
    temperature: float
    humidity: float
    wind_speed: float
    wind_direction: float


class ScanCounter:
    """Counts partition visits.  Instrumentation only; not thread safe."""

    __slots__ = ("partitions",)

    def __init__(self) -> None:
        self.partitions = 0

    def reset(self) -> None:
        self.partitions = 0

    def add(self, n: int) -> None:
        self.partitions += n


class Partition:
    """A key-sorted block of records covering [key_lo, key_hi).

    Columns are numpy views into dataset-level arrays, so constructing a
    partition never copies record data.
    """

    __slots__ = ("ordinal", "keys", "fields", "key_lo", "key_hi")

    def __init__(
        self,
        ordinal: int,
        keys: np.ndarray,
        fields: Mapping[str, np.ndarray],
        key_lo: int,
        key_hi: int,
    ):
        if ordinal < 0:
            raise OsebaError(f"partition ordinal must be >= 0, got {ordinal}")
        if key_lo >= key_hi:
            raise InvalidRangeError(
                f"partition {ordinal}: key_lo {key_lo} must be < key_hi {key_hi}"
            )
        if len(keys) == 0:
            raise EmptyInputError(f"partition {ordinal} has no records")
        if np.any(np.diff(keys) <= 0):
            raise DuplicateKeyError(
                f"partition {ordinal}: keys must be strictly increasing"
            )
        if int(keys[0]) < key_lo or int(keys[-1]) >= key_hi:
            raise InvalidRangeError(
                f"partition {ordinal}: keys fall outside [{key_lo}, {key_hi})"
            )
        self.ordinal = ordinal
        self.keys = keys
        self.fields = dict(fields)
        self.key_lo = key_lo
        self.key_hi = key_hi

    def __len__(self) -> int:
        return len(self.keys)

    def record(self, i: int) -> Record:
        return Record(
            int(self.keys[i]),
            *(float(self.fields[name][i]) for name in MEASUREMENT_FIELDS),
        )

    def iter_records(self) -> Iterator[Record]:
        for i in range(len(self.keys)):
            yield self.record(i)


class Dataset:
    """Immutable ordered sequence of partitions.

    Partition key ranges never overlap and appear in key order; all
    partitions except possibly the last hold exactly ``capacity`` records.
    The attached ScanCounter is mutable instrumentation, not data.
    """

    def __init__(self, partitions: Sequence[Partition], capacity: int):
        partitions = tuple(partitions)
        if not partitions:
            raise EmptyInputError("a dataset needs at least one partition")
        if capacity < 1:
            raise OsebaError(f"capacity must be >= 1, got {capacity}")
        for i, p in enumerate(partitions):
            if p.ordinal != i:
                raise OsebaError(
                    f"partition ordinals must be 0..{len(partitions) - 1} in order"
                )
            if i + 1 < len(partitions) and p.key_hi > partitions[i + 1].key_lo:
                raise InvalidRangeError(
                    f"partitions {i} and {i + 1} have overlapping key ranges"
                )
            if i + 1 < len(partitions) and len(p) != capacity:
                raise OsebaError(
                    f"partition {i} holds {len(p)} records; only the last "
                    f"partition may hold fewer than capacity {capacity}"
                )
            if len(p) > capacity:
                raise OsebaError(
                    f"partition {i} holds {len(p)} records, above capacity {capacity}"
                )
        self.partitions = partitions
        self.capacity = capacity
        self.record_width_bytes = RECORD_WIDTH_BYTES
        self.dataset_id = f"ds-{next(_dataset_ids)}"
        self.scan_counter = ScanCounter()

    @property
    def partition_count(self) -> int:
        return len(self.partitions)

    @property
    def record_count(self) -> int:
        return sum(len(p) for p in self.partitions)

    @property
    def key_lo(self) -> int:
        return self.partitions[0].key_lo

    @property
    def key_hi(self) -> int:
        return self.partitions[-1].key_hi

    @property
    def accounted_bytes(self) -> int:
        return self.record_count * self.record_width_bytes

    def iter_records(self) -> Iterator[Record]:
        for p in self.partitions:
            yield from p.iter_records()


class MaterializedDerived:
    """Records copied out of a dataset by the baseline filter path.

    The copy stays resident until the caller drops it, and is charged at
    the same per-record width as the source dataset.
    """

    __slots__ = ("source_id", "keys", "fields", "record_width_bytes")

    def __init__(
        self,
        source_id: str,
        keys: np.ndarray,
        fields: Mapping[str, np.ndarray],
        record_width_bytes: int = RECORD_WIDTH_BYTES,
    ):
        self.source_id = source_id
        self.keys = keys
        self.fields = dict(fields)
        self.record_width_bytes = record_width_bytes

    @property
    def count(self) -> int:
        return len(self.keys)

    @property
    def accounted_bytes(self) -> int:
        return self.count * self.record_width_bytes

    def iter_records(self) -> Iterator[Record]:
        for i in range(self.count):
            yield Record(
                int(self.keys[i]),
                *(float(self.fields[name][i]) for name in MEASUREMENT_FIELDS),
            )


class Selection:
    """A non-materialized view: dataset, partition interval, key range.

    ``first_ordinal``/``last_ordinal`` name a contiguous run of partitions
    that together cover every key in [key_lo, key_hi]; both are None for a
    selection that matched nothing.  A Selection holds no record data.
    """

    __slots__ = ("dataset", "first_ordinal", "last_ordinal", "key_lo", "key_hi")

    def __init__(
        self,
        dataset: Dataset,
        first_ordinal: int | None,
        last_ordinal: int | None,
        key_lo: int,
        key_hi: int,
    ):
        if key_lo > key_hi:
            raise InvalidRangeError(f"selection range [{key_lo}, {key_hi}] is empty")
        if (first_ordinal is None) != (last_ordinal is None):
            raise OsebaError("selection ordinals must both be set or both be None")
        if first_ordinal is not None:
            if not (0 <= first_ordinal <= last_ordinal < dataset.partition_count):
                raise OsebaError(
                    f"selection ordinals [{first_ordinal}, {last_ordinal}] fall "
                    f"outside 0..{dataset.partition_count - 1}"
                )
        self.dataset = dataset
        self.first_ordinal = first_ordinal
        self.last_ordinal = last_ordinal
        self.key_lo = key_lo
        self.key_hi = key_hi

    @classmethod
    def empty(cls, dataset: Dataset, key_lo: int, key_hi: int) -> "Selection":
        return cls(dataset, None, None, key_lo, key_hi)

    @property
    def is_empty(self) -> bool:
        return self.first_ordinal is None

    @property
    def partition_span(self) -> int:
        if self.first_ordinal is None:
            return 0
        return self.last_ordinal - self.first_ordinal + 1


@dataclass(frozen=True)
class Fold:
    """A streaming reduction over selection blocks.

    ``step(state, keys, fields)`` consumes one partition block (numpy
    arrays, already trimmed to the selection's key range).  When ``merge``
    is provided the fold is declared associative and commutative and
    blocks may be processed in parallel, with per-block states combined in
    ordinal order; ``step`` must then agree with
    ``merge(state, step(initial(), block))``.  Without ``merge`` blocks
    arrive strictly in ordinal order.
    """

    initial: Callable[[], Any]
    step: Callable[[Any, np.ndarray, Mapping[str, np.ndarray]], Any]
    merge: Callable[[Any, Any], Any] | None = None
    finish: Callable[[Any], Any] | None = None


def count_fold() -> Fold:
    """Counts selected records."""
    return Fold(
        initial=lambda: 0,
        step=lambda n, keys, fields: n + len(keys),
        merge=lambda a, b: a + b,
    )


def sum_fold(field: str) -> Fold:
    """Sums one measurement field over the selection."""
    _check_field(field)
    return Fold(
        initial=lambda: 0.0,
        step=lambda acc, keys, fields: acc + float(np.sum(fields[field])),
        merge=lambda a, b: a + b,
    )


def collect_fold(field: str) -> Fold:
    """Gathers (keys, values) for one field, in key order.

    Order-sensitive, so it carries no merge and always runs sequentially.
    The concatenated output is a transient working array, not an accounted
    materialization.
    """
    _check_field(field)

    def _finish(chunks):
        if not chunks:
            return (
                np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.float64),
            )
        keys = np.concatenate([c[0] for c in chunks])
        values = np.concatenate([c[1] for c in chunks])
        return keys, values

    return Fold(
        initial=list,
        step=lambda chunks, keys, fields: chunks + [(keys, fields[field])],
        finish=_finish,
    )


def _build_partitions(
    keys: np.ndarray, fields: Mapping[str, np.ndarray], capacity: int
) -> list[Partition]:
    """Slice column arrays into fixed-capacity partitions.

    Partition i covers [its first key, the next partition's first key);
    the last partition covers up to its last key + 1.
    """
    n = len(keys)
    parts = []
    starts = list(range(0, n, capacity))
    for ordinal, start in enumerate(starts):
        stop = min(start + capacity, n)
        key_lo = int(keys[start])
        if stop < n:
            key_hi = int(keys[stop])
        else:
            key_hi = int(keys[n - 1]) + 1
        parts.append(
            Partition(
                ordinal,
                keys[start:stop],
                {name: arr[start:stop] for name, arr in fields.items()},
                key_lo,
                key_hi,
            )
        )
    return parts


def _dataset_from_columns(
    keys: np.ndarray, fields: Mapping[str, np.ndarray], capacity: int
) -> Dataset:
    if len(keys) == 0:
        raise EmptyInputError("no records")
    order = np.argsort(keys, kind="stable")
    if np.any(np.diff(order) != 1):
        keys = keys[order]
        fields = {name: arr[order] for name, arr in fields.items()}
    dup = np.nonzero(np.diff(keys) == 0)[0]
    if dup.size:
        raise DuplicateKeyError(f"duplicate key {int(keys[dup[0]])}")
    return Dataset(_build_partitions(keys, fields, capacity), capacity)


def ingest_csv(path: str | os.PathLike, capacity: int) -> Dataset:
    """Load a dataset from CSV.

    Expected header: ``time,temperature,humidity,wind_speed,wind_direction``.
    The time column is a base-10 signed integer; measurement columns are
    finite decimal floats.  Rows may arrive unsorted; they are sorted by
    key here.  Duplicate keys, non-finite values, malformed cells, and a
    missing/empty body are all rejected with the data row (1-based) and
    column named.
    """
    if capacity < 1:
        raise OsebaError(f"capacity must be >= 1, got {capacity}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        if tuple(header) != CSV_HEADER:
            raise CsvFormatError(
                f"{path}: header {header!r} does not match "
                f"{','.join(CSV_HEADER)}",
                row=0,
            )
        keys: list[int] = []
        columns: dict[str, list[float]] = {name: [] for name in MEASUREMENT_FIELDS}
        for row_idx, row in enumerate(reader, start=1):
            if len(row) != len(CSV_HEADER):
                raise CsvFormatError(
                    f"{path}: row {row_idx} has {len(row)} cells, expected "
                    f"{len(CSV_HEADER)}",
                    row=row_idx,
                )
            try:
                keys.append(int(row[0], 10))
            except ValueError:
                raise CsvFormatError(
                    f"{path}: row {row_idx}, column time: {row[0]!r} is not "
                    "a base-10 integer",
                    row=row_idx,
                    column="time",
                ) from None
            for col, name in enumerate(MEASUREMENT_FIELDS, start=1):
                try:
                    columns[name].append(float(row[col]))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {row_idx}, column {name}: {row[col]!r} "
                        "is not a decimal float",
                        row=row_idx,
                        column=name,
                    ) from None
    if not keys:
        raise EmptyInputError(f"{path}: no data rows")
    key_arr = np.array(keys, dtype=np.int64)
    field_arrs = {
        name: np.array(vals, dtype=np.float64) for name, vals in columns.items()
    }
    for name, arr in field_arrs.items():
        bad = np.nonzero(~np.isfinite(arr))[0]
        if bad.size:
            raise NonFiniteValueError(
                f"{path}: row {int(bad[0]) + 1}, column {name}: value is not finite"
            )
    return _dataset_from_columns(key_arr, field_arrs, capacity)


def generate_synthetic(
    n: int, key_start: int, key_stride: int, capacity: int, seed: int
) -> Dataset:
    """Build a deterministic synthetic dataset.

    Keys are ``key_start + i * key_stride``.  Measurements are drawn from
    numpy's seeded PCG64 generator, uniform over temperature [-10, 40),
    humidity [0, 100), wind_speed [0, 30), wind_direction [0, 360), in
    that fixed order, so identical arguments give bit-identical datasets.
    """
    if n < 1:
        raise EmptyInputError(f"n must be >= 1, got {n}")
    if key_stride < 1:
        raise OsebaError(f"key_stride must be >= 1, got {key_stride}")
    if capacity < 1:
        raise OsebaError(f"capacity must be >= 1, got {capacity}")
    keys = key_start + key_stride * np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    fields = {
        "temperature": rng.uniform(-10.0, 40.0, n),
        "humidity": rng.uniform(0.0, 100.0, n),
        "wind_speed": rng.uniform(0.0, 30.0, n),
        "wind_direction": rng.uniform(0.0, 360.0, n),
    }
    return Dataset(_build_partitions(keys, fields, capacity), capacity)


def format_measurement(value: float) -> str:
    """Shortest plain-decimal text that parses back to exactly ``value``."""
    return np.format_float_positional(value, unique=True, trim="0")


def export_csv(dataset: Dataset, path: str | os.PathLike) -> None:
    """Write the canonical CSV form: UTF-8, LF line endings, header row,
    keys in base 10, measurements in shortest round-tripping plain decimal.

    Ingesting a file produced here and exporting again is byte-identical.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for p in dataset.partitions:
            cols = [p.fields[name] for name in MEASUREMENT_FIELDS]
            for i in range(len(p)):
                fh.write(
                    str(int(p.keys[i]))
                    + ","
                    + ",".join(format_measurement(float(c[i])) for c in cols)
                    + "\n"
                )


def full_scan_filter(dataset: Dataset, key_lo: int, key_hi: int) -> MaterializedDerived:
    """Baseline access path: test every record in every partition.

    Visits all partitions regardless of overlap (the scan counter always
    advances by the partition count) and copies records with
    key_lo <= key <= key_hi into a new resident MaterializedDerived.
    """
    if key_lo > key_hi:
        raise InvalidRangeError(f"query range [{key_lo}, {key_hi}] is empty")
    kept_keys = []
    kept_fields: dict[str, list[np.ndarray]] = {name: [] for name in MEASUREMENT_FIELDS}
    for p in dataset.partitions:
        mask = (p.keys >= key_lo) & (p.keys <= key_hi)
        if mask.any():
            kept_keys.append(p.keys[mask])
            for name in MEASUREMENT_FIELDS:
                kept_fields[name].append(p.fields[name][mask])
    dataset.scan_counter.add(dataset.partition_count)
    if kept_keys:
        keys = np.concatenate(kept_keys)
        fields = {name: np.concatenate(chunks) for name, chunks in kept_fields.items()}
    else:
        keys = np.empty(0, dtype=np.int64)
        fields = {name: np.empty(0, dtype=np.float64) for name in MEASUREMENT_FIELDS}
    return MaterializedDerived(dataset.dataset_id, keys, fields, dataset.record_width_bytes)


def _trimmed_block(
    p: Partition, is_first: bool, is_last: bool, key_lo: int, key_hi: int
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    i0 = int(np.searchsorted(p.keys, key_lo, side="left")) if is_first else 0
    i1 = int(np.searchsorted(p.keys, key_hi, side="right")) if is_last else len(p.keys)
    if i0 == 0 and i1 == len(p.keys):
        return p.keys, p.fields
    return p.keys[i0:i1], {name: arr[i0:i1] for name, arr in p.fields.items()}


def _scan_threads() -> int:
    """Worker cap for parallel selection scans.

    Reads OSEBA_THREADS; 0, unset, or unparsable means the implementation
    default of 1 (sequential).
    """
    raw = os.environ.get("OSEBA_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw, 10)
    except ValueError:
        return 1
    return n if n >= 1 else 1


def scan_selection(selection: Selection, fold: Fold) -> Any:
    """Fold over the records a Selection names, without materializing.

    Interior partitions stream straight through; the first and last
    partitions are trimmed to [key_lo, key_hi] by key.  The scan counter
    advances by the number of partitions visited.  Folds that declare a
    merge may run partition blocks on OSEBA_THREADS workers; per-block
    states are always merged in ordinal order, so results do not depend on
    the thread count.
    """
    dataset = selection.dataset
    if selection.is_empty:
        state = fold.initial()
        return fold.finish(state) if fold.finish else state
    first, last = selection.first_ordinal, selection.last_ordinal
    if last >= dataset.partition_count:
        raise OsebaError(
            f"selection references partition {last} of a dataset with "
            f"{dataset.partition_count} partitions"
        )
    ordinals = range(first, last + 1)
    dataset.scan_counter.add(len(ordinals))

    def block(o: int) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        return _trimmed_block(
            dataset.partitions[o], o == first, o == last,
            selection.key_lo, selection.key_hi,
        )

    threads = _scan_threads()
    if fold.merge is not None and threads > 1 and len(ordinals) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            states = list(
                pool.map(lambda o: fold.step(fold.initial(), *block(o)), ordinals)
            )
        state = reduce(fold.merge, states)
    else:
        state = fold.initial()
        for o in ordinals:
            state = fold.step(state, *block(o))
    return fold.finish(state) if fold.finish else state
