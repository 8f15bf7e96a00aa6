"""Selective analysis over non-materialized selections.

Every operation here resolves its key range through an index (table or
compressed), gets back a contiguous partition interval as a Selection,
and streams records through ``scan_selection``.  Nothing is copied into a
resident buffer; the only derived state is the operation's own result.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import Dataset, Fold, Selection, _check_field, collect_fold, scan_selection
from .errors import (
    EmptySelectionError,
    IndexMismatchError,
    InvalidRangeError,
    TooFewRecordsError,
    WorkloadError,
)
from .range_index import (
    CIAS,
    Index,
    PartitionRangeTable,
    cias_lookup_range,
    table_lookup_range,
)

RATIO_SUM_TOLERANCE = 1e-9

# Slack added before flooring ratio * period_count, so a product that is
# mathematically integral but lands one ulp low (for example 3 * (1/3))
# still floors to the intended size.  Matches the ratio-sum tolerance.
_FLOOR_SLACK = 1e-9


def _index_span(index: Index) -> tuple[int, int, int]:
    if isinstance(index, PartitionRangeTable):
        return index.m, index.entries[0].key_lo, index.entries[-1].key_hi
    if isinstance(index, CIAS):
        return index.partition_count, index.asl[0], index.asl[-1]
    raise TypeError(f"not an index: {type(index).__name__}")


def select_period(dataset: Dataset, index: Index, key_lo: int, key_hi: int) -> Selection:
    """Resolve a closed key range to a Selection through the index.

    The index must describe this dataset: partition count and overall key
    span are checked and any disagreement raises IndexMismatchError.  A
    range that intersects nothing yields an explicitly empty Selection.
    """
    if key_lo > key_hi:
        raise InvalidRangeError(f"query range [{key_lo}, {key_hi}] is empty")
    m, span_lo, span_hi = _index_span(index)
    if m != dataset.partition_count:
        raise IndexMismatchError(
            f"index describes {m} partitions, dataset has {dataset.partition_count}"
        )
    if span_lo != dataset.key_lo or span_hi != dataset.key_hi:
        raise IndexMismatchError(
            f"index spans [{span_lo}, {span_hi}), dataset spans "
            f"[{dataset.key_lo}, {dataset.key_hi})"
        )
    if isinstance(index, PartitionRangeTable):
        interval = table_lookup_range(index, key_lo, key_hi)
    else:
        interval = cias_lookup_range(index, key_lo, key_hi)
    if interval is None:
        return Selection.empty(dataset, key_lo, key_hi)
    return Selection(dataset, interval[0], interval[1], key_lo, key_hi)


@dataclass(frozen=True)
class StatsSummary:
    """Descriptive statistics of one field: count, max, mean, population stddev."""

    count: int
    max: float
    mean: float
    stddev: float

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "max": self.max,
            "mean": self.mean,
            "stddev": self.stddev,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StatsSummary":
        return cls(
            count=int(obj["count"]),
            max=float(obj["max"]),
            mean=float(obj["mean"]),
            stddev=float(obj["stddev"]),
        )


class _StatsState:
    """Running (count, mean, sum of squared deviations, max)."""

    __slots__ = ("n", "mean", "m2", "max")

    def __init__(self, n: int = 0, mean: float = 0.0, m2: float = 0.0, mx: float = -math.inf):
        self.n = n
        self.mean = mean
        self.m2 = m2
        self.max = mx


def _block_state(values: np.ndarray) -> _StatsState:
    n = len(values)
    if n == 0:
        return _StatsState()
    mn = float(values.min())
    mx = float(values.max())
    if mn == mx:
        # A constant block contributes exactly zero squared deviation; do
        # not let rounding in the mean manufacture a tiny spread.
        return _StatsState(n, mn, 0.0, mx)
    mean = float(values.mean())
    m2 = float(np.sum((values - mean) ** 2))
    return _StatsState(n, mean, m2, mx)


def _merge_states(a: _StatsState, b: _StatsState) -> _StatsState:
    if a.n == 0:
        return b
    if b.n == 0:
        return a
    n = a.n + b.n
    delta = b.mean - a.mean
    # Incremental combination of two partial accumulations:
    #   mean = mean_a + delta * n_b / n
    #   m2   = m2_a + m2_b + delta^2 * n_a * n_b / n
    mean = a.mean + delta * (b.n / n)
    m2 = a.m2 + b.m2 + delta * delta * (a.n * b.n / n)
    if delta == 0.0:
        mean = a.mean
    return _StatsState(n, mean, m2, max(a.max, b.max))


def stats_fold(field: str) -> Fold:
    """Single-pass stats accumulation; associative, so it may run parallel."""
    _check_field(field)
    return Fold(
        initial=_StatsState,
        step=lambda st, keys, fields: _merge_states(st, _block_state(fields[field])),
        merge=_merge_states,
    )


def _finish_stats(state: _StatsState) -> StatsSummary:
    if state.n == 0:
        raise EmptySelectionError("no records selected; statistics are undefined")
    stddev = math.sqrt(max(state.m2, 0.0) / state.n)
    return StatsSummary(count=state.n, max=state.max, mean=state.mean, stddev=stddev)


def field_stats(values: np.ndarray) -> StatsSummary:
    """Stats of a plain value array, same accumulation as the streaming path."""
    return _finish_stats(_block_state(np.asarray(values, dtype=np.float64)))


def descriptive_stats(selection: Selection, field: str) -> StatsSummary:
    """Count, max, mean, and population stddev of one field, in one pass.

    Per-partition partial states are merged in ordinal order with the
    incremental formulas above, so huge selections never need a second
    pass or a resident copy.  Raises EmptySelectionError when the
    selection yields no records.
    """
    return _finish_stats(scan_selection(selection, stats_fold(field)))


def collect_field(selection: Selection, field: str) -> tuple[np.ndarray, np.ndarray]:
    """Keys and values of one field across a selection, in key order."""
    return scan_selection(selection, collect_fold(field))


def moving_average(
    selection: Selection, window: int, field: str
) -> list[tuple[int, float]]:
    """Trailing moving average over the selected records, in key order.

    Each output value is the mean of ``window`` consecutive records and is
    stamped with the key of the window's last record, so the result has
    length n - window + 1.  A selection with fewer than ``window`` records
    raises TooFewRecordsError.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    _check_field(field)
    keys, values = collect_field(selection, field)
    n = len(values)
    if n < window:
        raise TooFewRecordsError(
            f"selection yields {n} records, fewer than window {window}",
            n_selected=n,
            window=window,
        )
    means = sliding_window_view(values, window).mean(axis=1)
    out_keys = keys[window - 1:]
    return [(int(k), float(v)) for k, v in zip(out_keys, means)]


@dataclass(frozen=True)
class DistanceReport:
    """Positional comparison of two periods' values for one field."""

    n: int
    pointwise: tuple[float, ...]
    euclidean: float
    mean_abs: float
    truncated: bool

    # pointwise vectors above this length are left out of the JSON form
    # unless explicitly requested
    POINTWISE_JSON_LIMIT = 10_000

    def to_json(self, include_pointwise: bool | None = None) -> dict:
        obj = {
            "n": self.n,
            "euclidean": self.euclidean,
            "mean_abs": self.mean_abs,
            "truncated": self.truncated,
        }
        if include_pointwise is None:
            include_pointwise = self.n <= self.POINTWISE_JSON_LIMIT
        if include_pointwise:
            obj["pointwise"] = list(self.pointwise)
        return obj


def distance_comparison(
    selection_a: Selection, selection_b: Selection, field: str
) -> DistanceReport:
    """Compare two periods record-by-record at equal positions.

    Values are aligned positionally (ith record with ith record).  Unequal
    lengths are truncated to the shorter side and flagged.  Reports the
    absolute pointwise differences, the euclidean distance, and their mean.
    """
    _check_field(field)
    _, va = collect_field(selection_a, field)
    _, vb = collect_field(selection_b, field)
    if len(va) == 0 or len(vb) == 0:
        raise EmptySelectionError("both periods must select at least one record")
    n = min(len(va), len(vb))
    truncated = len(va) != len(vb)
    diff = va[:n] - vb[:n]
    pointwise = np.abs(diff)
    euclidean = float(np.sqrt(np.sum(diff * diff)))
    mean_abs = float(np.mean(pointwise))
    return DistanceReport(
        n=n,
        pointwise=tuple(float(x) for x in pointwise),
        euclidean=euclidean,
        mean_abs=mean_abs,
        truncated=truncated,
    )


@dataclass(frozen=True)
class SplitAssignment:
    """Which periods landed in which split, plus the seed that shuffled them."""

    training: tuple[tuple[int, int], ...]
    tests: tuple[tuple[int, int], ...]
    validation: tuple[tuple[int, int], ...]
    seed: int

    def to_json(self) -> dict:
        return {
            "training": [list(p) for p in self.training],
            "tests": [list(p) for p in self.tests],
            "validation": [list(p) for p in self.validation],
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SplitResult:
    """A SplitAssignment and one resolved Selection per period."""

    assignment: SplitAssignment
    training: tuple[Selection, ...]
    tests: tuple[Selection, ...]
    validation: tuple[Selection, ...]


def _fisher_yates(items: list, rng: random.Random) -> None:
    # Top-down Fisher-Yates; rng is a seeded random.Random (Mersenne
    # Twister), so a given seed always produces the same permutation.
    for i in range(len(items) - 1, 0, -1):
        j = rng.randrange(i + 1)
        items[i], items[j] = items[j], items[i]


def split_tvt(
    dataset: Dataset,
    index: Index,
    periods: Sequence[tuple[int, int]],
    ratios: tuple[float, float, float],
    seed: int,
) -> SplitResult:
    """Randomly assign whole periods to training / tests / validation.

    Periods are closed key ranges and must be pairwise disjoint.  The
    period list is shuffled by a seeded Fisher-Yates pass, then the first
    floor(train * P) go to training, the next floor(test * P) to tests,
    and the remainder to validation.  Ratios must be positive and sum to
    1 within 1e-9.  Every period is resolved to a Selection through the
    index.
    """
    period_list = [(int(lo), int(hi)) for lo, hi in periods]
    if not period_list:
        raise WorkloadError("at least one period is required")
    for lo, hi in period_list:
        if lo > hi:
            raise InvalidRangeError(f"period [{lo}, {hi}] is empty")
    by_lo = sorted(period_list)
    for (lo_a, hi_a), (lo_b, _) in zip(by_lo, by_lo[1:]):
        if hi_a >= lo_b:
            raise WorkloadError(
                f"periods [{lo_a}, {hi_a}] and starting at {lo_b} overlap"
            )
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise WorkloadError(f"ratios must be three positive numbers, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > RATIO_SUM_TOLERANCE:
        raise WorkloadError(f"ratios {ratios!r} must sum to 1 within {RATIO_SUM_TOLERANCE}")

    shuffled = list(period_list)
    _fisher_yates(shuffled, random.Random(seed))
    p = len(shuffled)
    n_train = int(math.floor(ratios[0] * p + _FLOOR_SLACK))
    n_test = int(math.floor(ratios[1] * p + _FLOOR_SLACK))
    train = tuple(shuffled[:n_train])
    test = tuple(shuffled[n_train:n_train + n_test])
    valid = tuple(shuffled[n_train + n_test:])
    assignment = SplitAssignment(training=train, tests=test, validation=valid, seed=seed)
    return SplitResult(
        assignment=assignment,
        training=tuple(select_period(dataset, index, lo, hi) for lo, hi in train),
        tests=tuple(select_period(dataset, index, lo, hi) for lo, hi in test),
        validation=tuple(select_period(dataset, index, lo, hi) for lo, hi in valid),
    )


@dataclass(frozen=True)
class EventReport:
    """Distribution shift around an event key."""

    l1_distance: float
    before_hist: tuple[float, ...]
    after_hist: tuple[float, ...]
    value_lo: float
    value_hi: float
    n_before: int
    n_after: int

    def to_json(self) -> dict:
        return {
            "l1_distance": self.l1_distance,
            "before_hist": list(self.before_hist),
            "after_hist": list(self.after_hist),
            "value_lo": self.value_lo,
            "value_hi": self.value_hi,
            "n_before": self.n_before,
            "n_after": self.n_after,
        }


def _normalized_hist(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    if lo == hi:
        # Degenerate value range: every observation is the same number, so
        # all mass sits in bin 0 for both windows.
        hist = np.zeros(bins, dtype=np.float64)
        hist[0] = len(values)
    else:
        hist, _ = np.histogram(values, bins=bins, range=(lo, hi))
        hist = hist.astype(np.float64)
    return hist / hist.sum()


def event_analysis(
    dataset: Dataset,
    index: Index,
    event_key: int,
    before_span: int,
    after_span: int,
    field: str,
    bins: int,
) -> EventReport:
    """Compare a field's distribution before and after an event key.

    The before window is [event_key - before_span, event_key - 1], the
    after window [event_key, event_key + after_span - 1].  Both windows'
    values are binned into ``bins`` equal-width buckets spanning their
    combined min..max, each histogram is normalized to sum 1, and the
    report carries the L1 distance between them (0 = identical binning,
    2 = disjoint support).  A window that selects nothing is an error.
    """
    if before_span < 1 or after_span < 1:
        raise ValueError("before_span and after_span must be >= 1")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    _check_field(field)
    before_sel = select_period(dataset, index, event_key - before_span, event_key - 1)
    after_sel = select_period(dataset, index, event_key, event_key + after_span - 1)
    _, vb = collect_field(before_sel, field)
    _, va = collect_field(after_sel, field)
    if len(vb) == 0:
        raise EmptySelectionError("the before window selects no records")
    if len(va) == 0:
        raise EmptySelectionError("the after window selects no records")
    lo = float(min(vb.min(), va.min()))
    hi = float(max(vb.max(), va.max()))
    hb = _normalized_hist(vb, lo, hi, bins)
    ha = _normalized_hist(va, lo, hi, bins)
    l1 = float(np.abs(hb - ha).sum())
    return EventReport(
        l1_distance=l1,
        before_hist=tuple(float(x) for x in hb),
        after_hist=tuple(float(x) for x in ha),
        value_lo=lo,
        value_hi=hi,
        n_before=len(vb),
        n_after=len(va),
    )
