"""Two-mode benchmark: full-scan baseline against index-pruned access.

A workload is an ordered list of closed key-range phases analyzed over
one field.  The baseline mode answers each phase with
``full_scan_filter`` and keeps every phase's materialized output resident
for the rest of the run, the way an analysis session that never releases
intermediates would.  The pruned mode ("oseba") builds a range index
once, resolves each phase to a Selection, and streams statistics without
materializing anything.

Reported memory follows the deterministic accounting model: 40 bytes per
resident record plus the index's accounted bytes.  Wall-clock time is the
only non-deterministic field in a report.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from typing import Sequence

from .analysis import StatsSummary, descriptive_stats, field_stats, select_period
from .dataset import Dataset, full_scan_filter
from .errors import WorkloadError
from .range_index import build_table, compress, index_accounted_bytes

BASELINE_MODE = "baseline"
OSEBA_MODE = "oseba"
MODES = (BASELINE_MODE, OSEBA_MODE)
INDEX_KINDS = ("table", "cias")

STATS_REL_TOLERANCE = 1e-9

# Default workload shape: five phases as (start, length) percentages of
# the dataset's key span.  Phase p starts a tenth of the span later than
# phase p-1; lengths grow so the cumulative selected volume reaches one
# full dataset by phase 3 and two by phase 5.
DEFAULT_PHASE_PERCENTS = ((0, 30), (10, 30), (20, 40), (30, 50), (40, 50))


@dataclass(frozen=True)
class Phase:
    """One closed key-range query [lo, hi] with a human label."""

    lo: int
    hi: int
    label: str


@dataclass(frozen=True)
class WorkloadSpec:
    """An ordered list of phases plus the field they analyze."""

    phases: tuple[Phase, ...]
    field: str = "temperature"

    def __post_init__(self):
        if not self.phases:
            raise WorkloadError("a workload needs at least one phase")
        for p in self.phases:
            if p.lo > p.hi:
                raise WorkloadError(f"phase {p.label!r}: range [{p.lo}, {p.hi}] is empty")

    def to_json(self) -> dict:
        return {
            "field": self.field,
            "phases": [{"lo": p.lo, "hi": p.hi, "label": p.label} for p in self.phases],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WorkloadSpec":
        try:
            phases = tuple(
                Phase(int(p["lo"]), int(p["hi"]), str(p["label"]))
                for p in obj["phases"]
            )
            field = str(obj.get("field", "temperature"))
        except (KeyError, TypeError, ValueError) as exc:
            raise WorkloadError(f"malformed workload: {exc}") from None
        return cls(phases=phases, field=field)


def save_workload(workload: WorkloadSpec, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(workload.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_workload(path: str | os.PathLike) -> WorkloadSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WorkloadError(f"{path}: not valid JSON: {exc}") from None
    return WorkloadSpec.from_json(obj)


def default_workload(dataset: Dataset) -> WorkloadSpec:
    """The five-phase workload over a dataset's key span.

    Integer arithmetic throughout: phase p (0-based) starts at
    key_lo + span * 10p // 100 and keeps span * length_pct // 100 keys,
    clamped to the span.
    """
    span_lo, span_hi = dataset.key_lo, dataset.key_hi
    span = span_hi - span_lo
    phases = []
    for idx, (start_pct, len_pct) in enumerate(DEFAULT_PHASE_PERCENTS, start=1):
        lo = span_lo + span * start_pct // 100
        length = max(1, span * len_pct // 100)
        hi = min(lo + length - 1, span_hi - 1)
        lo = min(lo, span_hi - 1)
        phases.append(Phase(lo, hi, f"P{idx}"))
    return WorkloadSpec(phases=tuple(phases))


@dataclass(frozen=True)
class PhaseMetrics:
    """State of one run immediately after a phase completed."""

    label: str
    accounted_bytes: int
    partition_scans_cum: int
    wall_seconds_cum: float
    stats: StatsSummary

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "accounted_bytes": self.accounted_bytes,
            "partition_scans_cum": self.partition_scans_cum,
            "wall_seconds_cum": self.wall_seconds_cum,
            "stats": self.stats.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PhaseMetrics":
        return cls(
            label=str(obj["label"]),
            accounted_bytes=int(obj["accounted_bytes"]),
            partition_scans_cum=int(obj["partition_scans_cum"]),
            wall_seconds_cum=float(obj["wall_seconds_cum"]),
            stats=StatsSummary.from_json(obj["stats"]),
        )


@dataclass(frozen=True)
class MetricsReport:
    """Everything one mode's run produced, phase by phase."""

    mode: str
    raw_bytes: int
    index_bytes: int
    per_phase: tuple[PhaseMetrics, ...]

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "raw_bytes": self.raw_bytes,
            "index_bytes": self.index_bytes,
            "per_phase": [p.to_json() for p in self.per_phase],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MetricsReport":
        return cls(
            mode=str(obj["mode"]),
            raw_bytes=int(obj["raw_bytes"]),
            index_bytes=int(obj["index_bytes"]),
            per_phase=tuple(PhaseMetrics.from_json(p) for p in obj["per_phase"]),
        )


def run_workload(
    dataset: Dataset,
    workload: WorkloadSpec,
    mode: str,
    index_kind: str = "table",
    evict: bool = False,
) -> MetricsReport:
    """Execute a workload in one mode and report per-phase metrics.

    Baseline: every phase full-scans all partitions and its materialized
    output stays resident to the end of the run (unless ``evict`` models
    releasing the previous phase's output).  Pruned mode: the index is
    built during phase 1 (its build time charged there, its bytes charged
    every phase) and each phase streams through a Selection.  Every phase
    must select at least one record.
    """
    if mode not in MODES:
        raise WorkloadError(f"unknown mode {mode!r}; expected one of {MODES}")
    if index_kind not in INDEX_KINDS:
        raise WorkloadError(f"unknown index kind {index_kind!r}; expected one of {INDEX_KINDS}")
    field = workload.field
    raw = dataset.accounted_bytes
    counter = dataset.scan_counter
    counter.reset()
    per_phase: list[PhaseMetrics] = []
    wall_cum = 0.0

    if mode == BASELINE_MODE:
        live = []
        for phase in workload.phases:
            t0 = time.perf_counter()
            derived = full_scan_filter(dataset, phase.lo, phase.hi)
            stats = field_stats(derived.fields[field])
            wall_cum += time.perf_counter() - t0
            if evict:
                live = [derived]
            else:
                live.append(derived)
            accounted = raw + sum(d.accounted_bytes for d in live)
            per_phase.append(
                PhaseMetrics(phase.label, accounted, counter.partitions, wall_cum, stats)
            )
        return MetricsReport(BASELINE_MODE, raw, 0, tuple(per_phase))

    index = None
    index_bytes = 0
    for phase in workload.phases:
        t0 = time.perf_counter()
        if index is None:
            index = build_table(dataset)
            if index_kind == "cias":
                index = compress(index)
            index_bytes = index_accounted_bytes(index)
        selection = select_period(dataset, index, phase.lo, phase.hi)
        stats = descriptive_stats(selection, field)
        wall_cum += time.perf_counter() - t0
        per_phase.append(
            PhaseMetrics(phase.label, raw + index_bytes, counter.partitions, wall_cum, stats)
        )
    return MetricsReport(OSEBA_MODE, raw, index_bytes, tuple(per_phase))


@dataclass(frozen=True)
class PhaseComparison:
    label: str
    memory_ratio: float
    scan_ratio: float
    speedup: float
    stats_match: bool

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "memory_ratio": self.memory_ratio,
            "scan_ratio": self.scan_ratio,
            "speedup": self.speedup,
            "stats_match": self.stats_match,
        }


@dataclass(frozen=True)
class RunComparison:
    """Baseline-over-pruned ratios per phase, and whether answers agreed."""

    per_phase: tuple[PhaseComparison, ...]
    stats_all_match: bool

    def to_json(self) -> dict:
        return {
            "per_phase": [p.to_json() for p in self.per_phase],
            "stats_all_match": self.stats_all_match,
        }


def _rel_close(a: float, b: float, tol: float = STATS_REL_TOLERANCE) -> bool:
    if a == b:
        return True
    return abs(a - b) <= tol * max(abs(a), abs(b))


def _stats_match(a: StatsSummary, b: StatsSummary) -> bool:
    return (
        a.count == b.count
        and _rel_close(a.max, b.max)
        and _rel_close(a.mean, b.mean)
        and _rel_close(a.stddev, b.stddev)
    )


def compare_runs(baseline: MetricsReport, oseba: MetricsReport) -> RunComparison:
    """Relate a baseline report to a pruned-mode report phase by phase.

    The two reports must come from the same workload on the same data
    (same phase labels, same raw bytes).  A stats mismatch beyond 1e-9
    relative on any phase marks the comparison, because the two modes are
    supposed to compute the same answers.
    """
    if baseline.mode != BASELINE_MODE or oseba.mode != OSEBA_MODE:
        raise WorkloadError(
            f"expected a {BASELINE_MODE!r} and an {OSEBA_MODE!r} report, got "
            f"{baseline.mode!r} and {oseba.mode!r}"
        )
    labels_b = [p.label for p in baseline.per_phase]
    labels_o = [p.label for p in oseba.per_phase]
    if labels_b != labels_o or baseline.raw_bytes != oseba.raw_bytes:
        raise WorkloadError("reports describe different workloads or datasets")
    phases = []
    all_match = True
    for pb, po in zip(baseline.per_phase, oseba.per_phase):
        match = _stats_match(pb.stats, po.stats)
        all_match = all_match and match
        phases.append(
            PhaseComparison(
                label=pb.label,
                memory_ratio=pb.accounted_bytes / po.accounted_bytes,
                scan_ratio=pb.partition_scans_cum / po.partition_scans_cum,
                speedup=(
                    pb.wall_seconds_cum / po.wall_seconds_cum
                    if po.wall_seconds_cum > 0
                    else float("inf")
                ),
                stats_match=match,
            )
        )
    return RunComparison(per_phase=tuple(phases), stats_all_match=all_match)


CSV_COLUMNS = (
    "mode",
    "phase",
    "label",
    "accounted_bytes",
    "partition_scans_cum",
    "wall_seconds_cum",
    "count",
    "max",
    "mean",
    "stddev",
)


def emit_report(report: MetricsReport, fmt: str, path: str | os.PathLike) -> None:
    """Write a report as JSON or CSV.  Identical reports emit identical bytes."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for i, p in enumerate(report.per_phase, start=1):
                fh.write(
                    ",".join(
                        (
                            report.mode,
                            str(i),
                            p.label,
                            str(p.accounted_bytes),
                            str(p.partition_scans_cum),
                            repr(p.wall_seconds_cum),
                            str(p.stats.count),
                            repr(p.stats.max),
                            repr(p.stats.mean),
                            repr(p.stats.stddev),
                        )
                    )
                    + "\n"
                )
    else:
        raise WorkloadError(f"unknown report format {fmt!r}; expected json or csv")
