"""Partitioned in-memory time series with range-pruned selective analysis.

The package keeps keyed records in fixed-capacity, key-sorted partitions
and answers range analyses two ways: a thorough full-scan baseline that
materializes matches, and a pruned path that resolves the query against
per-partition range metadata (an explicit table or its run-compressed
form) and streams only the partitions that matter.  A benchmark harness
runs identical workloads down both paths under a deterministic memory
accounting model.
"""

from .analysis import (
    DistanceReport,
    EventReport,
    SplitAssignment,
    SplitResult,
    StatsSummary,
    descriptive_stats,
    distance_comparison,
    event_analysis,
    field_stats,
    collect_field,
    moving_average,
    select_period,
    split_tvt,
    stats_fold,
)
from .bench import (
    BASELINE_MODE,
    OSEBA_MODE,
    MetricsReport,
    Phase,
    PhaseMetrics,
    RunComparison,
    WorkloadSpec,
    compare_runs,
    default_workload,
    emit_report,
    load_workload,
    run_workload,
    save_workload,
)
from .dataset import (
    CSV_HEADER,
    MEASUREMENT_FIELDS,
    RECORD_WIDTH_BYTES,
    Dataset,
    Fold,
    MaterializedDerived,
    Partition,
    Record,
    Selection,
    collect_fold,
    count_fold,
    export_csv,
    full_scan_filter,
    generate_synthetic,
    ingest_csv,
    scan_selection,
    sum_fold,
)
from .range_index import (
    CIAS,
    ComparisonCounter,
    PartitionRangeTable,
    RangeEntry,
    Run,
    build_table,
    cias_lookup,
    cias_lookup_range,
    compress,
    decompress,
    index_accounted_bytes,
    index_from_json,
    index_to_json,
    load_index,
    save_index,
    table_lookup,
    table_lookup_range,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
