import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oseba import (
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
    generate_synthetic,
    index_accounted_bytes,
    index_from_json,
    index_to_json,
    load_index,
    save_index,
    table_lookup,
    table_lookup_range,
)
from oseba.errors import IndexFormatError, InvalidRangeError, TilingGapError


# Independent oracles: plain linear scans over the entry list.

def oracle_point(entries, key):
    for e in entries:
        if e.key_lo <= key < e.key_hi:
            return e.ordinal
    return None


def oracle_range(entries, lo, hi):
    hits = [e.ordinal for e in entries if e.key_lo <= hi and e.key_hi > lo]
    if not hits:
        return None
    return min(hits), max(hits)


def tiling_table(start, widths):
    entries = []
    key = start
    for i, w in enumerate(widths):
        entries.append(RangeEntry(i, key, key + w))
        key += w
    return PartitionRangeTable(entries)


def random_tiling_table(rng):
    widths = []
    for _ in range(rng.randrange(1, 5)):
        stride = rng.randrange(1, 1000)
        widths.extend([stride] * rng.randrange(1, 13))
    return tiling_table(rng.randrange(-(10 ** 6), 10 ** 6), widths)


@st.composite
def tiling_tables(draw):
    start = draw(st.integers(-(10 ** 6), 10 ** 6))
    widths = draw(st.lists(st.integers(1, 60), min_size=1, max_size=40))
    return tiling_table(start, widths)


@st.composite
def cias_indexes(draw):
    """Valid compressed indexes whose adjacent runs have distinct strides."""
    start = draw(st.integers(-(10 ** 6), 10 ** 6))
    raw = draw(
        st.lists(st.tuples(st.integers(1, 500), st.integers(1, 10)), min_size=1, max_size=6)
    )
    runs = []
    key = start
    base = 0
    prev_stride = None
    for stride, count in raw:
        if stride == prev_stride:
            stride += 1
        runs.append(Run(key, stride, count, base))
        key += stride * count
        base += count
        prev_stride = stride
    return CIAS(runs)


# ------------------------------------------------------------------- tables


def test_build_table_copies_partition_ranges(small_dataset):
    table = build_table(small_dataset)
    assert table.entries == (
        RangeEntry(0, 0, 10),
        RangeEntry(1, 10, 20),
        RangeEntry(2, 20, 25),
    )


def test_build_table_deterministic():
    a = build_table(generate_synthetic(100, 0, 1, 16, seed=3))
    b = build_table(generate_synthetic(100, 0, 1, 16, seed=3))
    assert a == b


def test_table_rejects_structural_violations():
    with pytest.raises(IndexFormatError):
        PartitionRangeTable([])
    with pytest.raises(IndexFormatError):
        PartitionRangeTable([RangeEntry(1, 0, 10)])
    with pytest.raises(IndexFormatError):
        PartitionRangeTable([RangeEntry(0, 10, 10)])
    with pytest.raises(IndexFormatError):
        PartitionRangeTable([RangeEntry(0, 0, 10), RangeEntry(1, 5, 15)])


def test_table_lookup_boundary_key_goes_right():
    table = tiling_table(0, [10, 10])
    assert table_lookup(table, 10) == 1
    assert table_lookup(table, 9) == 0


def test_table_lookup_outside_and_gap():
    table = PartitionRangeTable([RangeEntry(0, 0, 10), RangeEntry(1, 20, 30)])
    assert table_lookup(table, -1) is None
    assert table_lookup(table, 30) is None
    assert table_lookup(table, 15) is None  # inter-partition gap


def test_table_lookup_range_example():
    table = tiling_table(0, [10, 10, 5])
    assert table_lookup_range(table, 5, 12) == (0, 1)
    assert table_lookup_range(table, 25, 99) is None
    assert table_lookup_range(table, -10, -1) is None
    assert table_lookup_range(table, -10, 0) == (0, 0)
    with pytest.raises(InvalidRangeError):
        table_lookup_range(table, 12, 5)


def test_table_lookups_match_oracle_bulk():
    rng = random.Random(2024)
    for _ in range(60):
        table = random_tiling_table(rng)
        span_lo = table.entries[0].key_lo
        span_hi = table.entries[-1].key_hi
        for _ in range(80):
            key = rng.randrange(span_lo - 50, span_hi + 50)
            assert table_lookup(table, key) == oracle_point(table.entries, key)
            lo = rng.randrange(span_lo - 50, span_hi + 50)
            hi = lo + rng.randrange(0, span_hi - span_lo + 100)
            assert table_lookup_range(table, lo, hi) == oracle_range(table.entries, lo, hi)


def test_table_lookup_handles_gappy_tables():
    rng = random.Random(5)
    entries = []
    key = 0
    for i in range(30):
        key += rng.randrange(0, 20)  # occasional gaps
        width = rng.randrange(1, 15)
        entries.append(RangeEntry(i, key, key + width))
        key += width
    table = PartitionRangeTable(entries)
    for probe in range(-5, key + 5):
        assert table_lookup(table, probe) == oracle_point(entries, probe)
    for _ in range(300):
        lo = rng.randrange(-5, key + 5)
        hi = lo + rng.randrange(0, 40)
        assert table_lookup_range(table, lo, hi) == oracle_range(entries, lo, hi)


# -------------------------------------------------------------- compression


def test_compress_two_run_golden():
    entries = [RangeEntry(i, 578 + 10_000 * i, 578 + 10_000 * (i + 1)) for i in range(1024)]
    entries.append(RangeEntry(1024, 10_240_578, 10_240_621))
    cias = compress(PartitionRangeTable(entries))
    assert [(r.start_key, r.stride, r.count, r.base_ordinal) for r in cias.runs] == [
        (578, 10_000, 1024, 0),
        (10_240_578, 43, 1, 1024),
    ]
    assert cias.asl == (578, 10_240_578, 10_240_621)


def test_compress_single_partition():
    cias = compress(tiling_table(0, [10]))
    assert cias.runs == (Run(0, 10, 1, 0),)
    assert cias.asl == (0, 10)


def test_compress_irregular_widths_one_run_each():
    table = tiling_table(7, [3, 5, 9, 2])
    cias = compress(table)
    assert len(cias.runs) == 4
    assert decompress(cias) == table


def test_compress_rejects_gap_naming_ordinal():
    entries = [RangeEntry(0, 0, 10), RangeEntry(1, 10, 20), RangeEntry(2, 25, 30)]
    with pytest.raises(TilingGapError) as err:
        compress(PartitionRangeTable(entries))
    assert err.value.ordinal == 2
    assert "2" in str(err.value)


def test_compress_deterministic():
    table = tiling_table(-50, [4, 4, 4, 9, 9, 2])
    assert compress(table) == compress(table)


def test_compress_counts_maximal_runs():
    # widths 5,5,5 | 3 | 7,7 -> exactly 3 runs
    cias = compress(tiling_table(0, [5, 5, 5, 3, 7, 7]))
    assert [(r.stride, r.count) for r in cias.runs] == [(5, 3), (3, 1), (7, 2)]


def test_decompress_expands_runs():
    cias = CIAS([Run(0, 10, 3, 0)])
    assert decompress(cias).entries == (
        RangeEntry(0, 0, 10),
        RangeEntry(1, 10, 20),
        RangeEntry(2, 20, 30),
    )


def test_decompress_golden_endpoints():
    cias = CIAS([Run(578, 10_000, 1024, 0), Run(10_240_578, 43, 1, 1024)])
    table = decompress(cias)
    assert table.entries[0] == RangeEntry(0, 578, 10_578)
    assert table.entries[1024] == RangeEntry(1024, 10_240_578, 10_240_621)
    assert table.m == 1025


def test_cias_rejects_structural_violations():
    with pytest.raises(IndexFormatError):
        CIAS([])
    with pytest.raises(IndexFormatError):
        CIAS([Run(0, 0, 3, 0)])  # stride < 1
    with pytest.raises(IndexFormatError):
        CIAS([Run(0, 10, 0, 0)])  # count < 1
    with pytest.raises(IndexFormatError):
        CIAS([Run(0, 10, 2, 1)])  # first run not at ordinal 0
    with pytest.raises(IndexFormatError):
        CIAS([Run(0, 10, 2, 0), Run(20, 5, 1, 3)])  # ordinal gap
    with pytest.raises(IndexFormatError):
        CIAS([Run(0, 10, 2, 0), Run(25, 5, 1, 2)])  # key gap


@settings(max_examples=120, deadline=None)
@given(tiling_tables())
def test_property_compress_round_trip(table):
    assert decompress(compress(table)) == table


@settings(max_examples=120, deadline=None)
@given(cias_indexes())
def test_property_decompress_round_trip(cias):
    assert compress(decompress(cias)) == cias


@settings(max_examples=80, deadline=None)
@given(tiling_tables())
def test_property_run_count_is_maximal_blocks(table):
    widths = [e.key_hi - e.key_lo for e in table.entries]
    blocks = 1 + sum(1 for a, b in zip(widths, widths[1:]) if a != b)
    assert len(compress(table).runs) == blocks


# ------------------------------------------------------------------ lookups


def test_cias_lookup_golden_points():
    cias = CIAS([Run(578, 10_000, 1024, 0), Run(10_240_578, 43, 1, 1024)])
    entries = decompress(cias).entries
    assert cias_lookup(cias, 578) == oracle_point(entries, 578) == 0
    assert cias_lookup(cias, 10_240_620) == oracle_point(entries, 10_240_620) == 1024
    assert cias_lookup(cias, 577) is None
    assert cias_lookup(cias, 10_240_621) is None


def test_cias_lookup_range_golden():
    cias = CIAS([Run(578, 10_000, 1024, 0), Run(10_240_578, 43, 1, 1024)])
    entries = decompress(cias).entries
    assert cias_lookup_range(cias, 578, 10_577) == oracle_range(entries, 578, 10_577) == (0, 0)
    assert cias_lookup_range(cias, 578, 10_240_620) == (0, 1024)
    assert cias_lookup_range(cias, 0, 100) is None
    assert cias_lookup_range(cias, 10_240_621, 10_240_700) is None
    with pytest.raises(InvalidRangeError):
        cias_lookup_range(cias, 10, 5)


@settings(max_examples=100, deadline=None)
@given(tiling_tables(), st.data())
def test_property_cias_equals_table_equals_oracle(table, data):
    cias = compress(table)
    span_lo = table.entries[0].key_lo
    span_hi = table.entries[-1].key_hi
    key = data.draw(st.integers(span_lo - 100, span_hi + 100))
    expect = oracle_point(table.entries, key)
    assert table_lookup(table, key) == expect
    assert cias_lookup(cias, key) == expect
    lo = data.draw(st.integers(span_lo - 100, span_hi + 100))
    hi = data.draw(st.integers(lo, span_hi + 200))
    expect_range = oracle_range(table.entries, lo, hi)
    assert table_lookup_range(table, lo, hi) == expect_range
    assert cias_lookup_range(cias, lo, hi) == expect_range


@settings(max_examples=60, deadline=None)
@given(cias_indexes())
def test_property_lookup_monotone_over_span(cias):
    lo, hi = cias.asl[0], cias.asl[-1]
    step = max(1, (hi - lo) // 64)
    last = -1
    for key in range(lo, hi, step):
        ordinal = cias_lookup(cias, key)
        assert ordinal is not None
        assert ordinal >= last
        last = ordinal


@settings(max_examples=60, deadline=None)
@given(cias_indexes())
def test_property_anchor_boundaries_exact(cias):
    # each anchor key maps to the run starting there; the key just before
    # maps to the previous partition (when covered)
    for r in cias.runs:
        assert cias_lookup(cias, r.start_key) == r.base_ordinal
        before = cias_lookup(cias, r.start_key - 1)
        if r.base_ordinal > 0:
            assert before == r.base_ordinal - 1
        else:
            assert before is None
    assert cias_lookup(cias, cias.asl[-1]) is None
    assert cias_lookup(cias, cias.asl[-1] - 1) == cias.partition_count - 1


@settings(max_examples=60, deadline=None)
@given(tiling_tables(), st.data())
def test_property_probe_bounds(table, data):
    cias = compress(table)
    key = data.draw(
        st.integers(table.entries[0].key_lo - 50, table.entries[-1].key_hi + 50)
    )
    counter = ComparisonCounter()
    table_lookup(table, key, counter)
    assert counter.probes <= math.ceil(math.log2(table.m)) + 1
    counter = ComparisonCounter()
    cias_lookup(cias, key, counter)
    n_runs = len(cias.runs)
    assert counter.probes <= math.ceil(math.log2(n_runs + 1)) + 1


# ------------------------------------------------------------------- sizing


def test_accounted_bytes_examples():
    table = tiling_table(0, [10] * 15)
    assert index_accounted_bytes(table) == 360
    cias = CIAS([Run(578, 10_000, 1024, 0), Run(10_240_578, 43, 1, 1024)])
    assert index_accounted_bytes(cias) == 88


def test_accounted_bytes_scaling():
    for m in (10, 1_000, 100_000):
        table = tiling_table(0, [7] * m)
        assert index_accounted_bytes(table) == 24 * m
        cias = compress(table)
        assert len(cias.runs) == 1
        assert index_accounted_bytes(cias) == 32 + 16


# -------------------------------------------------------------- persistence


def test_save_load_round_trip_table(tmp_path):
    table = tiling_table(-5, [3, 3, 8])
    path = tmp_path / "t.idx"
    save_index(table, path)
    assert load_index(path) == table


def test_save_load_round_trip_cias(tmp_path):
    cias = CIAS([Run(0, 4, 3, 0), Run(12, 9, 2, 3)])
    path = tmp_path / "c.idx"
    save_index(cias, path)
    assert load_index(path) == cias


def test_json_payload_shapes():
    table = tiling_table(0, [10, 10])
    payload = index_to_json(table)
    assert payload == {
        "kind": "table",
        "version": 1,
        "entries": [[0, 0, 10], [1, 10, 20]],
    }
    cias = compress(table)
    payload = index_to_json(cias)
    assert payload == {
        "kind": "cias",
        "version": 1,
        "runs": [[0, 10, 2, 0]],
        "asl": [0, 20],
    }


def test_load_rejects_bad_payloads(tmp_path):
    cases = [
        {"kind": "table", "version": 2, "entries": [[0, 0, 10]]},
        {"kind": "mystery", "version": 1},
        {"kind": "table", "version": 1, "entries": [[0, 10, 10]]},
        {"kind": "table", "version": 1, "entries": [[0, 0, 10], [1, 5, 12]]},
        {"kind": "cias", "version": 1, "runs": [[0, 10, 2, 0]], "asl": [0, 21]},
        {"kind": "cias", "version": 1, "runs": [[0, 0, 2, 0]], "asl": [0, 0]},
        {"kind": "cias", "version": 1, "runs": [], "asl": []},
    ]
    for i, payload in enumerate(cases):
        path = tmp_path / f"bad{i}.idx"
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(IndexFormatError):
            load_index(path)
    path = tmp_path / "noise.idx"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(IndexFormatError):
        load_index(path)


def test_index_from_json_round_trip_property():
    rng = random.Random(99)
    for _ in range(50):
        table = random_tiling_table(rng)
        assert index_from_json(index_to_json(table)) == table
        cias = compress(table)
        assert index_from_json(index_to_json(cias)) == cias
