import pytest

from oseba import generate_synthetic


@pytest.fixture
def small_dataset():
    """25 records, keys 0..24, capacity 10: partitions of 10, 10, 5."""
    return generate_synthetic(25, key_start=0, key_stride=1, capacity=10, seed=7)


@pytest.fixture(scope="session")
def desk_dataset():
    """The desk-scale regime: 150k records in 15 partitions of 10k.

    Session-scoped for speed; tests that read the scan counter must reset
    it first.
    """
    return generate_synthetic(150_000, key_start=0, key_stride=1, capacity=10_000, seed=42)
