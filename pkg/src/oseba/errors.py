"""Exception types shared across the package.

Everything raised on purpose derives from OsebaError so callers (and the
CLI) can separate validation failures from genuine I/O or programmer
errors.
"""


class OsebaError(Exception):
    """Base class for every error this package raises deliberately."""


class CsvFormatError(OsebaError):
    """Malformed CSV input.  Carries the offending data row and column."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DuplicateKeyError(OsebaError):
    """Two records share the same key."""


class NonFiniteValueError(OsebaError):
    """A measurement field is NaN or infinite."""


class EmptyInputError(OsebaError):
    """No records where at least one is required."""


class InvalidRangeError(OsebaError):
    """A key range with lo > hi, or an otherwise unusable bound."""


class EmptySelectionError(OsebaError):
    """An operation needs at least one selected record and got none."""


class TooFewRecordsError(OsebaError):
    """A windowed operation was given fewer records than its window."""

    def __init__(self, message: str, n_selected: int, window: int):
        super().__init__(message)
        self.n_selected = n_selected
        self.window = window


class IndexMismatchError(OsebaError):
    """An index does not describe the dataset it was paired with."""


class TilingGapError(OsebaError):
    """Partition ranges do not tile contiguously where they must."""

    def __init__(self, message: str, ordinal: int | None = None):
        super().__init__(message)
        self.ordinal = ordinal


class IndexFormatError(OsebaError):
    """An index violates a structural invariant (in memory or on disk)."""


class UnknownFieldError(OsebaError):
    """A measurement field name outside the fixed schema."""


class WorkloadError(OsebaError):
    """A benchmark workload or report pair that cannot be used."""
