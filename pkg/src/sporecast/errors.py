"""Exception hierarchy.

Data problems derive from :class:`DataError` (CLI exit code 2), solver
problems from :class:`SolveError` (exit code 3).
"""


class SporecastError(Exception):
    pass


class DataError(SporecastError, ValueError):
    pass


class SolveError(SporecastError):
    pass


# -- data model / ingest ---------------------------------------------------


class IndexOutOfRange(DataError, IndexError):
    pass


class SchemaMismatch(DataError):
    pass


class NoTimestampColumn(SchemaMismatch):
    pass


class AllMissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} has no present value in the fit rows")


class UncoveredColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} has missing values but no imputation value")


class EmptyFitSet(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NonFiniteInput(DataError):
    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class EmptyRowSet(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class InvalidSpec(DataError):
    pass


# -- temporal --------------------------------------------------------------


class TooFewRows(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class UnknownTestTimestamp(DataError):
    pass


# -- feature selection -----------------------------------------------------


class KOutOfRange(DataError):
    pass


class RankDeficient(UserWarning):
    """Requested PCA rank exceeds the numerical rank; k was truncated."""


# -- ridge -----------------------------------------------------------------


class InsufficientData(SolveError):
    pass


class SingularSystem(SolveError):
    pass


class StaleModel(SolveError):
    pass


class PersistenceError(SporecastError):
    pass


class CorruptFile(PersistenceError):
    pass


class VersionUnsupported(PersistenceError):
    pass


class ConstraintViolation(SporecastError):
    """A prediction used a training row at or after its own timestamp."""
