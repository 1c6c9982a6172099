"""Core domain types shared across the pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, NoTimestampColumn, SchemaMismatch

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


def parse_timestamp(text: str) -> np.datetime64:
    """Parse ``YYYY-MM-DD HH:MM:SS`` (UTC, second precision)."""
    return np.datetime64(datetime.strptime(text.strip(), TIMESTAMP_FORMAT), "s")


def format_timestamp(ts) -> str:
    return np.datetime_as_string(np.datetime64(ts, "s"), unit="s").replace("T", " ")


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TARGET = "target"
    TIMESTAMP = "timestamp"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: ColumnKind


def validate_schema(schema: Sequence[ColumnSpec]) -> None:
    kinds = [c.kind for c in schema]
    if kinds.count(ColumnKind.TIMESTAMP) != 1:
        raise NoTimestampColumn("schema needs exactly one timestamp column")
    if kinds.count(ColumnKind.TARGET) != 1:
        raise SchemaMismatch("schema needs exactly one target column")
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaMismatch("duplicate column names in schema")


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """Time-ordered observations.

    ``features`` holds NaN wherever ``missing`` is set; the mask is the
    authoritative record of absence. When a categorical column is encoded,
    its integer codes form the last feature column.
    """

    columns: tuple
    timestamps: np.ndarray  # datetime64[s], shape (n,)
    features: np.ndarray  # float64, shape (n, d)
    missing: np.ndarray  # bool, shape (n, d)
    feature_names: tuple
    target: np.ndarray  # float64, shape (n,)
    target_missing: np.ndarray  # bool, shape (n,)
    categorical: np.ndarray = field(default=None)  # int64 codes, -1 = missing
    categories: tuple = ()

    def __post_init__(self):
        n = len(self.timestamps)
        if self.categorical is None:
            object.__setattr__(self, "categorical", np.full(n, -1, dtype=np.int64))
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DimensionMismatch("feature matrix rows must match timestamps")
        if self.missing.shape != self.features.shape:
            raise DimensionMismatch("missing mask shape must match features")
        if self.features.shape[1] != len(self.feature_names):
            raise DimensionMismatch("feature_names length must match feature width")
        if len(self.target) != n or len(self.target_missing) != n or len(self.categorical) != n:
            raise DimensionMismatch("row-wise vectors must all have length n")

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def target_name(self) -> str:
        return next(c.name for c in self.columns if c.kind is ColumnKind.TARGET)

    @property
    def has_missing(self) -> bool:
        return bool(self.missing.any())

    def __len__(self):
        return self.n_rows

    def __eq__(self, other):
        if not isinstance(other, TimeSeriesDataset):
            return NotImplemented
        return (
            self.columns == other.columns
            and self.feature_names == other.feature_names
            and self.categories == other.categories
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.target_missing, other.target_missing)
            and np.array_equal(self.target, other.target, equal_nan=True)
            and np.array_equal(self.categorical, other.categorical)
        )

    __hash__ = None


def dataset_slice(ds: TimeSeriesDataset, row_indices: Iterable[int]) -> TimeSeriesDataset:
    """Return the rows in ``row_indices``, kept in their original relative order."""
    idx = np.unique(np.asarray(list(row_indices), dtype=np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= ds.n_rows):
        bad = idx[0] if idx[0] < 0 else idx[-1]
        raise IndexOutOfRange(f"row index {bad} out of range for {ds.n_rows} rows")
    return replace(
        ds,
        timestamps=ds.timestamps[idx],
        features=ds.features[idx],
        missing=ds.missing[idx],
        target=ds.target[idx],
        target_missing=ds.target_missing[idx],
        categorical=ds.categorical[idx],
    )


def with_features(
    ds: TimeSeriesDataset,
    features: np.ndarray,
    feature_names: Sequence[str],
    missing: Optional[np.ndarray] = None,
) -> TimeSeriesDataset:
    """Same rows and target, different feature block."""
    features = np.asarray(features, dtype=np.float64)
    if missing is None:
        missing = np.isnan(features)
    names = tuple(feature_names)
    existing = {c.name for c in ds.columns}
    columns = tuple(
        c for c in ds.columns if c.kind is not ColumnKind.NUMERIC or c.name in names
    ) + tuple(ColumnSpec(name, ColumnKind.NUMERIC) for name in names if name not in existing)
    return replace(ds, columns=columns, features=features, missing=missing, feature_names=names)


@dataclass(frozen=True)
class PredictionRecord:
    timestamp: np.datetime64
    raw: float
    quantized: float
    truth: Optional[float] = None
    fallback: bool = False
