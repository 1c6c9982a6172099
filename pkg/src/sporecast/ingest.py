"""CSV loading, mode imputation and standardization.

Every ``fit_*`` function reads only the rows it is given, so statistics can
be restricted to the temporally admissible training rows.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data_model import (
    ColumnKind,
    ColumnSpec,
    TimeSeriesDataset,
    parse_timestamp,
    validate_schema,
)
from .errors import (
    AllMissingColumn,
    DataError,
    DimensionMismatch,
    EmptyFitSet,
    EmptyInput,
    NoTimestampColumn,
    SchemaMismatch,
    UncoveredColumn,
)


# -- schema ----------------------------------------------------------------


def load_schema(path) -> List[ColumnSpec]:
    """Read a ``name,kind`` CSV (kind is numeric/categorical/target/timestamp)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {"name", "kind"} - set(reader.fieldnames):
            raise SchemaMismatch(f"{path}: schema file needs a 'name,kind' header")
        try:
            schema = [ColumnSpec(r["name"], ColumnKind(r["kind"].strip().lower())) for r in reader]
        except ValueError as exc:
            raise SchemaMismatch(f"{path}: {exc}") from None
    validate_schema(schema)
    return schema


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def infer_schema(
    header: Sequence[str],
    rows: Sequence[Sequence[str]],
    timestamp_col: str = "timestamp",
    target_col: str = "y_var",
) -> List[ColumnSpec]:
    """Guess column kinds: named timestamp/target, non-numeric text is categorical."""
    if timestamp_col not in header:
        raise NoTimestampColumn(f"no timestamp column {timestamp_col!r} in header")
    if target_col not in header:
        raise SchemaMismatch(f"no target column {target_col!r} in header")
    schema = []
    for j, name in enumerate(header):
        if name == timestamp_col:
            kind = ColumnKind.TIMESTAMP
        elif name == target_col:
            kind = ColumnKind.TARGET
        else:
            cells = [r[j].strip() for r in rows if j < len(r) and r[j].strip()]
            numeric = all(_is_number(c) for c in cells)
            kind = ColumnKind.NUMERIC if numeric else ColumnKind.CATEGORICAL
        schema.append(ColumnSpec(name, kind))
    validate_schema(schema)
    return schema


# -- loading ---------------------------------------------------------------


def _parse_real(text: str) -> Optional[float]:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def read_csv_rows(path) -> Tuple[List[str], List[List[str]]]:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = [r for r in reader if r]
    if header is None:
        raise EmptyInput(f"{path}: no rows")
    return [h.strip() for h in header], rows


def load_csv(
    path,
    schema: Optional[Sequence[ColumnSpec]] = None,
    *,
    encode_categorical: bool = True,
    timestamp_col: str = "timestamp",
    target_col: str = "y_var",
) -> TimeSeriesDataset:
    """Load a sensor CSV into a time-sorted dataset.

    Parameters
    ----------
    path : path-like
        UTF-8, comma separated, header on the first line.
    schema : sequence of ColumnSpec, optional
        Column kinds. Inferred from the header and cell contents when omitted.
    encode_categorical : bool
        Append the categorical column's first-appearance codes as a feature.

    Raises
    ------
    FileNotFoundError, SchemaMismatch, NoTimestampColumn, EmptyInput
    """
    header, rows = read_csv_rows(path)
    if schema is None:
        schema = infer_schema(header, rows, timestamp_col, target_col)
    ds, _ = build_dataset(header, rows, schema, encode_categorical=encode_categorical, source=path)
    return ds


def build_dataset(
    header: Sequence[str],
    rows: Sequence[Sequence[str]],
    schema: Sequence[ColumnSpec],
    *,
    encode_categorical: bool = True,
    source="<rows>",
) -> Tuple[TimeSeriesDataset, np.ndarray]:
    """Parse string cells into a dataset; also returns the sorting permutation."""
    validate_schema(schema)
    if sorted(header) != sorted(c.name for c in schema):
        raise SchemaMismatch(
            f"{source}: header {list(header)} does not match schema {[c.name for c in schema]}"
        )
    if not rows:
        raise EmptyInput(f"{source}: no rows")

    pos = {name: j for j, name in enumerate(header)}
    by_kind = {k: [c for c in schema if c.kind is k] for k in ColumnKind}
    if len(by_kind[ColumnKind.CATEGORICAL]) > 1:
        raise SchemaMismatch("at most one categorical column is supported")

    ts_j = pos[by_kind[ColumnKind.TIMESTAMP][0].name]
    y_j = pos[by_kind[ColumnKind.TARGET][0].name]
    num_j = [pos[c.name] for c in by_kind[ColumnKind.NUMERIC]]
    cat_j = pos[by_kind[ColumnKind.CATEGORICAL][0].name] if by_kind[ColumnKind.CATEGORICAL] else None

    n = len(rows)
    timestamps = np.empty(n, dtype="datetime64[s]")
    values = np.full((n, len(num_j)), np.nan)
    target = np.full(n, np.nan)
    labels = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaMismatch(
                f"{source}: data row {i + 1} has {len(row)} cells, expected {len(header)}"
            )
        try:
            timestamps[i] = parse_timestamp(row[ts_j])
        except ValueError:
            raise DataError(f"{source}: data row {i + 1}: bad timestamp {row[ts_j]!r}") from None
        for out_j, in_j in enumerate(num_j):
            v = _parse_real(row[in_j])
            if v is not None:
                values[i, out_j] = v
        y = _parse_real(row[y_j])
        if y is not None:
            target[i] = y
        if cat_j is not None:
            labels.append(row[cat_j].strip())

    order = np.argsort(timestamps, kind="stable")
    timestamps, values, target = timestamps[order], values[order], target[order]
    names = [c.name for c in by_kind[ColumnKind.NUMERIC]]

    categories: List[str] = []
    codes = np.full(n, -1, dtype=np.int64)
    if cat_j is not None:
        lookup = {}
        for i, src in enumerate(order):
            label = labels[src]
            if not label:
                continue
            if label not in lookup:
                lookup[label] = len(categories)
                categories.append(label)
            codes[i] = lookup[label]
        if encode_categorical:
            values = np.column_stack([values, np.where(codes >= 0, codes, np.nan)])
            names.append(by_kind[ColumnKind.CATEGORICAL][0].name)

    ds = TimeSeriesDataset(
        columns=tuple(schema),
        timestamps=timestamps,
        features=values,
        missing=np.isnan(values),
        feature_names=tuple(names),
        target=target,
        target_missing=np.isnan(target),
        categorical=codes,
        categories=tuple(categories),
    )
    return ds, order


def missingness_report(ds: TimeSeriesDataset) -> List[Tuple[str, int, float]]:
    """Per-column ``(name, missing_count, missing_fraction)`` in schema order."""
    if ds.n_rows == 0:
        raise EmptyInput("no rows")
    feature_pos = {name: j for j, name in enumerate(ds.feature_names)}
    out = []
    for col in ds.columns:
        if col.kind is ColumnKind.TIMESTAMP:
            continue
        if col.kind is ColumnKind.TARGET:
            count = int(ds.target_missing.sum())
        elif col.kind is ColumnKind.CATEGORICAL and col.name not in feature_pos:
            count = int((ds.categorical < 0).sum())
        else:
            count = int(ds.missing[:, feature_pos[col.name]].sum())
        out.append((col.name, count, count / ds.n_rows))
    return out


def write_missingness_report(path, report) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "missing_count", "missing_fraction"])
        for name, count, frac in report:
            w.writerow([name, count, repr(float(frac))])


# -- imputation ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ImputationPlan:
    """Per-column fill values; ``defined[j]`` is False where no value was seen."""

    modes: np.ndarray
    defined: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, ImputationPlan):
            return NotImplemented
        return np.array_equal(self.defined, other.defined) and np.array_equal(
            self.modes, other.modes, equal_nan=True
        )

    __hash__ = None


def _column_mode(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    # np.unique sorts ascending and argmax takes the first maximum: ties go to the smallest value
    return float(uniq[np.argmax(counts)])


def fit_imputation(ds: TimeSeriesDataset, fit_rows, *, strict: bool = True) -> ImputationPlan:
    """Most-frequent present value per feature column over ``fit_rows``.

    With ``strict=False`` a column without any present value is left
    undefined instead of raising :class:`AllMissingColumn`.
    """
    rows = np.asarray(list(fit_rows), dtype=np.int64)
    if rows.size == 0:
        raise EmptyFitSet("fit_rows is empty")
    block = ds.features[rows]
    absent = ds.missing[rows]
    d = block.shape[1]
    modes = np.full(d, np.nan)
    defined = np.zeros(d, dtype=bool)
    for j in range(d):
        present = block[~absent[:, j], j]
        if present.size == 0:
            if strict:
                raise AllMissingColumn(ds.feature_names[j])
            continue
        modes[j] = _column_mode(present)
        defined[j] = True
    return ImputationPlan(modes=modes, defined=defined)


def apply_imputation(ds: TimeSeriesDataset, plan: ImputationPlan) -> TimeSeriesDataset:
    if len(plan.modes) != ds.n_features:
        raise DimensionMismatch(
            f"imputation plan covers {len(plan.modes)} columns, dataset has {ds.n_features}"
        )
    if not ds.has_missing:
        return ds
    needs = ds.missing.any(axis=0)
    uncovered = np.flatnonzero(needs & ~plan.defined)
    if uncovered.size:
        raise UncoveredColumn(ds.feature_names[uncovered[0]])
    filled = np.where(ds.missing, plan.modes[np.newaxis, :], ds.features)
    return replace(ds, features=filled, missing=np.zeros_like(ds.missing))


# -- scaling ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalerStats:
    """Per-column mean and population standard deviation (0 marks a constant column)."""

    mean: np.ndarray
    stddev: np.ndarray

    @classmethod
    def identity(cls, d: int) -> "ScalerStats":
        return cls(mean=np.zeros(d), stddev=np.ones(d))

    @property
    def dim(self) -> int:
        return len(self.mean)

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Standardize rows (or a single row); constant columns map to 0."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected width {self.dim}, got {x.shape[-1]}")
        safe = np.where(self.stddev > 0, self.stddev, 1.0)
        return np.where(self.stddev > 0, (x - self.mean) / safe, 0.0)

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return z * self.stddev + self.mean

    def __eq__(self, other):
        if not isinstance(other, ScalerStats):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.stddev, other.stddev)

    __hash__ = None


def fit_scaler(ds: TimeSeriesDataset, fit_rows) -> ScalerStats:
    rows = np.asarray(list(fit_rows), dtype=np.int64)
    if rows.size == 0:
        raise EmptyFitSet("fit_rows is empty")
    block = ds.features[rows]
    if ds.missing[rows].any():
        raise DataError("scaler fit rows contain missing values; impute first")
    return scaler_from_matrix(block)


def scaler_from_matrix(block: np.ndarray) -> ScalerStats:
    mean = block.mean(axis=0)
    std = block.std(axis=0)
    # exact zero for constant columns, whatever rounding the mean picked up
    std[block.max(axis=0) == block.min(axis=0)] = 0.0
    return ScalerStats(mean=mean, stddev=std)


def apply_scaler(ds: TimeSeriesDataset, stats: ScalerStats) -> TimeSeriesDataset:
    if stats.dim != ds.n_features:
        raise DimensionMismatch(f"scaler has width {stats.dim}, dataset has {ds.n_features}")
    scaled = stats.transform(ds.features)
    scaled[ds.missing] = np.nan
    return replace(ds, features=scaled)
