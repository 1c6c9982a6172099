"""Deterministic synthetic sensor datasets with a known linear ground truth."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .data_model import (
    ColumnKind,
    ColumnSpec,
    TimeSeriesDataset,
    format_timestamp,
    parse_timestamp,
)
from .errors import InvalidSpec
from .postprocess import QuantizerMode, quantize_array
from .rng import SplitMix64


@dataclass(frozen=True)
class SynthSpec:
    n: int = 1000
    d: int = 20
    informative: int = 5
    beta: Optional[Tuple[float, ...]] = None
    noise_sigma: float = 0.1
    missing_fraction: float = 0.0
    collinearity: float = 0.0
    seed: int = 42
    start: str = "2021-01-30 06:23:06"
    step_seconds: int = 600
    intercept: float = 50.0

    def validate(self) -> None:
        problems = []
        if self.n < 1 or self.d < 1:
            problems.append("n and d must be positive")
        if not 0 <= self.informative <= self.d:
            problems.append("informative must lie in [0, d]")
        if self.noise_sigma < 0:
            problems.append("noise_sigma must be >= 0")
        if not 0 <= self.missing_fraction < 1:
            problems.append("missing_fraction must lie in [0, 1)")
        if not 0 <= self.collinearity < 1:
            problems.append("collinearity must lie in [0, 1)")
        if self.step_seconds <= 0:
            problems.append("step_seconds must be positive")
        if self.beta is not None:
            if len(self.beta) != self.d:
                problems.append("beta must have length d")
            elif sum(b != 0 for b in self.beta) != self.informative:
                problems.append("beta must have exactly `informative` nonzero entries")
        try:
            parse_timestamp(self.start)
        except ValueError:
            problems.append(f"bad start timestamp {self.start!r}")
        if problems:
            raise InvalidSpec("; ".join(problems))


def feature_names(d: int) -> Tuple[str, ...]:
    width = len(str(d - 1))
    return tuple(f"x{j:0{width}d}" for j in range(d))


def generate(spec: SynthSpec) -> Tuple[TimeSeriesDataset, np.ndarray]:
    """Draw a dataset and its true coefficients.

    Draw order from the SplitMix64 stream of ``spec.seed``: informative
    column permutation and coefficients (only when ``beta`` is not given),
    the shared factor, the per-cell factors, the target noise, then the
    missingness mask. Features have unit variance and pairwise correlation
    ``collinearity``; targets are the nearest-mode quantized latent values.
    """
    spec.validate()
    n, d = spec.n, spec.d
    rng = SplitMix64(spec.seed)

    if spec.beta is None:
        beta = np.zeros(d)
        chosen = np.sort(rng.permutation(d)[: spec.informative])
        u = rng.uniform(2 * spec.informative)
        magnitude = 2.0 + 3.0 * u[: spec.informative]
        sign = np.where(u[spec.informative :] < 0.5, -1.0, 1.0)
        beta[chosen] = sign * magnitude
    else:
        beta = np.asarray(spec.beta, dtype=np.float64)

    shared = rng.normal(n)
    own = rng.normal(n * d).reshape(n, d)
    rho = spec.collinearity
    X = math.sqrt(rho) * shared[:, None] + math.sqrt(1.0 - rho) * own
    noise = spec.noise_sigma * rng.normal(n)
    latent = X @ beta + spec.intercept + noise
    target = quantize_array(latent, QuantizerMode.NEAREST)

    missing = np.zeros((n, d), dtype=bool)
    if spec.missing_fraction > 0:
        missing = (rng.uniform(n * d) < spec.missing_fraction).reshape(n, d)
    X = np.where(missing, np.nan, X)

    start = parse_timestamp(spec.start)
    timestamps = start + np.arange(n, dtype=np.int64) * np.timedelta64(spec.step_seconds, "s")
    names = feature_names(d)
    columns = (
        (ColumnSpec("timestamp", ColumnKind.TIMESTAMP),)
        + tuple(ColumnSpec(name, ColumnKind.NUMERIC) for name in names)
        + (ColumnSpec("y_var", ColumnKind.TARGET),)
    )
    ds = TimeSeriesDataset(
        columns=columns,
        timestamps=timestamps.astype("datetime64[s]"),
        features=X,
        missing=missing,
        feature_names=names,
        target=target,
        target_missing=np.zeros(n, dtype=bool),
    )
    return ds, beta


def _cell(value: float, absent: bool) -> str:
    return "" if absent else repr(float(value))


def write_dataset_csv(path, ds: TimeSeriesDataset) -> None:
    """Write a dataset with only numeric features in the loader's CSV layout."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        ts_name = next(c.name for c in ds.columns if c.kind is ColumnKind.TIMESTAMP)
        w.writerow([ts_name, *ds.feature_names, ds.target_name])
        for i in range(ds.n_rows):
            w.writerow(
                [format_timestamp(ds.timestamps[i])]
                + [_cell(v, m) for v, m in zip(ds.features[i], ds.missing[i])]
                + [_cell(ds.target[i], ds.target_missing[i])]
            )


def write_beta_csv(path, names: Sequence[str], beta: np.ndarray, intercept: float) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "beta"])
        for name, b in zip(names, beta):
            w.writerow([name, repr(float(b))])
        w.writerow(["(intercept)", repr(float(intercept))])
