"""MAE, MSE, RMSE and R-squared."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyInput, LengthMismatch, NonFiniteInput


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    mse: float
    rmse: float
    r_squared: Optional[float]  # None when the truth has zero variance
    n: int

    def csv_fields(self):
        return [fmt_float(self.mae), fmt_float(self.mse), fmt_float(self.rmse), fmt_r2(self.r_squared)]


def fmt_float(value: float) -> str:
    return repr(float(value))


def fmt_r2(value: Optional[float]) -> str:
    return "NA" if value is None else repr(float(value))


def compute_metrics(truth, pred) -> MetricsReport:
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise LengthMismatch(f"truth has shape {truth.shape}, pred has {pred.shape}")
    n = len(truth)
    if n == 0:
        raise EmptyInput("no values to score")
    if not (np.all(np.isfinite(truth)) and np.all(np.isfinite(pred))):
        raise NonFiniteInput("metrics inputs must be finite")
    err = (truth - pred).tolist()
    # fsum keeps long sums of small residuals exact to one rounding
    mae = math.fsum(abs(e) for e in err) / n
    sse = math.fsum(e * e for e in err)
    mse = sse / n
    mean = math.fsum(truth.tolist()) / n
    sst = math.fsum((t - mean) ** 2 for t in truth.tolist())
    r2 = None if sst == 0 else 1.0 - sse / sst
    return MetricsReport(mae=mae, mse=mse, rmse=math.sqrt(mse), r_squared=r2, n=n)


METRICS_HEADER = ["mae", "mse", "rmse", "r2", "n"]


def report_row(report: MetricsReport):
    return report.csv_fields() + [report.n]
