"""Prequential evaluation, alpha sweeps and expanding-window cross-validation.

Every statistic (imputation modes, scaler, ridge fit) used for a prediction
at time ``t`` is fit only on training rows strictly before ``t``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .data_model import PredictionRecord, TimeSeriesDataset
from .errors import SporecastError
from .ingest import ImputationPlan, fit_imputation, scaler_from_matrix
from .metrics import MetricsReport, compute_metrics
from .postprocess import QuantizerMode, quantize
from .ridge import RidgeConfig, RidgeModelState
from .temporal import CvPlan, EventKind, SplitPlan, prequential_schedule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    alpha: float = 2.0
    fit_intercept: bool = True
    quantizer: QuantizerMode = QuantizerMode.NEAREST
    scale: bool = True
    freeze_imputation: bool = False
    fallback: float = 0.0
    sherman_morrison: bool = False

    @property
    def ridge(self) -> RidgeConfig:
        return RidgeConfig(alpha=self.alpha, fit_intercept=self.fit_intercept)


@dataclass(frozen=True)
class AuditEntry:
    row_index: int
    timestamp: np.datetime64
    max_train_timestamp: Optional[np.datetime64]
    n_train_rows: int

    @property
    def ok(self) -> bool:
        return self.max_train_timestamp is None or self.max_train_timestamp < self.timestamp


@dataclass
class EvaluationResult:
    records: List[PredictionRecord]
    audit: List[AuditEntry]
    state: RidgeModelState
    quantizer: QuantizerMode
    metrics_raw: Optional[MetricsReport] = None
    metrics_quantized: Optional[MetricsReport] = None

    @property
    def violations(self) -> List[AuditEntry]:
        return [a for a in self.audit if not a.ok]

    def metrics(self, basis: str = "quantized") -> Optional[MetricsReport]:
        return self.metrics_quantized if basis == "quantized" else self.metrics_raw


def complete_plan(plan: ImputationPlan) -> ImputationPlan:
    """Fill columns the fit rows never observed with 0."""
    if plan.defined.all():
        return plan
    return ImputationPlan(
        modes=np.where(plan.defined, plan.modes, 0.0), defined=np.ones_like(plan.defined)
    )


def imputed_matrix(ds: TimeSeriesDataset, plan: Optional[ImputationPlan]) -> np.ndarray:
    if plan is None or not ds.has_missing:
        return ds.features
    return np.where(ds.missing, plan.modes[np.newaxis, :], ds.features)


class _CausalImputer:
    """Tracks the imputation plan fit on the rows absorbed so far."""

    def __init__(self, ds: TimeSeriesDataset, frozen: bool):
        self.ds = ds
        self.frozen = frozen
        self.plan: Optional[ImputationPlan] = None
        self.matrix = ds.features

    def refresh(self, train_rows: np.ndarray) -> bool:
        """Refit on ``train_rows``; True when the fill values changed."""
        if not self.ds.has_missing or (self.frozen and self.plan is not None):
            return False
        plan = complete_plan(fit_imputation(self.ds, train_rows, strict=False))
        if self.plan is not None and plan == self.plan:
            return False
        self.plan = plan
        self.matrix = imputed_matrix(self.ds, plan)
        return True


def evaluate(ds: TimeSeriesDataset, plan: SplitPlan, config: EvalConfig = EvalConfig()) -> EvaluationResult:
    """Run the test-then-train schedule of ``plan`` over ``ds``.

    Training rows are absorbed into one incrementally updated ridge model;
    before each prediction the model is re-solved with imputation and
    scaling refit on the rows absorbed so far. Training rows without a
    target are skipped.
    """
    d = ds.n_features
    state = RidgeModelState.empty(
        d, config.ridge, fallback=config.fallback, track_inverse=config.sherman_morrison
    )
    imputer = _CausalImputer(ds, config.freeze_imputation)
    absorbed: List[int] = []
    pending: List[int] = []
    records: List[PredictionRecord] = []
    audit: List[AuditEntry] = []

    def catch_up() -> np.ndarray:
        absorbed.extend(pending)
        rows = np.asarray(absorbed, dtype=np.int64)
        if imputer.refresh(rows):
            state.reset()
            state.absorb_batch(imputer.matrix[rows], ds.target[rows])
        else:
            for r in pending:
                state.absorb_row(imputer.matrix[r], ds.target[r])
        pending.clear()
        if config.scale:
            state.set_scaler(scaler_from_matrix(imputer.matrix[rows]))
        if state.dirty:
            state.solve()
        return rows

    for event in prequential_schedule(plan, ds.timestamps):
        i = event.index
        if event.kind is EventKind.RETRAIN:
            if not ds.target_missing[i]:
                pending.append(i)
            continue

        if absorbed or pending:
            rows = catch_up()
            raw = state.predict(imputer.matrix[i])
            max_ts = ds.timestamps[rows].max()
        else:
            raw = float(config.fallback)
            max_ts = None

        truth = None if ds.target_missing[i] else float(ds.target[i])
        records.append(
            PredictionRecord(
                timestamp=ds.timestamps[i],
                raw=raw,
                quantized=quantize(raw, config.quantizer),
                truth=truth,
                fallback=not absorbed,
            )
        )
        audit.append(AuditEntry(i, ds.timestamps[i], max_ts, len(absorbed)))

    # trailing training rows still count towards the final model
    if pending:
        catch_up()

    result = EvaluationResult(records, audit, state, config.quantizer)
    scored = [r for r in records if r.truth is not None]
    if scored:
        truth = [r.truth for r in scored]
        result.metrics_raw = compute_metrics(truth, [r.raw for r in scored])
        result.metrics_quantized = compute_metrics(truth, [r.quantized for r in scored])
    return result


@dataclass
class SweepRow:
    alpha: float
    result: Optional[EvaluationResult] = None
    error: Optional[str] = None

    def metrics(self, basis: str = "quantized") -> Optional[MetricsReport]:
        return None if self.result is None else self.result.metrics(basis)


def sweep_alpha(
    ds: TimeSeriesDataset,
    plan: SplitPlan,
    alphas: Sequence[float],
    config: EvalConfig = EvalConfig(),
) -> List[SweepRow]:
    """One full prequential evaluation per alpha, in input order."""
    if not alphas:
        raise ValueError("alphas must be nonempty")
    if any(a < 0 for a in alphas):
        raise ValueError("alphas must all be >= 0")
    rows = []
    for alpha in alphas:
        try:
            cfg = replace(config, alpha=float(alpha))
            rows.append(SweepRow(alpha, result=evaluate(ds, plan, cfg)))
        except SporecastError as exc:
            log.warning("alpha=%s failed: %s", alpha, exc)
            rows.append(SweepRow(alpha, error=f"{type(exc).__name__}: {exc}"))
    return rows


@dataclass
class FoldResult:
    split: int
    train_rows: int
    validation_rows: int
    report: Optional[MetricsReport] = None
    error: Optional[str] = None


def fit_rows(
    ds: TimeSeriesDataset, rows: np.ndarray, config: EvalConfig, *, strict: bool = False
):
    """Batch fit on ``rows``: imputation, scaler and ridge all from those rows only.

    Returns ``(state, imputation plan or None)``.
    """
    rows = rows[~ds.target_missing[rows]]
    plan = None
    if ds.has_missing:
        plan = complete_plan(fit_imputation(ds, rows, strict=strict))
    X = imputed_matrix(ds, plan)
    scaler = scaler_from_matrix(X[rows]) if config.scale else None
    state = RidgeModelState.empty(ds.n_features, config.ridge, scaler, fallback=config.fallback)
    state.absorb_batch(X[rows], ds.target[rows]).solve()
    return state, plan


def cross_validate(
    ds: TimeSeriesDataset,
    cv: CvPlan,
    config: EvalConfig = EvalConfig(),
    basis: str = "quantized",
) -> List[FoldResult]:
    """Score each expanding-window fold with a batch fit on its training block."""
    out = []
    for split, fold in enumerate(cv.folds, start=1):
        train = np.arange(fold.train_end)
        val = np.arange(fold.val_start, fold.val_end)
        res = FoldResult(split, len(train), len(val))
        try:
            state, plan = fit_rows(ds, train, config)
            val = val[~ds.target_missing[val]]
            raw = state.predict_many(imputed_matrix(ds, plan)[val])
            pred = raw if basis == "raw" else [quantize(v, config.quantizer) for v in raw]
            res.report = compute_metrics(ds.target[val], pred)
        except SporecastError as exc:
            res.error = f"{type(exc).__name__}: {exc}"
        out.append(res)
    return out
