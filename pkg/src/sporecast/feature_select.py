"""Univariate feature scoring, PCA, and the full-vs-selected comparison harness."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data_model import TimeSeriesDataset, with_features
from .errors import DataError, EmptyRowSet, KOutOfRange, RankDeficient, SporecastError
from .evaluation import EvalConfig, EvaluationResult, complete_plan, evaluate, imputed_matrix
from .ingest import fit_imputation, scaler_from_matrix
from .metrics import MetricsReport
from .temporal import SplitPlan, admissible_training_rows

SCORE_CAP = 1e12


@dataclass(frozen=True)
class FeatureScore:
    index: int
    score: float


def _rows_matrix(ds: TimeSeriesDataset, rows) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.asarray(list(rows), dtype=np.int64)
    if rows.size == 0:
        raise EmptyRowSet("no rows to score")
    if ds.missing[rows].any() or ds.target_missing[rows].any():
        raise DataError("scoring rows contain missing values; impute first")
    return ds.features[rows], ds.target[rows]


def univariate_scores(ds: TimeSeriesDataset, rows) -> List[FeatureScore]:
    """F-statistic ``r^2 / (1 - r^2) * (n - 2)`` of each feature against the target.

    Constant features (or a constant target) score 0; perfect correlation
    is capped at ``SCORE_CAP``.
    """
    X, y = _rows_matrix(ds, rows)
    n = len(y)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->j", Xc, Xc)
    syy = float(yc @ yc)
    sxy = Xc.T @ yc
    scores = []
    for j in range(X.shape[1]):
        if sxx[j] == 0 or syy == 0 or n <= 2 or np.ptp(X[:, j]) == 0:
            scores.append(FeatureScore(j, 0.0))
            continue
        r2 = min(sxy[j] ** 2 / (sxx[j] * syy), 1.0)
        score = SCORE_CAP if r2 >= 1.0 else min(r2 / (1.0 - r2) * (n - 2), SCORE_CAP)
        scores.append(FeatureScore(j, float(score)))
    return scores


def select_top_k(scores: Sequence[FeatureScore], k: int) -> Tuple[int, ...]:
    """Indices of the ``k`` best scores (ties to the lower index), ascending."""
    if not 1 <= k <= len(scores):
        raise KOutOfRange(f"k must lie in [1, {len(scores)}], got {k}")
    ranked = sorted(scores, key=lambda s: (-s.score, s.index))
    return tuple(sorted(s.index for s in ranked[:k]))


@dataclass(frozen=True, eq=False)
class PcaModel:
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), descending
    mean: np.ndarray  # (d,)
    total_variance: float

    @property
    def k(self) -> int:
        return len(self.explained_variance)

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros(self.k)
        return self.explained_variance / self.total_variance

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) @ self.components + self.mean


def pca_from_matrix(X: np.ndarray, k: int) -> PcaModel:
    n, d = X.shape
    if n < 2:
        raise EmptyRowSet("PCA needs at least 2 rows")
    if not 1 <= k <= min(d, n):
        raise KOutOfRange(f"k must lie in [1, {min(d, n)}], got {k}")
    mean = X.mean(axis=0)
    cov = np.cov(X - mean, rowvar=False, ddof=1).reshape(d, d)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = max(evals[0], 0.0)
    rank = int(np.sum(evals > top * d * np.finfo(float).eps)) if top > 0 else 0
    if k > rank:
        warnings.warn(f"requested {k} components, numerical rank is {rank}", RankDeficient)
        k = max(rank, 1)
    comps = evecs[:, :k].T.copy()
    # deterministic sign: largest-magnitude loading positive
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps *= flip[:, None]
    return PcaModel(comps, np.clip(evals[:k], 0.0, None), mean, float(np.clip(evals, 0, None).sum()))


def fit_pca(ds: TimeSeriesDataset, rows, k: int) -> PcaModel:
    """Top-``k`` eigenvectors of the sample covariance over ``rows``."""
    rows = np.asarray(list(rows), dtype=np.int64)
    if ds.missing[rows].any():
        raise DataError("PCA rows contain missing values; impute first")
    return pca_from_matrix(ds.features[rows], k)


def transform_pca(model: PcaModel, ds: TimeSeriesDataset) -> TimeSeriesDataset:
    if ds.has_missing:
        raise DataError("cannot project rows with missing values; impute first")
    names = [f"pc{j + 1}" for j in range(model.k)]
    return with_features(ds, model.transform(ds.features), names)


def select_columns(ds: TimeSeriesDataset, indices: Sequence[int]) -> TimeSeriesDataset:
    idx = list(indices)
    return with_features(
        ds, ds.features[:, idx], [ds.feature_names[j] for j in idx], ds.missing[:, idx]
    )


# -- comparison harness ----------------------------------------------------


@dataclass(frozen=True)
class FeatureVariant:
    kind: str  # "full", "topk", "pca" or "list"
    k: int = 0
    names: Tuple[str, ...] = ()
    label: str = ""

    @classmethod
    def parse(cls, text: str) -> "FeatureVariant":
        """``full``, ``top<k>``, ``pca<k>`` or ``list:<file>``."""
        text = text.strip()
        low = text.lower()
        if low == "full":
            return cls("full", label="full")
        if low.startswith("top") and low[3:].isdigit():
            return cls("topk", k=int(low[3:]), label=low)
        if low.startswith("pca") and low[3:].isdigit():
            return cls("pca", k=int(low[3:]), label=low)
        if text.startswith("list:"):
            path = text[5:]
            with open(path, encoding="utf-8") as fh:
                names = tuple(line.strip() for line in fh if line.strip())
            return cls("list", names=names, label=text)
        raise ValueError(f"unknown feature variant {text!r}")


FULL = FeatureVariant("full", label="full")


def TopK(k: int) -> FeatureVariant:
    return FeatureVariant("topk", k=k, label=f"top{k}")


def Pca(k: int) -> FeatureVariant:
    return FeatureVariant("pca", k=k, label=f"pca{k}")


@dataclass
class VariantResult:
    variant: FeatureVariant
    result: Optional[EvaluationResult] = None
    selected: Tuple[str, ...] = ()
    error: Optional[str] = None

    def metrics(self, basis: str = "quantized") -> Optional[MetricsReport]:
        return None if self.result is None else self.result.metrics(basis)


def selection_rows(ds: TimeSeriesDataset, plan: SplitPlan) -> np.ndarray:
    """Training rows admissible for every prediction in ``plan``."""
    tests = plan.test_rows
    if tests.size == 0:
        raise DataError("plan has no test rows")
    first = ds.timestamps[tests].min()
    rows = admissible_training_rows(ds, plan, first)
    rows = rows[~ds.target_missing[rows]]
    if rows.size == 0:
        raise EmptyRowSet("no training rows precede the first test row")
    return rows


def derive_variant_dataset(
    ds: TimeSeriesDataset, plan: SplitPlan, variant: FeatureVariant
) -> Tuple[TimeSeriesDataset, Tuple[str, ...]]:
    """Apply one feature-set descriptor, fitting only on :func:`selection_rows`."""
    if variant.kind == "full":
        return ds, ds.feature_names
    if variant.kind == "list":
        unknown = [n for n in variant.names if n not in ds.feature_names]
        if unknown:
            raise DataError(f"unknown feature names in list: {unknown}")
        idx = [ds.feature_names.index(n) for n in variant.names]
        return select_columns(ds, idx), variant.names

    rows = selection_rows(ds, plan)
    imp_plan = complete_plan(fit_imputation(ds, rows, strict=False)) if ds.has_missing else None
    X = imputed_matrix(ds, imp_plan)
    if variant.kind == "topk":
        filled = with_features(ds, X, ds.feature_names, np.zeros_like(ds.missing))
        idx = select_top_k(univariate_scores(filled, rows), variant.k)
        return select_columns(ds, idx), tuple(ds.feature_names[j] for j in idx)
    if variant.kind == "pca":
        Z = scaler_from_matrix(X[rows]).transform(X)
        model = pca_from_matrix(Z[rows], variant.k)
        names = tuple(f"pc{j + 1}" for j in range(model.k))
        return with_features(ds, model.transform(Z), names, np.zeros((ds.n_rows, model.k), bool)), names
    raise ValueError(f"unknown variant kind {variant.kind!r}")


def compare_feature_sets(
    ds: TimeSeriesDataset,
    plan: SplitPlan,
    config: EvalConfig,
    variants: Sequence[FeatureVariant],
) -> List[VariantResult]:
    """Run the same prequential evaluation once per feature-set variant."""
    if not variants:
        raise ValueError("variants must be nonempty")
    out = []
    for variant in variants:
        try:
            derived, names = derive_variant_dataset(ds, plan, variant)
            out.append(VariantResult(variant, evaluate(derived, plan, config), names))
        except (SporecastError, ValueError) as exc:
            out.append(VariantResult(variant, error=f"{type(exc).__name__}: {exc}"))
    return out
