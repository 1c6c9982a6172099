"""Causal ridge forecasting for quantized sensor targets."""

from .data_model import ColumnKind, ColumnSpec, PredictionRecord, TimeSeriesDataset, dataset_slice
from .evaluation import EvalConfig, cross_validate, evaluate, sweep_alpha
from .feature_select import compare_feature_sets, fit_pca, select_top_k, univariate_scores
from .ingest import apply_imputation, apply_scaler, fit_imputation, fit_scaler, load_csv
from .metrics import MetricsReport, compute_metrics
from .postprocess import QuantizerMode, quantize, quantize_batch
from .ridge import RidgeConfig, RidgeModelState, load_state, save_state
from .synth import SynthSpec, generate
from .temporal import (
    SplitPlan,
    admissible_training_rows,
    make_cv_plan,
    make_split_plan,
    prequential_schedule,
)

__version__ = "0.1.0"
