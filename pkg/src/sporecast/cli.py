"""Command-line entry point.

Every command prints its fully resolved configuration as one JSON line and
writes it to ``<out>/run_config.json``; ``--config`` on that file replays
the run. Exit codes: 2 data error, 3 solver error, 4 constraint-audit
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .data_model import format_timestamp
from .errors import ConstraintViolation, DataError, SolveError, SporecastError
from .evaluation import EvalConfig, cross_validate, evaluate, fit_rows, sweep_alpha
from .feature_select import FeatureVariant, compare_feature_sets
from .ingest import (
    build_dataset,
    infer_schema,
    load_schema,
    missingness_report,
    read_csv_rows,
    write_missingness_report,
)
from .metrics import fmt_float, fmt_r2
from .postprocess import QuantizerMode
from .ridge import save_state
from .synth import SynthSpec, generate, write_beta_csv, write_dataset_csv
from .temporal import (
    Role,
    make_cv_plan,
    make_split_plan,
    plan_from_roles,
    read_split_plan,
    write_split_plan,
)

log = logging.getLogger("sporecast")

DEFAULT_ALPHAS = [0.05, 0.1, 0.5, 0.8, 1.5, 2.0, 2.5, 3.0]
EXIT_DATA, EXIT_SOLVE, EXIT_AUDIT = 2, 3, 4


@dataclass
class RunConfig:
    command: str
    train: Optional[str] = None
    test: Optional[str] = None
    schema: Optional[str] = None
    split_plan: Optional[str] = None
    timestamp_col: str = "timestamp"
    target_col: str = "y_var"
    drop_categorical: bool = False
    alpha: float = 2.0
    quantizer: str = "nearest"
    initial_fraction: float = 0.4
    test_fraction: float = 0.5
    seed: int = 0
    out: str = "out"
    no_scale: bool = False
    freeze_imputation: bool = False
    sherman_morrison: bool = False
    alphas: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    k: int = 5
    basis: str = "quantized"
    variants: List[str] = field(default_factory=lambda: ["full", "top10", "pca10"])
    # synth
    n: int = 1000
    d: int = 20
    informative: int = 5
    noise_sigma: float = 0.1
    missing_fraction: float = 0.0
    collinearity: float = 0.0
    start: str = "2021-01-30 06:23:06"
    step_seconds: int = 600
    intercept: float = 50.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            alpha=self.alpha,
            quantizer=QuantizerMode(self.quantizer),
            scale=not self.no_scale,
            freeze_imputation=self.freeze_imputation,
            sherman_morrison=self.sherman_morrison,
        )


class RunLog:
    """JSON-lines log; deterministic (no wall-clock fields)."""

    def __init__(self, path):
        self.fh = open(path, "w", encoding="utf-8")

    def __call__(self, event: str, **fields):
        self.fh.write(json.dumps({"event": event, **fields}, sort_keys=True) + "\n")

    def close(self):
        self.fh.close()


# -- data loading ----------------------------------------------------------


def _schema_for(cfg: RunConfig, header, rows):
    if cfg.schema:
        return load_schema(cfg.schema)
    return infer_schema(header, rows, cfg.timestamp_col, cfg.target_col)


def _require_train(cfg: RunConfig) -> str:
    if not cfg.train:
        raise DataError(f"{cfg.command} needs --train")
    return cfg.train


def load_training(cfg: RunConfig):
    path = _require_train(cfg)
    header, rows = read_csv_rows(path)
    schema = _schema_for(cfg, header, rows)
    ds, _ = build_dataset(
        header, rows, schema, encode_categorical=not cfg.drop_categorical, source=path
    )
    return ds


def load_with_plan(cfg: RunConfig):
    """Dataset and split plan for the evaluation-style commands.

    With ``--test`` the two files are merged into one timeline: training
    file rows are TRAIN, test file rows are TEST. Otherwise the plan comes
    from ``--split-plan`` or is drawn from the split parameters.
    """
    path = _require_train(cfg)
    if cfg.test:
        header, train_rows = read_csv_rows(path)
        test_header, test_rows = read_csv_rows(cfg.test)
        if test_header != header:
            raise DataError(f"{cfg.test}: header differs from {path}")
        schema = _schema_for(cfg, header, train_rows + test_rows)
        ds, order = build_dataset(
            header,
            train_rows + test_rows,
            schema,
            encode_categorical=not cfg.drop_categorical,
            source=f"{path}+{cfg.test}",
        )
        n_train = len(train_rows)
        roles = [Role.TRAIN if src < n_train else Role.TEST for src in order]
        return ds, plan_from_roles(roles)
    ds = load_training(cfg)
    if cfg.split_plan:
        plan = read_split_plan(cfg.split_plan)
        if plan.n_rows != ds.n_rows:
            raise DataError(f"split plan has {plan.n_rows} rows, dataset has {ds.n_rows}")
    else:
        plan = make_split_plan(ds.n_rows, cfg.initial_fraction, cfg.test_fraction, cfg.seed)
    return ds, plan


# -- writers ---------------------------------------------------------------


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _metric_cells(report):
    if report is None:
        return ["NA", "NA", "NA", "NA"]
    return [fmt_float(report.mae), fmt_float(report.mse), fmt_float(report.rmse), fmt_r2(report.r_squared)]


def write_predictions(path, records) -> None:
    with_truth = any(r.truth is not None for r in records)
    fh, w = _writer(path)
    with fh:
        w.writerow(["timestamp", "raw", "quantized"] + (["truth"] if with_truth else []))
        for r in records:
            row = [format_timestamp(r.timestamp), fmt_float(r.raw), str(int(r.quantized))]
            if with_truth:
                row.append("" if r.truth is None else fmt_float(r.truth))
            w.writerow(row)


def write_audit(path, audit) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["row_index", "timestamp", "max_train_timestamp", "n_train_rows", "ok"])
        for a in audit:
            max_ts = "" if a.max_train_timestamp is None else format_timestamp(a.max_train_timestamp)
            w.writerow([a.row_index, format_timestamp(a.timestamp), max_ts, a.n_train_rows, int(a.ok)])


# -- commands --------------------------------------------------------------


def cmd_fit(cfg: RunConfig, runlog: RunLog) -> int:
    ds = load_training(cfg)
    runlog("loaded", rows=ds.n_rows, features=ds.n_features)
    labelled = np.flatnonzero(~ds.target_missing)
    if labelled.size == 0:
        raise DataError("no rows with a target value")
    state, plan = fit_rows(ds, labelled, cfg.eval_config(), strict=True)
    if plan is not None:
        runlog("imputation", modes={n: m for n, m in zip(ds.feature_names, plan.modes.tolist())})
    path = os.path.join(cfg.out, "model.prqr")
    save_state(state, path)
    runlog("solved", count=state.count, intercept=state.intercept)
    runlog("written", path=path)
    return 0


def cmd_evaluate(cfg: RunConfig, runlog: RunLog) -> int:
    ds, plan = load_with_plan(cfg)
    runlog("loaded", rows=ds.n_rows, features=ds.n_features, test_rows=int(plan.test_rows.size))
    result = evaluate(ds, plan, cfg.eval_config())
    write_split_plan(os.path.join(cfg.out, "split_plan.csv"), plan)
    write_predictions(os.path.join(cfg.out, "predictions.csv"), result.records)
    write_audit(os.path.join(cfg.out, "audit.csv"), result.audit)
    fh, w = _writer(os.path.join(cfg.out, "metrics.csv"))
    with fh:
        w.writerow(["basis", "quantizer", "mae", "mse", "rmse", "r2", "n"])
        for basis, report in (("raw", result.metrics_raw), ("quantized", result.metrics_quantized)):
            n = "0" if report is None else report.n
            w.writerow([basis, cfg.quantizer] + _metric_cells(report) + [n])
    for basis in ("raw", "quantized"):
        report = result.metrics(basis)
        if report is not None:
            runlog("metrics", basis=basis, **asdict(report))
            print(f"{basis:>9}: " + " ".join(f"{k}={v}" for k, v in zip(("mae", "mse", "rmse", "r2"), _metric_cells(report))))
    if result.violations:
        bad = result.violations[0]
        raise ConstraintViolation(
            f"{len(result.violations)} predictions used training data at or after their timestamp "
            f"(first: row {bad.row_index})"
        )
    return 0


def cmd_sweep(cfg: RunConfig, runlog: RunLog) -> int:
    ds, plan = load_with_plan(cfg)
    rows = sweep_alpha(ds, plan, cfg.alphas, cfg.eval_config())
    fh, w = _writer(os.path.join(cfg.out, "sweep.csv"))
    with fh:
        w.writerow(["alpha", "mae", "mse", "rmse", "r2", "n", "status"])
        for row in rows:
            report = row.metrics(cfg.basis)
            n = 0 if report is None else report.n
            w.writerow([repr(float(row.alpha))] + _metric_cells(report) + [n, row.error or "ok"])
            runlog("sweep_row", alpha=row.alpha, status=row.error or "ok")
    return 0


def cmd_cv(cfg: RunConfig, runlog: RunLog) -> int:
    ds = load_training(cfg)
    cv = make_cv_plan(ds.n_rows, cfg.k, ds.timestamps)
    folds = cross_validate(ds, cv, cfg.eval_config(), cfg.basis)
    fh, w = _writer(os.path.join(cfg.out, "cv.csv"))
    with fh:
        w.writerow(["split", "mae", "mse", "rmse", "r2"])
        for fold in folds:
            w.writerow([fold.split] + _metric_cells(fold.report))
            runlog("fold", split=fold.split, train_rows=fold.train_rows,
                   validation_rows=fold.validation_rows, status=fold.error or "ok")
    return 0


def cmd_report_missing(cfg: RunConfig, runlog: RunLog) -> int:
    ds = load_training(cfg)
    report = missingness_report(ds)
    write_missingness_report(os.path.join(cfg.out, "missing.csv"), report)
    runlog("missing", columns_with_missing=sum(1 for _, c, _ in report if c))
    return 0


def cmd_compare_features(cfg: RunConfig, runlog: RunLog) -> int:
    ds, plan = load_with_plan(cfg)
    variants = [FeatureVariant.parse(v) for v in cfg.variants]
    results = compare_feature_sets(ds, plan, cfg.eval_config(), variants)
    fh, w = _writer(os.path.join(cfg.out, "compare.csv"))
    with fh:
        w.writerow(["variant", "mae", "mse", "rmse", "r2"])
        for res in results:
            w.writerow([res.variant.label] + _metric_cells(res.metrics(cfg.basis)))
            runlog("variant", variant=res.variant.label, features=list(res.selected),
                   status=res.error or "ok")
    return 0


def cmd_synth(cfg: RunConfig, runlog: RunLog) -> int:
    spec = SynthSpec(
        n=cfg.n,
        d=cfg.d,
        informative=cfg.informative,
        noise_sigma=cfg.noise_sigma,
        missing_fraction=cfg.missing_fraction,
        collinearity=cfg.collinearity,
        seed=cfg.seed,
        start=cfg.start,
        step_seconds=cfg.step_seconds,
        intercept=cfg.intercept,
    )
    ds, beta = generate(spec)
    write_dataset_csv(os.path.join(cfg.out, "synth.csv"), ds)
    write_beta_csv(os.path.join(cfg.out, "synth_beta.csv"), ds.feature_names, beta, spec.intercept)
    runlog("written", rows=ds.n_rows, features=ds.n_features)
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "cv": cmd_cv,
    "report-missing": cmd_report_missing,
    "compare-features": cmd_compare_features,
    "synth": cmd_synth,
}


# -- argument parsing ------------------------------------------------------


def _float_list(text: str) -> List[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _str_list(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sporecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="replay a saved run_config.json (flags override)")
    common.add_argument("--out")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--train")
    data.add_argument("--test")
    data.add_argument("--schema", help="CSV with name,kind rows")
    data.add_argument("--split-plan", dest="split_plan", help="row_index,role CSV to reuse")
    data.add_argument("--timestamp-col", dest="timestamp_col")
    data.add_argument("--target-col", dest="target_col")
    data.add_argument("--drop-categorical", dest="drop_categorical", action="store_true", default=None)
    data.add_argument("--alpha", type=float)
    data.add_argument("--quantizer", choices=[m.value for m in QuantizerMode])
    data.add_argument("--initial-fraction", dest="initial_fraction", type=float)
    data.add_argument("--test-fraction", dest="test_fraction", type=float)
    data.add_argument("--no-scale", dest="no_scale", action="store_true", default=None)
    data.add_argument("--freeze-imputation", dest="freeze_imputation", action="store_true", default=None)
    data.add_argument("--sherman-morrison", dest="sherman_morrison", action="store_true", default=None,
                      help="rank-one inverse updates (needs alpha > 0)")
    data.add_argument("--basis", choices=["quantized", "raw"])

    subs = {}
    subs["fit"] = sub.add_parser("fit", parents=[common, data], help="fit on all rows, write model.prqr")
    subs["evaluate"] = sub.add_parser("evaluate", parents=[common, data], help="prequential evaluation")
    subs["sweep"] = sub.add_parser("sweep", parents=[common, data], help="alpha sweep")
    subs["sweep"].add_argument("--alphas", type=_float_list)
    subs["cv"] = sub.add_parser("cv", parents=[common, data], help="expanding-window cross-validation")
    subs["cv"].add_argument("--k", type=int)
    subs["report-missing"] = sub.add_parser("report-missing", parents=[common, data], help="missingness table")
    subs["compare-features"] = sub.add_parser(
        "compare-features", parents=[common, data], help="full vs selected feature sets"
    )
    subs["compare-features"].add_argument(
        "--variants", type=_str_list, help="comma list of full, top<k>, pca<k>, list:<file>"
    )
    synth = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    subs["synth"] = synth
    for flag, typ in (("--n", int), ("--d", int), ("--informative", int), ("--noise-sigma", float),
                      ("--missing-fraction", float), ("--collinearity", float), ("--start", str),
                      ("--step-seconds", int), ("--intercept", float)):
        synth.add_argument(flag, type=typ, dest=flag[2:].replace("-", "_"))
    return parser


def resolve_config(argv=None) -> tuple:
    parser = build_parser()
    args = parser.parse_args(argv)
    base = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
        if base.get("command", args.command) != args.command:
            raise DataError(f"config is for {base['command']!r}, not {args.command!r}")
    merged = {**asdict(RunConfig(command=args.command)), **base}
    for key, value in vars(args).items():
        if key in merged and value is not None and key != "command":
            merged[key] = value
    merged["command"] = args.command
    return RunConfig(**merged), args


def main(argv=None) -> int:
    try:
        cfg, args = resolve_config(argv)
    except (DataError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    os.makedirs(cfg.out, exist_ok=True)
    print("config: " + cfg.to_json())
    with open(os.path.join(cfg.out, "run_config.json"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json() + "\n")
    runlog = RunLog(os.path.join(cfg.out, "run_log.jsonl"))
    runlog("config", **asdict(cfg))
    try:
        code = COMMANDS[cfg.command](cfg, runlog)
    except ConstraintViolation as exc:
        runlog("error", kind=type(exc).__name__, message=str(exc))
        print(f"audit failure: {exc}", file=sys.stderr)
        code = EXIT_AUDIT
    except SolveError as exc:
        runlog("error", kind=type(exc).__name__, message=str(exc))
        print(f"solve error: {exc}", file=sys.stderr)
        code = EXIT_SOLVE
    except (SporecastError, FileNotFoundError, ValueError) as exc:
        runlog("error", kind=type(exc).__name__, message=str(exc))
        print(f"data error: {exc}", file=sys.stderr)
        code = EXIT_DATA
    finally:
        runlog.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
