import numpy as np
import pytest

from sporecast.data_model import with_features
from sporecast.evaluation import EvalConfig, cross_validate, evaluate, fit_rows, sweep_alpha
from sporecast.postprocess import QuantizerMode
from sporecast.synth import SynthSpec, generate
from sporecast.temporal import Role, admissible_training_rows, make_cv_plan, make_split_plan, plan_from_roles

from conftest import make_dataset


def brute_force(ds, plan, alpha):
    """Refit from scratch on the admissible rows of every test row."""
    out = []
    for i in plan.test_rows:
        tr = admissible_training_rows(ds, plan, ds.timestamps[i])
        X, y = ds.features[tr].copy(), ds.target[tr]
        miss = ds.missing[tr]
        fill = np.zeros(X.shape[1])
        for j in range(X.shape[1]):
            obs = X[~miss[:, j], j]
            if obs.size:
                vals, counts = np.unique(obs, return_counts=True)
                fill[j] = vals[np.argmax(counts)]
        X[miss] = np.broadcast_to(fill, X.shape)[miss]
        x = np.where(ds.missing[i], fill, ds.features[i])
        mu, sd = X.mean(0), X.std(0)
        sd = np.where(np.ptp(X, axis=0) == 0, 1.0, sd)
        keep = np.ptp(X, axis=0) > 0
        Z = ((X - mu) / sd)[:, keep]
        zbar, ybar = Z.mean(0), y.mean()
        A = (Z - zbar).T @ (Z - zbar) + alpha * np.eye(Z.shape[1])
        w = np.linalg.solve(A, (Z - zbar).T @ (y - ybar))
        out.append((((x - mu) / sd)[keep] - zbar) @ w + ybar)
    return np.array(out)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_matches_brute_force(seed):
    ds, _ = generate(SynthSpec(n=120, d=5, informative=3, noise_sigma=2.0, seed=seed))
    plan = make_split_plan(120, 0.4, 0.5, seed=seed)
    res = evaluate(ds, plan, EvalConfig(alpha=1.5))
    assert np.array([r.raw for r in res.records]) == pytest.approx(brute_force(ds, plan, 1.5), abs=1e-8)


def test_matches_brute_force_with_missing_values():
    ds, _ = generate(SynthSpec(n=150, d=4, informative=2, missing_fraction=0.15, seed=4))
    # round features so modes are meaningful
    ds = with_features(ds, np.round(ds.features, 0), ds.feature_names, ds.missing)
    plan = make_split_plan(150, 0.4, 0.5, seed=4)
    res = evaluate(ds, plan, EvalConfig(alpha=0.7))
    assert np.array([r.raw for r in res.records]) == pytest.approx(brute_force(ds, plan, 0.7), abs=1e-8)


def test_sherman_morrison_path_agrees():
    ds, _ = generate(SynthSpec(n=120, d=5, informative=3, seed=3))
    plan = make_split_plan(120, 0.4, 0.5, seed=3)
    a = evaluate(ds, plan, EvalConfig(alpha=1.0))
    b = evaluate(ds, plan, EvalConfig(alpha=1.0, sherman_morrison=True))
    assert [r.raw for r in a.records] == pytest.approx([r.raw for r in b.records], abs=1e-8)


def test_audit_is_clean_and_counts_match():
    ds, _ = generate(SynthSpec(n=200, d=3, informative=2, seed=8))
    plan = make_split_plan(200, 0.3, 0.5, seed=8)
    res = evaluate(ds, plan)
    assert res.violations == []
    for entry in res.audit:
        assert entry.n_train_rows == len(admissible_training_rows(ds, plan, entry.timestamp))


def test_leading_test_rows_use_fallback():
    ds = make_dataset([[1.0], [2.0], [3.0]], target=[5.0, 10.0, 15.0])
    plan = plan_from_roles([Role.TEST, Role.TRAIN, Role.TEST])
    res = evaluate(ds, plan, EvalConfig(fallback=5.0))
    assert res.records[0].fallback and res.records[0].raw == 5.0
    assert res.audit[0].max_train_timestamp is None and res.audit[0].ok
    assert not res.records[1].fallback


def test_quantizer_only_changes_quantized_column():
    ds, _ = generate(SynthSpec(n=150, d=4, informative=2, noise_sigma=3.0, seed=2))
    plan = make_split_plan(150, 0.4, 0.5, seed=2)
    a = evaluate(ds, plan, EvalConfig(quantizer=QuantizerMode.NEAREST))
    b = evaluate(ds, plan, EvalConfig(quantizer=QuantizerMode.PAPER_LITERAL))
    assert [r.raw for r in a.records] == [r.raw for r in b.records]
    assert [r.quantized for r in a.records] != [r.quantized for r in b.records]


def test_ridge_beats_unpenalized_under_collinearity():
    ds, _ = generate(SynthSpec(n=100, d=20, informative=5, noise_sigma=3.0, collinearity=0.99, seed=1))
    plan = make_split_plan(100, 0.4, 0.5, seed=1)
    rows = sweep_alpha(ds, plan, [0.0, 0.5, 2.0, 5.0, 20.0])
    mse = [r.metrics("raw").mse for r in rows]
    assert mse[1:] == pytest.approx([17.665, 17.855, 18.246, 18.456], abs=1e-3)
    assert mse[0] == pytest.approx(24.849, abs=1e-3)
    assert min(mse[1:]) < mse[0]


def test_sweep_records_failures():
    # duplicated column: alpha = 0 is singular, alpha > 0 is fine
    X = np.array([[float(i), float(i)] for i in range(12)])
    ds = make_dataset(X.tolist(), target=[5.0 * (i % 3) for i in range(12)])
    plan = make_split_plan(12, 0.5, 0.5, seed=0)
    rows = sweep_alpha(ds, plan, [0.0, 1.0])
    assert rows[0].result is None and "SingularSystem" in rows[0].error
    assert rows[1].error is None


def test_cross_validate_shape_and_causality():
    ds, _ = generate(SynthSpec(n=100, d=4, informative=2, seed=1))
    folds = cross_validate(ds, make_cv_plan(100, 5, ds.timestamps), EvalConfig(alpha=2.0))
    assert [f.split for f in folds] == [1, 2, 3, 4]
    assert [f.train_rows for f in folds] == [20, 40, 60, 80]
    assert all(f.report is not None and f.report.n == 20 for f in folds)


def test_fit_rows_uses_only_given_rows():
    ds, _ = generate(SynthSpec(n=60, d=3, informative=2, seed=1))
    a, _ = fit_rows(ds, np.arange(30), EvalConfig())
    b, _ = fit_rows(ds.__class__(**{**ds.__dict__, "target": np.where(np.arange(60) < 30, ds.target, 0.0)}),
                    np.arange(30), EvalConfig())
    assert a == b
