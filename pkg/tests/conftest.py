import numpy as np
import pytest

from sporecast.data_model import ColumnKind, ColumnSpec, TimeSeriesDataset
from sporecast.synth import SynthSpec, generate


def make_dataset(features, target=None, timestamps=None, names=None):
    """Small in-memory dataset; ``None`` cells become missing."""
    raw = np.array(
        [[np.nan if v is None else v for v in row] for row in features], dtype=np.float64
    )
    n, d = raw.shape
    names = tuple(names or (f"c{j}" for j in range(d)))
    if target is None:
        target = list(range(n))
    y = np.array([np.nan if v is None else v for v in target], dtype=np.float64)
    if timestamps is None:
        ts = np.datetime64("2021-01-30 06:23:06", "s") + np.arange(n) * np.timedelta64(60, "s")
    else:
        ts = np.array(timestamps, dtype="datetime64[s]")
    columns = (
        (ColumnSpec("timestamp", ColumnKind.TIMESTAMP),)
        + tuple(ColumnSpec(name, ColumnKind.NUMERIC) for name in names)
        + (ColumnSpec("y_var", ColumnKind.TARGET),)
    )
    return TimeSeriesDataset(
        columns=columns,
        timestamps=ts,
        features=raw,
        missing=np.isnan(raw),
        feature_names=names,
        target=y,
        target_missing=np.isnan(y),
    )


@pytest.fixture
def tiny():
    return make_dataset([[1.0, 10.0], [2.0, None], [2.0, 30.0], [None, 30.0], [5.0, 50.0]])


@pytest.fixture(scope="session")
def synth_default():
    """The n=1000, d=20, informative=5, sigma=0.1, seed=42 draw."""
    return generate(SynthSpec(n=1000, d=20, informative=5, noise_sigma=0.1, seed=42))


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
