import numpy as np
import pytest
from hypothesis import given, strategies as st

from sporecast.data_model import PredictionRecord
from sporecast.errors import NonFiniteInput
from sporecast.postprocess import QuantizerMode, quantize, quantize_array, quantize_batch

N, L = QuantizerMode.NEAREST, QuantizerMode.PAPER_LITERAL
finite = st.floats(-1e6, 1e6, allow_nan=False)


@pytest.mark.parametrize(
    "x, nearest, literal",
    [(-3, 0, 0), (2.5, 0, 0), (0, 0, 0), (12.4, 10, 10), (12.6, 15, 10), (7.5, 10, 5), (15, 15, 15)],
)
def test_examples(x, nearest, literal):
    assert quantize(x, N) == nearest
    assert quantize(x, L) == literal


def test_literal_offset_branch():
    assert quantize(10.01, L) == 15
    assert quantize(10.01, N) == 10


def test_batch_examples():
    ts = np.datetime64("2021-01-01T00:00:00", "s")
    out = quantize_batch([PredictionRecord(ts, r, 0.0) for r in (-1.0, 3.0, 7.0)], N)
    assert [r.quantized for r in out] == [0, 5, 5]
    assert [r.raw for r in out] == [-1.0, 3.0, 7.0]
    assert quantize_batch([], N) == []
    assert quantize_batch([PredictionRecord(ts, 2.5000001, 0.0)])[0].quantized == 5


def test_non_finite_index():
    ts = np.datetime64("2021-01-01T00:00:00", "s")
    with pytest.raises(NonFiniteInput) as err:
        quantize_batch([PredictionRecord(ts, 1.0, 0.0), PredictionRecord(ts, float("nan"), 0.0)])
    assert err.value.index == 1
    with pytest.raises(NonFiniteInput):
        quantize(float("inf"))


def test_array_matches_scalar():
    xs = np.random.default_rng(0).uniform(-20, 200, 5000)
    assert quantize_array(xs, N).tolist() == [quantize(x, N) for x in xs]
    assert quantize_array(xs[:200], L).tolist() == [quantize(x, L) for x in xs[:200]]


@given(finite, st.sampled_from([N, L]))
def test_range_and_idempotence(x, mode):
    q = quantize(x, mode)
    assert q >= 0 and q % 5 == 0
    assert quantize(q, mode) == q


@given(finite, finite)
def test_nearest_monotone(a, b):
    lo, hi = sorted((a, b))
    assert quantize(lo, N) <= quantize(hi, N)


@given(st.floats(0, 1e6))
def test_nearest_error_bound(x):
    assert abs(quantize(x, N) - x) <= 2.5
