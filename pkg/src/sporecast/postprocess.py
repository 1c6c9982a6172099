"""Snap raw predictions onto the non-negative grid {0, 5, 10, ...}.

Two rules are available:

``nearest`` (default)
    0 for ``x <= 2.5``, otherwise the nearest multiple of 5 with exact
    midpoints rounded up (7.5 -> 10).

``paper-literal``
    0 for ``x <= 2.5``; an (approximate) multiple of 5 is returned
    unchanged; ``x`` with ``x - 0.01`` on the grid maps to the next
    multiple up; anything else is floored to a multiple of 5. This floors
    12.6 to 10 where ``nearest`` gives 15.
"""

from __future__ import annotations

import enum
import math
from typing import Iterable, List

import numpy as np

from .data_model import PredictionRecord
from .errors import NonFiniteInput

STEP = 5.0
ZERO_THRESHOLD = 2.5
GRID_TOL = 1e-9


class QuantizerMode(enum.Enum):
    NEAREST = "nearest"
    PAPER_LITERAL = "paper-literal"


def _on_grid(x: float) -> bool:
    return abs(x - STEP * round(x / STEP)) <= GRID_TOL


def quantize(x: float, mode: QuantizerMode = QuantizerMode.NEAREST) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteInput(f"cannot quantize {x}")
    if x <= ZERO_THRESHOLD:
        return 0.0
    if mode is QuantizerMode.NEAREST:
        return STEP * math.floor(x / STEP + 0.5)
    if _on_grid(x):
        return STEP * round(x / STEP)
    if _on_grid(x - 0.01):
        return STEP * math.floor(x / STEP) + STEP
    return STEP * math.floor(x / STEP)


def quantize_array(values, mode: QuantizerMode = QuantizerMode.NEAREST) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteInput(f"non-finite raw prediction at index {bad[0]}", index=int(bad[0]))
    if mode is QuantizerMode.NEAREST:
        out = STEP * np.floor(values / STEP + 0.5)
        out[values <= ZERO_THRESHOLD] = 0.0
        return out
    return np.array([quantize(v, mode) for v in values])


def quantize_batch(
    records: Iterable[PredictionRecord], mode: QuantizerMode = QuantizerMode.NEAREST
) -> List[PredictionRecord]:
    """Fill the ``quantized`` field of each record, preserving order."""
    records = list(records)
    for i, rec in enumerate(records):
        if not math.isfinite(rec.raw):
            raise NonFiniteInput(f"non-finite raw prediction at index {i}", index=i)
    return [
        PredictionRecord(r.timestamp, r.raw, quantize(r.raw, mode), r.truth, r.fallback)
        for r in records
    ]
