"""Causal train/test splits, prequential schedules and expanding-window CV.

Causality rule: a prediction at time ``t`` may only use training rows whose
timestamp is strictly earlier than ``t``. Rows sharing ``t`` are excluded.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .data_model import TimeSeriesDataset
from .errors import DataError, DegenerateSplit, TooFewRows, UnknownTestTimestamp
from .rng import SplitMix64


class Role(enum.Enum):
    INITIAL = "INITIAL"
    TRAIN = "TRAIN"
    TEST = "TEST"


@dataclass(frozen=True)
class SplitPlan:
    initial_train: Tuple[int, ...]
    stream: Tuple[Tuple[int, Role], ...]
    seed: Optional[int] = None

    @property
    def n_rows(self) -> int:
        return len(self.initial_train) + len(self.stream)

    def roles(self) -> List[Role]:
        out = [Role.INITIAL] * self.n_rows
        for idx, role in self.stream:
            out[idx] = role
        return out

    @property
    def test_rows(self) -> np.ndarray:
        return np.array([i for i, r in self.stream if r is Role.TEST], dtype=np.int64)

    @property
    def train_rows(self) -> np.ndarray:
        """Initial and stream training rows, in row order."""
        return np.array(
            list(self.initial_train) + [i for i, r in self.stream if r is Role.TRAIN],
            dtype=np.int64,
        )


def make_split_plan(
    n: int, initial_fraction: float = 0.4, test_fraction: float = 0.5, seed: int = 0
) -> SplitPlan:
    """First ``floor(initial_fraction * n)`` rows train; the rest are seeded Bernoulli draws.

    Remaining row ``i`` (in time order) is a test row when the ``i``-th
    SplitMix64 uniform of ``seed`` is below ``test_fraction``.
    """
    if n < 2:
        raise DegenerateSplit(f"need at least 2 rows, got {n}")
    for name, frac in (("initial_fraction", initial_fraction), ("test_fraction", test_fraction)):
        if not 0.0 < frac < 1.0:
            raise DegenerateSplit(f"{name} must lie in (0, 1), got {frac}")
    n_initial = math.floor(initial_fraction * n)
    draws = SplitMix64(seed).uniform(n - n_initial)
    stream = tuple(
        (n_initial + k, Role.TEST if u < test_fraction else Role.TRAIN) for k, u in enumerate(draws)
    )
    if not any(r is Role.TEST for _, r in stream):
        raise DegenerateSplit("no test rows assigned")
    return SplitPlan(initial_train=tuple(range(n_initial)), stream=stream, seed=seed)


def plan_from_roles(roles: Sequence[Role], seed: Optional[int] = None) -> SplitPlan:
    roles = list(roles)
    n_initial = 0
    while n_initial < len(roles) and roles[n_initial] is Role.INITIAL:
        n_initial += 1
    if Role.INITIAL in roles[n_initial:]:
        raise DataError("INITIAL rows must form a prefix of the time-ordered rows")
    stream = tuple((i, roles[i]) for i in range(n_initial, len(roles)))
    return SplitPlan(initial_train=tuple(range(n_initial)), stream=stream, seed=seed)


def write_split_plan(path, plan: SplitPlan) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_index", "role"])
        for i, role in enumerate(plan.roles()):
            w.writerow([i, role.value])


def read_split_plan(path) -> SplitPlan:
    with open(path, newline="", encoding="utf-8") as fh:
        entries = [(int(r["row_index"]), Role(r["role"].strip())) for r in csv.DictReader(fh)]
    entries.sort()
    if [i for i, _ in entries] != list(range(len(entries))):
        raise DataError(f"{path}: row indices must cover 0..n-1 exactly once")
    return plan_from_roles([r for _, r in entries])


def admissible_training_rows(ds: TimeSeriesDataset, plan: SplitPlan, t) -> np.ndarray:
    """Training rows (initial or stream TRAIN) with timestamp strictly before ``t``."""
    t = np.datetime64(t, "s")
    ts = ds.timestamps
    if not any(r is Role.TEST and ts[i] == t for i, r in plan.stream):
        raise UnknownTestTimestamp(f"{t} is not the timestamp of any test row")
    train = plan.train_rows
    return np.sort(train[ts[train] < t])


class EventKind(enum.Enum):
    RETRAIN = "RetrainAt"
    PREDICT = "PredictAt"


class Event(NamedTuple):
    kind: EventKind
    index: int


def prequential_schedule(plan: SplitPlan, timestamps: Optional[np.ndarray] = None) -> List[Event]:
    """Time-ordered test-then-train events.

    Rows sharing a timestamp form one group: its predictions are emitted
    before its training rows are absorbed. Without ``timestamps`` the row
    order is taken as strictly increasing time.
    """
    roles = plan.roles()
    n = len(roles)
    if timestamps is None:
        group_ids = np.arange(n)
    else:
        ts = np.asarray(timestamps)
        if len(ts) != n:
            raise DataError("timestamps length does not match plan")
        group_ids = np.concatenate([[0], np.cumsum(ts[1:] != ts[:-1])]) if n else ts
    events: List[Event] = []
    start = 0
    while start < n:
        stop = start
        while stop < n and group_ids[stop] == group_ids[start]:
            stop += 1
        group = range(start, stop)
        events.extend(Event(EventKind.PREDICT, i) for i in group if roles[i] is Role.TEST)
        events.extend(Event(EventKind.RETRAIN, i) for i in group if roles[i] is not Role.TEST)
        start = stop
    return events


@dataclass(frozen=True)
class CvFold:
    train_end: int  # training rows are [0, train_end)
    val_start: int
    val_end: int  # validation rows are [val_start, val_end)

    @property
    def validation(self) -> range:
        return range(self.val_start, self.val_end)


@dataclass(frozen=True)
class CvPlan:
    k: int
    folds: Tuple[CvFold, ...]


def make_cv_plan(n: int, k: int = 5, timestamps: Optional[np.ndarray] = None) -> CvPlan:
    """Expanding-window folds over ``k`` equal time blocks (remainder to the last).

    Fold ``i`` trains on blocks ``0..i-1`` and validates on block ``i``,
    giving ``k - 1`` scored folds. With ``timestamps``, training rows that
    share the first validation timestamp are dropped from the fold.
    """
    if k < 2 or n < 2 * k:
        raise TooFewRows(f"need k >= 2 and n >= 2k, got n={n}, k={k}")
    size = n // k
    folds = []
    for i in range(1, k):
        val_start = i * size
        val_end = n if i == k - 1 else (i + 1) * size
        train_end = val_start
        if timestamps is not None:
            train_end = int(np.searchsorted(timestamps, timestamps[val_start], side="left"))
            if train_end == 0:
                raise TooFewRows(f"fold {i} has no training rows before its validation block")
        folds.append(CvFold(train_end, val_start, val_end))
    return CvPlan(k=k, folds=tuple(folds))
