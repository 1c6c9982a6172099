import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sporecast.errors import DegenerateSplit, TooFewRows, UnknownTestTimestamp
from sporecast.temporal import (
    Event,
    EventKind,
    Role,
    SplitPlan,
    admissible_training_rows,
    make_cv_plan,
    make_split_plan,
    plan_from_roles,
    prequential_schedule,
    read_split_plan,
    write_split_plan,
)

from conftest import make_dataset

R, P = EventKind.RETRAIN, EventKind.PREDICT


class TestSplitPlan:
    def test_initial_block_is_floor(self):
        plan = make_split_plan(10, 0.4, 0.5, seed=0)
        assert plan.initial_train == (0, 1, 2, 3)

    def test_floor_on_large_dataset(self):
        # floor(0.4 * 1526) = floor(610.4) = 610
        assert len(make_split_plan(1526, 0.4, 0.5, seed=0).initial_train) == 610

    def test_deterministic(self):
        assert make_split_plan(200, 0.4, 0.5, seed=9) == make_split_plan(200, 0.4, 0.5, seed=9)
        assert make_split_plan(200, 0.4, 0.5, seed=9) != make_split_plan(200, 0.4, 0.5, seed=10)

    def test_partition(self):
        plan = make_split_plan(57, 0.3, 0.4, seed=1)
        idx = list(plan.initial_train) + [i for i, _ in plan.stream]
        assert sorted(idx) == list(range(57))
        assert [i for i, _ in plan.stream] == sorted(i for i, _ in plan.stream)

    def test_test_fraction_is_respected_on_average(self):
        plan = make_split_plan(20_000, 0.4, 0.25, seed=4)
        frac = len(plan.test_rows) / len(plan.stream)
        assert abs(frac - 0.25) < 0.02

    def test_degenerate(self):
        with pytest.raises(DegenerateSplit):
            make_split_plan(3, 0.4, 1e-12, seed=0)
        with pytest.raises(DegenerateSplit):
            make_split_plan(1, 0.4, 0.5)
        with pytest.raises(DegenerateSplit):
            make_split_plan(10, 1.0, 0.5)

    def test_csv_round_trip(self, tmp_path):
        plan = make_split_plan(30, 0.4, 0.5, seed=2)
        write_split_plan(tmp_path / "p.csv", plan)
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "row_index,role" and lines[1] == "0,INITIAL"
        back = read_split_plan(tmp_path / "p.csv")
        assert back.initial_train == plan.initial_train and back.stream == plan.stream


class TestAdmissible:
    def test_all_earlier_rows(self):
        ds = make_dataset([[float(i)] for i in range(8)])
        plan = plan_from_roles([Role.INITIAL] * 3 + [Role.TRAIN] * 2 + [Role.TEST] + [Role.TRAIN] * 2)
        rows = admissible_training_rows(ds, plan, ds.timestamps[5])
        assert rows.tolist() == [0, 1, 2, 3, 4]

    def test_test_before_any_training(self):
        ds = make_dataset([[float(i)] for i in range(4)])
        plan = plan_from_roles([Role.TEST, Role.TRAIN, Role.TRAIN, Role.TEST])
        assert admissible_training_rows(ds, plan, ds.timestamps[0]).size == 0

    def test_shared_timestamp_is_excluded(self):
        ts = ["2021-01-01 00:00:00", "2021-01-01 00:01:00", "2021-01-01 00:01:00", "2021-01-01 00:02:00"]
        ds = make_dataset([[0.0]] * 4, timestamps=ts)
        plan = plan_from_roles([Role.TRAIN, Role.TRAIN, Role.TEST, Role.TRAIN])
        assert admissible_training_rows(ds, plan, ds.timestamps[2]).tolist() == [0]

    def test_unknown_timestamp(self):
        ds = make_dataset([[0.0]] * 3)
        plan = plan_from_roles([Role.TRAIN, Role.TEST, Role.TRAIN])
        with pytest.raises(UnknownTestTimestamp):
            admissible_training_rows(ds, plan, ds.timestamps[2])


class TestSchedule:
    def test_interleaving(self):
        plan = plan_from_roles([Role.TRAIN, Role.TEST, Role.TRAIN, Role.TEST])
        assert prequential_schedule(plan) == [Event(R, 0), Event(P, 1), Event(R, 2), Event(P, 3)]

    def test_leading_test_row(self):
        plan = plan_from_roles([Role.TEST, Role.TRAIN])
        assert prequential_schedule(plan)[0] == Event(P, 0)

    def test_replay_is_identical(self):
        plan = make_split_plan(100, 0.4, 0.5, seed=3)
        assert prequential_schedule(plan) == prequential_schedule(plan)

    def test_ties_predict_before_absorbing(self):
        ts = np.array(["2021-01-01 00:00:00"] * 2 + ["2021-01-01 00:05:00"] * 2, dtype="datetime64[s]")
        plan = plan_from_roles([Role.INITIAL, Role.TRAIN, Role.TRAIN, Role.TEST])
        events = prequential_schedule(plan, ts)
        assert events == [Event(R, 0), Event(R, 1), Event(P, 3), Event(R, 2)]


def _causal(plan: SplitPlan, ts: np.ndarray) -> bool:
    seen = []
    for ev in prequential_schedule(plan, ts):
        if ev.kind is R:
            seen.append(ev.index)
            continue
        t = ts[ev.index]
        train = plan.train_rows
        admissible = set(train[ts[train] < t].tolist())
        if any(ts[i] >= t for i in seen) or set(seen) != admissible:
            return False
    return True


@settings(max_examples=150, deadline=None)
@given(
    n=st.integers(2, 60),
    init=st.floats(0.05, 0.95),
    test=st.floats(0.05, 0.95),
    seed=st.integers(0, 2**64 - 1),
    tie_every=st.integers(1, 4),
)
def test_schedule_causality(n, init, test, seed, tie_every):
    try:
        plan = make_split_plan(n, init, test, seed)
    except DegenerateSplit:
        return
    ts = np.datetime64("2021-01-01", "s") + (np.arange(n) // tie_every) * np.timedelta64(1, "m")
    assert _causal(plan, ts)


class TestCvPlan:
    def test_blocks(self):
        cv = make_cv_plan(10, 5)
        assert [list(f.validation) for f in cv.folds] == [[2, 3], [4, 5], [6, 7], [8, 9]]
        assert [f.train_end for f in cv.folds] == [2, 4, 6, 8]

    def test_remainder_goes_last(self):
        cv = make_cv_plan(11, 5)
        assert list(cv.folds[-1].validation) == [8, 9, 10]
        assert len(cv.folds) == 4

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            make_cv_plan(5, 5)
        with pytest.raises(TooFewRows):
            make_cv_plan(10, 1)

    def test_minimal_k(self):
        cv = make_cv_plan(4, 2)
        assert len(cv.folds) == 1 and cv.folds[0].train_end == 2

    def test_ties_trim_training_block(self):
        ts = np.array(["2021-01-01 00:00:00"] * 3 + ["2021-01-01 00:01:00"] * 3, dtype="datetime64[s]")
        cv = make_cv_plan(6, 2, ts)
        assert cv.folds[0].val_start == 3 and cv.folds[0].train_end == 3
        ts2 = np.array(["2021-01-01 00:00:00"] * 2 + ["2021-01-01 00:01:00"] * 4, dtype="datetime64[s]")
        assert make_cv_plan(6, 2, ts2).folds[0].train_end == 2

    @given(n=st.integers(4, 300), k=st.integers(2, 10))
    def test_soundness(self, n, k):
        if n < 2 * k:
            return
        cv = make_cv_plan(n, k)
        assert len(cv.folds) == k - 1
        prev_end = cv.folds[0].val_start
        for f in cv.folds:
            assert f.train_end <= f.val_start < f.val_end
            assert f.val_start == prev_end
            prev_end = f.val_end
        assert prev_end == n
        assert math.isclose(cv.folds[0].val_start, n // k)
