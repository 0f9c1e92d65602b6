import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedhar.dataset import LabelMap
from fedhar.errors import ContractError, EvaluationError
from fedhar.metrics import (
    ClientComms,
    CommunicationLedger,
    ConfusionMatrix,
    communication_summary,
    macro_f1,
    per_class_f1,
    write_f1_per_round,
    write_per_client_label_f1,
    write_rounds_attended,
)

TWO = LabelMap.from_names(["NULL", "one"])
THREE = LabelMap.from_names(["NULL", "one", "two"])


class TestConfusionMatrix:
    def test_from_pairs_counts(self):
        cm = ConfusionMatrix.from_pairs([0, 0, 1, 1], [0, 1, 1, 1], TWO)
        np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 2]])
        assert cm.total == 4

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ContractError):
            ConfusionMatrix(np.zeros((3, 3), dtype=np.int64), TWO)

    def test_out_of_range_class_rejected(self):
        with pytest.raises(ContractError):
            ConfusionMatrix.from_pairs([0, 2], [0, 0], TWO)


class TestF1:
    def test_hand_computed_two_class(self):
        # truth\pred: [[5, 5], [0, 10]]
        # class 0: TP=5 FP=0 FN=5 -> F1 = 10/15; class 1: TP=10 FP=5 FN=0 -> 20/25.
        cm = ConfusionMatrix(np.array([[5, 5], [0, 10]]), TWO)
        scores = per_class_f1(cm)
        np.testing.assert_allclose(scores, [2 / 3, 0.8])
        assert abs(macro_f1(cm) - (2 / 3 + 0.8) / 2) < 1e-12

    def test_constant_predictor_balanced(self):
        # Always predicting class 0 on a balanced 2-class set:
        # class 0 F1 = 2/3, class 1 F1 = 0 -> macro 1/3.
        cm = ConfusionMatrix.from_pairs([0, 0, 1, 1], [0, 0, 0, 0], TWO)
        assert abs(macro_f1(cm) - 1 / 3) < 1e-12

    def test_absent_class_is_nan_and_excluded(self):
        cm = ConfusionMatrix.from_pairs([0, 0], [0, 0], THREE)
        scores = per_class_f1(cm)
        assert scores[0] == 1.0
        assert np.isnan(scores[1]) and np.isnan(scores[2])
        assert macro_f1(cm) == 1.0

    def test_class_predicted_but_never_true_counts_as_zero(self):
        # False positives define the class's F1 (zero), unlike absence.
        cm = ConfusionMatrix.from_pairs([0, 0], [0, 1], TWO)
        scores = per_class_f1(cm)
        assert scores[1] == 0.0

    def test_all_empty_raises(self):
        cm = ConfusionMatrix(np.zeros((2, 2), dtype=np.int64), TWO)
        with pytest.raises(EvaluationError):
            macro_f1(cm)

    @given(
        truth=st.lists(st.integers(0, 2), min_size=1, max_size=50),
        pred=st.lists(st.integers(0, 2), min_size=1, max_size=50),
    )
    @settings(max_examples=80, deadline=None)
    def test_f1_bounds_property(self, truth, pred):
        n = min(len(truth), len(pred))
        cm = ConfusionMatrix.from_pairs(truth[:n], pred[:n], THREE)
        scores = per_class_f1(cm)
        defined = scores[~np.isnan(scores)]
        assert ((defined >= 0.0) & (defined <= 1.0)).all()
        if defined.size:
            assert 0.0 <= macro_f1(cm) <= 1.0

    def test_perfect_prediction_is_one(self):
        truth = [0, 1, 2, 1, 0]
        cm = ConfusionMatrix.from_pairs(truth, truth, THREE)
        assert macro_f1(cm) == 1.0


class FakeEntry:
    def __init__(self, client_id, participated, val_f1=0.5):
        self.client_id = client_id
        self.participated = participated
        self.val_f1 = val_f1


class FakeRecord:
    def __init__(self, round_index, entries):
        self.round_index = round_index
        self.entries = entries


class FakeRun:
    def __init__(self, rounds_scheduled, flags_by_client, stop_rounds=None):
        self.rounds_scheduled = rounds_scheduled
        self.client_ids = sorted(flags_by_client)
        self.stop_rounds = stop_rounds or {}
        executed = len(next(iter(flags_by_client.values())))
        self.records = [
            FakeRecord(
                r + 1,
                tuple(
                    FakeEntry(cid, flags_by_client[cid][r]) for cid in self.client_ids
                ),
            )
            for r in range(executed)
        ]
        self.label_map = TWO


class TestCommunicationSummary:
    def test_attended_plus_saved_is_schedule(self):
        run = FakeRun(
            10,
            {0: [True] * 10, 1: [True] * 4 + [False] * 6},
            stop_rounds={1: 4},
        )
        ledger = communication_summary(run)
        for client in ledger.clients:
            assert client.attended + client.saved == 10
        assert ledger.total_saved == 6
        assert ledger.reduction == 6 / 20
        assert ledger.stopped_early == 1

    def test_quarter_stop_reduction(self):
        # 1 of 4 clients stops at round 50 of 100: saved = 50 of 400.
        flags = {cid: [True] * 100 for cid in range(3)}
        flags[3] = [True] * 50 + [False] * 50
        ledger = communication_summary(FakeRun(100, flags, stop_rounds={3: 50}))
        assert ledger.reduction == 0.125

    def test_resumed_participation_rejected(self):
        run = FakeRun(5, {0: [True, False, True, True, True]})
        with pytest.raises(ContractError, match="resumes"):
            communication_summary(run)

    def test_stop_round_attendance_mismatch_rejected(self):
        run = FakeRun(5, {0: [True] * 5}, stop_rounds={0: 3})
        with pytest.raises(ContractError, match="disagrees"):
            communication_summary(run)

    def test_missing_client_in_round_rejected(self):
        run = FakeRun(3, {0: [True] * 3, 1: [True] * 3})
        run.records[1] = FakeRecord(2, (FakeEntry(0, True),))
        with pytest.raises(ContractError, match="missing"):
            communication_summary(run)

    def test_unknown_client_rejected(self):
        run = FakeRun(2, {0: [True] * 2})
        run.records[0] = FakeRecord(1, (FakeEntry(0, True), FakeEntry(7, True)))
        with pytest.raises(ContractError, match="unknown"):
            communication_summary(run)

    def test_baseline_reduction_zero(self):
        ledger = communication_summary(FakeRun(8, {0: [True] * 8, 1: [True] * 8}))
        assert ledger.reduction == 0.0
        assert ledger.stopped_early == 0


class TestCsvWriters:
    def test_rounds_attended_layout(self, tmp_path):
        ledger = CommunicationLedger(
            rounds_scheduled=10,
            clients=[ClientComms(0, 10, 0, None), ClientComms(1, 4, 6, 4)],
        )
        path = tmp_path / "rounds.csv"
        write_rounds_attended(path, ledger)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["client_id", "attended", "saved"]
        assert rows[1:] == [["0", "10", "0"], ["1", "4", "6"]]

    def test_label_f1_blank_for_undefined(self, tmp_path):
        class Run:
            client_ids = [0]
            label_map = THREE
            confusions = {0: ConfusionMatrix.from_pairs([0, 0], [0, 0], THREE)}

        path = tmp_path / "grid.csv"
        write_per_client_label_f1(path, Run())
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["client_id", "A", "B", "C"]
        assert rows[1] == ["0", "1.000000", "", ""]

    def test_f1_per_round_has_mean_column(self, tmp_path):
        run = FakeRun(2, {0: [True, True], 1: [True, True]})
        for record in run.records:
            for entry in record.entries:
                entry.val_f1 = 0.25 if entry.client_id == 0 else 0.75
        path = tmp_path / "f1.csv"
        write_f1_per_round(path, run)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["round", "client_0", "client_1", "mean"]
        assert rows[1] == ["1", "0.250000", "0.750000", "0.500000"]
