import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import precision_recall_fscore_support, roc_auc_score

from fedcba.metrics import (
    ConfusionMatrix, EvaluationReport, confusion, evaluate, format_table, pairwise_auc, percent, prf1,
    report_csv, report_json, roc_auc, roc_csv, round_half_up, table_rows,
)

# counts read off the published confusion matrix
GOLDEN = ConfusionMatrix(tp=2799, fp=114, tn=2284, fn=15)


def golden_report():
    per_class, macro, acc, flags = prf1(GOLDEN)
    return EvaluationReport(("0", "1"), GOLDEN, per_class, macro, acc, zero_division=flags)


class TestGolden:
    def test_accuracy(self):
        report = golden_report()
        assert report.accuracy == 5083 / 5212
        assert percent(report.accuracy) == 97.52

    def test_per_class_values(self):
        report = golden_report()
        neg, pos = report.per_class["0"], report.per_class["1"]
        assert neg.precision == 2284 / 2299 and neg.recall == 2284 / 2398
        assert pos.precision == 2799 / 2913 and pos.recall == 2799 / 2814
        assert report.zero_division == []

    def test_table_layout(self):
        rows = table_rows(golden_report())
        assert [r[0] for r in rows] == ["No Hypertension", "Hypertension", "Macro Average"]
        assert rows[0] == ("No Hypertension", 99.35, 95.25, 97.25, 97.52)
        assert rows[1] == ("Hypertension", 96.09, 99.47, 97.75, 97.52)
        assert rows[2] == ("Macro Average", 97.72, 97.36, 97.5, 97.52)

    def test_coarse_table_cells(self):
        # published precision/recall/F1 cells; the accuracy column differs (97.525% rounds up)
        rows = table_rows(golden_report(), fraction_places=2)
        assert [r[1:4] for r in rows] == [(99.0, 95.0, 97.0), (96.0, 99.0, 98.0), (98.0, 97.0, 98.0)]

    def test_format_table(self):
        text = format_table(golden_report())
        lines = text.splitlines()
        assert lines[0].split() == ["Class", "Precision", "Recall", "F1-Score", "Accuracy"]
        assert lines[1].endswith("99.35   95.25     97.25     97.52")
        assert len(lines) == 4


def test_half_up_rounding():
    assert round_half_up(0.125) == 0.13
    assert round_half_up(2.675) == 2.68  # repr is "2.675"; banker's rounding or binary floor would give 2.67
    assert percent(0.97525) == 97.53
    assert round(0.125, 2) == 0.12


def test_confusion_counts():
    pairs = [("1", "1"), ("1", "0"), ("0", "1"), ("0", "0"), ("0", "0")]
    assert confusion(pairs) == ConfusionMatrix(tp=1, fp=1, tn=2, fn=1)
    assert confusion(pairs, positive="0") == confusion(pairs).swapped()


@pytest.mark.parametrize("pairs", [[], [("a", "b"), ("c", "a")]])
def test_confusion_rejects(pairs):
    with pytest.raises(ValueError):
        confusion(pairs)


def test_zero_division_flags():
    per_class, macro, acc, flags = prf1(ConfusionMatrix(tp=0, fp=0, tn=5, fn=3))
    assert per_class["1"].precision == 0.0
    assert "precision:1" in flags
    assert acc == 5 / 8


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("01"), st.sampled_from("01")), min_size=1, max_size=60))
def test_prf1_matches_sklearn(pairs):
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    per_class, macro, acc, _ = prf1(confusion(pairs), ("0", "1"))
    p, r, f, _ = precision_recall_fscore_support(y_true, y_pred, labels=["0", "1"], zero_division=0)
    for k, label in enumerate("01"):
        assert per_class[label].precision == pytest.approx(p[k])
        assert per_class[label].recall == pytest.approx(r[k])
        assert per_class[label].f1 == pytest.approx(f[k])
    assert acc == pytest.approx(np.mean(np.array(y_true) == np.array(y_pred)))


def test_roc_simple():
    scored = [("1", 0.9), ("0", 0.8), ("1", 0.7), ("0", 0.1)]
    points, auc = roc_auc(scored)
    assert points == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
    assert auc == 0.75


def test_roc_ties_form_diagonal_segment():
    points, auc = roc_auc([("1", 0.5), ("0", 0.5)])
    assert points == [(0.0, 0.0), (1.0, 1.0)]
    assert auc == 0.5


def test_roc_single_class_rejected():
    with pytest.raises(ValueError):
        roc_auc([("1", 0.2), ("1", 0.4)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("01"), st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.9, 1.0])),
                min_size=2, max_size=80))
def test_trapezoid_equals_pairwise(scored):
    if len({t for t, _ in scored}) < 2:
        return
    _, auc = roc_auc(scored)
    assert auc == pytest.approx(pairwise_auc(scored), abs=1e-9)
    y = [t == "1" for t, _ in scored]
    assert auc == pytest.approx(roc_auc_score(y, [s for _, s in scored]), abs=1e-9)


def test_roc_monotone(rng):
    scored = list(zip(rng.choice(["0", "1"], 300), rng.random(300).round(2)))
    points, _ = roc_auc(scored)
    xs, ys = zip(*points)
    assert list(xs) == sorted(xs) and list(ys) == sorted(ys)
    assert points[-1] == (1.0, 1.0)


def test_evaluate_and_writers():
    y_true = ["0", "0", "1", "1", "1"]
    y_pred = ["0", "1", "1", "1", "0"]
    y_score = [np.float64(0.2), 0.6, 0.9, 0.8, 0.4]
    report = evaluate(y_true, y_pred, y_score)
    assert report.confusion == ConfusionMatrix(tp=2, fp=1, tn=1, fn=1)
    data = json.loads(report_json(report))
    assert data["confusion"] == {"tp": 2, "fp": 1, "tn": 1, "fn": 1}
    csv_text = report_csv(report)
    assert csv_text.startswith("metric,class,value\naccuracy,,0.6\n")
    assert "np.float" not in csv_text and "np.float" not in roc_csv(report)
    assert roc_csv(report).splitlines()[1] == "0.0,0.0"


def test_evaluate_single_class_flags_auc():
    report = evaluate(["1", "1"], ["1", "0"], [0.9, 0.2])
    assert math.isnan(report.auc)
    assert "auc:single-class" in report.zero_division
