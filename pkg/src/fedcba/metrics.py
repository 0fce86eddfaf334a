"""Binary classification metrics and report writers."""
import csv
import io
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

DEFAULT_CLASS_NAMES = {"0": "No Hypertension", "1": "Hypertension"}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self):
        """The same predictions seen with the other class as positive."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class EvaluationReport:
    labels: tuple  # (negative, positive)
    confusion: ConfusionMatrix
    per_class: dict
    macro: ClassMetrics
    accuracy: float
    roc_points: list = field(default_factory=list)
    auc: float = float("nan")
    auc_pairwise: float = float("nan")
    zero_division: list = field(default_factory=list)

    def to_dict(self):
        return {
            "labels": {"negative": self.labels[0], "positive": self.labels[1]},
            "confusion": {"tp": self.confusion.tp, "fp": self.confusion.fp,
                          "tn": self.confusion.tn, "fn": self.confusion.fn},
            "accuracy": self.accuracy,
            "per_class": {c: vars(m) for c, m in self.per_class.items()},
            "macro": vars(self.macro),
            "auc": self.auc,
            "auc_pairwise": self.auc_pairwise,
            "zero_division": list(self.zero_division),
            "roc_points": [list(p) for p in self.roc_points],
        }


def confusion(predictions, positive="1"):
    """Count ``(true, predicted)`` pairs; anything not ``positive`` is negative."""
    predictions = list(predictions)
    if not predictions:
        raise ValueError("confusion needs at least one prediction")
    seen = {label for pair in predictions for label in pair}
    if len(seen) > 2:
        raise ValueError(f"expected binary labels, got {sorted(seen)}")
    tp = fp = tn = fn = 0
    for truth, pred in predictions:
        if pred == positive:
            if truth == positive:
                tp += 1
            else:
                fp += 1
        elif truth == positive:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, tn, fn)


def _ratio(num, den, flag, flags):
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def _class_metrics(tp, fp, fn, label, flags):
    p = _ratio(tp, tp + fp, f"precision:{label}", flags)
    r = _ratio(tp, tp + fn, f"recall:{label}", flags)
    f1 = _ratio(2 * p * r, p + r, f"f1:{label}", flags)
    return ClassMetrics(p, r, f1)


def prf1(cm, labels=("0", "1")):
    """Per-class and macro precision/recall/F1 plus accuracy.

    Returns ``(per_class, macro, accuracy, zero_division)``; a zero
    denominator yields 0 and is listed in ``zero_division``.
    """
    neg, pos = labels
    flags = []
    per_class = {
        neg: _class_metrics(cm.tn, cm.fn, cm.fp, neg, flags),
        pos: _class_metrics(cm.tp, cm.fp, cm.fn, pos, flags),
    }
    values = list(per_class.values())
    macro = ClassMetrics(*(float(np.mean([getattr(m, k) for m in values]))
                           for k in ("precision", "recall", "f1")))
    accuracy = _ratio(cm.tp + cm.tn, cm.total, "accuracy", flags)
    return per_class, macro, accuracy, flags


def _scored_arrays(scored, positive):
    scored = list(scored)
    truth = np.array([t == positive for t, _ in scored], dtype=bool)
    scores = np.array([s for _, s in scored], dtype=np.float64)
    if truth.all() or not truth.any():
        raise ValueError("ROC/AUC undefined: scored input contains a single class")
    return truth, scores


def roc_auc(scored, positive="1"):
    """ROC points over every distinct score threshold, and trapezoidal AUC.

    ``scored`` holds ``(true_label, positive_class_score)`` pairs. A record
    is predicted positive at threshold ``t`` when its score is ``>= t``.
    """
    truth, scores = _scored_arrays(scored, positive)
    n_pos, n_neg = truth.sum(), (~truth).sum()
    order = np.argsort(-scores, kind="stable")
    s, t = scores[order], truth[order]
    tps = np.cumsum(t)
    fps = np.cumsum(~t)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    points = [(0.0, 0.0)] + [(float(fps[i] / n_neg), float(tps[i] / n_pos)) for i in ends]
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, float(auc)


def pairwise_auc(scored, positive="1", chunk=2048):
    """Probability a random positive outscores a random negative, ties counting 1/2."""
    truth, scores = _scored_arrays(scored, positive)
    pos, neg = scores[truth], scores[~truth]
    wins = 0.0
    for start in range(0, len(pos), chunk):
        block = pos[start:start + chunk, None]
        wins += np.sum(block > neg[None, :]) + 0.5 * np.sum(block == neg[None, :])
    return float(wins / (len(pos) * len(neg)))


def positive_score(label, score, positive="1"):
    """Score for the positive class from a predicted label and its confidence."""
    return score if label == positive else 1.0 - score


def evaluate(y_true, y_pred, y_score, labels=("0", "1")):
    """Full :class:`EvaluationReport`; ``y_score`` is the positive-class score."""
    neg, pos = labels
    cm = confusion(zip(y_true, y_pred), positive=pos)
    per_class, macro, accuracy, flags = prf1(cm, labels)
    scored = list(zip(y_true, y_score))
    try:
        points, auc = roc_auc(scored, pos)
        auc_pw = pairwise_auc(scored, pos)
    except ValueError:
        points, auc, auc_pw = [], float("nan"), float("nan")
        flags.append("auc:single-class")
    return EvaluationReport(tuple(labels), cm, per_class, macro, accuracy, points, auc, auc_pw, flags)


# ---------------------------------------------------------------------------
# formatting and output


def _half_up(dec, places):
    return float(dec.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def round_half_up(value, places=2):
    return _half_up(Decimal(repr(float(value))), places)


def percent(value, places=2):
    """``value`` as a percentage rounded half-up to ``places`` decimals.

    The shift by 100 happens in decimal, so 0.97525 gives 97.53.
    """
    return _half_up(Decimal(repr(float(value))).scaleb(2), places)


def table_rows(report, names=None, fraction_places=None):
    """Rows ``(class, precision, recall, f1, accuracy)`` as percentages.

    By default each percentage is rounded half-up to two decimals. With
    ``fraction_places=2`` the underlying fraction is rounded first, which
    gives the coarse ``99.00`` style of published tables.
    """
    names = dict(DEFAULT_CLASS_NAMES if names is None else names)

    def pct(v):
        if fraction_places is None:
            return percent(v)
        return percent(round_half_up(v, fraction_places))

    rows = []
    for label in report.labels:
        m = report.per_class[label]
        rows.append((names.get(label, label), pct(m.precision), pct(m.recall), pct(m.f1), pct(report.accuracy)))
    m = report.macro
    rows.append(("Macro Average", pct(m.precision), pct(m.recall), pct(m.f1), pct(report.accuracy)))
    return rows


def format_table(report, names=None, fraction_places=None):
    rows = table_rows(report, names, fraction_places)
    width = max(len("Class"), *(len(r[0]) for r in rows))
    out = [f"{'Class':<{width}}  Precision  Recall  F1-Score  Accuracy"]
    for name, *vals in rows:
        out.append(f"{name:<{width}}  {vals[0]:>9.2f}  {vals[1]:>6.2f}  {vals[2]:>8.2f}  {vals[3]:>8.2f}")
    return "\n".join(out)


def report_json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def metric_rows(report):
    """Flat ``(metric, class, value)`` rows; class is empty for whole-model metrics."""
    rows = [("accuracy", "", report.accuracy), ("auc", "", report.auc),
            ("auc_pairwise", "", report.auc_pairwise)]
    for key in ("tp", "fp", "tn", "fn"):
        rows.append((key, "", getattr(report.confusion, key)))
    for label in report.labels:
        m = report.per_class[label]
        rows += [("precision", label, m.precision), ("recall", label, m.recall), ("f1", label, m.f1)]
    m = report.macro
    rows += [("precision", "macro", m.precision), ("recall", "macro", m.recall), ("f1", "macro", m.f1)]
    return rows


def format_number(value):
    # repr of a numpy scalar is "np.float64(...)" under numpy 2
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "class", "value"])
    writer.writerows((m, c, format_number(v)) for m, c, v in metric_rows(report))
    return buf.getvalue()


def roc_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["fpr", "tpr"])
    writer.writerows((format_number(x), format_number(y)) for x, y in report.roc_points)
    return buf.getvalue()
