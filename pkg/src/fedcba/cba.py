"""Local CBA classifier: rank mined rules, prune by database coverage,
pick a default class, and classify by the first matching rule."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import CATEGORICAL, DataError, dataset_from_arrays
from .mining import ClassAssociationRule, Item, MiningParams, from_bitset, item_covers, mine_cars, to_bitset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RuleModel:
    """Ranked rule list plus the default class; rules are ranked on construction."""

    rules: tuple
    default_class: str
    default_confidence: float

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(rank_rules(self.rules)))
        if not 0.0 <= self.default_confidence <= 1.0:
            raise ValueError(f"default_confidence must lie in [0, 1], got {self.default_confidence}")

    def __len__(self):
        return len(self.rules)


@dataclass(frozen=True)
class ClientModel:
    model: RuleModel
    train_count: int
    client_id: int = 0

    def __post_init__(self):
        if self.train_count < 1:
            raise ValueError("train_count must be positive")


def rank_key(rule):
    return (-rule.confidence, -rule.support, rule.order)


def rank_rules(rules):
    """Confidence descending, then support descending, then order ascending."""
    return sorted(rules, key=rank_key)


def _majority(labels, class_domain):
    counts = np.bincount(labels, minlength=len(class_domain))
    best = int(np.argmax(counts))  # argmax keeps the first maximum: class_domain order on ties
    return best, counts


def build_classifier(rules, train, prune=True):
    """Build a :class:`RuleModel` from rules mined on ``train``.

    With ``prune`` each ranked rule is kept only if it correctly classifies at
    least one training record no earlier kept rule covers (CBA-CB, M1); the
    records it covers are then marked covered. The default class is the
    majority among records left uncovered, or the overall majority when
    every record is covered.
    """
    ranked = rank_rules(rules)
    n = len(train)
    if n == 0:
        raise DataError("cannot build a classifier on an empty training set")
    overall, overall_counts = _majority(train.labels, train.class_domain)

    if not prune:
        kept = ranked
        matched = _first_match(ranked, train)
        uncovered_mask = matched < 0
    else:
        items, covers = item_covers(train)
        cover_of = dict(zip(items, covers))
        class_covers = [to_bitset(train.labels == c) for c in range(len(train.class_domain))]
        label_code = {label: c for c, label in enumerate(train.class_domain)}
        uncovered = (1 << n) - 1
        kept = []
        for rule in ranked:
            if not uncovered:
                break
            cover = uncovered
            for item in rule.antecedent:
                cover &= cover_of.get(item, 0)
            if rule.label not in label_code:
                continue
            correct = cover & class_covers[label_code[rule.label]]
            if correct:
                assert correct & uncovered, "retained rule must cover an uncovered record correctly"
                kept.append(rule)
                uncovered &= ~cover
        uncovered_mask = from_bitset(uncovered, n)

    if uncovered_mask.any():
        best, counts = _majority(train.labels[uncovered_mask], train.class_domain)
        default_conf = counts[best] / uncovered_mask.sum()
    else:
        best, counts = overall, overall_counts
        default_conf = counts[best] / n
    return RuleModel(kept, train.class_domain[best], float(default_conf))


def classify(model, record):
    """Label and score for one record given as ``{attribute: value}``.

    The score is the confidence of the first rule whose antecedent holds,
    or ``default_confidence`` when no rule fires.
    """
    for rule in model.rules:
        if rule.matches(record):
            return rule.label, rule.confidence
    return model.default_class, model.default_confidence


def _first_match(rules, ds):
    """Index of the first matching rule per record, -1 when none fires."""
    n = len(ds)
    first = np.full(n, -1, dtype=np.int64)
    open_rows = np.ones(n, dtype=bool)
    position = {a.name: j for j, a in enumerate(ds.schema)}
    lookup = [{v: k for k, v in enumerate(a.domain)} if a.kind == CATEGORICAL else {}
              for a in ds.schema]
    for r, rule in enumerate(rules):
        hit = open_rows.copy()
        for item in rule.antecedent:
            j = position.get(item.attribute)
            code = lookup[j].get(item.value) if j is not None else None
            if code is None:
                hit[:] = False
                break
            hit &= ds.columns[j] == code
        if hit.any():
            first[hit] = r
            open_rows &= ~hit
            if not open_rows.any():
                break
    return first


def predict_dataset(model, ds):
    """Vectorised :func:`classify` over a dataset: ``(labels, scores)`` lists."""
    first = _first_match(model.rules, ds)
    labels, scores = [], []
    for r in first:
        if r < 0:
            labels.append(model.default_class)
            scores.append(model.default_confidence)
        else:
            rule = model.rules[r]
            labels.append(rule.label)
            scores.append(rule.confidence)
    return labels, scores


def train_client(ds, params=MiningParams(), prune=True, client_id=0):
    """Mine and build one client's model; falls back to default-only when no rule is found."""
    rules = mine_cars(ds, params)
    if not rules:
        logger.warning("client %s mined no rules; sending a default-class-only model", client_id)
    return ClientModel(build_classifier(rules, ds, prune), len(ds), client_id)


# ---------------------------------------------------------------------------
# text serialization
#
# one rule per line:  conf<TAB>supp<TAB>order<TAB>label<TAB>attr=val,attr=val
# footer:             DEFAULT<TAB>label<TAB>confidence<TAB>train_count


def dumps_model(model, train_count):
    lines = []
    for rule in model.rules:
        body = ",".join(f"{i.attribute}={i.value}" for i in rule.sorted_items())
        lines.append(f"{rule.confidence!r}\t{rule.support!r}\t{rule.order}\t{rule.label}\t{body}")
    lines.append(f"DEFAULT\t{model.default_class}\t{model.default_confidence!r}\t{int(train_count)}")
    return "\n".join(lines) + "\n"


def loads_model(text):
    """Parse :func:`dumps_model` output into ``(RuleModel, train_count)``."""
    rules, footer = [], None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if footer is not None:
            raise ValueError(f"line {lineno}: content after DEFAULT footer")
        fields = line.split("\t")
        if fields[0] == "DEFAULT":
            if len(fields) != 4:
                raise ValueError(f"line {lineno}: footer needs 4 fields, got {len(fields)}")
            footer = (fields[1], float(fields[2]), int(fields[3]))
            continue
        if len(fields) != 5:
            raise ValueError(f"line {lineno}: rule needs 5 fields, got {len(fields)}")
        conf, supp, order, label, body = fields
        items = []
        for part in filter(None, body.split(",")):
            attr, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: malformed item {part!r}")
            items.append(Item(attr, value))
        rules.append(ClassAssociationRule(frozenset(items), label, float(supp), float(conf), int(order)))
    if footer is None:
        raise ValueError("missing DEFAULT footer")
    label, conf, train_count = footer
    return RuleModel(rules, label, conf), train_count


def write_client_model(path, client):
    Path(path).write_text(dumps_model(client.model, client.train_count), encoding="utf-8")


def read_client_model(path, client_id=0):
    model, train_count = loads_model(Path(path).read_text(encoding="utf-8"))
    return ClientModel(model, train_count, client_id)


def format_model(model, train_count=None):
    """Human-readable listing for ``show-model``."""
    lines = []
    width = len(str(len(model.rules)))
    for k, rule in enumerate(model.rules, 1):
        body = " AND ".join(map(str, rule.sorted_items())) or "TRUE"
        lines.append(f"{k:>{width}}. IF {body} THEN {rule.label}"
                     f"  [conf={rule.confidence:.4f} supp={rule.support:.4f} order={rule.order}]")
    tail = f"DEFAULT {model.default_class}  [conf={model.default_confidence:.4f}]"
    if train_count is not None:
        tail += f"  trained on {train_count} records"
    lines.append(tail)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# estimator


class RuleListPredictorMixin:
    """Prediction methods shared by estimators exposing a fitted ``model_``."""

    def _test_dataset(self, X):
        check_is_fitted(self, "model_")
        X = np.asarray(X, dtype=object)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got shape {X.shape}")
        # unseen values are kept; they simply match no rule item
        domains = {}
        for j, name in enumerate(self.feature_names_):
            seen = list(self.domains_[name])
            extra = sorted({str(v) for v in X[:, j]} - set(seen))
            domains[name] = tuple(seen + extra)
        dummy = [self.classes_[0]] * X.shape[0]
        return dataset_from_arrays(X, dummy, self.feature_names_, tuple(self.classes_), domains)

    def predict(self, X):
        labels, _ = predict_dataset(self.model_, self._test_dataset(X))
        return np.array(labels, dtype=object)

    def decision_function(self, X):
        """Score for ``classes_[-1]`` (``1 - confidence`` when the fired rule predicts otherwise)."""
        labels, scores = predict_dataset(self.model_, self._test_dataset(X))
        positive = self.classes_[-1]
        return np.array([s if lab == positive else 1.0 - s for lab, s in zip(labels, scores)])

    def predict_proba(self, X):
        if len(self.classes_) != 2:
            raise ValueError("predict_proba is only defined for binary problems")
        pos = self.decision_function(X)
        return np.column_stack([1.0 - pos, pos])

    def _remember_inputs(self, ds):
        self.classes_ = np.array(ds.class_domain, dtype=object)
        self.feature_names_ = ds.names
        self.domains_ = {a.name: a.domain for a in ds.schema}
        self.n_features_in_ = len(ds.names)


class CBAClassifier(RuleListPredictorMixin, ClassifierMixin, BaseEstimator):
    """Classification based on associations.

    Parameters
    ----------
    min_support, min_confidence : float
        Rule mining thresholds (closed comparisons on exact counts).
    max_antecedent_len : int or None
        Cap on antecedent size; ``None`` leaves it unbounded.
    prune : bool, default=True
        Apply database-coverage pruning.
    feature_names : list of str, optional
        Attribute names; taken from DataFrame columns when omitted.

    ``X`` holds category values (anything with a string form); numeric
    columns must be binned first, e.g. with ``QuantileDiscretizer``.
    """

    def __init__(self, min_support=0.02, min_confidence=0.5, max_antecedent_len=None,
                 prune=True, feature_names=None):
        self.min_support = min_support
        self.min_confidence = min_confidence
        self.max_antecedent_len = max_antecedent_len
        self.prune = prune
        self.feature_names = feature_names

    def fit(self, X, y):
        ds = dataset_from_arrays(X, y, self.feature_names)
        params = MiningParams(self.min_support, self.min_confidence, self.max_antecedent_len)
        self.rules_ = mine_cars(ds, params)
        self.model_ = build_classifier(self.rules_, ds, self.prune)
        self._remember_inputs(ds)
        return self
