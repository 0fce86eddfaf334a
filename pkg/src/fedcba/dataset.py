"""Tabular dataset handling: CSV ingestion, discretization, chi-square
feature selection and train/test/client partitioning.

A :class:`CategoricalDataset` stores one numpy column per attribute. Numeric
attributes hold raw ``float64`` values until they are discretized;
categorical attributes hold ``int64`` codes indexing into the attribute's
``domain`` tuple of string labels. Class labels are codes into
``class_domain``.
"""
import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._random import SPLIT, make_rng
from ._special import chi2_sf

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"

TARGET = "target"

# Column layout of the hypertension CSV.
HYPERTENSION_NUMERIC = ("age", "trestbps", "chol", "thalach", "oldpeak")
HYPERTENSION_CATEGORICAL = ("sex", "cp", "fbs", "restecg", "exang", "slope", "ca", "thal")


class DataError(ValueError):
    """Raised when input data cannot be used (bad file, header, values)."""


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    kind: str = CATEGORICAL
    domain: tuple = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown attribute kind {self.kind!r}")


def hypertension_schema():
    order = ("age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
             "thalach", "exang", "oldpeak", "slope", "ca", "thal")
    return [AttributeSchema(name, NUMERIC if name in HYPERTENSION_NUMERIC else CATEGORICAL)
            for name in order]


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    schema: tuple
    columns: tuple
    labels: np.ndarray
    class_domain: tuple
    dropped_rows: int = 0

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "class_domain", tuple(self.class_domain))
        names = [a.name for a in self.schema]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate attribute names in {names}")
        if len(self.columns) != len(self.schema):
            raise DataError("column count does not match schema")
        n = len(self.labels)
        cols = []
        for attr, col in zip(self.schema, self.columns):
            col = _frozen(col, np.float64 if attr.kind == NUMERIC else np.int64)
            if len(col) != n:
                raise DataError(f"column {attr.name!r} has {len(col)} rows, expected {n}")
            if attr.kind == CATEGORICAL:
                if not attr.domain:
                    raise DataError(f"categorical attribute {attr.name!r} has an empty domain")
                if n and (col.min() < 0 or col.max() >= len(attr.domain)):
                    raise DataError(f"column {attr.name!r} holds codes outside its domain")
            elif n and not np.all(np.isfinite(col)):
                raise DataError(f"column {attr.name!r} holds missing or non-finite values")
            cols.append(col)
        object.__setattr__(self, "columns", tuple(cols))
        labels = _frozen(self.labels, np.int64)
        if n and (labels.min() < 0 or labels.max() >= len(self.class_domain)):
            raise DataError("labels outside class_domain")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    @property
    def names(self):
        return [a.name for a in self.schema]

    def index(self, name):
        for i, attr in enumerate(self.schema):
            if attr.name == name:
                return i
        raise KeyError(name)

    def attribute(self, name):
        return self.schema[self.index(name)]

    def column(self, name):
        return self.columns[self.index(name)]

    @property
    def is_categorical(self):
        return all(a.kind == CATEGORICAL for a in self.schema)

    def codes(self):
        """``(n_records, n_attributes)`` integer code matrix."""
        if not self.is_categorical:
            raise DataError("dataset still has numeric attributes; discretize it first")
        if not self.schema:
            return np.empty((len(self), 0), dtype=np.int64)
        return np.column_stack(self.columns).astype(np.int64, copy=False)

    def label_values(self):
        return [self.class_domain[c] for c in self.labels]

    def records(self):
        """Yield ``({attribute: value}, label)`` pairs with string values."""
        for i in range(len(self)):
            row = {}
            for attr, col in zip(self.schema, self.columns):
                row[attr.name] = attr.domain[col[i]] if attr.kind == CATEGORICAL else float(col[i])
            yield row, self.class_domain[self.labels[i]]

    def take(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return CategoricalDataset(self.schema, [c[indices] for c in self.columns],
                                  self.labels[indices], self.class_domain)

    def drop(self, names):
        names = set(names)
        keep = [i for i, a in enumerate(self.schema) if a.name not in names]
        return CategoricalDataset([self.schema[i] for i in keep],
                                  [self.columns[i] for i in keep],
                                  self.labels, self.class_domain, self.dropped_rows)

    def with_columns(self, schema, columns):
        return CategoricalDataset(schema, columns, self.labels, self.class_domain,
                                  self.dropped_rows)

    @classmethod
    def from_records(cls, records, names, class_domain=None, domains=None):
        """Build a fully categorical dataset from ``(values, label)`` pairs.

        ``domains`` optionally fixes each attribute's value order; otherwise
        domains are the sorted observed values.
        """
        records = list(records)
        names = list(names)
        domains = dict(domains or {})
        schema, columns = [], []
        for j, name in enumerate(names):
            raw = [str(values[j]) for values, _ in records]
            domain = tuple(domains.get(name) or _sorted_levels(set(raw)))
            lookup = {v: k for k, v in enumerate(domain)}
            try:
                columns.append(np.array([lookup[v] for v in raw], dtype=np.int64))
            except KeyError as exc:
                raise DataError(f"value {exc.args[0]!r} not in domain of {name!r}") from None
            schema.append(AttributeSchema(name, CATEGORICAL, domain))
        raw_labels = [str(label) for _, label in records]
        class_domain = tuple(class_domain or _sorted_levels(set(raw_labels)))
        lookup = {v: k for k, v in enumerate(class_domain)}
        labels = np.array([lookup[v] for v in raw_labels], dtype=np.int64)
        return cls(schema, columns, labels, class_domain)


def _frozen(values, dtype):
    # reuse arrays this module already froze, copy anything caller-owned
    if isinstance(values, np.ndarray) and values.dtype == dtype and not values.flags.writeable:
        return values
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def _level_key(value):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def _sorted_levels(values):
    return sorted(values, key=_level_key)


@dataclass(frozen=True)
class DatasetStats:
    record_count: int
    class_counts: dict
    imbalance_ratio: float


def dataset_stats(ds):
    counts = np.bincount(ds.labels, minlength=len(ds.class_domain))
    class_counts = {label: int(c) for label, c in zip(ds.class_domain, counts)}
    present = [c for c in counts if c > 0]
    ratio = max(present) / min(present) if present else float("nan")
    return DatasetStats(len(ds), class_counts, float(ratio))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    client_count: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if int(self.client_count) != self.client_count or self.client_count < 1:
            raise ValueError(f"client_count must be a positive integer, got {self.client_count}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


# ---------------------------------------------------------------------------
# ingestion


def load_csv(path, schema, target_name=TARGET):
    """Read a comma-separated file whose header matches ``schema`` plus the target.

    Rows with an empty cell, or a numeric cell that does not parse as a
    finite number, are dropped; the number dropped is stored on the result as
    ``dropped_rows``. Categorical domains are the sorted observed values.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    schema = list(schema)
    expected = [a.name for a in schema] + [target_name]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        missing = sorted(set(expected) - set(header))
        extra = sorted(set(header) - set(expected))
        if missing or extra or len(header) != len(set(header)):
            raise DataError(f"header mismatch in {path}: missing={missing} unexpected={extra}")
        positions = [header.index(name) for name in expected]
        kinds = [a.kind for a in schema] + [CATEGORICAL]

        parsed, dropped = [], 0
        for row in reader:
            if not row:
                continue
            values = _parse_row(row, positions, kinds, len(header))
            if values is None:
                dropped += 1
            else:
                parsed.append(values)

    if dropped:
        logger.info("dropped %d incomplete or malformed rows from %s", dropped, path)
    if not parsed:
        raise DataError(f"no usable rows in {path}")

    columns, out_schema = [], []
    for j, attr in enumerate(schema):
        raw = [r[j] for r in parsed]
        if attr.kind == NUMERIC:
            columns.append(np.array(raw, dtype=np.float64))
            out_schema.append(AttributeSchema(attr.name, NUMERIC))
        else:
            domain = tuple(_sorted_levels(set(raw)))
            lookup = {v: k for k, v in enumerate(domain)}
            columns.append(np.array([lookup[v] for v in raw], dtype=np.int64))
            out_schema.append(AttributeSchema(attr.name, CATEGORICAL, domain))
    raw_labels = [r[-1] for r in parsed]
    class_domain = tuple(_sorted_levels(set(raw_labels)))
    lookup = {v: k for k, v in enumerate(class_domain)}
    labels = np.array([lookup[v] for v in raw_labels], dtype=np.int64)
    return CategoricalDataset(out_schema, columns, labels, class_domain, dropped)


def _parse_row(row, positions, kinds, width):
    if len(row) != width:
        return None
    values = []
    for pos, kind in zip(positions, kinds):
        cell = row[pos].strip()
        if cell == "" or cell.upper() in ("NA", "NAN", "?"):
            return None
        if kind == NUMERIC:
            try:
                number = float(cell)
            except ValueError:
                return None
            if not math.isfinite(number):
                return None
            values.append(number)
        else:
            values.append(_canonical_category(cell))
    return values


def _canonical_category(cell):
    # "1.0" and "1" denote the same category code
    try:
        number = float(cell)
    except ValueError:
        return cell
    if number.is_integer():
        return str(int(number))
    return cell


# ---------------------------------------------------------------------------
# derived attributes and discretization


def derive_thalach_ratio(ds, name="thalach_ratio"):
    """Replace ``thalach`` by ``thalach / (220 - age)`` (fraction of predicted max heart rate)."""
    for required in ("thalach", "age"):
        if required not in ds.names or ds.attribute(required).kind != NUMERIC:
            raise DataError(f"derive_thalach_ratio needs numeric {required!r}")
    age = ds.column("age")
    bad = np.flatnonzero(age >= 220)
    if bad.size:
        raise DataError(f"age >= 220 at row {int(bad[0])}; predicted maximum heart rate is not positive")
    ratio = ds.column("thalach") / (220.0 - age)
    keep = [i for i, a in enumerate(ds.schema) if a.name != "thalach"]
    schema = [ds.schema[i] for i in keep] + [AttributeSchema(name, NUMERIC)]
    columns = [ds.columns[i] for i in keep] + [ratio]
    return ds.with_columns(schema, columns)


def bin_labels(n_bins):
    return tuple(f"b{i}" for i in range(n_bins))


def quantile_edges(values, n_bins):
    """Equal-frequency bin edges ``(-inf, e1, ..., inf)``.

    Interior edge ``j`` is the value at sorted rank ``ceil(j * n / n_bins)``,
    so with distinct values the bins reproduce slicing the sorted column
    into ``n_bins`` near-equal runs. Ties that straddle a boundary all land in
    the upper bin; duplicate edges collapse, leaving fewer bins.
    """
    if int(n_bins) != n_bins or n_bins < 2:
        raise DataError(f"quantile count must be an integer >= 2, got {n_bins}")
    values = np.sort(np.asarray(values, dtype=np.float64))
    n = len(values)
    if n == 0:
        raise DataError("cannot compute quantiles of an empty column")
    interior = []
    for j in range(1, int(n_bins)):
        rank = -(-j * n // int(n_bins))
        if rank >= n:
            continue
        edge = float(values[rank])
        if edge > values[0] and (not interior or edge > interior[-1]):
            interior.append(edge)
    return (-math.inf, *interior, math.inf)


def apply_bins(values, edges, name="?"):
    """Map values to bin codes using half-open ``[low, high)`` intervals."""
    values = np.asarray(values, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise DataError(f"bin edges for {name!r} must be strictly increasing with at least two entries")
    codes = np.searchsorted(edges, values, side="right") - 1
    outside = np.flatnonzero((codes < 0) | (codes >= len(edges) - 1))
    if outside.size:
        row = int(outside[0])
        raise DataError(f"value {values[row]!r} of {name!r} at row {row} lies outside all bins {tuple(edges)}")
    return codes.astype(np.int64)


def fit_bins(ds, plan):
    """Resolve a discretization plan into explicit edges per numeric attribute.

    ``plan`` maps attribute name to either an int (equal-frequency bin count)
    or a sequence of explicit, strictly increasing edges (use ``±inf`` for
    open ends).
    """
    edges = {}
    for attr, col in zip(ds.schema, ds.columns):
        if attr.kind != NUMERIC:
            continue
        if attr.name not in plan:
            raise DataError(f"no discretization plan entry for numeric attribute {attr.name!r}")
        entry = plan[attr.name]
        if isinstance(entry, (int, np.integer)):
            edges[attr.name] = quantile_edges(col, int(entry))
        else:
            edges[attr.name] = tuple(float(e) for e in entry)
    return edges


def discretize(ds, plan):
    """Return a fully categorical copy of ``ds`` with numeric columns binned."""
    edges = fit_bins(ds, plan)
    return apply_edges(ds, edges)


def apply_edges(ds, edges):
    schema, columns = [], []
    for attr, col in zip(ds.schema, ds.columns):
        if attr.kind == NUMERIC:
            e = edges[attr.name]
            schema.append(AttributeSchema(attr.name, CATEGORICAL, bin_labels(len(e) - 1)))
            columns.append(apply_bins(col, e, attr.name))
        else:
            schema.append(attr)
            columns.append(col)
    return ds.with_columns(schema, columns)


# ---------------------------------------------------------------------------
# chi-square feature selection


def chi_square_statistic(table):
    """Pearson chi-square test of independence on a contingency table.

    Returns ``(statistic, dof, p_value)``; no continuity correction.
    """
    observed = np.asarray(table, dtype=np.float64)
    if observed.ndim != 2 or observed.shape[0] < 2 or observed.shape[1] < 2:
        raise DataError(f"contingency table must be at least 2x2, got shape {observed.shape}")
    if np.any(observed < 0):
        raise DataError("contingency table has negative counts")
    rows = observed.sum(axis=1)
    cols = observed.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise DataError("contingency table has a zero marginal")
    expected = np.outer(rows, cols) / observed.sum()
    statistic = float(np.sum((observed - expected) ** 2 / expected))
    dof = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    return statistic, dof, chi2_sf(statistic, dof)


def contingency(ds, name):
    """Observed-level x class count table for one categorical attribute."""
    col = ds.column(name)
    table = np.zeros((len(ds.attribute(name).domain), len(ds.class_domain)), dtype=np.int64)
    np.add.at(table, (col, ds.labels), 1)
    return table


def chi_square_scores(ds):
    """``{attribute: (statistic, dof, p_value)}`` against the class label.

    Levels that never occur are left out of the table; an attribute with a
    single observed level carries no information and scores ``(0, 0, 1)``.
    """
    if not ds.is_categorical:
        raise DataError("chi-square selection needs a fully categorical dataset")
    scores = {}
    for name in ds.names:
        table = contingency(ds, name)
        table = table[table.sum(axis=1) > 0]
        if table.shape[0] < 2:
            scores[name] = (0.0, 0, 1.0)
        else:
            scores[name] = chi_square_statistic(table)
    return scores


def select_features(ds, alpha=0.05):
    """Drop attributes not significantly associated with the class.

    Returns ``(reduced_dataset, dropped_names)``.
    """
    scores = chi_square_scores(ds)
    dropped = [name for name in ds.names if scores[name][2] > alpha]
    return ds.drop(dropped), dropped


# ---------------------------------------------------------------------------
# splitting


def train_size(n, train_fraction):
    # the epsilon guards fractions like 0.7 * 10 = 6.999...
    return int(math.floor(train_fraction * n + 1e-9))


def split_indices(n, spec, rng=None):
    """Index arrays ``(client_parts, test)`` for a dataset of ``n`` rows."""
    if n == 0:
        raise DataError("cannot split an empty dataset")
    rng = rng if rng is not None else make_rng(spec.seed, SPLIT)
    order = rng.permutation(n)
    n_train = train_size(n, spec.train_fraction)
    if n_train < spec.client_count:
        raise DataError(f"{n_train} training rows cannot fill {spec.client_count} non-empty clients")
    parts = np.array_split(order[:n_train], spec.client_count)
    return [np.sort(p) for p in parts], np.sort(order[n_train:])


def split_and_partition(ds, spec, rng=None):
    """Shuffle, cut off the test set, and split the training rows into clients.

    Client sizes differ by at most one (larger parts first).
    """
    parts, test = split_indices(len(ds), spec, rng)
    return [ds.take(p) for p in parts], ds.take(test)


def concat(datasets):
    datasets = list(datasets)
    first = datasets[0]
    columns = [np.concatenate([d.columns[j] for d in datasets]) for j in range(len(first.schema))]
    labels = np.concatenate([d.labels for d in datasets])
    return CategoricalDataset(first.schema, columns, labels, first.class_domain)


# ---------------------------------------------------------------------------
# estimator wrappers


class QuantileDiscretizer(TransformerMixin, BaseEstimator):
    """Bin numeric columns into categorical bin labels.

    Parameters
    ----------
    n_bins : int, default=4
        Equal-frequency bin count for columns without explicit edges.
    edges : dict, optional
        Column index (or name, when fitted on a DataFrame) -> explicit edges.
    """

    def __init__(self, n_bins=4, edges=None):
        self.n_bins = n_bins
        self.edges = edges

    def fit(self, X, y=None):
        X, names = _as_float_matrix(X)
        explicit = dict(self.edges or {})
        self.feature_names_in_ = np.array(names, dtype=object) if names is not None else None
        self.n_features_in_ = X.shape[1]
        self.bin_edges_ = []
        for j in range(X.shape[1]):
            key = names[j] if names is not None and names[j] in explicit else j
            if key in explicit:
                self.bin_edges_.append(tuple(float(e) for e in explicit[key]))
            else:
                self.bin_edges_.append(quantile_edges(X[:, j], self.n_bins))
        return self

    def transform(self, X):
        check_is_fitted(self, "bin_edges_")
        X, _ = _as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = np.empty(X.shape, dtype=object)
        for j, e in enumerate(self.bin_edges_):
            labels = np.array(bin_labels(len(e) - 1), dtype=object)
            out[:, j] = labels[apply_bins(X[:, j], e, str(j))]
        return out


class ChiSquareSelector(TransformerMixin, BaseEstimator):
    """Keep categorical columns whose chi-square p-value against ``y`` is <= ``alpha``."""

    def __init__(self, alpha=0.05):
        self.alpha = alpha

    def fit(self, X, y):
        ds = dataset_from_arrays(X, y)
        self.scores_ = chi_square_scores(ds)
        self.pvalues_ = np.array([self.scores_[n][2] for n in ds.names])
        self.support_ = self.pvalues_ <= self.alpha
        self.n_features_in_ = len(ds.names)
        return self

    def get_support(self, indices=False):
        check_is_fitted(self, "support_")
        return np.flatnonzero(self.support_) if indices else self.support_.copy()

    def transform(self, X):
        check_is_fitted(self, "support_")
        return np.asarray(X, dtype=object)[:, self.support_]


def _as_float_matrix(X):
    names = list(map(str, X.columns)) if hasattr(X, "columns") else None
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input contains missing or non-finite values")
    return X, names


def dataset_from_arrays(X, y, feature_names=None, class_domain=None, domains=None):
    """Build a :class:`CategoricalDataset` from a 2-D array of category values and labels."""
    if feature_names is None and hasattr(X, "columns"):
        feature_names = list(map(str, X.columns))
    X = np.asarray(X, dtype=object)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {X.shape}")
    y = np.asarray(y, dtype=object).ravel()
    if len(y) != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)} labels")
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(X.shape[1])]
    records = [(tuple(_canonical_category(str(v)) for v in row), _canonical_category(str(label)))
               for row, label in zip(X, y)]
    return CategoricalDataset.from_records(records, feature_names, class_domain, domains)


def value_counts(ds, name):
    attr = ds.attribute(name)
    counts = Counter(ds.column(name).tolist())
    return {attr.domain[k]: counts.get(k, 0) for k in range(len(attr.domain))}


__all__ = [
    "AttributeSchema", "CategoricalDataset", "DataError", "DatasetStats", "SplitSpec",
    "ChiSquareSelector", "QuantileDiscretizer", "apply_bins", "apply_edges",
    "chi_square_scores", "chi_square_statistic", "concat", "contingency", "dataset_from_arrays",
    "dataset_stats", "derive_thalach_ratio", "discretize", "fit_bins", "hypertension_schema",
    "load_csv", "quantile_edges", "select_features", "split_and_partition", "split_indices",
    "value_counts",
]
