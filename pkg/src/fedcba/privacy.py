"""k-ary randomized response for categorical client data."""
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._random import check_random_state
from .dataset import DataError


@dataclass(frozen=True)
class RRConfig:
    epsilon: float
    perturb_label: bool = False
    seed_stream: int = 0

    def __post_init__(self):
        if not self.epsilon > 0 or not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be a positive finite number, got {self.epsilon}")


@dataclass(frozen=True)
class RRChannel:
    """Keep the true value with probability ``p``, otherwise report one of the
    other ``k - 1`` values uniformly (probability ``q`` each)."""

    domain_size: int
    epsilon: float

    def __post_init__(self):
        if int(self.domain_size) != self.domain_size or self.domain_size < 2:
            raise ValueError(f"randomized response needs a domain of at least 2 values, got {self.domain_size}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")

    @property
    def keep_prob(self):
        # e^eps / (e^eps + k - 1), written to avoid overflow for large eps
        return 1.0 / (1.0 + (self.domain_size - 1) * math.exp(-self.epsilon))

    @property
    def flip_prob(self):
        t = math.exp(-self.epsilon)
        return t / (1.0 + (self.domain_size - 1) * t)

    def matrix(self):
        """``M[x, y] = Pr[report y | true x]``."""
        k = self.domain_size
        m = np.full((k, k), self.flip_prob)
        np.fill_diagonal(m, self.keep_prob)
        return m


def perturb_value(channel, true_value, rng):
    k = channel.domain_size
    if not 0 <= true_value < k:
        raise ValueError(f"value index {true_value} outside domain of size {k}")
    if rng.random() < channel.keep_prob:
        return int(true_value)
    return int((true_value + rng.integers(1, k)) % k)


def perturb_codes(codes, channel, rng):
    """Vectorised :func:`perturb_value` over an integer code array."""
    codes = np.asarray(codes, dtype=np.int64)
    keep = rng.random(codes.shape) < channel.keep_prob
    offset = rng.integers(1, channel.domain_size, size=codes.shape)
    return np.where(keep, codes, (codes + offset) % channel.domain_size)


def perturb_dataset(ds, cfg, rng):
    """Apply randomized response to every attribute (and optionally the label).

    Each attribute gets the full ``cfg.epsilon``. An attribute whose domain
    has a single value is left untouched: there is nothing to hide.
    """
    if not ds.is_categorical:
        raise DataError("randomized response needs a fully categorical dataset")
    columns = []
    for attr, col in zip(ds.schema, ds.columns):
        if len(attr.domain) < 2:
            columns.append(col)
        else:
            columns.append(perturb_codes(col, RRChannel(len(attr.domain), cfg.epsilon), rng))
    out = ds.with_columns(ds.schema, columns)
    if cfg.perturb_label and len(ds.class_domain) >= 2:
        labels = perturb_codes(ds.labels, RRChannel(len(ds.class_domain), cfg.epsilon), rng)
        out = type(ds)(ds.schema, out.columns, labels, ds.class_domain)
    return out


def estimate_true_frequency(observed, channel, n):
    """Unbiased count estimates from randomized-response output counts.

    ``est(v) = n * (observed(v) / n - q) / (p - q)``; estimates can be negative.
    """
    p, q = channel.keep_prob, channel.flip_prob
    if p == q:
        raise ValueError("estimator undefined at epsilon = 0 (keep and flip probabilities coincide)")
    if sum(observed.values()) != n:
        raise ValueError("observed counts must sum to n")
    return {v: n * (c / n - q) / (p - q) for v, c in observed.items()}


class RandomizedResponse(TransformerMixin, BaseEstimator):
    """Column-wise k-RR on categorical data.

    ``fit`` records each column's categories (the channel domain);
    ``transform`` perturbs. Values unseen during ``fit`` raise.
    """

    def __init__(self, epsilon=1.0, random_state=None):
        self.epsilon = epsilon
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=object)
        RRConfig(self.epsilon)
        self.categories_ = [np.array(sorted({str(v) for v in X[:, j]}), dtype=object)
                            for j in range(X.shape[1])]
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "categories_")
        X = np.asarray(X, dtype=object)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        rng = check_random_state(self.random_state)
        out = np.empty(X.shape, dtype=object)
        for j, cats in enumerate(self.categories_):
            lookup = {v: k for k, v in enumerate(cats)}
            try:
                codes = np.array([lookup[str(v)] for v in X[:, j]], dtype=np.int64)
            except KeyError as exc:
                raise ValueError(f"column {j}: unseen category {exc.args[0]!r}") from None
            if len(cats) >= 2:
                codes = perturb_codes(codes, RRChannel(len(cats), self.epsilon), rng)
            out[:, j] = cats[codes]
        return out


__all__ = ["RRChannel", "RRConfig", "RandomizedResponse", "estimate_true_frequency",
           "perturb_codes", "perturb_dataset", "perturb_value"]
