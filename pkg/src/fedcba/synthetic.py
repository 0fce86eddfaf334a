"""Synthetic stand-in for the hypertension table.

Records follow the same 14-column layout and value ranges. Rows are noisy
copies of a few hundred latent patient profiles drawn from class-conditional
distributions, which gives the heavily clustered structure of the public
table. ``age`` and ``sex`` are drawn independently of the label.
"""
import csv
from pathlib import Path

import numpy as np

from ._random import SYNTHETIC, check_random_state
from .dataset import AttributeSchema, CATEGORICAL, CategoricalDataset, NUMERIC, hypertension_schema

# (negative-class, positive-class) level probabilities
_CATEGORICAL = {
    "cp": ([0.60, 0.15, 0.20, 0.05], [0.20, 0.30, 0.40, 0.10]),
    "fbs": ([0.88, 0.12], [0.82, 0.18]),
    "restecg": ([0.55, 0.43, 0.02], [0.40, 0.58, 0.02]),
    "exang": ([0.45, 0.55], [0.85, 0.15]),
    "slope": ([0.10, 0.65, 0.25], [0.05, 0.30, 0.65]),
    "ca": ([0.35, 0.30, 0.20, 0.13, 0.02], [0.80, 0.12, 0.04, 0.02, 0.02]),
    "thal": ([0.01, 0.10, 0.25, 0.64], [0.01, 0.05, 0.80, 0.14]),
}
# (mean, sd) per class
_NUMERIC = {
    "trestbps": ((125.0, 12.0), (140.0, 15.0)),
    "chol": ((240.0, 45.0), (252.0, 50.0)),
    "thalach": ((140.0, 22.0), (160.0, 18.0)),
}


def make_hypertension_like(n_samples=26083, positive_rate=0.453, n_profiles=300,
                           resample_prob=0.05, random_state=0):
    """Return a raw (not yet discretized) :class:`CategoricalDataset`.

    Parameters
    ----------
    n_samples : int
        Number of records.
    positive_rate : float
        Fraction of records labelled ``"1"``.
    n_profiles : int
        Number of latent profiles records are copied from.
    resample_prob : float
        Per-cell probability that a categorical value is redrawn from the
        class-conditional distribution instead of copied.
    random_state : int or Generator
    """
    rng = check_random_state(random_state, SYNTHETIC)
    profile_label = (rng.random(n_profiles) < positive_rate).astype(np.int64)
    profiles = {name: _draw(name, profile_label, rng) for name in (*_CATEGORICAL, *_NUMERIC)}
    profiles["oldpeak"] = np.where(profile_label == 1, rng.exponential(0.6, n_profiles),
                                   rng.exponential(1.6, n_profiles))

    # match the requested class balance exactly, then pick a profile of that class per record
    n_pos = int(round(positive_rate * n_samples))
    labels = np.zeros(n_samples, dtype=np.int64)
    labels[rng.permutation(n_samples)[:n_pos]] = 1
    pools = [np.flatnonzero(profile_label == c) for c in (0, 1)]
    if not len(pools[0]) or not len(pools[1]):
        raise ValueError("n_profiles too small to cover both classes")
    which = np.where(labels == 1, rng.choice(pools[1], n_samples), rng.choice(pools[0], n_samples))

    columns = {}
    for name in _CATEGORICAL:
        values = profiles[name][which]
        redraw = rng.random(n_samples) < resample_prob
        values[redraw] = _draw(name, labels[redraw], rng)
        columns[name] = values
    columns["trestbps"] = np.round(profiles["trestbps"][which] + rng.normal(0, 2.0, n_samples))
    columns["chol"] = np.round(profiles["chol"][which] + rng.normal(0, 4.0, n_samples))
    columns["thalach"] = np.round(profiles["thalach"][which] + rng.normal(0, 3.0, n_samples))
    columns["oldpeak"] = np.round(np.clip(profiles["oldpeak"][which] + rng.normal(0, 0.1, n_samples), 0, 6.2), 1)
    columns["age"] = np.round(np.clip(rng.normal(54.0, 9.0, n_samples), 29, 77))
    columns["sex"] = (rng.random(n_samples) < 0.68).astype(np.int64)
    columns["thalach"] = np.clip(columns["thalach"], 70, 219 - columns["age"] + 40)

    schema, cols = [], []
    for attr in hypertension_schema():
        col = columns[attr.name]
        if attr.kind == NUMERIC:
            schema.append(AttributeSchema(attr.name, NUMERIC))
            cols.append(col.astype(np.float64))
        else:
            levels = len(_CATEGORICAL[attr.name][0]) if attr.name in _CATEGORICAL else 2
            schema.append(AttributeSchema(attr.name, CATEGORICAL, tuple(str(k) for k in range(levels))))
            cols.append(col.astype(np.int64))
    return CategoricalDataset(schema, cols, labels, ("0", "1"))


def _draw(name, labels, rng):
    labels = np.asarray(labels)
    if name in _CATEGORICAL:
        out = np.empty(len(labels), dtype=np.int64)
        for c in (0, 1):
            idx = np.flatnonzero(labels == c)
            probs = np.asarray(_CATEGORICAL[name][c])
            out[idx] = rng.choice(len(probs), size=len(idx), p=probs / probs.sum())
        return out
    params = _NUMERIC[name]
    mean = np.where(labels == 1, params[1][0], params[0][0])
    sd = np.where(labels == 1, params[1][1], params[0][1])
    return rng.normal(mean, sd)


def write_csv(ds, path, target_name="target"):
    """Write a dataset in the hypertension CSV layout (numbers as plain text)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.names + [target_name])
        for row, label in ds.records():
            writer.writerow([_fmt(v) for v in row.values()] + [label])
    return path


def _fmt(value):
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)
