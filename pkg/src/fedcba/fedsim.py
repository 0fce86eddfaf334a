"""End-to-end federated experiments.

One run: load -> drop incomplete rows -> derive thalach_ratio -> discretize
-> split into clients and a test set -> chi-square feature selection on the
pooled training rows -> optional randomized response per client -> local CBA
per client -> duCBA merge -> evaluation on the clean test set.

A sweep repeats the run for every epsilon of a grid on the same split.
"""
import configparser
import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ._random import PERTURB, SPLIT, epsilon_key, make_rng
from .cba import RuleListPredictorMixin, predict_dataset, train_client, write_client_model
from .dataset import (
    AttributeSchema, CATEGORICAL, HYPERTENSION_CATEGORICAL, HYPERTENSION_NUMERIC, NUMERIC, TARGET,
    SplitSpec, apply_edges, concat, dataset_from_arrays, derive_thalach_ratio, fit_bins,
    hypertension_schema, load_csv, select_features, split_indices,
)
from .ducba import merge, write_merged
from .metrics import evaluate, format_number, metric_rows, positive_score, report_csv, report_json, roc_csv
from .mining import MiningParams
from .privacy import RRConfig, perturb_dataset

logger = logging.getLogger(__name__)

DEFAULT_GRID = (0.1, 0.5, 1.0, 2.0, 3.0, 5.0)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: Path
    output_dir: Path = Path("runs")
    split: SplitSpec = SplitSpec()
    mining: MiningParams = MiningParams()
    rr: RRConfig = None
    epsilon_grid: tuple = DEFAULT_GRID
    prune: bool = True
    alpha: float = 0.05
    target: str = TARGET
    numeric: tuple = HYPERTENSION_NUMERIC
    categorical: tuple = HYPERTENSION_CATEGORICAL
    derive_thalach_ratio: bool = True
    default_bins: int = 4
    bins: dict = field(default_factory=dict)  # attribute -> int (quantiles) or edges
    positive_class: str = "1"
    reseed_per_epsilon: bool = False
    perturb_label: bool = False

    def __post_init__(self):
        grid = tuple(float(e) for e in self.epsilon_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"epsilon grid must be strictly increasing, got {grid}")
        if any(e <= 0 or not math.isfinite(e) for e in grid):
            raise ConfigError(f"epsilon grid values must be positive and finite, got {grid}")
        object.__setattr__(self, "epsilon_grid", grid)
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def schema(self):
        if (set(self.numeric), set(self.categorical)) == (set(HYPERTENSION_NUMERIC), set(HYPERTENSION_CATEGORICAL)):
            return hypertension_schema()
        return ([AttributeSchema(name, NUMERIC) for name in self.numeric]
                + [AttributeSchema(name, CATEGORICAL) for name in self.categorical])

    def plan(self, names):
        return {name: self.bins.get(name, self.default_bins) for name in names}


# ---------------------------------------------------------------------------
# config file
#
# INI layout; every key is optional except data.path.
#
#   [data]       path, target, numeric, categorical, derive_thalach_ratio, positive_class
#   [output]     dir
#   [split]      train_fraction, client_count, seed
#   [mining]     min_support, min_confidence, max_antecedent_len, prune
#   [selection]  alpha
#   [discretize] default = <bins>; <attribute> = <bins> | <edge>, <edge>, ...
#   [rr]         epsilon (blank: no perturbation), perturb_label, seed_stream
#   [sweep]      grid, reseed

KNOWN_KEYS = {
    "data": {"path", "target", "numeric", "categorical", "derive_thalach_ratio", "positive_class"},
    "output": {"dir"},
    "split": {"train_fraction", "client_count", "seed"},
    "mining": {"min_support", "min_confidence", "max_antecedent_len", "prune"},
    "selection": {"alpha"},
    "discretize": None,  # any attribute name
    "rr": {"epsilon", "perturb_label", "seed_stream"},
    "sweep": {"grid", "reseed"},
}


def _parser():
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    return parser


def apply_override(parser, assignment):
    """Apply one ``section.key=value`` assignment to a parser."""
    dotted, sep, value = assignment.partition("=")
    section, dot, key = dotted.strip().partition(".")
    if not sep or not dot or not key:
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}")
    _check_key(section, key)
    if not parser.has_section(section):
        parser.add_section(section)
    parser.set(section, key, value.strip())


def _check_key(section, key):
    if section not in KNOWN_KEYS:
        raise ConfigError(f"unknown config section [{section}]")
    allowed = KNOWN_KEYS[section]
    if allowed is not None and key not in allowed:
        raise ConfigError(f"unknown key {key!r} in [{section}]")


def load_config(path=None, overrides=(), text=None):
    """Read an :class:`ExperimentConfig` from an INI file plus overrides.

    Relative ``data.path`` and ``output.dir`` resolve against the config
    file's directory.
    """
    parser = _parser()
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        base = path.resolve().parent
    try:
        parser.read_string(text or "")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for section in parser.sections():
        for key in parser[section]:
            _check_key(section, key)
    for assignment in overrides:
        apply_override(parser, assignment)
    return config_from_parser(parser, base)


def config_from_parser(parser, base=Path(".")):
    def get(section, key, default=None):
        if parser.has_option(section, key):
            value = parser.get(section, key).strip()
            return value if value != "" else None
        return default

    def as_bool(section, key, default):
        value = get(section, key)
        if value is None:
            return default
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key}: expected a boolean, got {value!r}")

    def convert(section, key, kind, default):
        value = get(section, key)
        if value is None:
            return default
        try:
            return kind(value)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: cannot parse {value!r}") from None

    def names(section, key, default):
        value = get(section, key)
        return default if value is None else tuple(n.strip() for n in value.split(",") if n.strip())

    data_path = get("data", "path")
    if data_path is None:
        raise ConfigError("[data] path is required")
    data_path = (base / data_path).resolve()
    out = (base / get("output", "dir", "runs")).resolve()

    try:
        split = SplitSpec(convert("split", "train_fraction", float, 0.8),
                          convert("split", "client_count", int, 3),
                          convert("split", "seed", int, 0))
        mining = MiningParams(convert("mining", "min_support", float, 0.02),
                              convert("mining", "min_confidence", float, 0.5),
                              convert("mining", "max_antecedent_len", int, None))
        perturb_label = as_bool("rr", "perturb_label", False)
        eps = convert("rr", "epsilon", float, None)
        rr = None if eps is None else RRConfig(eps, perturb_label, convert("rr", "seed_stream", int, 0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    bins, default_bins = {}, 4
    if parser.has_section("discretize"):
        for key, raw in parser["discretize"].items():
            entry = _parse_bins(key, raw)
            if key == "default":
                if not isinstance(entry, int):
                    raise ConfigError("[discretize] default must be a bin count")
                default_bins = entry
            else:
                bins[key] = entry

    grid = get("sweep", "grid")
    grid = DEFAULT_GRID if grid is None else tuple(_parse_float("sweep", "grid", g) for g in grid.split(","))

    return ExperimentConfig(
        data_path=data_path,
        output_dir=out,
        split=split,
        mining=mining,
        rr=rr,
        epsilon_grid=grid,
        prune=as_bool("mining", "prune", True),
        alpha=convert("selection", "alpha", float, 0.05),
        target=get("data", "target", TARGET),
        numeric=names("data", "numeric", HYPERTENSION_NUMERIC),
        categorical=names("data", "categorical", HYPERTENSION_CATEGORICAL),
        derive_thalach_ratio=as_bool("data", "derive_thalach_ratio", True),
        default_bins=default_bins,
        bins=bins,
        positive_class=get("data", "positive_class", "1"),
        reseed_per_epsilon=as_bool("sweep", "reseed", False),
        perturb_label=perturb_label,
    )


def _parse_float(section, key, text):
    try:
        return float(text.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {text!r}") from None


def _parse_bins(key, raw):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if len(parts) == 1:
        try:
            return int(parts[0])
        except ValueError:
            raise ConfigError(f"[discretize] {key}: expected a bin count or edge list, got {raw!r}") from None
    return tuple(_parse_float("discretize", key, p) for p in parts)


def dump_config(cfg):
    """Render a config back to INI text (used to snapshot runs)."""
    def fmt(v):
        return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v) \
            if isinstance(v, (tuple, list)) else str(v)

    parser = _parser()
    parser["data"] = {"path": str(cfg.data_path), "target": cfg.target,
                      "numeric": fmt(cfg.numeric), "categorical": fmt(cfg.categorical),
                      "derive_thalach_ratio": str(cfg.derive_thalach_ratio).lower(),
                      "positive_class": cfg.positive_class}
    parser["output"] = {"dir": str(cfg.output_dir)}
    parser["split"] = {"train_fraction": repr(cfg.split.train_fraction),
                       "client_count": str(cfg.split.client_count), "seed": str(cfg.split.seed)}
    parser["mining"] = {"min_support": str(cfg.mining.min_support),
                        "min_confidence": str(cfg.mining.min_confidence),
                        "max_antecedent_len": "" if cfg.mining.max_antecedent_len is None
                        else str(cfg.mining.max_antecedent_len),
                        "prune": str(cfg.prune).lower()}
    parser["selection"] = {"alpha": repr(cfg.alpha)}
    parser["discretize"] = {"default": str(cfg.default_bins),
                            **{k: fmt(v) if isinstance(v, tuple) else str(v) for k, v in sorted(cfg.bins.items())}}
    parser["rr"] = {"epsilon": "" if cfg.rr is None else repr(cfg.rr.epsilon),
                    "perturb_label": str(cfg.perturb_label).lower(),
                    "seed_stream": "0" if cfg.rr is None else str(cfg.rr.seed_stream)}
    parser["sweep"] = {"grid": fmt(cfg.epsilon_grid), "reseed": str(cfg.reseed_per_epsilon).lower()}
    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in parser[section].items())
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PreparedData:
    clients: list
    test: object
    dropped_features: list
    bin_edges: dict
    dropped_rows: int
    class_domain: tuple


def load_and_discretize(cfg):
    """Load the CSV, derive the heart-rate ratio and bin numeric columns."""
    ds = load_csv(cfg.data_path, cfg.schema, cfg.target)
    if cfg.derive_thalach_ratio and {"thalach", "age"} <= set(cfg.numeric):
        ds = derive_thalach_ratio(ds)
    numeric = [a.name for a in ds.schema if a.kind == NUMERIC]
    edges = fit_bins(ds, cfg.plan(numeric))
    return apply_edges(ds, edges), edges


def prepare(cfg, split_stream=(SPLIT,)):
    """Everything up to (not including) perturbation and training."""
    ds, edges = load_and_discretize(cfg)
    parts, test = split_indices(len(ds), cfg.split, make_rng(cfg.split.seed, *split_stream))
    clients = [ds.take(p) for p in parts]
    test_ds = ds.take(test)
    # selection on the pooled training rows so every client shares one schema
    _, dropped = select_features(concat(clients), cfg.alpha)
    if dropped:
        logger.info("chi-square selection dropped %s", ", ".join(dropped))
    return PreparedData([c.drop(dropped) for c in clients], test_ds.drop(dropped), dropped,
                        edges, ds.dropped_rows, ds.class_domain)


def _labels(class_domain, positive):
    if positive not in class_domain:
        raise ConfigError(f"positive class {positive!r} not among labels {class_domain}")
    negatives = [c for c in class_domain if c != positive]
    if len(negatives) != 1:
        raise ConfigError(f"expected a binary target, got labels {class_domain}")
    return negatives[0], positive


def run_tag(epsilon):
    return "baseline" if epsilon is None else f"eps_{epsilon!r}"


@dataclass
class RunResult:
    report: object
    merged: object
    clients: list
    out_dir: Path


def run_prepared(cfg, prepared, epsilon=None, out_dir=None):
    """Perturb (optionally), train, merge and evaluate on already-prepared data."""
    clients = []
    for i, part in enumerate(prepared.clients):
        if epsilon is not None:
            rr = RRConfig(epsilon, cfg.perturb_label, cfg.rr.seed_stream if cfg.rr else 0)
            rng = make_rng(cfg.split.seed, PERTURB, rr.seed_stream, epsilon_key(epsilon), i)
            part = perturb_dataset(part, rr, rng)
        clients.append(train_client(part, cfg.mining, cfg.prune, client_id=i))
    merged = merge(clients, prepared.class_domain)

    labels = _labels(prepared.class_domain, cfg.positive_class)
    test = prepared.test
    predicted, scores = predict_dataset(merged.model, test)
    pos_scores = [positive_score(lab, s, labels[1]) for lab, s in zip(predicted, scores)]
    report = evaluate(test.label_values(), predicted, pos_scores, labels)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for client in clients:
            write_client_model(out_dir / f"client_{client.client_id}.rules", client)
        write_merged(out_dir / "merged.rules", merged)
        (out_dir / "report.json").write_text(report_json(report), encoding="utf-8")
        (out_dir / "report.csv").write_text(report_csv(report), encoding="utf-8")
        (out_dir / "roc.csv").write_text(roc_csv(report), encoding="utf-8")
    return RunResult(report, merged, clients, out_dir)


def run_single(cfg, epsilon=None, out_dir=None):
    """One complete run; ``epsilon`` defaults to ``cfg.rr.epsilon`` (None: no perturbation).

    Artifacts land in ``out_dir`` (default ``cfg.output_dir / run_tag``).
    """
    if epsilon is None and cfg.rr is not None:
        epsilon = cfg.rr.epsilon
    if epsilon is not None:
        RRConfig(epsilon)
    out_dir = Path(out_dir) if out_dir is not None else cfg.output_dir / run_tag(epsilon)
    prepared = prepare(cfg)
    _write_manifest(cfg, prepared, out_dir)
    return run_prepared(cfg, prepared, epsilon, out_dir).report


@dataclass
class SweepResult:
    baseline: object
    per_epsilon: dict


def run_sweep(cfg, out_dir=None):
    """Baseline plus one run per grid epsilon, all evaluated on the same test split."""
    if not cfg.epsilon_grid:
        raise ConfigError("epsilon grid is empty")
    out_dir = Path(out_dir) if out_dir is not None else cfg.output_dir
    prepared = prepare(cfg)
    _write_manifest(cfg, prepared, out_dir)
    baseline = run_prepared(cfg, prepared, None, out_dir / run_tag(None)).report
    per_eps = {}
    for eps in cfg.epsilon_grid:
        if cfg.reseed_per_epsilon:
            data = prepare(cfg, (SPLIT, epsilon_key(eps)))
        else:
            data = prepared
        per_eps[eps] = run_prepared(cfg, data, eps, out_dir / run_tag(eps)).report
    result = SweepResult(baseline, per_eps)
    (out_dir / "sweep.csv").write_text(sweep_csv(result), encoding="utf-8")
    (out_dir / "sweep.json").write_text(sweep_json(result), encoding="utf-8")
    return result


def sweep_rows(result):
    for eps, report in result.per_epsilon.items():
        for metric, cls, value in metric_rows(report):
            yield eps, metric, cls, value


def sweep_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "metric", "class", "value"])
    writer.writerows((repr(eps), m, c, format_number(v)) for eps, m, c, v in sweep_rows(result))
    return buf.getvalue()


def sweep_json(result):
    payload = {
        "baseline": result.baseline.to_dict(),
        "per_epsilon": [{"epsilon": eps, "report": rep.to_dict()}
                        for eps, rep in result.per_epsilon.items()],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_manifest(cfg, prepared, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    manifest = {
        "dropped_rows": prepared.dropped_rows,
        "dropped_features": prepared.dropped_features,
        "bin_edges": {k: [repr(e) for e in v] for k, v in prepared.bin_edges.items()},
        "client_sizes": [len(c) for c in prepared.clients],
        "test_size": len(prepared.test),
        "attributes": prepared.test.names,
    }
    (out_dir / "preprocessing.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")


# ---------------------------------------------------------------------------
# estimator


class FederatedCBAClassifier(RuleListPredictorMixin, ClassifierMixin, BaseEstimator):
    """Simulated duCBA federation as a single estimator.

    ``fit`` splits the rows into ``n_clients`` random, near-equal parts,
    optionally applies randomized response to each part, trains a local CBA
    model per part and merges them. Fitted attributes: ``client_models_``,
    ``merged_`` and ``model_`` (the merged rule model).
    """

    def __init__(self, n_clients=3, min_support=0.02, min_confidence=0.5, max_antecedent_len=None,
                 prune=True, epsilon=None, perturb_label=False, random_state=0, feature_names=None):
        self.n_clients = n_clients
        self.min_support = min_support
        self.min_confidence = min_confidence
        self.max_antecedent_len = max_antecedent_len
        self.prune = prune
        self.epsilon = epsilon
        self.perturb_label = perturb_label
        self.random_state = random_state
        self.feature_names = feature_names

    def fit(self, X, y):
        ds = dataset_from_arrays(X, y, self.feature_names)
        n = len(ds)
        if n < self.n_clients:
            raise ValueError(f"{n} rows cannot fill {self.n_clients} clients")
        seed = int(self.random_state)
        order = make_rng(seed, SPLIT).permutation(n)
        params = MiningParams(self.min_support, self.min_confidence, self.max_antecedent_len)
        clients = []
        for i, idx in enumerate(np.array_split(order, self.n_clients)):
            part = ds.take(np.sort(idx))
            if self.epsilon is not None:
                rr = RRConfig(self.epsilon, self.perturb_label)
                part = perturb_dataset(part, rr, make_rng(seed, PERTURB, 0, epsilon_key(self.epsilon), i))
            clients.append(train_client(part, params, self.prune, client_id=i))
        self.client_models_ = clients
        self.merged_ = merge(clients, ds.class_domain)
        self.model_ = self.merged_.model
        self._remember_inputs(ds)
        return self


__all__ = ["ConfigError", "ExperimentConfig", "FederatedCBAClassifier", "PreparedData", "SweepResult",
           "dump_config", "load_config", "prepare", "run_prepared", "run_single", "run_sweep"]
