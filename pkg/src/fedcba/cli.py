"""Command-line entry point: ``fedcba {inspect,run,sweep,show-model}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
import argparse
import logging
import sys
from pathlib import Path

from .cba import format_model, loads_model
from .dataset import DataError, chi_square_scores, dataset_stats
from .fedsim import ConfigError, load_and_discretize, load_config, run_single, run_sweep
from .metrics import DEFAULT_CLASS_NAMES, format_table

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# convenience flags -> config override keys
ALIASES = {
    "seed": "split.seed",
    "clients": "split.client_count",
    "min_support": "mining.min_support",
    "min_confidence": "mining.min_confidence",
    "epsilon": "rr.epsilon",
    "sweep_grid": "sweep.grid",
}


def _add_config_options(p, require_config=True):
    p.add_argument("--config", "-c", required=require_config, help="experiment config (INI)")
    p.add_argument("--override", "-o", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value; repeatable")
    p.add_argument("--data", help="dataset CSV (overrides data.path)")
    p.add_argument("--output", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int)
    p.add_argument("--clients", type=int)
    p.add_argument("--min-support", type=float)
    p.add_argument("--min-confidence", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--sweep-grid", help="comma-separated epsilon values")


def build_parser():
    parser = _Parser(prog="fedcba", description="Federated CBA (duCBA) with randomized response")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("inspect", help="dataset statistics and chi-square p-values")
    _add_config_options(p, require_config=False)

    p = sub.add_parser("run", help="one federated run")
    _add_config_options(p)

    p = sub.add_parser("sweep", help="baseline plus an epsilon sweep")
    _add_config_options(p)

    p = sub.add_parser("show-model", help="pretty-print a serialized rule model")
    p.add_argument("path")
    return parser


def collect_overrides(args):
    overrides = []
    if args.data is not None:
        overrides.append(f"data.path={Path(args.data).resolve()}")
    if args.output is not None:
        overrides.append(f"output.dir={Path(args.output).resolve()}")
    for attr, key in ALIASES.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return overrides + list(args.override)


def _config(args):
    overrides = collect_overrides(args)
    if args.config is None:
        if args.data is None:
            raise UsageError("inspect needs --config or --data")
        return load_config(None, overrides, text="")
    return load_config(args.config, overrides)


def cmd_inspect(args, out):
    cfg = _config(args)
    ds, edges = load_and_discretize(cfg)
    stats = dataset_stats(ds)
    print(f"records:          {stats.record_count}", file=out)
    print(f"dropped rows:     {ds.dropped_rows}", file=out)
    for label, count in stats.class_counts.items():
        name = DEFAULT_CLASS_NAMES.get(label, label)
        print(f"class {label} ({name}): {count}", file=out)
    print(f"imbalance ratio:  {stats.imbalance_ratio:.4f}", file=out)
    print("", file=out)
    print(f"{'attribute':<16}{'chi2':>14}{'dof':>5}{'p-value':>14}  {'alpha=' + str(cfg.alpha)}", file=out)
    for name, (stat, dof, p) in chi_square_scores(ds).items():
        verdict = "drop" if p > cfg.alpha else "keep"
        print(f"{name:<16}{stat:>14.4f}{dof:>5}{p:>14.4g}  {verdict}", file=out)
    return EXIT_OK


def cmd_run(args, out):
    cfg = _config(args)
    report = run_single(cfg)
    eps = cfg.rr.epsilon if cfg.rr else None
    print(f"epsilon: {'none' if eps is None else eps}", file=out)
    print(format_table(report), file=out)
    print(f"accuracy: {report.accuracy:.4f}  auc: {report.auc:.4f}", file=out)
    cm = report.confusion
    print(f"confusion: tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn}", file=out)
    return EXIT_OK


def cmd_sweep(args, out):
    cfg = _config(args)
    result = run_sweep(cfg)
    print(f"{'epsilon':>10}{'accuracy':>10}{'f1(neg)':>10}{'f1(pos)':>10}", file=out)
    rows = [("baseline", result.baseline)] + [(repr(e), r) for e, r in result.per_epsilon.items()]
    for tag, rep in rows:
        neg, pos = rep.labels
        print(f"{tag:>10}{rep.accuracy:>10.4f}{rep.per_class[neg].f1:>10.4f}{rep.per_class[pos].f1:>10.4f}",
              file=out)
    print(f"written to {cfg.output_dir}", file=out)
    return EXIT_OK


def cmd_show_model(args, out):
    path = Path(args.path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    try:
        model, train_count = loads_model(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    print(format_model(model, train_count), file=out)
    return EXIT_OK


COMMANDS = {"inspect": cmd_inspect, "run": cmd_run, "sweep": cmd_sweep, "show-model": cmd_show_model}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ConfigError) as exc:
        if isinstance(exc, UsageError):
            parser.print_usage(sys.stderr)
        print(f"fedcba: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"fedcba: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
