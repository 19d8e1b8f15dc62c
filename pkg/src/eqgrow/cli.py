"""Command-line interface.

Subcommands: sweep, analyze, fit, bootstrap, forecast, regress, transfer,
pooled, ingest, mu, ode, report.  Exit codes: 0 success, 1 usage error,
2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .closure import ClosureParams, estimate_mu, simulate_ode
from .engine import SUBSTRATES, dump_rules, load_rules, run_discovery
from .growth import (DEFAULT_MODELS, MODELS, bootstrap_ci, fit_csv_row,
                     FIT_CSV_HEADER, oos_forecast, read_series_csv,
                     select_model, series_from_sizes, write_series_csv)
from .ingest import monthly_series, parse_log, write_monthly_csv
from .regression import (build_features, kfold_cv, pooled_eval, transfer_eval)
from .report import (domain_table_text, render_table, svg_line_plot,
                     write_csv, write_domain_table_csv, write_exponents_csv,
                     write_histogram_csv, write_window_winners_csv,
                     window_winners_text)
from .sweep import (analyze, long_range_plan, read_sweep_file, run_sweep,
                    short_range_plan)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_series(path):
    if str(path).endswith(".jsonl"):
        records = read_sweep_file(path)
        good = [r for r in records if "error" not in r]
        if not good:
            raise ValueError(f"{path}: no trajectories")
        return series_from_sizes(good[0]["sizes"])
    return read_series_csv(path)


def _read_exponents_csv(path):
    import csv as _csv
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(_csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty exponent table")
    for row in rows:
        row["depth"] = int(row["depth"])
        row["batch_size"] = int(row["batch_size"])
        row["seed"] = int(row["seed"])
        row["b"] = float(row["b"])
    return rows


def build_parser() -> _Parser:
    parser = _Parser(prog="eqgrow",
                     description="Equational discovery substrates and "
                                 "growth-law analysis")
    parser.add_argument("--version", action="version",
                        version=f"eqgrow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a trajectory sweep")
    p.add_argument("--out", required=True, help="JSONL output path")
    p.add_argument("--plan", choices=("short-range", "long-range"),
                   default="short-range")
    p.add_argument("--config", help="JSON plan file overriding the named plan")
    p.add_argument("--domains", nargs="+")
    p.add_argument("--generators", nargs="+")
    p.add_argument("--filters", nargs="+")
    p.add_argument("--depths", nargs="+", type=int)
    p.add_argument("--batch-sizes", nargs="+", type=int)
    p.add_argument("--seeds", nargs="+", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--rules-dir", help="also dump committed rule files here")

    p = sub.add_parser("analyze", help="fit exponents and window winners")
    p.add_argument("trajectories", help="sweep JSONL file")
    p.add_argument("--windows", nargs="+", type=int,
                   default=[30, 50, 100, 200, 300, 500])
    p.add_argument("--models", nargs="+", default=list(DEFAULT_MODELS),
                   choices=list(MODELS))
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("fit", help="fit growth models to one series")
    p.add_argument("series", help="CSV with t,n columns or sweep JSONL")
    p.add_argument("--models", nargs="+", default=list(MODELS),
                   choices=list(MODELS))
    p.add_argument("--out", help="optional CSV output path")

    p = sub.add_parser("bootstrap", help="residual-resampling intervals")
    p.add_argument("series")
    p.add_argument("--model", default="saturating_pl", choices=list(MODELS))
    p.add_argument("--resamples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("forecast", help="prefix fit, suffix score")
    p.add_argument("series")
    p.add_argument("--split", type=int, required=True)
    p.add_argument("--models", nargs="+", default=list(DEFAULT_MODELS),
                   choices=list(MODELS))

    p = sub.add_parser("regress", help="within-substrate cross-validation")
    p.add_argument("exponents", help="exponents CSV from analyze")
    p.add_argument("--domains", nargs="+", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--include-seed", action="store_true")
    p.add_argument("--out", help="write held-out actual,predicted pairs CSV")

    p = sub.add_parser("transfer", help="train on one substrate set, test another")
    p.add_argument("exponents")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--out", help="write test actual,predicted pairs CSV")

    p = sub.add_parser("pooled", help="pooled CV with the domain feature")
    p.add_argument("exponents")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--no-domain", action="store_true",
                   help="ablation: drop the domain one-hot")
    p.add_argument("--out", help="write held-out actual,predicted pairs CSV")

    p = sub.add_parser("ingest", help="git history export to monthly series")
    p.add_argument("log", help="history export file, - for stdin")
    p.add_argument("--mode", choices=("commits", "new_files"),
                   default="commits")
    p.add_argument("--glob", help="path pattern for new_files mode")
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("mu", help="coverage-fraction estimate for a rule file")
    p.add_argument("rules", help="rule file from sweep --rules-dir")
    p.add_argument("--domain", required=True, choices=list(SUBSTRATES))
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", help="optional CSV output prefix")
    p.add_argument("--subterm-positions", action="store_true")

    p = sub.add_parser("ode", help="integrate the closure growth ODE")
    p.add_argument("--throughput", type=float, required=True)
    p.add_argument("--exponent", type=float, required=True)
    p.add_argument("--coverage", type=float, default=0.0)
    p.add_argument("--n0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("report", help="render analyze output as text or SVG")
    p.add_argument("out_dir", help="directory produced by analyze")
    p.add_argument("--format", choices=("text", "svg", "csv"), default="text")
    p.add_argument("--trajectories", help="sweep JSONL for svg trajectory plots")
    return parser


# ---------------------------------------------------------------------------
# Command bodies
# ---------------------------------------------------------------------------

def _cmd_sweep(args) -> int:
    plan = long_range_plan() if args.plan == "long-range" else short_range_plan()
    overrides = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            overrides.update(json.load(fh))
    for name in ("domains", "generators", "filters", "depths", "batch_sizes",
                 "seeds"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.workers is not None:
        overrides["workers"] = args.workers
    for key, value in overrides.items():
        if key in ("epochs", "workers"):
            setattr(plan, key, value)
        else:
            setattr(plan, key, tuple(value))
    done = {"count": 0}

    def progress(i, total):
        done["count"] = i
        print(f"\r{i}/{total} configurations", end="", file=sys.stderr)

    records = run_sweep(plan, args.out, progress=progress)
    if done["count"]:
        print(file=sys.stderr)
    errors = sum(1 for r in records if "error" in r)
    print(f"{len(records)} trajectories in {args.out} ({errors} errors)")
    if args.rules_dir:
        os.makedirs(args.rules_dir, exist_ok=True)
        for config in plan.configs():
            result = run_discovery(config)
            name = "_".join(str(v) for v in config.key()) + ".rules"
            dump_rules(os.path.join(args.rules_dir, name), result.rules)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    records = read_sweep_file(args.trajectories)
    report = analyze(records, windows=tuple(args.windows),
                     models=tuple(args.models))
    os.makedirs(args.out_dir, exist_ok=True)
    write_exponents_csv(os.path.join(args.out_dir, "exponents.csv"), report)
    write_domain_table_csv(os.path.join(args.out_dir, "domain_table.csv"), report)
    write_window_winners_csv(os.path.join(args.out_dir, "window_winners.csv"), report)
    write_histogram_csv(os.path.join(args.out_dir, "histogram.csv"), report)
    print(domain_table_text(report))
    if report.window_winners:
        print(window_winners_text(report))
    return EXIT_OK


def _cmd_fit(args) -> int:
    series = _load_series(args.series)
    ranked = select_model(series, tuple(args.models))
    rows = [fit_csv_row(fit) for fit in ranked]
    print(render_table(FIT_CSV_HEADER, rows))
    if args.out:
        write_csv(args.out, FIT_CSV_HEADER, rows)
    return EXIT_OK


def _cmd_bootstrap(args) -> int:
    series = _load_series(args.series)
    result = bootstrap_ci(args.model, series, n_resamples=args.resamples,
                          seed=args.seed)
    rows = [[name, lo, hi, point]
            for name, (lo, hi, point) in result.intervals.items()]
    print(render_table(("param", "lower95", "upper95", "point"), rows))
    print(f"failed_fraction={result.fraction_failed:.3f} "
          f"degenerate={int(result.degenerate)}")
    return EXIT_OK


def _cmd_forecast(args) -> int:
    series = _load_series(args.series)
    results = oos_forecast(series, args.split, tuple(args.models))
    rows = [[r.model, r.split, r.rmse_oos, r.mape_oos] for r in results]
    print(render_table(("model", "split", "rmse_oos", "mape_oos"), rows))
    return EXIT_OK


def _write_pairs(path, actual, predicted):
    write_csv(path, ("actual", "predicted"),
              [[float(a), float(p)] for a, p in zip(actual, predicted)])


def _cmd_regress(args) -> int:
    rows = _read_exponents_csv(args.exponents)
    rows = [r for r in rows if r["domain"] in args.domains]
    if not rows:
        raise ValueError("no rows for requested domains")
    X = build_features(rows, include_seed=args.include_seed)
    y = np.array([r["b"] for r in rows])
    report = kfold_cv(X, y, folds=args.folds, shuffle_seed=args.shuffle_seed)
    print(f"r2 = {report.r2_mean:.3f} +/- {report.r2_std:.3f}  "
          f"mae = {report.mae_mean:.3f}  (n = {len(rows)})")
    if args.out:
        _write_pairs(args.out, y, report.predictions)
    return EXIT_OK


def _cmd_transfer(args) -> int:
    rows = _read_exponents_csv(args.exponents)
    train = [r for r in rows if r["domain"] in args.train]
    test = [r for r in rows if r["domain"] in args.test]
    if not train or not test:
        raise ValueError("empty train or test population")
    y_test = np.array([r["b"] for r in test])
    report = transfer_eval(build_features(train),
                           np.array([r["b"] for r in train]),
                           build_features(test), y_test)
    print(f"transfer r2 = {report.r2_mean:.3f}  mae = {report.mae_mean:.3f}  "
          f"mean_pred = {report.mean_pred:.3f}  mean_actual = {report.mean_actual:.3f}")
    if args.out:
        _write_pairs(args.out, y_test, report.predictions)
    return EXIT_OK


def _cmd_pooled(args) -> int:
    rows = _read_exponents_csv(args.exponents)
    y = np.array([r["b"] for r in rows])
    report = pooled_eval(rows, y, folds=args.folds,
                         shuffle_seed=args.shuffle_seed,
                         include_domain=not args.no_domain)
    print(f"pooled r2 = {report.r2_mean:.3f} +/- {report.r2_std:.3f}  "
          f"mae = {report.mae_mean:.3f}")
    if args.out:
        _write_pairs(args.out, y, report.predictions)
    return EXIT_OK


def _cmd_ingest(args) -> int:
    if args.log == "-":
        records = parse_log(sys.stdin)
    else:
        with open(args.log, encoding="utf-8") as fh:
            records = parse_log(fh)
    series = monthly_series(records, mode=args.mode, glob=args.glob)
    write_monthly_csv(args.out, series)
    total = series.cumulative[-1] if series.cumulative else 0
    print(f"{len(records)} commits, {len(series.months)} months, "
          f"total {total} -> {args.out}")
    return EXIT_OK


def _cmd_mu(args) -> int:
    spec = SUBSTRATES[args.domain]
    rules = load_rules(spec, args.rules)
    if not rules:
        raise ValueError(f"{args.rules}: no rules")
    depth = args.depth
    if depth is None:
        depth = 2 if args.domain == "list" else 3
    report = estimate_mu(rules, spec, depth,
                         subterm_positions=args.subterm_positions)
    print(f"mu_hat = {report.mu_hat:.6g} over {len(rules)} rules at depth "
          f"{depth} (space {report.space_size})")
    if args.out:
        write_csv(args.out + "_fractions.csv", ("rule_index", "fraction"),
                  [[i, f] for i, f in enumerate(report.fractions)])
        write_csv(args.out + "_overlap.csv",
                  ["i"] + [str(j) for j in range(len(rules))],
                  [[i] + [float(v) for v in row]
                   for i, row in enumerate(report.overlap)])
    return EXIT_OK


def _cmd_ode(args) -> int:
    params = ClosureParams(throughput=args.throughput, exponent=args.exponent,
                           coverage=args.coverage, n0=args.n0)
    series = simulate_ode(params, args.t_end, args.dt)
    write_series_csv(args.out, series)
    print(f"{len(series)} samples -> {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    exp_path = os.path.join(args.out_dir, "exponents.csv")
    if not os.path.exists(exp_path):
        raise ValueError(f"{exp_path}: run analyze first")
    if args.format in ("text", "csv"):
        with open(os.path.join(args.out_dir, "domain_table.csv"),
                  encoding="utf-8") as fh:
            print(fh.read())
        return EXIT_OK
    if not args.trajectories:
        raise ValueError("--trajectories is required for svg output")
    records = [r for r in read_sweep_file(args.trajectories) if "error" not in r]
    named = []
    for rec in records[:6]:
        sizes = [max(v, 1e-9) for v in rec["sizes"]]
        label = (f'{rec["domain"]}/{rec["generator"]}/{rec["filter"]}'
                 f'/d{rec["depth"]}/bs{rec["batch_size"]}/s{rec["seed"]}')
        named.append((label, list(range(1, len(sizes) + 1)), sizes))
    out = os.path.join(args.out_dir, "trajectories.svg")
    svg_line_plot(out, named, title="trajectories (log-log)", log_log=True)
    print(f"wrote {out}")
    return EXIT_OK


_COMMANDS = {
    "sweep": _cmd_sweep, "analyze": _cmd_analyze, "fit": _cmd_fit,
    "bootstrap": _cmd_bootstrap, "forecast": _cmd_forecast,
    "regress": _cmd_regress, "transfer": _cmd_transfer, "pooled": _cmd_pooled,
    "ingest": _cmd_ingest, "mu": _cmd_mu, "ode": _cmd_ode,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
