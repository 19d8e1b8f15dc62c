"""Sweep execution over architecture grids and trajectory analysis.

A sweep plan is a cartesian product over domains, generators, filters,
depths, batch sizes, and seeds at a fixed epoch count.  Runs append
JSON-lines trajectory records; completed configurations are skipped on
rerun, so interrupted sweeps resume cleanly.  Configurations are
independent, so the pool of worker processes changes nothing observable.
"""

from __future__ import annotations

import itertools
import json
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import (ArchConfig, FILTERS, GENERATORS, SWEEP_BATCH_SIZES,
                     SWEEP_DEPTHS, record_to_json, run_discovery,
                     trajectory_record)
from .growth import (DEFAULT_MODELS, fit_power_law, select_model,
                     series_from_sizes)

DEFAULT_WINDOWS = (30, 50, 100, 200, 300, 500)
DEGENERATE_B_THRESHOLD = 0.1
HISTOGRAM_STEP = 0.05


@dataclass
class SweepPlan:
    domains: tuple = ("arith", "bool", "list")
    generators: tuple = GENERATORS
    filters: tuple = FILTERS
    depths: tuple = SWEEP_DEPTHS
    batch_sizes: tuple = SWEEP_BATCH_SIZES
    seeds: tuple = (0, 1, 2, 3, 4)
    epochs: int = 30
    exclusions: tuple = ()   # (domain, generator, filter, depth, batch_size, seed)
    workers: int | None = None

    def configs(self) -> list[ArchConfig]:
        out = []
        excluded = set(self.exclusions)
        for dom, gen, filt, depth, bs, seed in itertools.product(
                self.domains, self.generators, self.filters, self.depths,
                self.batch_sizes, self.seeds):
            key = (dom, gen, filt, depth, bs, seed)
            if key in excluded:
                continue
            out.append(ArchConfig(dom, gen, filt, depth, bs, seed, self.epochs))
        return out


def short_range_plan(seeds=(0, 1, 2, 3, 4), epochs: int = 30) -> SweepPlan:
    """The full short-range architecture grid at 30 epochs."""
    return SweepPlan(seeds=tuple(seeds), epochs=epochs)


def long_range_plan(seeds=(0, 1, 2, 3, 4), epochs: int = 500) -> SweepPlan:
    """Five long list-domain trajectories at one architecture."""
    return SweepPlan(domains=("list",), generators=("compositional",),
                     filters=("any",), depths=(2,), batch_sizes=(80,),
                     seeds=tuple(seeds), epochs=epochs)


def _run_config(config: ArchConfig) -> dict:
    try:
        result = run_discovery(config)
        return trajectory_record(result.trajectory)
    except Exception as exc:  # per-config failures must not abort the sweep
        record = {
            "domain": config.domain, "generator": config.generator,
            "filter": config.filter, "depth": config.depth,
            "batch_size": config.batch_size, "seed": config.seed,
            "epochs": config.epochs, "error": f"{type(exc).__name__}: {exc}",
        }
        return record


def _record_key(record: dict) -> tuple:
    return (record["domain"], record["generator"], record["filter"],
            record["depth"], record["batch_size"], record["seed"],
            record["epochs"])


def read_sweep_file(path) -> list[dict]:
    records = []
    if not os.path.exists(path):
        return records
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def run_sweep(plan: SweepPlan, out_path, progress=None) -> list[dict]:
    """Execute all pending plan configurations, appending to ``out_path``.

    Already-present configuration keys are skipped.  Returns every record
    of the plan (existing plus new), in plan order.
    """
    existing = {_record_key(r): r for r in read_sweep_file(out_path)}
    configs = plan.configs()
    pending = [c for c in configs if c.key() not in existing]
    workers = plan.workers or os.cpu_count() or 1
    new_records = []
    if pending:
        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for i, record in enumerate(pool.map(_run_config, pending,
                                                    chunksize=4)):
                    new_records.append(record)
                    if progress:
                        progress(i + 1, len(pending))
        else:
            for i, config in enumerate(pending):
                new_records.append(_run_config(config))
                if progress:
                    progress(i + 1, len(pending))
        with open(out_path, "a", encoding="utf-8") as fh:
            for record in new_records:
                fh.write(record_to_json(record) + "\n")
        existing.update({_record_key(r): r for r in new_records})
    return [existing[c.key()] for c in configs if c.key() in existing]


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------

@dataclass
class AnalysisReport:
    exponents: list[dict] = field(default_factory=list)
    domain_table: list[dict] = field(default_factory=list)
    window_winners: dict[int, Counter] = field(default_factory=dict)
    histogram: list[dict] = field(default_factory=list)
    windows: tuple = ()
    models: tuple = ()


def trajectory_exponent(sizes) -> dict:
    """Log-log slope of a trajectory; flat/short trajectories flag b = 0."""
    series = series_from_sizes(sizes)
    fit = fit_power_law(series)
    return {"b": fit.params["b"], "a": fit.params["a"],
            "log_r2": fit.log_r2, "degenerate": fit.degenerate}


def analyze(records: list[dict], windows=DEFAULT_WINDOWS,
            models=DEFAULT_MODELS) -> AnalysisReport:
    """Per-trajectory exponents plus AIC winners at each window prefix."""
    good = [r for r in records if "error" not in r]
    if not good:
        raise ValueError("no trajectories to analyze")
    report = AnalysisReport(windows=tuple(windows), models=tuple(models))
    winners: dict[int, Counter] = {w: Counter() for w in windows}
    for rec in good:
        sizes = rec["sizes"]
        expo = trajectory_exponent(sizes)
        row = {k: rec[k] for k in ("domain", "generator", "filter", "depth",
                                   "batch_size", "seed")}
        row.update(b=expo["b"], log_r2=expo["log_r2"],
                   degenerate=int(expo["degenerate"]),
                   final_size=sizes[-1] if sizes else 0)
        report.exponents.append(row)
        series = series_from_sizes(sizes)
        for w in windows:
            if w > len(sizes):
                continue
            ranked = select_model(series.prefix(w), models)
            winners[w][ranked[0].model] += 1
    report.window_winners = {w: c for w, c in winners.items() if c}

    for domain in sorted({r["domain"] for r in report.exponents}):
        bs = [r["b"] for r in report.exponents if r["domain"] == domain]
        report.domain_table.append({
            "domain": domain,
            "n": len(bs),
            "mean_b": float(np.mean(bs)),
            "max_b": float(np.max(bs)),
            "count_b_gt_1": int(sum(1 for b in bs if b > 1.0)),
            "frac_b_lt_0.1": float(np.mean([b < DEGENERATE_B_THRESHOLD
                                            for b in bs])),
        })
        lo = 0.0
        top = max(max(bs), 0.0) + HISTOGRAM_STEP
        while lo < top:
            hi = lo + HISTOGRAM_STEP
            count = sum(1 for b in bs if lo <= b < hi)
            if count:
                report.histogram.append({"domain": domain, "lo": round(lo, 4),
                                         "hi": round(hi, 4), "count": count})
            lo = hi
    return report
