import json
import os

import numpy as np
import pytest

import eqgrow.sweep as sweep_mod
from eqgrow.cli import main
from eqgrow.ingest import CommitRecord, format_log
from eqgrow.report import (render_table, svg_line_plot, svg_scatter, write_csv)
from eqgrow.sweep import (SweepPlan, analyze, long_range_plan,
                          read_sweep_file, run_sweep, short_range_plan)

SMALL_PLAN = SweepPlan(domains=("bool",), generators=("random",),
                       filters=("any", "novelty"), depths=(2, 3),
                       batch_sizes=(40,), seeds=(0,), epochs=10, workers=1)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_empty_plan_empty_file(tmp_path):
    plan = SweepPlan(domains=(), workers=1)
    out = tmp_path / "empty.jsonl"
    records = run_sweep(plan, out)
    assert records == []
    assert not out.exists() or out.read_text() == ""


def test_sweep_runs_and_is_idempotent(tmp_path):
    out = tmp_path / "sweep.jsonl"
    first = run_sweep(SMALL_PLAN, out)
    assert len(first) == 4
    before = out.read_text()
    second = run_sweep(SMALL_PLAN, out)
    assert out.read_text() == before
    assert [r["sizes"] for r in first] == [r["sizes"] for r in second]


def test_sweep_resumes_after_partial_run(tmp_path):
    out_full = tmp_path / "full.jsonl"
    run_sweep(SMALL_PLAN, out_full)
    full = {tuple(sorted(r.items(), key=lambda kv: kv[0]))
            for r in map(_strip_sizes, read_sweep_file(out_full))}

    out_resumed = tmp_path / "resumed.jsonl"
    partial = SweepPlan(**{**SMALL_PLAN.__dict__, "depths": (2,)})
    run_sweep(partial, out_resumed)
    run_sweep(SMALL_PLAN, out_resumed)
    resumed = {tuple(sorted(r.items(), key=lambda kv: kv[0]))
               for r in map(_strip_sizes, read_sweep_file(out_resumed))}
    assert resumed == full


def _strip_sizes(record):
    out = dict(record)
    out["sizes"] = tuple(out["sizes"])
    return out


def test_failed_config_records_error(tmp_path, monkeypatch):
    def broken(config):
        raise RuntimeError("boom")
    monkeypatch.setattr(sweep_mod, "run_discovery", broken)
    out = tmp_path / "err.jsonl"
    plan = SweepPlan(domains=("bool",), generators=("random",),
                     filters=("any",), depths=(2,), batch_sizes=(40,),
                     seeds=(0,), epochs=2, workers=1)
    records = run_sweep(plan, out)
    assert len(records) == 1
    assert "boom" in records[0]["error"]
    assert records[0]["domain"] == "bool"


def test_parallel_matches_serial(tmp_path):
    serial = run_sweep(SweepPlan(**{**SMALL_PLAN.__dict__, "workers": 1}),
                       tmp_path / "serial.jsonl")
    parallel = run_sweep(SweepPlan(**{**SMALL_PLAN.__dict__, "workers": 4}),
                         tmp_path / "parallel.jsonl")
    assert [r["sizes"] for r in serial] == [r["sizes"] for r in parallel]


def test_plan_presets():
    assert len(short_range_plan().configs()) == 3 * 4 * 2 * 3 * 5 * 5
    lr = long_range_plan()
    configs = lr.configs()
    assert len(configs) == 5
    assert {c.epochs for c in configs} == {500}
    assert {(c.domain, c.generator, c.filter, c.depth, c.batch_size)
            for c in configs} == {("list", "compositional", "any", 2, 80)}


# ---------------------------------------------------------------------------
# analysis
# ---------------------------------------------------------------------------

def test_analyze_perfect_power_law_trajectory():
    record = {"domain": "arith", "generator": "random", "filter": "any",
              "depth": 3, "batch_size": 40, "seed": 0, "epochs": 30,
              "sizes": list(range(1, 31))}
    report = analyze([record], windows=(10, 30), models=("power_law",
                                                         "stretched_exp",
                                                         "saturating_pl"))
    assert report.exponents[0]["b"] == pytest.approx(1.0)
    for window, counts in report.window_winners.items():
        assert counts.most_common(1)[0][0] == "power_law"


def test_analyze_flat_trajectory_flagged():
    record = {"domain": "list", "generator": "random", "filter": "novelty",
              "depth": 2, "batch_size": 40, "seed": 0, "epochs": 30,
              "sizes": [0] * 30}
    report = analyze([record], windows=(30,))
    row = report.exponents[0]
    assert row["b"] == 0.0 and row["degenerate"] == 1
    assert report.domain_table[0]["frac_b_lt_0.1"] == 1.0


def test_analyze_window_schedule_skips_long_windows():
    record = {"domain": "arith", "generator": "random", "filter": "any",
              "depth": 3, "batch_size": 40, "seed": 0, "epochs": 30,
              "sizes": list(range(1, 31))}
    report = analyze([record], windows=(30, 50, 100, 200, 300, 500))
    assert set(report.window_winners) == {30}


def test_pipeline_byte_identical(tmp_path):
    """sweep -> analyze -> csv twice from the same seeds is byte-identical."""
    from eqgrow.report import write_domain_table_csv, write_exponents_csv
    outputs = []
    for tag in ("one", "two"):
        jsonl = tmp_path / f"{tag}.jsonl"
        records = run_sweep(SMALL_PLAN, jsonl)
        report = analyze(records, windows=(10,))
        exp = tmp_path / f"{tag}_exponents.csv"
        table = tmp_path / f"{tag}_table.csv"
        write_exponents_csv(exp, report)
        write_domain_table_csv(table, report)
        outputs.append((jsonl.read_bytes(), exp.read_bytes(), table.read_bytes()))
    assert outputs[0] == outputs[1]


def test_analysis_aggregates_permutation_invariant(tmp_path):
    records = run_sweep(SMALL_PLAN, tmp_path / "s.jsonl")
    forward = analyze(records, windows=(10,))
    backward = analyze(list(reversed(records)), windows=(10,))
    assert forward.domain_table == backward.domain_table
    assert forward.window_winners == backward.window_winners


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------

def test_write_csv_headers_only_when_empty(tmp_path):
    path = tmp_path / "empty.csv"
    write_csv(path, ("a", "b"), [])
    assert path.read_text() == "a,b\n"


def test_csv_byte_stable(tmp_path):
    rows = [[1, 0.1234567890123, "x"], [2, 3.0, "y"]]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, ("i", "v", "s"), rows)
    write_csv(p2, ("i", "v", "s"), rows)
    assert p1.read_bytes() == p2.read_bytes()


def test_svg_two_point_series_single_polyline(tmp_path):
    path = tmp_path / "plot.svg"
    svg_line_plot(path, [("s", [1, 2], [3, 4])])
    text = path.read_text()
    assert text.count("<polyline") == 1
    points = text.split('points="')[1].split('"')[0]
    assert len(points.split()) == 2


def test_svg_scatter_structure(tmp_path):
    path = tmp_path / "scatter.svg"
    svg_scatter(path, [0.1, 0.5, 0.9], [0.2, 0.4, 1.0])
    text = path.read_text()
    assert text.count("<circle") == 3


def test_render_table_alignment():
    text = render_table(("name", "v"), [["alpha", 1], ["b", 22]])
    lines = text.splitlines()
    assert lines[0].startswith("name")
    assert set(lines[1]) <= {"-", " "}


# ---------------------------------------------------------------------------
# CLI surface
# ---------------------------------------------------------------------------

def test_cli_usage_error_exit_1(capsys):
    assert main(["no-such-command"]) == 1


def test_cli_data_error_exit_2(capsys):
    assert main(["fit", "/nonexistent/series.csv"]) == 2


def test_cli_sweep_analyze_pipeline(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    code = main(["sweep", "--out", str(out), "--domains", "bool",
                 "--generators", "random", "--filters", "any",
                 "--depths", "3", "--batch-sizes", "40", "--seeds", "0",
                 "--epochs", "10", "--workers", "1"])
    assert code == 0
    out_dir = tmp_path / "analysis"
    assert main(["analyze", str(out), "--out-dir", str(out_dir),
                 "--windows", "10"]) == 0
    assert (out_dir / "exponents.csv").exists()
    assert (out_dir / "domain_table.csv").exists()
    assert main(["report", str(out_dir), "--format", "svg",
                 "--trajectories", str(out)]) == 0
    assert (out_dir / "trajectories.svg").exists()


def test_cli_fit_bootstrap_forecast(tmp_path, capsys):
    series = tmp_path / "series.csv"
    t = np.arange(1, 61, dtype=float)
    with open(series, "w") as fh:
        fh.write("t,n\n")
        for ti, ni in zip(t, 2.0 * t ** 0.8):
            fh.write(f"{ti},{ni}\n")
    assert main(["fit", str(series), "--models", "power_law", "linear"]) == 0
    assert main(["bootstrap", str(series), "--model", "power_law",
                 "--resamples", "20"]) == 0
    assert main(["forecast", str(series), "--split", "30",
                 "--models", "power_law", "linear"]) == 0
    captured = capsys.readouterr()
    assert "rmse_oos" in captured.out


def test_cli_ingest_and_ode(tmp_path, capsys):
    log = tmp_path / "history.log"
    log.write_text(format_log([
        CommitRecord("a", "2020-01", ["Mathlib/A.lean"]),
        CommitRecord("b", "2020-03", ["Mathlib/B/C.lean", "other.txt"]),
    ]))
    out = tmp_path / "monthly.csv"
    assert main(["ingest", str(log), "--mode", "new_files",
                 "--glob", "Mathlib/**/*.lean", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1:] == ["2020-01,1,1", "2020-02,2,1", "2020-03,3,2"]

    ode_out = tmp_path / "ode.csv"
    assert main(["ode", "--throughput", "2", "--exponent", "0",
                 "--t-end", "10", "--dt", "0.1", "--out", str(ode_out)]) == 0
    assert ode_out.read_text().splitlines()[1] == "1,2"


def test_cli_regression_commands(tmp_path, capsys):
    out = tmp_path / "sweep.jsonl"
    plan = SweepPlan(domains=("arith", "list"), generators=("random",
                                                            "compositional"),
                     filters=("any", "novelty"), depths=(2, 3),
                     batch_sizes=(40, 80), seeds=(0,), epochs=8, workers=2)
    run_sweep(plan, out)
    out_dir = tmp_path / "a"
    assert main(["analyze", str(out), "--out-dir", str(out_dir),
                 "--windows", "8"]) == 0
    exponents = str(out_dir / "exponents.csv")
    assert main(["regress", exponents, "--domains", "arith",
                 "--folds", "4"]) == 0
    assert main(["transfer", exponents, "--train", "arith",
                 "--test", "list"]) == 0
    assert main(["pooled", exponents, "--folds", "4"]) == 0
    captured = capsys.readouterr()
    assert "transfer r2" in captured.out


def test_cli_mu_command(tmp_path, capsys):
    rules = tmp_path / "arith.rules"
    rules.write_text("(+ A 0) => A\n(* A 1) => A\n")
    assert main(["mu", str(rules), "--domain", "arith", "--depth", "2",
                 "--out", str(tmp_path / "mu")]) == 0
    assert (tmp_path / "mu_fractions.csv").exists()
    assert (tmp_path / "mu_overlap.csv").exists()
