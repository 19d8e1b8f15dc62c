import math

import numpy as np
import pytest

from eqgrow.growth import (
    DEFAULT_MODELS, FitResult, GrowthSeries, MODELS, bootstrap_ci, fit_model,
    fit_power_law, oos_forecast, predict, read_series_csv, select_model,
    series_from_sizes, write_series_csv,
)

T200 = np.arange(1, 201, dtype=float)


def noisy(model, params, t, seed, level=0.01):
    rng = np.random.default_rng(seed)
    clean = predict(model, params, t)
    return GrowthSeries(t, np.clip(clean * (1 + level * rng.standard_normal(len(t))), 0, None))


# ---------------------------------------------------------------------------
# power law
# ---------------------------------------------------------------------------

def test_power_law_exact_recovery():
    fit = fit_power_law(GrowthSeries(T200, T200))
    assert abs(fit.params["a"] - 1) < 1e-12
    assert abs(fit.params["b"] - 1) < 1e-12
    assert fit.r2 == pytest.approx(1.0)


def test_power_law_machine_precision():
    series = GrowthSeries(T200, 3.7 * T200 ** 0.83)
    fit = fit_power_law(series)
    assert fit.params["a"] == pytest.approx(3.7, rel=1e-12)
    assert fit.params["b"] == pytest.approx(0.83, rel=1e-12)


def test_power_law_flat_series():
    fit = fit_power_law(GrowthSeries(T200, np.full(200, 7.0)))
    assert fit.params["b"] == 0.0


def test_power_law_too_few_points_degenerate():
    series = GrowthSeries(np.array([1.0, 2.0, 3.0, 4.0, 5.0]),
                          np.array([0.0, 0.0, 0.0, 2.0, 3.0]))
    fit = fit_power_law(series)
    assert fit.degenerate and fit.params["b"] == 0.0


def test_three_point_library_size_fixture():
    # mathlib-style lines-of-code points at 3.5, 6, and 8.5 years
    series = GrowthSeries(np.array([3.5, 6.0, 8.5]),
                          np.array([170_000.0, 1_000_000.0, 2_100_000.0]))
    fit = fit_power_law(series, min_points=2)
    assert fit.params["b"] == pytest.approx(2.87, rel=0.05)
    assert fit.params["a"] == pytest.approx(4957, rel=0.05)
    assert fit.log_r2 == pytest.approx(0.988, abs=0.01)


def test_zero_points_included_linearly_excluded_logarithmically():
    n = np.concatenate([[0.0, 0.0], 2.0 * T200[2:] ** 0.5])
    fit = fit_power_law(GrowthSeries(T200, n))
    assert not fit.degenerate
    assert fit.n_points == 200


# ---------------------------------------------------------------------------
# nonlinear fits
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("model,params", [
    ("saturating_pl", {"a": 5.0, "k": 0.9, "mu": 0.001}),
    ("stretched_exp", {"a": 120.0, "tau": 35.0, "beta": 1.4}),
    ("log_normal", {"a": 900.0, "m": 3.0, "s": 0.8}),
    ("linear", {"a": 30.0, "b": 2.0}),
])
def test_noise_free_recovery(model, params):
    t = np.arange(1, 501, dtype=float) if model == "saturating_pl" else T200
    fit = fit_model(model, GrowthSeries(t, predict(model, params, t)))
    assert fit.converged
    for name, value in params.items():
        assert fit.params[name] == pytest.approx(value, rel=1e-3)


def test_saturating_nested_power_law_flagged():
    series = GrowthSeries(T200, 2.0 * T200 ** 0.5)
    fit = fit_model("saturating_pl", series)
    assert fit.converged
    assert fit.params["k"] == pytest.approx(0.5, abs=0.01)
    assert abs(fit.params["mu"]) < 1e-4
    assert fit.degenerate == (fit.params["mu"] <= 0)


def test_saturating_stability_filter():
    fit = FitResult("saturating_pl", {"a": 1.0, "k": 9.0, "mu": 0.001},
                    1.0, 0.9, 0.0, 0.0, True, False)
    from eqgrow.growth import _saturating_degenerate
    assert _saturating_degenerate({"a": 1, "k": 9.0, "mu": 0.001})
    assert _saturating_degenerate({"a": 1, "k": 0.9, "mu": 0.2})
    assert not _saturating_degenerate({"a": 1, "k": 0.9, "mu": 0.001})


def test_nested_model_dominance():
    rng = np.random.default_rng(4)
    for trial in range(5):
        n = np.cumsum(rng.integers(0, 5, size=120)).astype(float) + 1
        series = GrowthSeries(np.arange(1, 121, dtype=float), n)
        power = fit_model("power_law", series)
        saturating = fit_model("saturating_pl", series)
        assert saturating.rss <= power.rss * (1 + 1e-9)


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

def test_select_requires_two_models():
    with pytest.raises(ValueError):
        select_model(GrowthSeries(T200, T200), ("power_law",))


def test_select_power_over_saturating_on_power_data():
    wins = 0
    for seed in range(10):
        series = noisy("power_law", {"a": 2.0, "b": 0.7}, T200, seed)
        ranked = select_model(series, MODELS)
        wins += ranked[0].model == "power_law"
    assert wins >= 8


def test_select_saturating_when_knee_inside_range():
    wins = 0
    for seed in range(10):
        series = noisy("saturating_pl", {"a": 5.0, "k": 0.9, "mu": 0.01},
                       T200, seed)
        ranked = select_model(series, MODELS)
        wins += ranked[0].model == "saturating_pl"
    assert wins >= 8


def test_select_monthly_commit_style_series():
    # 129-month power-law-like history: the power law outranks the
    # saturating form (whose extra parameter collapses toward zero) on a
    # clear majority of noise draws
    t = np.arange(1, 130, dtype=float)
    wins = 0
    for seed in range(10):
        series = noisy("power_law", {"a": 2.0, "b": 1.05}, t, seed, level=0.01)
        by_name = {f.model: f for f in select_model(series, DEFAULT_MODELS)}
        wins += (by_name["power_law"].aic < by_name["saturating_pl"].aic
                 or by_name["saturating_pl"].degenerate)
    assert wins >= 7


def test_nonconverged_ranks_last():
    series = GrowthSeries(T200, T200)
    ranked = select_model(series, MODELS)
    for worse, better in zip(ranked[1:], ranked):
        key = lambda f: (2 if not f.converged else (1 if f.degenerate else 0), f.aic)
        assert key(better) <= key(worse)


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------

def test_bootstrap_zero_noise_zero_width():
    series = GrowthSeries(T200, predict("power_law", {"a": 2.0, "b": 0.8}, T200))
    result = bootstrap_ci("power_law", series, n_resamples=50, seed=1)
    lo, hi, point = result.intervals["b"]
    assert hi - lo < 1e-9
    assert lo - 1e-9 <= point <= hi + 1e-9
    assert not result.degenerate


def test_bootstrap_percentile_ordering():
    series = noisy("saturating_pl", {"a": 5.0, "k": 0.9, "mu": 0.01}, T200, 3)
    result = bootstrap_ci("saturating_pl", series, n_resamples=60, seed=2)
    for lo, hi, _ in result.intervals.values():
        assert lo <= hi
    assert result.fraction_failed <= 0.5


def test_bootstrap_negative_mu_marks_degenerate():
    # slightly super-power-law data pushes the best saturating mu below zero
    t = np.arange(1, 301, dtype=float)
    n = 2.0 * t ** 0.8 * (1 + 0.0005 * t)
    result = bootstrap_ci("saturating_pl", GrowthSeries(t, n),
                          n_resamples=30, seed=0)
    assert result.intervals["mu"][2] < 0
    assert result.degenerate


# ---------------------------------------------------------------------------
# forecasting
# ---------------------------------------------------------------------------

def test_forecast_perfect_power_rmse_zero():
    series = GrowthSeries(T200, 2.0 * T200)
    results = oos_forecast(series, 100, ("power_law", "linear"))
    by_name = {r.model: r for r in results}
    assert by_name["power_law"].rmse_oos < 1e-6


def test_forecast_saturated_data_prefers_saturating():
    t = np.arange(1, 501, dtype=float)
    series = noisy("saturating_pl", {"a": 5.0, "k": 0.9, "mu": 0.004}, t, 5,
                   level=0.005)
    results = oos_forecast(series, 250, ("power_law", "saturating_pl"))
    by_name = {r.model: r for r in results}
    assert by_name["saturating_pl"].rmse_oos < by_name["power_law"].rmse_oos


def test_forecast_anti_leakage():
    series = noisy("power_law", {"a": 2.0, "b": 0.9}, T200, 6)
    fits = {r.model: r.fit for r in oos_forecast(series, 80, DEFAULT_MODELS)}
    tampered = GrowthSeries(series.t, np.concatenate([series.n[:80],
                                                      series.n[80:] * 100]))
    fits2 = {r.model: r.fit for r in oos_forecast(tampered, 80, DEFAULT_MODELS)}
    for model in fits:
        assert fits[model].params == fits2[model].params


def test_forecast_split_bounds():
    series = GrowthSeries(T200, T200)
    with pytest.raises(ValueError):
        oos_forecast(series, 3)
    with pytest.raises(ValueError):
        oos_forecast(series, 200)


# ---------------------------------------------------------------------------
# series plumbing
# ---------------------------------------------------------------------------

def test_series_validation():
    with pytest.raises(ValueError):
        GrowthSeries(np.array([1.0, 1.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        GrowthSeries(np.array([0.0, 1.0]), np.array([1.0, 2.0]))


def test_series_csv_roundtrip(tmp_path):
    series = series_from_sizes([1, 3, 5, 5, 9])
    path = tmp_path / "series.csv"
    write_series_csv(path, series)
    loaded = read_series_csv(path)
    assert np.array_equal(loaded.t, series.t)
    assert np.array_equal(loaded.n, series.n)
