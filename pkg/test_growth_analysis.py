#!/usr/bin/env python3
"""
Tests for growth fits, drive-frequency sweeps and comparison reports
"""

import sys
import os
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add src directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

from cavity_params import CavityParams
from cavity_spectrum import solve_spectrum
from growth_analysis import (
    GrowthFit, SweepResult, ComparisonRow, fit_exponential, fit_power_law, fit_growth, default_window,
    dominant_frequency, sweep_drive_frequency, compare_with_msa, default_workers, memory_usage_mb,
    NO_ORACLE,
)
from multiple_scale_analysis import OFF_RESONANT
from simulation_errors import ConfigurationError, FitError

ALPHA = 0.1383


def setup(n_modes=4, alpha=ALPHA, t_final=200.0):
    base = CavityParams(chi0=0.05, b0=1.0, n_modes=n_modes, alpha=alpha, t_final=t_final, t_max=t_final)
    return base, solve_spectrum(base)


def test_exact_exponential_is_recovered():
    times = np.linspace(0.0, 100.0, 201)
    fit = fit_exponential(times, 3.0 * np.exp(0.05 * times), mode=2)
    assert fit.slope == pytest.approx(0.05, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.n_samples == 201
    assert fit.as_row()[:2] == (2, "exponential")


@settings(max_examples=25)
@given(rate=st.floats(-0.2, 0.2), scale=st.floats(1e-6, 1e6))
def test_exponential_slope_does_not_depend_on_scale(rate, scale):
    times = np.linspace(0.0, 50.0, 101)
    fit = fit_exponential(times, scale * np.exp(rate * times))
    assert fit.slope == pytest.approx(rate, abs=1e-9)


def test_oscillating_exponential_slope():
    times = np.linspace(0.0, 200.0, 4001)
    values = np.exp(0.03 * times) * (1.0 + 0.3 * np.sin(2.0 * times))
    fit = fit_exponential(times, values, default_window(200.0))
    assert fit.slope == pytest.approx(0.03, rel=0.05)
    assert fit.window == (40.0, 200.0)
    assert fit.significance > 10


def test_power_law_exponents():
    times = np.linspace(1.0, 100.0, 100)
    assert fit_power_law(times, times ** 2).slope == pytest.approx(2.0, abs=1e-10)
    assert fit_power_law(times, 7.0 * times).slope == pytest.approx(1.0, abs=1e-10)
    assert fit_growth(times, times ** 2, "power-law").model == "power-law"


def test_fit_errors():
    times = np.linspace(0.0, 10.0, 50)
    with pytest.raises(FitError):
        fit_exponential(times[:5], np.ones(5))
    with pytest.raises(FitError):
        fit_exponential(times, np.zeros(50))
    with pytest.raises(FitError):
        fit_exponential(times, np.ones(50), (5.0, 2.0))
    with pytest.raises(FitError):
        fit_exponential(times, np.ones(49))
    with pytest.raises(FitError):
        fit_power_law(times, np.ones(50))
    with pytest.raises(ConfigurationError):
        fit_growth(times, np.ones(50), "logistic")


def test_default_window_skips_transient():
    assert default_window(600.0) == (120.0, 600.0)


def test_significance_of_perfect_fit():
    fit = GrowthFit("exponential", 0.1, 0.0, 0.0, (0.0, 1.0), 0.0, 10)
    assert fit.significance == float("inf")


def test_dominant_frequency():
    times = np.arange(4000) * 0.1
    assert dominant_frequency(times, np.sin(0.5 * times)) == pytest.approx(0.5, abs=0.01)
    assert math.isnan(dominant_frequency(times[:3], times[:3]))


def test_dominant_frequency_on_uneven_samples():
    # a trailing sample off the regular spacing, as when t_max is not on the stride
    times = np.append(np.arange(4000) * 0.1, 400.03)
    values = np.sin(0.5 * times)
    assert dominant_frequency(times, values) == pytest.approx(0.5, abs=0.01)

    jittered = np.sort(np.arange(4000) * 0.1 + 0.03 * np.sin(7.0 * np.arange(4000)))
    assert dominant_frequency(jittered, np.cos(1.3 * jittered)) == pytest.approx(1.3, abs=0.01)


def test_sweep_result_peaks_and_rows():
    result = SweepResult(
        omegas=np.array([1.0, 2.0, 3.0, 4.0, 5.0]),
        totals=np.array([0.0, 5.0, 1.0, 1.0, 3.0]),
        per_mode=np.zeros((5, 2)),
    )
    assert result.peaks == [2.0]
    assert result.total_at(2.1) == 5.0
    assert result.rows()[1] == (2.0, 5.0, 0.0, 0.0)


def test_sweep_finds_resonances_in_expected_order():
    params, spectrum = setup()
    k = spectrum.k
    grid = [2 * k[0], 3.6, k[0] + k[1], 2 * k[1], k[0] + k[2]]
    result = sweep_drive_frequency(params, spectrum, grid)
    n = {name: result.total_at(w) for name, w in zip(("2k1", "off", "k1+k2", "2k2", "k1+k3"), grid)}
    assert n["2k1"] > n["2k2"] > n["k1+k2"] > n["k1+k3"] > n["off"]
    assert n["2k1"] > 100.0 * n["off"]
    assert result.failures == {}


def test_sweep_without_drive_creates_nothing():
    params, spectrum = setup(alpha=0.0, t_final=50.0)
    result = sweep_drive_frequency(params, spectrum, [1.0, 2.0, 3.0])
    assert np.all(result.totals < 1e-20)


def test_sweep_grid_order_does_not_matter():
    params, spectrum = setup(t_final=50.0)
    forward = sweep_drive_frequency(params, spectrum, [1.5, 2.5, 3.5])
    backward = sweep_drive_frequency(params, spectrum, [3.5, 2.5, 1.5])
    np.testing.assert_array_equal(forward.omegas, backward.omegas)
    np.testing.assert_array_equal(forward.totals, backward.totals)


def test_parallel_sweep_matches_serial():
    params, spectrum = setup(t_final=50.0)
    serial = sweep_drive_frequency(params, spectrum, [1.5, 2.5, 3.5])
    parallel = sweep_drive_frequency(params, spectrum, [1.5, 2.5, 3.5], workers=2)
    np.testing.assert_array_equal(serial.per_mode, parallel.per_mode)


def test_sweep_rejects_bad_grids():
    params, spectrum = setup(t_final=50.0)
    with pytest.raises(ConfigurationError):
        sweep_drive_frequency(params, spectrum, [])
    with pytest.raises(ConfigurationError):
        sweep_drive_frequency(params, spectrum, [1.0, 2.0, 1.0])
    with pytest.raises(ConfigurationError):
        sweep_drive_frequency(params, spectrum, [1.0], workers=0)


def test_sweep_records_failed_points():
    params, spectrum = setup(n_modes=2, alpha=1e6, t_final=50.0)
    result = sweep_drive_frequency(params, spectrum, [1.0, 2.0])
    assert set(result.failures) == {1.0, 2.0}
    assert np.all(np.isnan(result.totals))


def test_comparison_without_oracle():
    params, spectrum = setup()
    report = compare_with_msa(params.with_drive(3.6), spectrum)
    assert report.prediction.regime == OFF_RESONANT
    assert not report.has_oracle
    assert report.rows[0].quantity == NO_ORACLE
    assert report.fits == []
    assert math.isnan(report.max_deviation())


def test_comparison_row_deviation():
    assert ComparisonRow("x", 1.1, 1.0).relative_deviation == pytest.approx(0.1)
    assert math.isnan(ComparisonRow("x", 1.0, 0.0).relative_deviation)
    assert math.isnan(ComparisonRow("x", float("nan"), 1.0).relative_deviation)


def test_resource_helpers():
    assert default_workers() >= 1
    assert memory_usage_mb() > 0
