#!/usr/bin/env python3
"""
Tests for the static cavity spectrum and cavity parameters
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
from cavity_spectrum import (
    solve_spectrum, solve_roots, first_root, mode_mass, gap_profile, chi0_scan, build_spectrum,
    resonant_set, resolve_drive_frequency, spectral_residual,
)
from simulation_errors import ConfigurationError, SpectrumError


def params(chi0=0.05, b0=1.0, n_modes=4, **kwargs):
    return CavityParams(chi0=chi0, b0=b0, n_modes=n_modes, t_final=10.0, t_max=10.0, **kwargs)


def test_quoted_eigenfrequencies_weak_squid_capacitance():
    spectrum = solve_spectrum(params())
    # quoted values are rounded from roots with residuals around 1e-3
    np.testing.assert_allclose(spectrum.k, [0.8495, 3.2819, 6.1403, 9.0930], atol=1e-3)


def test_quoted_eigenfrequencies_near_equidistant_pair():
    spectrum = solve_spectrum(params(chi0=0.01, b0=4.96))
    np.testing.assert_allclose(spectrum.k, [1.311, 4.015, 6.862, 9.810], atol=5e-3)
    assert abs(spectrum.k[1] - 3.0 * spectrum.k[0]) < 0.1


def test_quoted_first_eigenfrequency_large_capacitance():
    assert first_root(1.0, 1.0) == pytest.approx(0.6799, abs=5e-3)


def test_neumann_limit_gives_multiples_of_pi():
    spectrum = solve_spectrum(params(chi0=0.0, b0=0.0, n_modes=6))
    np.testing.assert_allclose(spectrum.k, math.pi * np.arange(1, 7), atol=1e-9)
    np.testing.assert_allclose(spectrum.gaps, math.pi, atol=1e-9)


def test_residuals_below_tolerance_and_increasing():
    spectrum = solve_spectrum(params(n_modes=10))
    assert np.all(spectrum.residuals() < 1e-6)
    assert np.all(np.diff(spectrum.k) > 0)
    assert np.all(spectrum.k > 0)
    assert np.all(spectrum.masses > 0)


def test_solver_is_deterministic():
    first = solve_spectrum(params(n_modes=8))
    second = solve_spectrum(params(n_modes=8))
    assert np.array_equal(first.k, second.k)
    assert np.array_equal(first.masses, second.masses)


def test_negative_bias_moves_first_root_past_half_pi():
    k1 = first_root(0.05, -1.0)
    assert math.pi / 2 < k1 < math.pi
    assert abs(spectral_residual(k1, 0.05, -1.0)) < 1e-6


def test_mode_mass_values():
    assert mode_mass(0.8495, 0.05) == pytest.approx(1.627, abs=1e-3)
    assert mode_mass(3.2819, 0.05) == pytest.approx(1.140, abs=1e-3)
    for n in range(1, 5):
        assert mode_mass(n * math.pi, 0.3) == pytest.approx(1.6, abs=1e-12)


def test_mode_mass_rejects_nonpositive_argument():
    with pytest.raises(ConfigurationError):
        mode_mass(0.0, 0.05)


@given(kd=st.floats(1e-3, 100.0), chi0=st.floats(0.0, 50.0))
def test_mode_mass_is_positive(kd, chi0):
    assert mode_mass(kd, chi0) > 0


@settings(max_examples=40, deadline=None)
@given(chi0=st.floats(0.0, 10.0), b0=st.floats(-5.0, 50.0).filter(lambda b: b <= 0 or b >= 1e-3))
def test_roots_satisfy_boundary_condition(chi0, b0):
    roots = solve_roots(chi0, b0, 3)
    assert np.all(np.abs(spectral_residual(roots, chi0, b0)) < 1e-6)
    assert np.all(np.diff(roots) > 0)


def test_invalid_tolerance_is_rejected():
    with pytest.raises(ConfigurationError):
        solve_spectrum(params(), tol=0.0)


def test_gap_profile_first_gap():
    rows = gap_profile(0.05, [1.0], 4)
    assert [r.n for r in rows] == [1, 2, 3, 4]
    assert rows[0].gap_n == pytest.approx(3.2819 - 0.8495, abs=2e-3)
    assert rows[0].k_n == pytest.approx(0.8495, abs=1e-3)


def test_gap_profile_neumann_limit():
    rows = gap_profile(0.0, [0.0], 5)
    assert all(r.gap_n == pytest.approx(math.pi, abs=1e-9) for r in rows)


def test_gaps_approach_pi_for_large_bias():
    rows = gap_profile(0.05, [300.0, 350.0, 400.0], 4)
    for row in rows:
        assert abs(row.gap_n - math.pi) / math.pi < 0.05


def test_first_gap_converges_monotonically_at_large_bias():
    grid = [50.0, 100.0, 200.0, 400.0]
    deviations = [abs(r.gap_n - math.pi) for r in gap_profile(0.05, grid, 1)]
    assert all(a > b for a, b in zip(deviations, deviations[1:]))


def test_gap_profile_rejects_empty_grid():
    with pytest.raises(ConfigurationError):
        gap_profile(0.05, [], 4)


def test_spectrum_errors_carry_bias_in_gap_scans(monkeypatch):
    import cavity_spectrum

    def broken(*args, **kwargs):
        raise SpectrumError("no sign change", branch=2)

    monkeypatch.setattr(cavity_spectrum, "_bracket_root", broken)
    with pytest.raises(SpectrumError) as info:
        gap_profile(0.05, [2.5], 2)
    assert info.value.b0 == 2.5
    assert info.value.branch == 2
    assert info.value.exit_code == 3


def test_chi0_scan_rows():
    rows = chi0_scan([0.05, 1.0], [1.0], 2)
    assert len(rows) == 4
    assert rows[0][:3] == (0.05, 1.0, 1)
    assert rows[2][3] == pytest.approx(first_root(1.0, 1.0))
    # larger SQUID capacitance lowers the first eigenfrequency
    assert rows[2][3] < rows[0][3]


def test_resonant_set_single_mode():
    spectrum = solve_spectrum(params())
    entries = resonant_set(spectrum, 2.0 * spectrum.k[0], 1e-2)
    assert [e.label for e in entries] == ["self(1)"]


def test_resonant_set_pair_when_second_mode_is_near_three_times_first():
    spectrum = solve_spectrum(params(chi0=0.01, b0=4.96))
    entries = resonant_set(spectrum, 2.0 * spectrum.k[0], 0.1)
    assert [e.label for e in entries] == ["self(1)", "pair(1,2,-)"]


def test_resonant_set_far_from_everything_is_empty():
    spectrum = solve_spectrum(params())
    assert resonant_set(spectrum, 100.0, 1e-2) == []


def test_resonant_set_rejects_nonpositive_tolerance():
    spectrum = solve_spectrum(params())
    with pytest.raises(ConfigurationError):
        resonant_set(spectrum, 1.0, 0.0)


def test_resolve_drive_frequency_expressions():
    spectrum = solve_spectrum(params())
    k = spectrum.k
    assert resolve_drive_frequency("2k1", spectrum) == pytest.approx(2 * k[0])
    assert resolve_drive_frequency("k1+k3", spectrum) == pytest.approx(k[0] + k[2])
    assert resolve_drive_frequency("k2 - k1", spectrum) == pytest.approx(k[1] - k[0])
    assert resolve_drive_frequency("pi", spectrum) == pytest.approx(math.pi)
    assert resolve_drive_frequency("3.5", spectrum) == 3.5
    assert resolve_drive_frequency(1.25, spectrum) == 1.25


@pytest.mark.parametrize("expression", ["k9", "k1-k2", "2k1k2", "banana", ""])
def test_resolve_drive_frequency_rejects_bad_expressions(expression):
    spectrum = solve_spectrum(params())
    with pytest.raises(ConfigurationError):
        resolve_drive_frequency(expression, spectrum)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        CavityParams(chi0=-0.1, t_final=1.0, t_max=1.0)
    with pytest.raises(ConfigurationError):
        CavityParams(chi0=0.05, n_modes=0, t_final=1.0, t_max=1.0)
    with pytest.raises(ConfigurationError):
        CavityParams(chi0=0.05, t_final=2.0, t_max=1.0)
    with pytest.raises(ConfigurationError):
        CavityParams(chi0=0.05, alpha=-0.1, t_final=1.0, t_max=1.0)
    with pytest.raises(ConfigurationError):
        CavityParams(chi0=0.05, v0=1.0, f0=0.3, t_final=1.0, t_max=1.0)


def test_circuit_parameters_derive_bias_and_drive():
    p = CavityParams.from_circuit(chi0=0.05, v0=20.0, f0=math.pi / 4, epsilon=0.005,
                                  t_final=10.0, t_max=10.0, n_modes=2)
    k1 = first_root(0.05, p.b0)
    assert p.b0 == pytest.approx(20.0 * math.cos(math.pi / 4))
    assert p.alpha == pytest.approx(2 * 20.0 * math.sin(math.pi / 4) * 0.005 / k1 ** 2)
    assert p.perturbation_amplitude == pytest.approx(p.b0 * 0.005)

    # derived values survive copies and cannot be overridden inconsistently
    moved = p.with_drive(2.0)
    assert moved.omega_drive == 2.0
    assert moved.alpha == pytest.approx(p.alpha)
    assert moved.b0 == pytest.approx(p.b0)


def test_perturbation_amplitude_defaults_to_alpha():
    assert params(alpha=0.2).perturbation_amplitude == 0.2


def test_build_spectrum_rows():
    spectrum = build_spectrum(np.array([0.8495, 3.2819]), 0.05, 1.0)
    rows = spectrum.to_rows()
    assert rows[0][:2] == (1.0, 1)
    assert rows[0][4] == pytest.approx(3.2819 - 0.8495)
    assert math.isnan(rows[1][4])
