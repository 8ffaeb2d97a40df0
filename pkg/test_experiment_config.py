#!/usr/bin/env python3
"""
Tests for configuration loading, CSV output and the command-line entry point
"""

import sys
import os
import glob
import math
import logging

import numpy as np
import pytest

# Add src directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))
sys.path.append(os.path.dirname(__file__))

from experiment_config import ExperimentConfig, load_config, parse_grid, parse_window, parse_sweep_tokens
from experiment_orchestrator import resolve_sweep_grid
from cavity_spectrum import solve_spectrum, resolve_drive_frequency
from csv_export import write_table, read_table, trajectory_columns, trajectory_rows
from mode_dynamics import Trajectory
from simulation_errors import ConfigurationError
from main import main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), 'configs')


@pytest.fixture
def clean_environment(monkeypatch):
    for key in list(os.environ):
        if key.startswith("CAVITY_"):
            monkeypatch.delenv(key)


def write_config(tmp_path, text):
    path = tmp_path / "run.env"
    path.write_text(text)
    return str(path)


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("1, 2,3") == [1.0, 2.0, 3.0]
    assert parse_grid("  ") == []
    with pytest.raises(ConfigurationError):
        parse_grid("1:2")
    with pytest.raises(ConfigurationError):
        parse_grid("0:1:0")


def test_parse_window():
    assert parse_window("120,600") == (120.0, 600.0)
    assert parse_window("") is None
    with pytest.raises(ConfigurationError):
        parse_window("600,120")


def test_defaults():
    config = load_config(environ={})
    assert config.source == "defaults"
    assert config.alpha == 0.1383
    assert config.omega == "2k1"
    assert config.fit_modes == [1]


def test_layers_apply_in_order(tmp_path):
    path = write_config(tmp_path, "CHI0=1.0\nALPHA=0.2179\nN_MODES=6\nFIT_WINDOW=100,500\n")
    config = load_config(path, environ={})
    assert (config.chi0, config.alpha, config.n_modes) == (1.0, 0.2179, 6)
    assert config.fit_window == (100.0, 500.0)

    config = load_config(path, environ={"CAVITY_ALPHA": "0.3", "HOME": "/root"})
    assert config.alpha == 0.3
    assert config.source == f"defaults < {path} < environment"

    config = load_config(path, {"alpha": "0.4", "n_modes": None}, environ={"CAVITY_ALPHA": "0.3"})
    assert config.alpha == 0.4
    assert config.n_modes == 6
    assert config.source.endswith("command line")


def test_unknown_file_key_is_rejected(tmp_path):
    path = write_config(tmp_path, "CHI0=1.0\nALPHA_TYPO=3\n")
    with pytest.raises(ConfigurationError):
        load_config(path, environ={})


def test_unknown_environment_variable_is_ignored(caplog):
    with caplog.at_level(logging.WARNING):
        config = load_config(environ={"CAVITY_NOPE": "1"})
    assert config.source == "defaults"
    assert "CAVITY_NOPE" in caplog.text


def test_bad_values_are_configuration_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(write_config(tmp_path, "N_MODES=ten\n"), environ={})
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / "missing.env"), environ={})
    with pytest.raises(ConfigurationError):
        load_config(overrides={"init": "random"}, environ={})
    with pytest.raises(ConfigurationError):
        ExperimentConfig(workers=0)


def test_explicit_alpha_replaces_circuit_drive(tmp_path):
    path = write_config(tmp_path, "V0=20\nF0=0.7853981633974483\nEPSILON=0.005\n")
    circuit = load_config(path, environ={}).cavity_params()
    assert circuit.b0 == pytest.approx(20.0 * math.cos(math.pi / 4))
    assert circuit.has_circuit_drive

    config = load_config(path, {"alpha": "0.3"}, environ={})
    params = config.cavity_params()
    assert config.v0 is None
    assert params.alpha == 0.3
    assert params.b0 == pytest.approx(circuit.b0)


def test_header_lines_are_sorted_and_omit_source():
    lines = ExperimentConfig().header_lines()
    assert lines == sorted(lines)
    assert not any(line.startswith("source") for line in lines)
    assert "alpha = 0.1383" in lines


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIG_DIR, "*.env"))))
def test_shipped_configs_resolve(path):
    config = load_config(path, environ={})
    spectrum = solve_spectrum(config.cavity_params(), tol=config.spectrum_tol)
    assert resolve_drive_frequency(config.omega, spectrum) > 0
    assert config.out_dir.startswith("results")


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIG_DIR, "*.env"))))
def test_shipped_free_windows_resolve_particle_numbers_to_a_percent(path):
    # the windowed projection is off by about 2/(k1 W) relative, W = t_max - t_final
    config = load_config(path, environ={})
    if config.t_max == config.t_final:
        pytest.skip("no free window")
    spectrum = solve_spectrum(config.cavity_params(), tol=config.spectrum_tol)
    assert spectrum.k[0] * (config.t_max - config.t_final) >= 200.0


def test_parse_sweep_tokens():
    assert parse_sweep_tokens("0.5:13:126, 2k2,k1+k3 ,4.5") == ["0.5:13:126", "2k2", "k1+k3", "4.5"]
    assert parse_sweep_tokens(" ") == []
    with pytest.raises(ConfigurationError):
        parse_sweep_tokens("0.5:13,2k1")


def test_shipped_sweep_grid_holds_every_resonance_exactly(clean_environment):
    config = load_config(os.path.join(CONFIG_DIR, "sweep_frequency.env"), environ={})
    spectrum = solve_spectrum(config.cavity_params(), tol=config.spectrum_tol)
    grid = resolve_sweep_grid(config.sweep_omega, spectrum)
    k = spectrum.k
    resonances = [2 * k[0], 2 * k[1], k[0] + k[1], k[0] + k[2]]
    for omega in resonances:
        i = int(np.argmin(np.abs(grid - omega)))
        assert grid[i] == omega
        # neighbours stay at least half a base spacing away
        assert grid[i] - grid[i - 1] >= 0.05 - 1e-12
        assert grid[i + 1] - grid[i] >= 0.05 - 1e-12
    assert np.all(np.diff(grid) > 0)
    assert grid[0] == 0.5 and grid[-1] == 13.0
    assert 126 - 2 * len(resonances) <= len(grid) - len(resonances) <= 126


def test_sweep_grid_without_ranges_keeps_the_listed_points():
    spectrum = solve_spectrum(ExperimentConfig(n_modes=2).cavity_params())
    grid = resolve_sweep_grid(["3.5", "1.5", "2k1"], spectrum)
    np.testing.assert_array_equal(grid, sorted([1.5, 3.5, 2 * spectrum.k[0]]))
    with pytest.raises(ConfigurationError):
        resolve_sweep_grid(["0:4:5", "k3"], spectrum)


def test_write_and_read_table(tmp_path):
    path = str(tmp_path / "sub" / "table.csv")
    write_table(path, ["a", "b", "c"], [(1, 0.1, None), (np.int64(2), np.float64(1 / 3), "x")], ["alpha = 1"])
    with open(path) as handle:
        text = handle.read()
    assert text.startswith("# alpha = 1\na,b,c\n1,0.1,\n")
    rows = read_table(path)
    assert rows[0] == ["a", "b", "c"]
    assert float(rows[2][1]) == 1 / 3


def test_trajectory_rows_sum_columns():
    times = np.array([0.0, 1.0])
    q = np.array([[[1.0, 0.0], [0.0, 2.0j]], [[3.0, 0.0], [0.0, 4.0]]])
    trajectory = Trajectory(times, q, np.zeros_like(q), t_final=1.0)
    rows = trajectory_rows(trajectory)
    columns = trajectory_columns(2)
    assert len(rows[0]) == len(columns) == 9
    assert columns[:3] == ["t", "re_q_1", "im_q_1"]
    assert rows[0][:5] == [0.0, 1.0, 0.0, 0.0, 2.0]
    assert rows[1][:5] == [1.0, 3.0, 0.0, 4.0, 0.0]


def test_cli_spectrum_is_reproducible(tmp_path, clean_environment):
    out = str(tmp_path / "spectrum")
    assert main(["spectrum", "--out", out, "--modes", "3"]) == 0
    path = os.path.join(out, "spectrum.csv")
    with open(path, "rb") as handle:
        first = handle.read()
    assert main(["spectrum", "--out", out, "--modes", "3"]) == 0
    with open(path, "rb") as handle:
        assert handle.read() == first

    rows = read_table(path)
    assert rows[0] == ["b0", "n", "k_n", "M_n", "gap_n"]
    assert float(rows[1][2]) == pytest.approx(0.8495, abs=1e-3)
    assert os.path.exists(os.path.join(out, "gaps.csv"))


def test_cli_spectrum_with_chi0_grid(tmp_path, clean_environment):
    out = str(tmp_path / "scan")
    assert main(["spectrum", "--out", out, "--modes", "2", "--b0-grid", "1:10:4", "--chi0-grid", "0.05,1"]) == 0
    rows = read_table(os.path.join(out, "eigenfrequencies.csv"))
    assert len(rows) == 1 + 2 * 4 * 2


def test_cli_empty_grid_is_a_configuration_error(tmp_path, clean_environment):
    assert main(["spectrum", "--out", str(tmp_path), "--b0-grid", ""]) == 2


def test_cli_undriven_evolution_creates_no_particles(tmp_path, clean_environment):
    out = str(tmp_path / "evolve")
    code = main(["evolve", "--out", out, "--alpha", "0", "--modes", "2", "--tf", "10", "--tmax", "20"])
    assert code == 0
    rows = read_table(os.path.join(out, "particles.csv"))
    assert rows[0] == ["t", "N_1", "N_2"]
    assert max(float(v) for row in rows[1:] for v in row[1:]) < 1e-10
    assert len(read_table(os.path.join(out, "fits.csv"))) == 1


def test_cli_rejects_coarse_step(tmp_path, clean_environment):
    out = str(tmp_path / "coarse")
    assert main(["evolve", "--out", out, "--modes", "2", "--tf", "10", "--tmax", "10", "--dt", "1.0"]) == 2


def test_cli_usage_errors(clean_environment):
    assert main(["simulate"]) == 2
    assert main(["evolve", "--init", "random"]) == 2


def test_cli_sweep_writes_one_row_per_frequency(tmp_path, clean_environment):
    out = str(tmp_path / "sweep")
    code = main(["sweep", "--out", out, "--modes", "2", "--tf", "20", "--tmax", "20", "--sweep-omega", "1.5,2.5,3.5"])
    assert code == 0
    rows = read_table(os.path.join(out, "sweep.csv"))
    assert rows[0] == ["omega", "N_total", "N_1", "N_2"]
    assert [float(row[0]) for row in rows[1:]] == [1.5, 2.5, 3.5]
    assert all(float(row[1]) >= 0.0 for row in rows[1:])
