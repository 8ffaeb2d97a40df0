"""
SQUID-terminated Cavity Simulator Package

This package solves the static spectrum of a one-dimensional cavity closed by a
SQUID, integrates the parametrically driven mode equations, extracts Bogoliubov
coefficients and compares the resulting growth rates with multiple-scale
predictions.
"""

# Use absolute imports instead of relative imports
from cavity_params import CavityParams
from cavity_spectrum import Spectrum, solve_spectrum, mode_mass, gap_profile, resonant_set
from mode_dynamics import SystemState, Trajectory, drive_at, in_mode_state, vacuum_superposition_state, evolve
from bogoliubov_extractor import BogoliubovMatrix, project_instantaneous, project_windowed, bogoliubov_matrix
from multiple_scale_analysis import MsaPrediction, single_mode_rate, coupled_pair_rates, slow_flow_evolve, classify_regime
from growth_analysis import GrowthFit, SweepResult, fit_exponential, fit_power_law, sweep_drive_frequency, compare_with_msa
from experiment_orchestrator import ExperimentOrchestrator

__version__ = "1.0.0"
__author__ = "Cavity Simulation Group"

__all__ = [
    'CavityParams',
    'Spectrum',
    'solve_spectrum',
    'mode_mass',
    'gap_profile',
    'resonant_set',
    'SystemState',
    'Trajectory',
    'drive_at',
    'in_mode_state',
    'vacuum_superposition_state',
    'evolve',
    'BogoliubovMatrix',
    'project_instantaneous',
    'project_windowed',
    'bogoliubov_matrix',
    'MsaPrediction',
    'single_mode_rate',
    'coupled_pair_rates',
    'slow_flow_evolve',
    'classify_regime',
    'GrowthFit',
    'SweepResult',
    'fit_exponential',
    'fit_power_law',
    'sweep_drive_frequency',
    'compare_with_msa',
    'ExperimentOrchestrator',
]
