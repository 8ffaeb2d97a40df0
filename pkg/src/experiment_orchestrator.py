import os
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from experiment_config import ExperimentConfig, parse_grid, parse_sweep_tokens
from cavity_params import CavityParams
from cavity_spectrum import Spectrum, solve_spectrum, gap_profile, chi0_scan, resolve_drive_frequency
from mode_dynamics import evolve, total_quadratic_energy
from bogoliubov_extractor import (
    BogoliubovMatrix, initial_state, particle_number_series, project_instantaneous, project_windowed,
)
from multiple_scale_analysis import MsaPrediction, predict
from growth_analysis import (
    GrowthFit, SweepResult, ComparisonReport, fit_growth, default_window,
    sweep_drive_frequency, compare_with_msa, NO_ORACLE,
)
from csv_export import write_table, trajectory_columns, trajectory_rows
from simulation_errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_GRID = "0.5:13:126,2k1,2k2,k1+k2,k1+k3"
FIT_COLUMNS = ["mode", "model", "slope", "stderr", "window_lo", "window_hi"]


def resolve_sweep_grid(tokens: Sequence[str], spectrum: Spectrum) -> np.ndarray:
    """
    Range tokens ('a:b:n') lay down the base grid; every other token ('2k2', 'k1+k3', '4.5')
    is placed exactly, and base points closer than half the base spacing to it are dropped.
    """
    base, exact = [], []
    for token in tokens:
        if ":" in token:
            base.extend(parse_grid(token))
        else:
            exact.append(resolve_drive_frequency(token, spectrum))
    base = np.unique(np.asarray(base, dtype=float))
    exact = np.unique(np.asarray(exact, dtype=float))
    if base.size > 1 and exact.size > 0:
        spacing = float(np.min(np.diff(base)))
        distance = np.min(np.abs(base[:, None] - exact[None, :]), axis=1)
        base = base[distance >= 0.5 * spacing]
    grid = np.union1d(base, exact)
    logger.info(f"Sweep grid: {base.size} base points, {exact.size} exact frequencies")
    return grid


@dataclass
class SpectrumRun:
    spectrum: Spectrum
    gap_rows: List[Tuple]
    files: List[str] = field(default_factory=list)


@dataclass
class EvolutionRun:
    params: CavityParams
    spectrum: Spectrum
    prediction: MsaPrediction
    bogoliubov: BogoliubovMatrix
    times: np.ndarray
    particle_numbers: np.ndarray
    energies: np.ndarray
    fits: List[GrowthFit]
    files: List[str] = field(default_factory=list)


@dataclass
class SweepRun:
    params: CavityParams
    spectrum: Spectrum
    result: SweepResult
    files: List[str] = field(default_factory=list)


@dataclass
class ComparisonRun:
    params: CavityParams
    spectrum: Spectrum
    report: ComparisonReport
    files: List[str] = field(default_factory=list)


class ExperimentOrchestrator:
    """Runs the spectrum, evolve, sweep and compare pipelines for one resolved configuration"""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.header = config.header_lines()
        logger.info("ExperimentOrchestrator initialized")

    def _path(self, name: str) -> str:
        return os.path.join(self.config.out_dir, name)

    def _solve(self) -> Tuple[CavityParams, Spectrum]:
        base = self.config.cavity_params()
        spectrum = solve_spectrum(base, tol=self.config.spectrum_tol)
        omega = resolve_drive_frequency(self.config.omega, spectrum)
        params = base.with_drive(omega)
        logger.info(f"Drive {self.config.omega!r} resolved to omega={omega:.6f}, alpha={params.alpha:.6g}")
        return params, spectrum

    def _predict(self, params: CavityParams, spectrum: Spectrum) -> MsaPrediction:
        c = self.config
        return predict(spectrum, params.omega_drive, params.alpha, c.match_tol,
                       params.perturbation_amplitude, c.strong_threshold, c.equidistant_tol)

    def run_spectrum(self) -> SpectrumRun:
        """Solve the spectrum and write spectrum.csv, gaps.csv and (with a chi0 grid) eigenfrequencies.csv"""
        try:
            c = self.config
            logger.info("Starting spectrum run")

            # Step 1: spectrum at the configured bias point
            params = c.cavity_params()
            spectrum = solve_spectrum(params, tol=c.spectrum_tol)

            # Step 2: gap profile over the b0 grid
            b0_grid = c.b0_grid if c.b0_grid is not None else [params.b0]
            if len(b0_grid) == 0:
                raise ConfigurationError("B0_GRID is empty")
            gap_rows = [row.as_tuple() for row in gap_profile(c.chi0, b0_grid, c.n_modes, c.spectrum_tol)]

            c.ensure_out_dir()
            run = SpectrumRun(spectrum=spectrum, gap_rows=gap_rows)
            run.files.append(write_table(self._path("spectrum.csv"), ["b0", "n", "k_n", "M_n", "gap_n"],
                                         spectrum.to_rows(), self.header))
            run.files.append(write_table(self._path("gaps.csv"), ["b0", "n", "k_n", "M_n", "gap_n"],
                                         gap_rows, self.header))

            # Step 3: first eigenfrequencies against b0 for several chi0
            if c.chi0_grid is not None:
                if len(c.chi0_grid) == 0:
                    raise ConfigurationError("CHI0_GRID is empty")
                rows = chi0_scan(c.chi0_grid, b0_grid, c.n_modes, c.spectrum_tol)
                run.files.append(write_table(self._path("eigenfrequencies.csv"), ["chi0", "b0", "n", "k_n"],
                                             rows, self.header))

            logger.info("Spectrum run completed successfully")
            return run

        except Exception as e:
            logger.error(f"Error in spectrum run: {str(e)}")
            raise

    def run_evolution(self) -> EvolutionRun:
        """Single driven run: trajectory, particle numbers, energy, Bogoliubov coefficients and fits"""
        try:
            c = self.config
            logger.info("Starting evolution run")

            # Step 1: spectrum and drive frequency
            params, spectrum = self._solve()
            prediction = self._predict(params, spectrum)

            # Step 2: integrate the chosen initial data
            trajectory = evolve(initial_state(spectrum, c.init), params, spectrum, dt=c.dt,
                                sample_stride=c.sample_stride, points_per_period=c.points_per_period)

            # Step 3: particle numbers, energy and the final Bogoliubov coefficients
            times, numbers = particle_number_series(trajectory, spectrum)
            energies = np.array([total_quadratic_energy(trajectory.state(i), spectrum)
                                 for i in range(trajectory.n_samples)])
            final = project_instantaneous(trajectory.final_state, spectrum)
            matrix = BogoliubovMatrix(np.atleast_2d(final.alpha), np.atleast_2d(final.beta), init=c.init)
            logger.info(f"Final N_total={matrix.total_particles:.6g}, normalization defect {matrix.relative_norm_defect():.2e}")

            if (params.t_max - params.t_final) * spectrum.k[0] >= 4.0 * np.pi:
                windowed = project_windowed(trajectory, spectrum).particle_numbers()
                logger.info(f"Windowed N_1={windowed[0]:.6g} vs instantaneous {matrix.particle_numbers[0]:.6g} at t_max")

            # Step 4: growth-law fits
            fits = self._fit_modes(params, times, numbers)

            c.ensure_out_dir()
            run = EvolutionRun(params, spectrum, prediction, matrix, times, numbers, energies, fits)
            n_modes = spectrum.n_modes
            stride = max(1, trajectory.n_samples // 2000)
            run.files.append(write_table(self._path("trajectory.csv"), trajectory_columns(n_modes),
                                         trajectory_rows(trajectory, stride), self.header))
            run.files.append(write_table(self._path("particles.csv"), ["t"] + [f"N_{n}" for n in range(1, n_modes + 1)],
                                         [(t, *row) for t, row in zip(times, numbers)], self.header))
            run.files.append(write_table(self._path("energy.csv"), ["t", "energy"], zip(times, energies), self.header))
            run.files.append(write_table(self._path("bogoliubov.csv"), ["n", "N_n", "re_beta_diag", "im_beta_diag"],
                                         matrix.diagonal_rows(), self.header))
            run.files.append(write_table(self._path("bogoliubov_matrix.csv"),
                                         ["j", "n", "re_alpha", "im_alpha", "re_beta", "im_beta"],
                                         matrix.matrix_rows(), self.header))
            run.files.append(write_table(self._path("fits.csv"), FIT_COLUMNS, [f.as_row() for f in fits], self.header))

            logger.info("Evolution run completed successfully")
            return run

        except Exception as e:
            logger.error(f"Error in evolution run: {str(e)}")
            raise

    def _fit_modes(self, params: CavityParams, times: np.ndarray, numbers: np.ndarray) -> List[GrowthFit]:
        c = self.config
        if params.alpha == 0.0:
            logger.info("No drive: growth fits skipped")
            return []
        fits = []
        windows = [c.fit_window or default_window(params.t_final)]
        if c.late_fit_window is not None:
            windows.append(c.late_fit_window)
        for mode in c.fit_modes:
            if mode > numbers.shape[1]:
                raise ConfigurationError(f"FIT_MODES refers to mode {mode}, only {numbers.shape[1]} simulated")
            for window in windows:
                fit = fit_growth(times, numbers[:, mode - 1], c.fit_model, window, mode)
                logger.info(f"Mode {mode} {fit.model} fit on [{window[0]:g}, {window[1]:g}]: "
                            f"{fit.slope:.6g} +/- {fit.stderr:.2g}")
                fits.append(fit)
        return fits

    def run_sweep(self) -> SweepRun:
        """Particle numbers at the end of the drive over the SWEEP_OMEGA grid"""
        try:
            c = self.config
            logger.info("Starting sweep run")
            params, spectrum = self._solve()
            tokens = c.sweep_omega if c.sweep_omega is not None else parse_sweep_tokens(DEFAULT_SWEEP_GRID)
            grid = resolve_sweep_grid(tokens, spectrum)
            result = sweep_drive_frequency(params, spectrum, grid, dt=c.dt, workers=c.workers,
                                           init=c.init, points_per_period=c.points_per_period)

            c.ensure_out_dir()
            run = SweepRun(params, spectrum, result)
            columns = ["omega", "N_total"] + [f"N_{n}" for n in range(1, spectrum.n_modes + 1)]
            run.files.append(write_table(self._path("sweep.csv"), columns, result.rows(), self.header))
            logger.info("Sweep run completed successfully")
            return run

        except Exception as e:
            logger.error(f"Error in sweep run: {str(e)}")
            raise

    def run_comparison(self) -> ComparisonRun:
        """Fitted slopes against the multiple-scale rates"""
        try:
            c = self.config
            logger.info("Starting comparison run")
            params, spectrum = self._solve()
            report = compare_with_msa(params, spectrum, dt=c.dt, init=c.init,
                                      points_per_period=c.points_per_period, window=c.fit_window,
                                      match_tol=c.match_tol, strong_threshold=c.strong_threshold,
                                      equidistant_tol=c.equidistant_tol, sample_stride=c.sample_stride,
                                      late_window=c.late_fit_window)

            c.ensure_out_dir()
            run = ComparisonRun(params, spectrum, report)
            rows = [(r.quantity, r.numerical, r.analytical, r.relative_deviation) for r in report.rows]
            run.files.append(write_table(self._path("comparison.csv"),
                                         ["quantity", "numerical", "analytical", "relative_deviation"],
                                         rows, self.header))
            run.files.append(write_table(self._path("fits.csv"), FIT_COLUMNS,
                                         [f.as_row() for f in report.fits], self.header))
            logger.info("Comparison run completed successfully")
            return run

        except Exception as e:
            logger.error(f"Error in comparison run: {str(e)}")
            raise

    def print_spectrum_summary(self, run: SpectrumRun):
        s = run.spectrum
        print("\n" + "=" * 60)
        print("📐 CAVITY SPECTRUM")
        print("=" * 60)
        print(f"chi0 = {s.chi0:g}   b0 = {s.b0:g}")
        for b0, n, k, m, gap in s.to_rows():
            print(f"  k_{n:<3} = {k:12.6f}   M = {m:9.6f}   gap = {gap:9.6f}")
        print(f"\n📄 Files: {', '.join(run.files)}")
        print("=" * 60)

    def print_evolution_summary(self, run: EvolutionRun):
        print("\n" + "=" * 60)
        print("🌀 DRIVEN CAVITY RUN")
        print("=" * 60)
        print(f"omega = {run.params.omega_drive:.6f}   alpha = {run.params.alpha:.6g}   "
              f"t_F = {run.params.t_final:g}   t_max = {run.params.t_max:g}")
        for line in run.prediction.report_lines():
            print(f"  {line}")
        print(f"\n✨ PARTICLES AT t_max (total {run.bogoliubov.total_particles:.6g}):")
        for n, number, _, _ in run.bogoliubov.diagonal_rows():
            print(f"  N_{n:<3} = {number:.6g}")
        print(f"  normalization defect: {run.bogoliubov.relative_norm_defect():.2e}")
        if run.fits:
            print("\n📈 FITS:")
            for fit in run.fits:
                print(f"  mode {fit.mode} {fit.model} on [{fit.window[0]:g}, {fit.window[1]:g}]: "
                      f"{fit.slope:.6g} ± {fit.stderr:.2g}")
        print("=" * 60)

    def print_sweep_summary(self, run: SweepRun):
        result = run.result
        print("\n" + "=" * 60)
        print("🔭 DRIVE-FREQUENCY SWEEP")
        print("=" * 60)
        print(f"{len(result.omegas)} points in [{result.omegas[0]:g}, {result.omegas[-1]:g}], "
              f"{len(result.failures)} failed")
        for omega in result.peaks:
            print(f"  peak at omega = {omega:.4f}: N = {result.total_at(omega):.6g}")
        print("=" * 60)

    def print_comparison_summary(self, run: ComparisonRun):
        report = run.report
        print("\n" + "=" * 60)
        print("⚖️ NUMERICS vs MULTIPLE-SCALE PREDICTION")
        print("=" * 60)
        for line in report.prediction.report_lines():
            print(f"  {line}")
        if not report.has_oracle:
            print(f"\n⚠️ {NO_ORACLE} for regime {report.prediction.regime}")
        else:
            print()
            for line in report.table_lines():
                print(f"  {line}")
        print("=" * 60)


def run_subcommand(command: str, config: ExperimentConfig):
    """Dispatch one CLI subcommand and print its summary"""
    orchestrator = ExperimentOrchestrator(config)
    if command == "spectrum":
        run = orchestrator.run_spectrum()
        orchestrator.print_spectrum_summary(run)
    elif command == "evolve":
        run = orchestrator.run_evolution()
        orchestrator.print_evolution_summary(run)
    elif command == "sweep":
        run = orchestrator.run_sweep()
        orchestrator.print_sweep_summary(run)
    elif command == "compare":
        run = orchestrator.run_comparison()
        orchestrator.print_comparison_summary(run)
    else:
        raise ConfigurationError(f"unknown subcommand {command!r}")
    return run
