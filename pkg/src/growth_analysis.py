"""
Growth-law fits, drive-frequency sweeps and numerical-vs-MSA comparison reports.
"""

import os
import logging
from concurrent import futures
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Any

import numpy as np
import psutil

from cavity_params import CavityParams
from cavity_spectrum import Spectrum, DEFAULT_MATCH_TOL, resonant_set
from mode_dynamics import evolve, DEFAULT_POINTS_PER_PERIOD
from bogoliubov_extractor import (
    bogoliubov_matrix, initial_state, particle_number_series, project_windowed, project_instantaneous,
)
from multiple_scale_analysis import (
    predict, slow_flow_particle_numbers, MsaPrediction, SINGLE_MODE, FINITE_PAIR, EQUIDISTANT_WEAK,
    DEFAULT_STRONG_THRESHOLD, DEFAULT_EQUIDISTANT_TOL,
)
from simulation_errors import FitError, ConfigurationError, SimulationError

logger = logging.getLogger(__name__)

EXPONENTIAL = "exponential"
POWER_LAW = "power-law"
MIN_FIT_SAMPLES = 10
TRANSIENT_FRACTION = 0.2
FFT_PADDING = 8
SLOW_FLOW_SPACING = 0.5


@dataclass
class GrowthFit:
    """Least-squares line through log y against t (exponential) or log t (power law)"""
    model: str
    slope: float
    stderr: float
    intercept: float
    window: Tuple[float, float]
    residual_rms: float
    n_samples: int
    mode: Optional[int] = None

    @property
    def significance(self) -> float:
        """Slope in units of its standard error"""
        if self.stderr == 0:
            return float("inf") if self.slope != 0 else 0.0
        return self.slope / self.stderr

    def as_row(self) -> Tuple[Any, ...]:
        return (self.mode, self.model, self.slope, self.stderr, self.window[0], self.window[1])


def default_window(t_final: float, fraction: float = TRANSIENT_FRACTION) -> Tuple[float, float]:
    """Drop the first part of the drive window as transient"""
    return fraction * t_final, t_final


def _select(times: np.ndarray, values: np.ndarray, window: Optional[Tuple[float, float]]):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise FitError(f"time and value arrays differ in shape: {times.shape} vs {values.shape}")
    if window is None:
        window = (float(times[0]), float(times[-1]))
    t_a, t_b = window
    if not t_a < t_b:
        raise FitError(f"fit window must satisfy t_a < t_b, got [{t_a}, {t_b}]")
    mask = (times >= t_a) & (times <= t_b)
    if np.count_nonzero(mask) < MIN_FIT_SAMPLES:
        raise FitError(f"need at least {MIN_FIT_SAMPLES} samples in [{t_a:g}, {t_b:g}], got {np.count_nonzero(mask)}")
    y = values[mask]
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise FitError(f"non-positive or non-finite values in fit window [{t_a:g}, {t_b:g}]")
    return times[mask], y, (float(t_a), float(t_b))


def _line_fit(x: np.ndarray, y: np.ndarray, model: str, window, mode: Optional[int]) -> GrowthFit:
    coefficients, covariance = np.polyfit(x, y, 1, cov=True)
    slope, intercept = float(coefficients[0]), float(coefficients[1])
    stderr = float(np.sqrt(max(covariance[0, 0], 0.0)))
    residual = y - (slope * x + intercept)
    return GrowthFit(
        model=model,
        slope=slope,
        stderr=stderr,
        intercept=intercept,
        window=window,
        residual_rms=float(np.sqrt(np.mean(residual ** 2))),
        n_samples=len(x),
        mode=mode,
    )


def fit_exponential(times: Sequence[float], values: Sequence[float],
                    window: Optional[Tuple[float, float]] = None, mode: Optional[int] = None) -> GrowthFit:
    """Slope of log y against t"""
    t, y, window = _select(times, values, window)
    return _line_fit(t, np.log(y), EXPONENTIAL, window, mode)


def fit_power_law(times: Sequence[float], values: Sequence[float],
                  window: Optional[Tuple[float, float]] = None, mode: Optional[int] = None) -> GrowthFit:
    """Exponent of y ~ t^p from log y against log t"""
    t, y, window = _select(times, values, window)
    if np.any(t <= 0):
        raise FitError("power-law fit needs t > 0 throughout the window")
    return _line_fit(np.log(t), np.log(y), POWER_LAW, window, mode)


def fit_growth(times, values, model: str = EXPONENTIAL, window=None, mode: Optional[int] = None) -> GrowthFit:
    if model == EXPONENTIAL:
        return fit_exponential(times, values, window, mode)
    if model == POWER_LAW:
        return fit_power_law(times, values, window, mode)
    raise ConfigurationError(f"unknown fit model {model!r}")


def dominant_frequency(times: np.ndarray, values: np.ndarray, padding: int = FFT_PADDING) -> float:
    """
    Angular frequency of the strongest Fourier component completing at least two
    cycles over the record.  Unevenly spaced samples are first interpolated onto an
    even grid; the series is Hann-tapered and zero-padded to refine the peak.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 4:
        return float("nan")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        even = np.linspace(times[0], times[-1], len(times))
        values = np.interp(even, times, values)
        times = even
    span = float(times[-1] - times[0])
    size = padding * len(values)
    tapered = (values - np.mean(values)) * np.hanning(len(values))
    spectrum = np.abs(np.fft.rfft(tapered, n=size))
    frequencies = 2.0 * np.pi * np.fft.rfftfreq(size, d=span / (len(times) - 1))
    usable = frequencies >= 4.0 * np.pi / span
    if not np.any(usable):
        return float("nan")
    return float(frequencies[usable][int(np.argmax(spectrum[usable]))])


# Sweeps

@dataclass
class SweepResult:
    """Particle numbers at the end of the drive over a grid of drive frequencies"""
    omegas: np.ndarray
    totals: np.ndarray
    per_mode: np.ndarray
    failures: Dict[float, str] = field(default_factory=dict)

    @property
    def peaks(self) -> List[float]:
        """Interior grid points strictly above both neighbours"""
        found = []
        for i in range(1, len(self.omegas) - 1):
            left, mid, right = self.totals[i - 1], self.totals[i], self.totals[i + 1]
            if np.isfinite([left, mid, right]).all() and mid > left and mid > right:
                found.append(float(self.omegas[i]))
        return found

    def total_at(self, omega: float) -> float:
        i = int(np.argmin(np.abs(self.omegas - omega)))
        return float(self.totals[i])

    def rows(self) -> List[Tuple[float, ...]]:
        return [(float(w), float(n), *map(float, modes)) for w, n, modes in zip(self.omegas, self.totals, self.per_mode)]


def _sweep_point(params: CavityParams, spectrum: Spectrum, omega: float, dt: Optional[float],
                 init: str, points_per_period: int) -> Tuple[float, Optional[np.ndarray], Optional[str]]:
    try:
        matrix = bogoliubov_matrix(params.with_drive(omega), spectrum, dt=dt, init=init,
                                   points_per_period=points_per_period)
        return omega, matrix.particle_numbers, None
    except SimulationError as e:
        return omega, None, str(e)


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def memory_usage_mb() -> float:
    return psutil.Process().memory_info().rss / 1024 / 1024


def sweep_drive_frequency(params: CavityParams, spectrum: Spectrum, omega_grid: Sequence[float],
                          dt: Optional[float] = None, workers: int = 1, init: str = "columns",
                          points_per_period: int = DEFAULT_POINTS_PER_PERIOD) -> SweepResult:
    """Run one Bogoliubov matrix per drive frequency and record N at the end of the drive"""
    grid = np.sort(np.asarray(omega_grid, dtype=float))
    if grid.size == 0:
        raise ConfigurationError("sweep grid is empty")
    if np.any(np.diff(grid) == 0):
        raise ConfigurationError("sweep grid contains duplicate frequencies")
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")

    # Particle numbers freeze once the drive stops, so the free tail is skipped.
    base = replace(params, t_max=params.t_final)
    logger.info(f"Sweeping {grid.size} drive frequencies on {workers} worker(s); memory {memory_usage_mb():.1f} MB")

    if workers == 1:
        outcomes = [_sweep_point(base, spectrum, float(w), dt, init, points_per_period) for w in grid]
    else:
        with futures.ProcessPoolExecutor(max_workers=workers) as executor:
            wait_for = [executor.submit(_sweep_point, base, spectrum, float(w), dt, init, points_per_period)
                        for w in grid]
            outcomes = [f.result() for f in wait_for]

    per_mode = np.full((grid.size, spectrum.n_modes), np.nan)
    failures = {}
    for i, (omega, numbers, error) in enumerate(outcomes):
        if error is not None:
            logger.warning(f"Sweep point omega={omega:.6f} failed: {error}")
            failures[omega] = error
            continue
        per_mode[i] = numbers
    result = SweepResult(omegas=grid, totals=per_mode.sum(axis=1), per_mode=per_mode, failures=failures)
    logger.info(f"Sweep finished: {len(failures)} failures, peaks at {[round(p, 4) for p in result.peaks]}; "
                f"memory {memory_usage_mb():.1f} MB")
    return result


# Comparisons

NO_ORACLE = "no analytic oracle"
ORACLE_REGIMES = (SINGLE_MODE, FINITE_PAIR, EQUIDISTANT_WEAK)


@dataclass
class ComparisonRow:
    quantity: str
    numerical: float
    analytical: float

    @property
    def relative_deviation(self) -> float:
        if not np.isfinite(self.numerical) or not np.isfinite(self.analytical) or self.analytical == 0:
            return float("nan")
        return abs(self.numerical - self.analytical) / abs(self.analytical)


@dataclass
class ComparisonReport:
    prediction: MsaPrediction
    rows: List[ComparisonRow]
    fits: List[GrowthFit]

    @property
    def has_oracle(self) -> bool:
        return self.prediction.regime in ORACLE_REGIMES

    def max_deviation(self) -> float:
        deviations = [r.relative_deviation for r in self.rows if np.isfinite(r.relative_deviation)]
        return max(deviations) if deviations else float("nan")

    def table_lines(self) -> List[str]:
        lines = [f"{'quantity':<40}{'numerical':>14}{'analytical':>14}{'deviation':>12}"]
        for r in self.rows:
            lines.append(f"{r.quantity:<40}{r.numerical:>14.6g}{r.analytical:>14.6g}{r.relative_deviation:>12.3%}")
        return lines


def _power_law_rows(params: CavityParams, spectrum: Spectrum, times: np.ndarray, numbers: np.ndarray,
                    windows: List[Tuple[float, float]], match_tol: float) -> Tuple[List[ComparisonRow], List[GrowthFit]]:
    """Power-law exponents of the self-resonant modes against the same fits of the slow-flow curves"""
    modes = sorted({e.n for e in resonant_set(spectrum, params.omega_drive, match_tol) if e.kind == "self"}) or [1]
    n_points = max(201, int(params.t_final / SLOW_FLOW_SPACING) + 1)
    flow_times, flow_numbers = slow_flow_particle_numbers(spectrum, params.alpha, params.omega_drive, match_tol,
                                                          t_max=params.t_final, n_points=n_points)
    rows, fits = [], []
    for n in modes:
        for window in windows:
            fit = fit_power_law(times, numbers[:, n - 1], window, mode=n)
            oracle = fit_power_law(flow_times, flow_numbers[:, n - 1], window, mode=n)
            fits.append(fit)
            rows.append(ComparisonRow(f"power-law exponent mode {n} [{window[0]:g}, {window[1]:g}]",
                                      fit.slope, oracle.slope))
    return rows, fits


def compare_with_msa(params: CavityParams, spectrum: Spectrum, dt: Optional[float] = None,
                     init: str = "columns", points_per_period: int = DEFAULT_POINTS_PER_PERIOD,
                     window: Optional[Tuple[float, float]] = None,
                     match_tol: float = DEFAULT_MATCH_TOL,
                     strong_threshold: float = DEFAULT_STRONG_THRESHOLD,
                     equidistant_tol: float = DEFAULT_EQUIDISTANT_TOL,
                     sample_stride: Optional[int] = None,
                     late_window: Optional[Tuple[float, float]] = None) -> ComparisonReport:
    """Fit the simulated growth and set it against the slow-flow rates (or slow-flow curves, equidistant-weak)"""
    prediction = predict(spectrum, params.omega_drive, params.alpha, match_tol,
                         params.perturbation_amplitude, strong_threshold, equidistant_tol)
    if prediction.regime not in ORACLE_REGIMES:
        logger.warning(f"Regime {prediction.regime} has no closed-form rate to compare against")
        return ComparisonReport(prediction, [ComparisonRow(NO_ORACLE, float("nan"), float("nan"))], [])

    trajectory = evolve(initial_state(spectrum, init), params, spectrum, dt=dt,
                        sample_stride=sample_stride, points_per_period=points_per_period)
    times, numbers = particle_number_series(trajectory, spectrum)
    window = window or default_window(params.t_final)

    rows, fits = [], []
    if prediction.regime == EQUIDISTANT_WEAK:
        windows = [window] if late_window is None else [window, late_window]
        rows, fits = _power_law_rows(params, spectrum, times, numbers, windows, match_tol)

    for n, analytic in sorted(prediction.predicted_slopes.items()):
        fit = fit_exponential(times, numbers[:, n - 1], window, mode=n)
        fits.append(fit)
        rows.append(ComparisonRow(f"log N slope mode {n}", fit.slope, analytic))

    if prediction.regime == FINITE_PAIR and len(fits) >= 2:
        rows.append(ComparisonRow("slope ratio mode %d/%d" % (fits[1].mode, fits[0].mode),
                                  fits[1].slope / fits[0].slope, 1.0))
        if prediction.oscillation_frequency > 0:
            # |beta|^2 beats at twice the amplitude oscillation frequency
            mask = (times >= window[0]) & (times <= window[1])
            fit = fits[-1]
            detrended = np.log(numbers[mask, fit.mode - 1]) - (fit.slope * times[mask] + fit.intercept)
            measured = 0.5 * dominant_frequency(times[mask], detrended)
            rows.append(ComparisonRow("oscillation frequency", measured, prediction.oscillation_frequency))

    if params.t_max > params.t_final and (params.t_max - params.t_final) * spectrum.k[0] >= 4.0 * np.pi:
        windowed = project_windowed(trajectory, spectrum).particle_numbers()
        final = np.abs(project_instantaneous(trajectory.final_state, spectrum).beta) ** 2
        final = final.sum(axis=0) if final.ndim == 2 else final
        for n in sorted({fit.mode for fit in fits}):
            rows.append(ComparisonRow(f"windowed N mode {n}", float(windowed[n - 1]), float(final[n - 1])))

    report = ComparisonReport(prediction, rows, fits)
    logger.info(f"Comparison finished for regime {prediction.regime}: max deviation {report.max_deviation():.3%}")
    return report
