"""
Bogoliubov coefficients and particle numbers from evolved mode trajectories.

Convention: after the drive, q_n(t) = alpha_n e^{-ik_n t}/sqrt(2k_n) + beta_n e^{+ik_n t}/sqrt(2k_n),
so an undisturbed in-mode has alpha = 1, beta = 0 and N_n = |beta_n|^2.  The windowed
estimator returns the pair (A_n, B_n) multiplying e^{+ikt} and e^{-ikt}
respectively, i.e. A ~ beta and B ~ alpha.
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, List

import numpy as np

from cavity_params import CavityParams
from cavity_spectrum import Spectrum
from mode_dynamics import (
    SystemState, Trajectory, column_states, vacuum_superposition_state, propagate,
    DEFAULT_POINTS_PER_PERIOD,
)
from simulation_errors import ConfigurationError

logger = logging.getLogger(__name__)

INIT_MODES = ("columns", "superposition")


@dataclass
class ProjectionSample:
    """alpha_n, beta_n of one state at time t"""
    t: float
    alpha: np.ndarray
    beta: np.ndarray


@dataclass
class ProjectionResult:
    """alpha_n(t), beta_n(t) series over a trajectory's sample times"""
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def particle_numbers(self) -> np.ndarray:
        """N_n(t), summed over solution columns when present"""
        n = np.abs(self.beta) ** 2
        return n.sum(axis=1) if n.ndim == 3 else n


def _project(t, q, u, k):
    # t broadcasts against the leading axes of q
    phase = np.exp(1j * k * t)
    alpha = np.sqrt(k / 2.0) * phase * (q + 1j * u / k)
    beta = np.sqrt(k / 2.0) * np.conj(phase) * (q - 1j * u / k)
    return alpha, beta


def project_instantaneous(state: SystemState, spectrum: Spectrum) -> ProjectionSample:
    """Exact split of a state into e^{-ikt} and e^{+ikt} parts at its own time"""
    alpha, beta = _project(state.t, state.q, state.u, spectrum.k)
    return ProjectionSample(state.t, alpha, beta)


def project_trajectory(trajectory: Trajectory, spectrum: Spectrum) -> ProjectionResult:
    t = trajectory.times.reshape((-1,) + (1,) * (trajectory.q.ndim - 1))
    alpha, beta = _project(t, trajectory.q, trajectory.u, spectrum.k)
    return ProjectionResult(trajectory.times.copy(), alpha, beta)


@dataclass
class WindowedCoefficients:
    """Window-averaged slow amplitudes: A multiplies e^{+ikt}, B multiplies e^{-ikt}"""
    A: np.ndarray
    B: np.ndarray
    window: Tuple[float, float]

    def particle_numbers(self) -> np.ndarray:
        n = np.abs(self.A) ** 2
        return n.sum(axis=0) if n.ndim == 2 else n


def project_windowed(trajectory: Trajectory, spectrum: Spectrum,
                     window: Optional[Tuple[float, float]] = None) -> WindowedCoefficients:
    """Multiply q_n(t) by e^{+/-ik_n t} and average over the free window"""
    t_lo, t_hi = window if window is not None else (trajectory.t_final, float(trajectory.times[-1]))
    if (t_hi - t_lo) * spectrum.k[0] < 4.0 * math.pi:
        raise ConfigurationError(
            f"projection window [{t_lo:g}, {t_hi:g}] spans fewer than two periods of the slowest mode"
        )
    mask = trajectory.window_mask(t_lo, t_hi)
    if np.count_nonzero(mask) < 2:
        raise ConfigurationError("projection window contains fewer than two samples")

    times = trajectory.times[mask]
    q = trajectory.q[mask]
    k = spectrum.k
    t = times.reshape((-1,) + (1,) * (q.ndim - 1))
    scale = np.sqrt(2.0 * k)
    B = scale * np.mean(q * np.exp(1j * k * t), axis=0)
    A = scale * np.mean(q * np.exp(-1j * k * t), axis=0)
    return WindowedCoefficients(A=A, B=B, window=(t_lo, t_hi))


@dataclass
class BogoliubovMatrix:
    """alpha[j, n], beta[j, n] for in-mode column j; one row when all in-modes ran together"""
    alpha: np.ndarray
    beta: np.ndarray
    init: str = "columns"

    @property
    def particle_numbers(self) -> np.ndarray:
        return np.sum(np.abs(self.beta) ** 2, axis=0)

    @property
    def total_particles(self) -> float:
        return float(np.sum(self.particle_numbers))

    @property
    def expected_norm(self) -> np.ndarray:
        """1 per in-mode column; the superposition row carries every in-mode"""
        if self.init == "superposition":
            return np.array([float(self.alpha.shape[1])])
        return np.ones(self.alpha.shape[0])

    def normalization(self) -> np.ndarray:
        return np.sum(np.abs(self.alpha) ** 2 - np.abs(self.beta) ** 2, axis=1)

    def norm_defect(self) -> float:
        """Largest |sum(|alpha|^2 - |beta|^2) - expected| over rows"""
        return float(np.max(np.abs(self.normalization() - self.expected_norm)))

    def relative_norm_defect(self) -> float:
        """Row defect relative to sum(|alpha|^2 + |beta|^2), the scale round-off works at"""
        weight = np.sum(np.abs(self.alpha) ** 2 + np.abs(self.beta) ** 2, axis=1)
        return float(np.max(np.abs(self.normalization() - self.expected_norm) / weight))

    def satisfies_normalization(self, tol: float = 1e-4) -> bool:
        return self.relative_norm_defect() < tol

    def diagonal_rows(self) -> List[Tuple[int, float, float, float]]:
        """(n, N_n, Re beta_nn, Im beta_nn); the superposition run reports beta_n"""
        rows = []
        numbers = self.particle_numbers
        for n in range(self.alpha.shape[1]):
            b = self.beta[0, n] if self.init == "superposition" else self.beta[n, n]
            rows.append((n + 1, float(numbers[n]), float(b.real), float(b.imag)))
        return rows

    def matrix_rows(self) -> List[Tuple[int, int, float, float, float, float]]:
        rows = []
        for j in range(self.alpha.shape[0]):
            for n in range(self.alpha.shape[1]):
                a, b = self.alpha[j, n], self.beta[j, n]
                rows.append((j + 1, n + 1, float(a.real), float(a.imag), float(b.real), float(b.imag)))
        return rows


def initial_state(spectrum: Spectrum, init: str = "columns") -> SystemState:
    if init == "columns":
        return column_states(spectrum)
    if init == "superposition":
        return vacuum_superposition_state(spectrum)
    raise ConfigurationError(f"init must be one of {INIT_MODES}, got {init!r}")


def bogoliubov_matrix(params: CavityParams, spectrum: Spectrum, dt: Optional[float] = None,
                      init: str = "columns",
                      points_per_period: int = DEFAULT_POINTS_PER_PERIOD) -> BogoliubovMatrix:
    """Evolve the in-modes to t_max and project; integration errors name the failing column"""
    state0 = initial_state(spectrum, init)
    final = propagate(state0, params, spectrum, dt=dt, points_per_period=points_per_period)
    sample = project_instantaneous(final, spectrum)
    alpha = np.atleast_2d(sample.alpha)
    beta = np.atleast_2d(sample.beta)
    matrix = BogoliubovMatrix(alpha=alpha, beta=beta, init=init)
    logger.info(
        f"Bogoliubov matrix at omega={params.omega_drive:.6f}: N_total={matrix.total_particles:.6g}, "
        f"norm defect={matrix.relative_norm_defect():.2e}"
    )
    return matrix


def particle_number_series(trajectory: Trajectory, spectrum: Spectrum) -> Tuple[np.ndarray, np.ndarray]:
    """(times, N[t, n]) by instantaneous projection, summed over columns"""
    projection = project_trajectory(trajectory, spectrum)
    return projection.times, projection.particle_numbers()
