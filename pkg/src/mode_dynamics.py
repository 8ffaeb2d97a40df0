"""
Parametrically driven cavity modes.

Each mode amplitude obeys  q_n'' + omega_n(t)^2 q_n = sum_{m != n} S_nm(t) q_m  with the
drive switched on only inside [0, t_final].  The system is written as
q' = u, u' = -K(t) q with the symmetric stiffness K = diag(omega^2) - S and stepped
with classical fourth-order Runge-Kutta on complex arrays.  States may carry a
leading "column" axis so that several independent solutions share one pass.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, List

import numpy as np

from cavity_params import CavityParams
from cavity_spectrum import Spectrum
from simulation_errors import ConfigurationError, IntegrationError

logger = logging.getLogger(__name__)

MIN_POINTS_PER_PERIOD = 40
# RK4 loses |R|^2 ~ (2pi/ppp)^6/72 per step; at 200 the norm defect stays near 1e-5 over ~1000 periods
DEFAULT_POINTS_PER_PERIOD = 200
FINITE_CHECK_INTERVAL = 1000


@dataclass
class SystemState:
    """Mode amplitudes q and velocities u at time t; shape (n,) or (columns, n)"""
    t: float
    q: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=complex)
        self.u = np.asarray(self.u, dtype=complex)
        if self.q.shape != self.u.shape:
            raise ConfigurationError(f"q and u shapes differ: {self.q.shape} vs {self.u.shape}")
        if self.q.ndim not in (1, 2):
            raise ConfigurationError(f"state arrays must be 1-D or 2-D, got {self.q.ndim}-D")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.u))):
            raise IntegrationError("non-finite mode amplitudes in state", time=self.t)

    @property
    def n_modes(self) -> int:
        return self.q.shape[-1]

    @property
    def n_columns(self) -> int:
        return 1 if self.q.ndim == 1 else self.q.shape[0]

    def column(self, j: int) -> "SystemState":
        """0-based column of a multi-column state"""
        if self.q.ndim == 1:
            return self
        return SystemState(self.t, self.q[j], self.u[j])

    def __add__(self, other: "SystemState") -> "SystemState":
        return SystemState(self.t, self.q + other.q, self.u + other.u)

    def scaled(self, factor: complex) -> "SystemState":
        return SystemState(self.t, factor * self.q, factor * self.u)


@dataclass
class Trajectory:
    """Sampled solution: arrays of shape (samples, n) or (samples, columns, n)"""
    times: np.ndarray
    q: np.ndarray
    u: np.ndarray
    t_final: float
    end: Optional[SystemState] = None

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def state(self, i: int) -> SystemState:
        return SystemState(float(self.times[i]), self.q[i], self.u[i])

    @property
    def final_state(self) -> SystemState:
        """State at t_max; kept apart from the samples when t_max is off the stride"""
        return self.end if self.end is not None else self.state(-1)

    def window_mask(self, t_lo: float, t_hi: float) -> np.ndarray:
        return (self.times >= t_lo) & (self.times <= t_hi)


@dataclass
class DriveCoefficients:
    """Instantaneous frequencies omega_n(t) and symmetric couplings S_nm(t)"""
    omega: np.ndarray
    coupling: np.ndarray

    @property
    def stiffness(self) -> np.ndarray:
        return np.diag(self.omega ** 2) - self.coupling


class ModeCoupling:
    """Precomputed drive profile of one (params, spectrum) pair"""

    def __init__(self, params: CavityParams, spectrum: Spectrum):
        if spectrum.n_modes != params.n_modes:
            raise ConfigurationError(
                f"spectrum has {spectrum.n_modes} modes but params ask for {params.n_modes}"
            )
        k = spectrum.k
        k1 = k[0]
        c = spectrum.cosines
        self.k = k
        self.alpha = params.alpha
        self.omega_drive = params.omega_drive
        self.t_final = params.t_final
        self.modulation = params.alpha * (k1 ** 2 / k ** 2) * c ** 2 / spectrum.masses
        root_mass = np.sqrt(spectrum.masses)
        base = params.alpha * k1 ** 2 * np.outer(c / root_mass, c / root_mass)
        np.fill_diagonal(base, 0.0)
        self.coupling_base = base
        self.static_stiffness = np.diag(k ** 2)

    def is_driven(self, t: float) -> bool:
        return 0.0 <= t <= self.t_final and self.alpha != 0.0

    def _driven_coefficients(self, t: float) -> DriveCoefficients:
        s = math.sin(self.omega_drive * t)
        return DriveCoefficients(self.k * (1.0 - self.modulation * s), self.coupling_base * s)

    def coefficients(self, t: float) -> DriveCoefficients:
        if not self.is_driven(t):
            return DriveCoefficients(self.k.copy(), np.zeros_like(self.coupling_base))
        return self._driven_coefficients(t)

    def driven_stiffness(self, t: float) -> np.ndarray:
        """K(t) = diag(omega(t)^2) - S(t), evaluated without the window test"""
        return self._driven_coefficients(t).stiffness


def drive_at(params: CavityParams, spectrum: Spectrum, t: float) -> DriveCoefficients:
    """omega_n(t) and S_nm(t); the static values k_n and 0 outside the drive window"""
    return ModeCoupling(params, spectrum).coefficients(t)


def in_mode_state(j: int, spectrum: Spectrum) -> SystemState:
    """Positive-frequency in-mode j (1-based): q_j = 1/sqrt(2k_j), u_j = -i sqrt(k_j/2)"""
    if not 1 <= j <= spectrum.n_modes:
        raise ConfigurationError(f"in-mode index {j} out of range 1..{spectrum.n_modes}")
    q = np.zeros(spectrum.n_modes, dtype=complex)
    u = np.zeros(spectrum.n_modes, dtype=complex)
    kj = spectrum.k[j - 1]
    q[j - 1] = 1.0 / math.sqrt(2.0 * kj)
    u[j - 1] = -1j * math.sqrt(kj / 2.0)
    return SystemState(0.0, q, u)


def vacuum_superposition_state(spectrum: Spectrum) -> SystemState:
    """All in-modes excited at once, for single-run figure reproduction"""
    k = spectrum.k
    return SystemState(0.0, 1.0 / np.sqrt(2.0 * k) + 0j, -1j * np.sqrt(k / 2.0))


def column_states(spectrum: Spectrum) -> SystemState:
    """Every in-mode as its own column; row j of the arrays is in-mode j+1"""
    k = spectrum.k
    return SystemState(0.0, np.diag(1.0 / np.sqrt(2.0 * k)).astype(complex), np.diag(-1j * np.sqrt(k / 2.0)))


def total_quadratic_energy(state: SystemState, spectrum: Spectrum) -> float:
    """1/2 sum(|u|^2 + k^2 |q|^2) with static frequencies, summed over columns"""
    return 0.5 * float(np.sum(np.abs(state.u) ** 2 + spectrum.k ** 2 * np.abs(state.q) ** 2))


def wronskian(a: SystemState, b: SystemState) -> complex:
    """W(a, b) = sum_n (q^a u^b - u^a q^b); constant for any two solutions"""
    return complex(np.sum(a.q * b.u - a.u * b.q))


def rk4_step(q: np.ndarray, u: np.ndarray, t: float, dt: float,
             stiffness_at: Callable[[float], np.ndarray],
             k_start: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Advance q' = u, u' = -K(t) q by one classical Runge-Kutta step.

    Parameters
    ----------
    q, u : np.ndarray
        complex amplitudes and velocities, mode index last
    t : float
        time at the start of the step
    dt : float
        step size
    stiffness_at : function
        returns the symmetric stiffness matrix K at a given time
    k_start : np.ndarray, optional
        K(t) if the caller already has it

    Returns
    -------
    (q, u, K(t + dt)), the last so the next step can reuse it
    """
    k1_mat = stiffness_at(t) if k_start is None else k_start
    k2_mat = stiffness_at(t + 0.5 * dt)
    k4_mat = stiffness_at(t + dt)

    # K is symmetric, so q @ K applies it along the mode axis for any leading shape
    dq1, du1 = u, -(q @ k1_mat)
    q2, u2 = q + 0.5 * dt * dq1, u + 0.5 * dt * du1
    dq2, du2 = u2, -(q2 @ k2_mat)
    q3, u3 = q + 0.5 * dt * dq2, u + 0.5 * dt * du2
    dq3, du3 = u3, -(q3 @ k2_mat)
    q4, u4 = q + dt * dq3, u + dt * du3
    dq4, du4 = u4, -(q4 @ k4_mat)

    q_next = q + dt / 6.0 * (dq1 + 2.0 * dq2 + 2.0 * dq3 + dq4)
    u_next = u + dt / 6.0 * (du1 + 2.0 * du2 + 2.0 * du3 + du4)
    return q_next, u_next, k4_mat


def max_stable_step(params: CavityParams, spectrum: Spectrum, points_per_period: int = MIN_POINTS_PER_PERIOD) -> float:
    """Largest step resolving both the fastest mode and the drive with the given points per period"""
    fastest = spectrum.k_max
    if params.alpha != 0.0:
        fastest = max(fastest, params.omega_drive)
    return 2.0 * math.pi / fastest / points_per_period


def _segment_steps(length: float, dt: float) -> Tuple[int, float]:
    if length <= 0:
        return 0, 0.0
    n = max(1, math.ceil(length / dt - 1e-9))
    return n, length / n


def _check_finite(q: np.ndarray, u: np.ndarray, t: float):
    if np.all(np.isfinite(q)) and np.all(np.isfinite(u)):
        return
    column = None
    if q.ndim == 2:
        bad = ~(np.all(np.isfinite(q), axis=1) & np.all(np.isfinite(u), axis=1))
        column = int(np.argmax(bad)) + 1
    raise IntegrationError("mode amplitudes became non-finite", time=t, column=column)


def evolve(state0: SystemState, params: CavityParams, spectrum: Spectrum,
           dt: Optional[float] = None, sample_stride: Optional[int] = None,
           points_per_period: int = DEFAULT_POINTS_PER_PERIOD) -> Trajectory:
    """
    Integrate from t=0 to t_max, driving only inside [0, t_final].

    The drive window and the free window are separate segments whose step sizes
    divide their lengths exactly, so the drive switches off on a step boundary.
    Samples are kept every `sample_stride` steps only, so they stay evenly spaced;
    the state at t_max is always available as `final_state`.
    """
    if state0.n_modes != spectrum.n_modes:
        raise ConfigurationError(f"state has {state0.n_modes} modes, spectrum has {spectrum.n_modes}")
    if state0.t != 0.0:
        raise ConfigurationError("evolution starts from a state at t=0")
    if points_per_period < MIN_POINTS_PER_PERIOD:
        raise ConfigurationError(f"points_per_period must be >= {MIN_POINTS_PER_PERIOD}, got {points_per_period}")

    dt_limit = max_stable_step(params, spectrum, MIN_POINTS_PER_PERIOD)
    if dt is None:
        dt = max_stable_step(params, spectrum, points_per_period)
    elif dt <= 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    elif dt > dt_limit * (1.0 + 1e-12):
        raise ConfigurationError(
            f"dt={dt:g} does not resolve the fastest oscillation; need dt <= {dt_limit:.6g}"
        )
    if sample_stride is None:
        sample_stride = max(1, points_per_period // 8)
    if sample_stride < 1:
        raise ConfigurationError(f"sample_stride must be >= 1, got {sample_stride}")

    coupling = ModeCoupling(params, spectrum)
    driven_steps, driven_dt = _segment_steps(params.t_final, dt)
    free_steps, free_dt = _segment_steps(params.t_max - params.t_final, dt)
    total_steps = driven_steps + free_steps
    logger.info(
        f"Integrating {state0.n_columns} solution(s) of {spectrum.n_modes} modes: "
        f"{driven_steps} driven + {free_steps} free steps, dt~{dt:.4g}"
    )

    times: List[float] = [0.0]
    q_samples: List[np.ndarray] = [state0.q.copy()]
    u_samples: List[np.ndarray] = [state0.u.copy()]
    q, u = state0.q.copy(), state0.u.copy()

    def static_stiffness(t: float) -> np.ndarray:
        return coupling.static_stiffness

    driven_stiffness = coupling.driven_stiffness if coupling.alpha != 0.0 else static_stiffness

    step = 0
    segments = ((0.0, driven_steps, driven_dt, driven_stiffness),
                (params.t_final, free_steps, free_dt, static_stiffness))
    for t_start, n_steps, h, stiffness_at in segments:
        k_cached = None
        for i in range(n_steps):
            t = t_start + i * h
            q, u, k_cached = rk4_step(q, u, t, h, stiffness_at, k_cached)
            step += 1
            t_now = t_start + (i + 1) * h
            if step % FINITE_CHECK_INTERVAL == 0:
                _check_finite(q, u, t_now)
            if step % sample_stride == 0:
                _check_finite(q, u, t_now)
                times.append(t_now)
                q_samples.append(q.copy())
                u_samples.append(u.copy())

    end = None
    if total_steps > 0:
        _check_finite(q, u, params.t_max)
        if total_steps % sample_stride == 0:
            # assembled from segment arithmetic; pin it exactly
            times[-1] = params.t_max
        else:
            end = SystemState(params.t_max, q.copy(), u.copy())
    logger.debug(f"Integration finished with {len(times)} samples")
    return Trajectory(np.array(times), np.array(q_samples), np.array(u_samples), params.t_final, end)


def propagate(state0: SystemState, params: CavityParams, spectrum: Spectrum,
              dt: Optional[float] = None, points_per_period: int = DEFAULT_POINTS_PER_PERIOD) -> SystemState:
    """State at t_max only, without keeping intermediate samples"""
    trajectory = evolve(state0, params, spectrum, dt=dt, sample_stride=10 ** 12,
                        points_per_period=points_per_period)
    return trajectory.final_state
