"""
Multiple-scale predictions for the driven cavity.

Slow amplitudes A_n (multiplying e^{+ik_n t}) and B_n (multiplying e^{-ik_n t}) evolve
on the slow time tau = alpha*t through a linear system whose resonance conditions
are realised as indicator functions of width match_tol.  A matched resonance need
not be exact: its residual detuning is kept by working in a rotating frame.  The
single-mode and two-mode closed forms below are the exact-resonance special cases
of that system; the general prediction comes from its eigenvalues.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Any

import numpy as np
from scipy.linalg import expm
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from cavity_spectrum import Spectrum, resonant_set, DEFAULT_MATCH_TOL
from simulation_errors import ConfigurationError

logger = logging.getLogger(__name__)

SINGLE_MODE = "single-mode"
FINITE_PAIR = "finite-pair"
EQUIDISTANT_WEAK = "equidistant-weak"
EQUIDISTANT_STRONG = "equidistant-strong"
OFF_RESONANT = "off-resonant"

GROWTH_LAWS = {
    SINGLE_MODE: "exponential",
    FINITE_PAIR: "exponential-with-oscillation",
    EQUIDISTANT_WEAK: "quadratic-then-linear",
    EQUIDISTANT_STRONG: "exponential-despite-equidistance",
    OFF_RESONANT: "bounded",
}

DEFAULT_STRONG_THRESHOLD = 0.5
DEFAULT_EQUIDISTANT_TOL = 0.05
EQUIDISTANT_GAPS = 4
MIN_EQUIDISTANT_GAPS = 3
# a second exponent must reach this share of the leading growth to count as a beat
BEAT_FRACTION = 0.5


def _check_mode(n: int, spectrum: Spectrum):
    if not 1 <= n <= spectrum.n_modes:
        raise ConfigurationError(f"mode {n} out of range 1..{spectrum.n_modes}")


def self_coupling(n: int, spectrum: Spectrum) -> float:
    """Gamma_n = (k1^2/k_n) cos^2(k_n) / (2 M_n)"""
    _check_mode(n, spectrum)
    k, c, m = spectrum.k, spectrum.cosines, spectrum.masses
    return float(k[0] ** 2 / k[n - 1] * c[n - 1] ** 2 / (2.0 * m[n - 1]))


def pair_coupling(n: int, l: int, spectrum: Spectrum) -> float:
    """Gamma_nl = k1^2 cos(k_n) cos(k_l) / (4 sqrt(k_n k_l M_n M_l))"""
    _check_mode(n, spectrum)
    _check_mode(l, spectrum)
    k, c, m = spectrum.k, spectrum.cosines, spectrum.masses
    i, j = n - 1, l - 1
    return float(k[0] ** 2 * c[i] * c[j] / (4.0 * math.sqrt(k[i] * k[j] * m[i] * m[j])))


def single_mode_rate(n: int, spectrum: Spectrum, alpha: float) -> float:
    """lambda_n = alpha*(k1^2/k_n)*cos^2(k_n)/(2 M_n) for a drive at 2k_n.

    This is the growth rate of the slow amplitudes; |beta_n|^2 and N_n therefore
    grow as exp(2*lambda_n*t).
    """
    return alpha * self_coupling(n, spectrum)


@dataclass
class PairRates:
    """Two-mode resonance j, l with the drive at 2k_j and k_l - k_j"""
    j: int
    l: int
    gamma_j: float
    gamma_jl: float
    roots: np.ndarray
    alpha: float

    @property
    def max_real(self) -> float:
        return float(np.max(self.roots.real))

    @property
    def slope(self) -> float:
        """Predicted log N slope shared by both modes"""
        return 2.0 * self.alpha * self.max_real

    @property
    def oscillation_frequency(self) -> float:
        return self.alpha * float(np.max(np.abs(self.roots.imag)))


def coupled_pair_rates(j: int, l: int, spectrum: Spectrum, alpha: float) -> PairRates:
    """Roots Gamma = (+/-Gamma_j +/- sqrt(Gamma_j^2 - 4 Gamma_jl^2))/2"""
    gamma_j = self_coupling(j, spectrum)
    gamma_jl = pair_coupling(j, l, spectrum)
    root = np.sqrt(complex(gamma_j ** 2 - 4.0 * gamma_jl ** 2))
    roots = np.array([0.5 * (s1 * gamma_j + s2 * root) for s1 in (1, -1) for s2 in (1, -1)])
    return PairRates(j=j, l=l, gamma_j=gamma_j, gamma_jl=gamma_jl, roots=roots, alpha=alpha)


def slow_flow_matrix(spectrum: Spectrum, omega_drive: float, match_tol: float = DEFAULT_MATCH_TOL) -> np.ndarray:
    """Generator M of d/dtau [A; B] = M [A; B] (tau = alpha*t), indicator-function resonances"""
    if match_tol <= 0:
        raise ConfigurationError(f"match_tol must be > 0, got {match_tol}")
    n_modes = spectrum.n_modes
    k = spectrum.k

    def hit(x: float) -> float:
        return 1.0 if abs(x) < match_tol else 0.0

    M = np.zeros((2 * n_modes, 2 * n_modes))
    a, b = 0, n_modes
    for n in range(n_modes):
        gamma_n = self_coupling(n + 1, spectrum)
        self_hit = hit(omega_drive - 2.0 * k[n])
        M[a + n, b + n] -= gamma_n * self_hit
        M[b + n, a + n] -= gamma_n * self_hit
        for m in range(n_modes):
            if m == n:
                continue
            g = pair_coupling(n + 1, m + 1, spectrum)
            difference = k[n] - k[m]
            total = k[n] + k[m]
            M[a + n, a + m] += g * (hit(difference + omega_drive) - hit(difference - omega_drive))
            M[a + n, b + m] -= g * hit(total - omega_drive)
            M[b + n, a + m] -= g * hit(total - omega_drive)
            M[b + n, b + m] += g * (hit(-difference - omega_drive) - hit(difference - omega_drive))
    return M


def _mismatch(target: float, source: float, omega_drive: float) -> float:
    # source carrier shifted by +/- omega_drive, whichever lands closer to the target carrier
    up = source + omega_drive - target
    down = source - omega_drive - target
    return up if abs(up) <= abs(down) else down


def frame_phases(spectrum: Spectrum, omega_drive: float, M: np.ndarray) -> np.ndarray:
    """
    Rotating-frame frequencies phi (per unit t) of the slow variables.

    A_n carries e^{+ik_n t} and B_n carries e^{-ik_n t}.  Along every coupling the
    drive leaves a mismatch delta between carriers; choosing phi_X - phi_Y = delta
    over a spanning tree of the coupling graph removes it.  Each connected block
    is rooted at phi = 0.
    """
    k = spectrum.k
    carriers = np.concatenate([k, -k])
    linked = (M != 0) | (M.T != 0)
    size = len(carriers)
    phases = np.zeros(size)
    seen = np.zeros(size, dtype=bool)
    graph = csr_matrix(linked.astype(float))
    for root in range(size):
        if seen[root]:
            continue
        order, predecessors = breadth_first_order(graph, root, directed=False, return_predecessors=True)
        seen[order] = True
        for node in order[1:]:
            parent = predecessors[node]
            phases[node] = phases[parent] + _mismatch(carriers[node], carriers[parent], omega_drive)

    rows, cols = np.nonzero(linked)
    residual = [abs(phases[x] - phases[y] - _mismatch(carriers[x], carriers[y], omega_drive))
                for x, y in zip(rows, cols)]
    if residual and max(residual) > 1e-9:
        logger.debug(f"Coupling loops leave a frame mismatch of {max(residual):.3g}; it is dropped")
    return phases


def slow_flow_generator(spectrum: Spectrum, omega_drive: float, alpha: float,
                        match_tol: float = DEFAULT_MATCH_TOL) -> np.ndarray:
    """M in the rotating frame: the detuning of every matched resonance enters as -i*phi/alpha"""
    M = slow_flow_matrix(spectrum, omega_drive, match_tol)
    if alpha == 0.0:
        return M.astype(complex)
    phases = frame_phases(spectrum, omega_drive, M)
    return M - 1j * np.diag(phases) / alpha


def slow_flow_exponents(spectrum: Spectrum, omega_drive: float, match_tol: float = DEFAULT_MATCH_TOL,
                        alpha: Optional[float] = None) -> np.ndarray:
    """Eigenvalues of the slow-flow generator, largest real part first.

    Without alpha the resonances are taken as exact; with it the detuned generator is used.
    """
    if alpha is None:
        generator = slow_flow_matrix(spectrum, omega_drive, match_tol)
    else:
        generator = slow_flow_generator(spectrum, omega_drive, alpha, match_tol)
    eigenvalues = np.linalg.eigvals(generator)
    return eigenvalues[np.argsort(-eigenvalues.real, kind="stable")]


def beat_frequency(exponents: np.ndarray, alpha: float) -> float:
    """Amplitude oscillation frequency from the two leading exponents; 0 when one growth dominates"""
    if len(exponents) < 2:
        return 0.0
    top, second = exponents[0], exponents[1]
    if second.real <= 0 or second.real < BEAT_FRACTION * top.real:
        return 0.0
    return 0.5 * abs(alpha) * abs(top.imag - second.imag)


@dataclass
class SlowFlowResult:
    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    alpha: float

    @property
    def tau(self) -> np.ndarray:
        return self.alpha * self.times

    def particle_numbers(self) -> np.ndarray:
        """|A_n|^2, the weight of the e^{+ikt} part"""
        return np.abs(self.A) ** 2


def _propagate(generator: np.ndarray, alpha: float, times: np.ndarray, state: np.ndarray) -> np.ndarray:
    step = expm(generator * alpha * (times[1] - times[0]))
    history = np.empty((len(times),) + state.shape, dtype=complex)
    history[0] = state
    for i in range(1, len(times)):
        state = step @ state
        history[i] = state
    if not np.all(np.isfinite(history)):
        raise ConfigurationError("slow flow overflowed; reduce alpha*t_max")
    return history


def slow_flow_evolve(spectrum: Spectrum, alpha: float, omega_drive: float,
                     match_tol: float = DEFAULT_MATCH_TOL, t_max: float = 1.0,
                     n_points: int = 201, initial_b: Optional[np.ndarray] = None) -> SlowFlowResult:
    """Propagate the slow flow from A = 0, B = initial_b (all ones by default) over [0, t_max]"""
    if n_points < 2:
        raise ConfigurationError(f"n_points must be >= 2, got {n_points}")
    n_modes = spectrum.n_modes
    generator = slow_flow_generator(spectrum, omega_drive, alpha, match_tol)
    times = np.linspace(0.0, t_max, n_points)

    state = np.zeros(2 * n_modes, dtype=complex)
    state[n_modes:] = np.ones(n_modes) if initial_b is None else initial_b
    history = _propagate(generator, alpha, times, state)
    return SlowFlowResult(times=times, A=history[:, :n_modes], B=history[:, n_modes:], alpha=alpha)


def slow_flow_particle_numbers(spectrum: Spectrum, alpha: float, omega_drive: float,
                               match_tol: float = DEFAULT_MATCH_TOL, t_max: float = 1.0,
                               n_points: int = 201) -> Tuple[np.ndarray, np.ndarray]:
    """(times, N[t, n]) of the slow flow with every in-mode started alone, summed over in-modes"""
    if n_points < 2:
        raise ConfigurationError(f"n_points must be >= 2, got {n_points}")
    n_modes = spectrum.n_modes
    generator = slow_flow_generator(spectrum, omega_drive, alpha, match_tol)
    times = np.linspace(0.0, t_max, n_points)

    columns = np.zeros((2 * n_modes, n_modes), dtype=complex)
    columns[n_modes:] = np.eye(n_modes)
    history = _propagate(generator, alpha, times, columns)
    return times, np.sum(np.abs(history[:, :n_modes, :]) ** 2, axis=2)


def is_equidistant(spectrum: Spectrum, omega_drive: float, tol: float = DEFAULT_EQUIDISTANT_TOL) -> bool:
    """First few gaps (at least three) all within tol (relative) of the drive frequency"""
    if spectrum.n_modes - 1 < MIN_EQUIDISTANT_GAPS or omega_drive <= 0:
        return False
    gaps = spectrum.gaps[:min(EQUIDISTANT_GAPS, spectrum.n_modes - 1)]
    return bool(np.max(np.abs(gaps - omega_drive)) / omega_drive < tol)


def classify_regime(spectrum: Spectrum, omega_drive: float, alpha: float,
                    match_tol: float = DEFAULT_MATCH_TOL, amplitude: Optional[float] = None,
                    strong_threshold: float = DEFAULT_STRONG_THRESHOLD,
                    equidistant_tol: float = DEFAULT_EQUIDISTANT_TOL) -> str:
    """Expected regime; amplitude defaults to alpha when no b0*epsilon is known"""
    if is_equidistant(spectrum, omega_drive, equidistant_tol):
        level = alpha if amplitude is None else amplitude
        return EQUIDISTANT_STRONG if level >= strong_threshold else EQUIDISTANT_WEAK
    entries = resonant_set(spectrum, omega_drive, match_tol)
    if any(e.kind == "pair" for e in entries):
        return FINITE_PAIR
    if entries:
        return SINGLE_MODE
    return OFF_RESONANT


@dataclass
class MsaPrediction:
    """Regime, resonances and the growth rates the slow flow predicts"""
    regime: str
    growth_law: str
    resonances: List[str]
    alpha: float
    rates: Dict[int, float] = field(default_factory=dict)
    predicted_slopes: Dict[int, float] = field(default_factory=dict)
    gamma_values: List[complex] = field(default_factory=list)
    oscillation_frequency: float = 0.0
    perturbation_amplitude: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "regime": self.regime,
            "growth_law": self.growth_law,
            "resonances": self.resonances,
            "alpha": self.alpha,
            "rates": self.rates,
            "predicted_slopes": self.predicted_slopes,
            "gamma_values": [str(g) for g in self.gamma_values],
            "oscillation_frequency": self.oscillation_frequency,
            "perturbation_amplitude": self.perturbation_amplitude,
        }

    def report_lines(self) -> List[str]:
        lines = [
            f"regime: {self.regime} ({self.growth_law})",
            f"resonances: {', '.join(self.resonances) if self.resonances else 'none'}",
            f"alpha: {self.alpha:.6g}   perturbation amplitude: {self.perturbation_amplitude:.6g}",
        ]
        for n in sorted(self.predicted_slopes):
            lines.append(f"mode {n}: rate {self.rates.get(n, float('nan')):.6g}   log N slope {self.predicted_slopes[n]:.6g}")
        if self.gamma_values:
            lines.append("Gamma roots: " + ", ".join(f"{g.real:+.5f}{g.imag:+.5f}i" for g in self.gamma_values))
            lines.append(f"oscillation frequency: {self.oscillation_frequency:.6g}")
        return lines


def predict(spectrum: Spectrum, omega_drive: float, alpha: float,
            match_tol: float = DEFAULT_MATCH_TOL, amplitude: Optional[float] = None,
            strong_threshold: float = DEFAULT_STRONG_THRESHOLD,
            equidistant_tol: float = DEFAULT_EQUIDISTANT_TOL) -> MsaPrediction:
    regime = classify_regime(spectrum, omega_drive, alpha, match_tol, amplitude,
                             strong_threshold, equidistant_tol)
    entries = resonant_set(spectrum, omega_drive, match_tol)
    prediction = MsaPrediction(
        regime=regime,
        growth_law=GROWTH_LAWS[regime],
        resonances=[e.label for e in entries],
        alpha=alpha,
        perturbation_amplitude=alpha if amplitude is None else amplitude,
    )

    if regime == SINGLE_MODE:
        n = entries[0].n
        prediction.rates[n] = single_mode_rate(n, spectrum, alpha)
        prediction.predicted_slopes[n] = 2.0 * prediction.rates[n]
    elif regime == FINITE_PAIR:
        exponents = slow_flow_exponents(spectrum, omega_drive, match_tol, alpha=alpha)
        slope = 2.0 * alpha * float(exponents[0].real)
        self_modes = {e.n for e in entries if e.kind == "self"}
        coupled = set()
        for e in entries:
            if e.kind == "pair":
                coupled.update((e.n, e.m))
        for n in sorted(coupled | self_modes):
            prediction.rates[n] = alpha * float(exponents[0].real)
            prediction.predicted_slopes[n] = slope
        pair = next((e for e in entries if e.kind == "pair" and (e.n in self_modes or e.m in self_modes)), None)
        if pair is not None:
            j = pair.n if pair.n in self_modes else pair.m
            l = pair.m if j == pair.n else pair.n
            rates = coupled_pair_rates(j, l, spectrum, alpha)
            prediction.gamma_values = [complex(g) for g in rates.roots]
        prediction.oscillation_frequency = beat_frequency(exponents, alpha)
    logger.info(f"MSA regime {regime} at omega={omega_drive:.6f} ({len(entries)} resonances)")
    return prediction
