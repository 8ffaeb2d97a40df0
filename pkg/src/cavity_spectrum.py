"""
Static spectrum of the SQUID-terminated cavity.

The eigenfrequencies kd solve  kd*tan(kd) + chi0*kd**2 = b0.  The left-hand side is
strictly increasing between consecutive poles of the tangent, so every
pole-to-pole interval ((m-1/2)pi, (m+1/2)pi) holds exactly one root and the
first interval (0, pi/2) holds one only when b0 > 0.
"""

import math
import re
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union, Sequence

import numpy as np

from cavity_params import CavityParams
from simulation_errors import SpectrumError, ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MATCH_TOL = 1e-2
SCAN_POINTS = 1000
STEP_TOL = 1e-10
MAX_NEWTON_ITERATIONS = 100


def spectral_residual(kd, chi0: float, b0: float):
    """g(kd) = kd*tan(kd) + chi0*kd^2 - b0; accepts scalars or arrays"""
    return kd * np.tan(kd) + chi0 * kd ** 2 - b0


def _residual_slope(kd: float, chi0: float) -> float:
    return math.tan(kd) + kd / math.cos(kd) ** 2 + 2.0 * chi0 * kd


def mode_mass(kd: float, chi0: float) -> float:
    """M = 1 + sin(2kd)/(2kd) + 2*chi0*cos^2(kd)"""
    if kd <= 0:
        raise ConfigurationError(f"mode_mass needs kd > 0, got {kd}")
    return 1.0 + math.sin(2.0 * kd) / (2.0 * kd) + 2.0 * chi0 * math.cos(kd) ** 2


def branch_interval(branch: int) -> Tuple[float, float]:
    """Open pole-to-pole interval of branch m (m = 0 is (0, pi/2))"""
    if branch == 0:
        return 0.0, 0.5 * math.pi
    return (branch - 0.5) * math.pi, (branch + 0.5) * math.pi


def _bracket_root(branch: int, chi0: float, b0: float) -> Tuple[float, float]:
    lo, hi = branch_interval(branch)
    offset = 1e-9 * max(1.0, hi)
    grid = np.linspace(lo + offset, hi - offset, SCAN_POINTS)
    positive = spectral_residual(grid, chi0, b0) > 0
    crossings = np.nonzero(positive[1:] != positive[:-1])[0]
    if len(crossings) != 1:
        raise SpectrumError(
            f"expected exactly one sign change of the boundary residual, found {len(crossings)}",
            branch=branch,
        )
    i = int(crossings[0])
    if positive[i]:
        raise SpectrumError("boundary residual is decreasing across its root", branch=branch)
    return float(grid[i]), float(grid[i + 1])


def _refine_root(a: float, b: float, branch: int, chi0: float, b0: float, tol: float) -> float:
    """Safeguarded Newton on [a, b]; falls back to bisection whenever a step leaves the bracket"""
    x = 0.5 * (a + b)
    for iteration in range(1, MAX_NEWTON_ITERATIONS + 1):
        gx = float(spectral_residual(x, chi0, b0))
        if gx == 0.0:
            return x
        if gx > 0:
            b = x
        else:
            a = x
        slope = _residual_slope(x, chi0)
        x_new = x - gx / slope if slope > 0 else 0.5 * (a + b)
        if not a < x_new < b:
            x_new = 0.5 * (a + b)
        g_new = float(spectral_residual(x_new, chi0, b0))
        if abs(g_new) < tol and abs(x_new - x) < STEP_TOL:
            logger.debug(f"branch {branch}: converged to {x_new:.12f} in {iteration} iterations")
            return x_new
        if b - a < 4.0 * np.finfo(float).eps * max(1.0, abs(x_new)) and abs(g_new) < tol:
            return x_new
        x = x_new
    raise SpectrumError(
        f"Newton refinement did not converge after {MAX_NEWTON_ITERATIONS} iterations", branch=branch
    )


def solve_roots(chi0: float, b0: float, count: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """First `count` positive roots of the boundary-condition equation, ascending"""
    if tol <= 0:
        raise ConfigurationError(f"tol must be > 0, got {tol}")
    if count < 1:
        raise ConfigurationError(f"need at least one root, got count={count}")
    if chi0 < 0:
        raise ConfigurationError(f"chi0 must be >= 0, got {chi0}")

    first_branch = 0 if b0 > 0 else 1
    roots = np.empty(count)
    for i in range(count):
        branch = first_branch + i
        a, b = _bracket_root(branch, chi0, b0)
        roots[i] = _refine_root(a, b, branch, chi0, b0, tol)
    return roots


def first_root(chi0: float, b0: float, tol: float = DEFAULT_TOL) -> float:
    return float(solve_roots(chi0, b0, 1, tol)[0])


@dataclass
class Spectrum:
    """Ordered eigenfrequencies k_n*d with their mode masses and consecutive gaps"""
    k: np.ndarray
    masses: np.ndarray
    gaps: np.ndarray
    chi0: float
    b0: float

    @property
    def n_modes(self) -> int:
        return len(self.k)

    @property
    def k_max(self) -> float:
        return float(self.k[-1])

    @property
    def cosines(self) -> np.ndarray:
        return np.cos(self.k)

    def residuals(self) -> np.ndarray:
        return np.abs(spectral_residual(self.k, self.chi0, self.b0))

    def to_rows(self) -> List[Tuple[float, int, float, float, float]]:
        """Rows (b0, n, k_n, M_n, gap_n); the last mode has no gap and reports NaN"""
        rows = []
        for i in range(self.n_modes):
            gap = float(self.gaps[i]) if i < len(self.gaps) else float("nan")
            rows.append((self.b0, i + 1, float(self.k[i]), float(self.masses[i]), gap))
        return rows


def build_spectrum(k: np.ndarray, chi0: float, b0: float) -> Spectrum:
    masses = np.array([mode_mass(float(kd), chi0) for kd in k])
    if np.any(masses <= 0):
        bad = int(np.argmin(masses)) + 1
        raise SpectrumError(f"non-positive mode mass {masses[bad - 1]:.6g}", branch=bad, b0=b0)
    return Spectrum(k=np.asarray(k, dtype=float), masses=masses, gaps=np.diff(k), chi0=chi0, b0=b0)


def solve_spectrum(params: CavityParams, tol: float = DEFAULT_TOL) -> Spectrum:
    """Solve the first n_modes eigenfrequencies of the static cavity"""
    roots = solve_roots(params.chi0, params.b0, params.n_modes, tol)
    spectrum = build_spectrum(roots, params.chi0, params.b0)
    logger.info(
        f"Solved {spectrum.n_modes} modes for chi0={params.chi0:g}, b0={params.b0:g}: "
        f"k1={spectrum.k[0]:.6f}, k_max={spectrum.k_max:.6f}"
    )
    return spectrum


@dataclass
class GapRow:
    b0: float
    n: int
    k_n: float
    M_n: float
    gap_n: float

    def as_tuple(self) -> Tuple[float, int, float, float, float]:
        return (self.b0, self.n, self.k_n, self.M_n, self.gap_n)


def gap_profile(chi0: float, b0_range: Sequence[float], n_modes: int, tol: float = DEFAULT_TOL) -> List[GapRow]:
    """Scan b0 and emit every mode's frequency, mass and gap to the next mode"""
    if len(b0_range) == 0:
        raise ConfigurationError("gap_profile needs a nonempty b0 grid")
    rows = []
    for b0 in b0_range:
        try:
            roots = solve_roots(chi0, float(b0), n_modes + 1, tol)
        except SpectrumError as e:
            raise SpectrumError(f"gap scan failed: {e.reason}", branch=e.branch, b0=float(b0)) from e
        for i in range(n_modes):
            rows.append(GapRow(
                b0=float(b0),
                n=i + 1,
                k_n=float(roots[i]),
                M_n=mode_mass(float(roots[i]), chi0),
                gap_n=float(roots[i + 1] - roots[i]),
            ))
    logger.info(f"Gap profile: {len(b0_range)} b0 values x {n_modes} modes at chi0={chi0:g}")
    return rows


def chi0_scan(chi0_values: Sequence[float], b0_range: Sequence[float], n_modes: int,
              tol: float = DEFAULT_TOL) -> List[Tuple[float, float, int, float]]:
    """First eigenfrequencies against b0 for several capacitance ratios: rows (chi0, b0, n, k_n)"""
    if len(chi0_values) == 0 or len(b0_range) == 0:
        raise ConfigurationError("chi0_scan needs nonempty chi0 and b0 grids")
    rows = []
    for chi0 in chi0_values:
        for b0 in b0_range:
            try:
                roots = solve_roots(float(chi0), float(b0), n_modes, tol)
            except SpectrumError as e:
                raise SpectrumError(f"chi0 scan failed at chi0={chi0:g}: {e.reason}", branch=e.branch, b0=float(b0)) from e
            rows.extend((float(chi0), float(b0), i + 1, float(kd)) for i, kd in enumerate(roots))
    return rows


@dataclass(frozen=True)
class ResonanceEntry:
    """A drive-frequency match: self(n) when omega ~ 2k_n, pair(n,m,+/-) when omega ~ |k_n +/- k_m|"""
    kind: str
    n: int
    m: Optional[int] = None
    sign: Optional[str] = None
    detuning: float = 0.0

    @property
    def label(self) -> str:
        if self.kind == "self":
            return f"self({self.n})"
        return f"pair({self.n},{self.m},{self.sign})"


def resonant_set(spectrum: Spectrum, omega_drive: float, match_tol: float = DEFAULT_MATCH_TOL) -> List[ResonanceEntry]:
    """All self and pair resonances within match_tol of the drive frequency"""
    if match_tol <= 0:
        raise ConfigurationError(f"match_tol must be > 0, got {match_tol}")
    k = spectrum.k
    entries = []
    for n in range(spectrum.n_modes):
        detuning = omega_drive - 2.0 * k[n]
        if abs(detuning) < match_tol:
            entries.append(ResonanceEntry("self", n + 1, detuning=float(detuning)))
    for n in range(spectrum.n_modes):
        for m in range(n + 1, spectrum.n_modes):
            for sign, combination in (("+", k[n] + k[m]), ("-", k[m] - k[n])):
                detuning = omega_drive - combination
                if abs(detuning) < match_tol:
                    entries.append(ResonanceEntry("pair", n + 1, m + 1, sign, float(detuning)))
    return entries


_TERM = re.compile(r"\s*([+-])?\s*(\d+(?:\.\d*)?)?\s*\*?\s*(?:k(\d+)|(pi))?\s*")


def resolve_drive_frequency(expression: Union[str, float], spectrum: Spectrum) -> float:
    """Turn '2k1', 'k1+k3', 'k2-k1', 'pi' or a plain number into a drive frequency"""
    if isinstance(expression, (int, float)):
        return float(expression)
    text = str(expression).strip().lower()
    try:
        return float(text)
    except ValueError:
        pass

    total, pos, terms = 0.0, 0, 0
    while pos < len(text):
        match = _TERM.match(text, pos)
        sign, coefficient, mode, pi = match.groups()
        if match.end() == pos or (coefficient is None and mode is None and pi is None):
            raise ConfigurationError(f"cannot parse drive frequency {expression!r}")
        if terms > 0 and sign is None:
            raise ConfigurationError(f"missing operator in drive frequency {expression!r}")
        value = float(coefficient) if coefficient else 1.0
        if mode is not None:
            index = int(mode)
            if not 1 <= index <= spectrum.n_modes:
                raise ConfigurationError(f"drive frequency {expression!r} refers to k{index}, only {spectrum.n_modes} modes solved")
            value *= float(spectrum.k[index - 1])
        elif pi is not None:
            value *= math.pi
        total += -value if sign == "-" else value
        pos, terms = match.end(), terms + 1

    if terms == 0 or total <= 0:
        raise ConfigurationError(f"drive frequency {expression!r} must evaluate to a positive number")
    return total
