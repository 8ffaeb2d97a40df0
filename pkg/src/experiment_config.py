"""
Experiment configuration.

Values are layered: built-in defaults, then a flat KEY=VALUE file read with
python-dotenv, then CAVITY_* environment variables, then command-line flags.
"""

import os
import logging
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from dotenv import dotenv_values

from cavity_params import CavityParams
from mode_dynamics import DEFAULT_POINTS_PER_PERIOD
from simulation_errors import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "CAVITY_"


def parse_grid(text: str) -> List[float]:
    """'a:b:n' (inclusive, n points) or a comma-separated list"""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"grid {text!r} must look like start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ConfigurationError(f"grid {text!r} needs a positive point count")
        return [float(x) for x in np.linspace(start, stop, count)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_sweep_tokens(text: str) -> List[str]:
    """Comma-separated 'a:b:n' ranges, plain frequencies and resonance expressions such as '2k2' or 'k1+k3'"""
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    for token in tokens:
        if ":" in token:
            parse_grid(token)
    return tokens


def parse_window(text: str) -> Optional[Tuple[float, float]]:
    text = text.strip()
    if not text:
        return None
    values = [float(x) for x in text.split(",")]
    if len(values) != 2 or not values[0] < values[1]:
        raise ConfigurationError(f"fit window {text!r} must be 'lo,hi' with lo < hi")
    return values[0], values[1]


def _optional_float(text: str) -> Optional[float]:
    text = text.strip()
    return float(text) if text else None


def _optional_int(text: str) -> Optional[int]:
    text = text.strip()
    return int(text) if text else None


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _optional_grid(text: str) -> Optional[List[float]]:
    return parse_grid(text)


_PARSERS = {
    "chi0": float,
    "b0": float,
    "v0": _optional_float,
    "f0": _optional_float,
    "epsilon": _optional_float,
    "alpha": float,
    "omega": str,
    "t_final": float,
    "t_max": float,
    "n_modes": int,
    "dt": _optional_float,
    "points_per_period": int,
    "sample_stride": _optional_int,
    "init": str,
    "match_tol": float,
    "spectrum_tol": float,
    "fit_window": parse_window,
    "late_fit_window": parse_window,
    "fit_modes": _int_list,
    "fit_model": str,
    "b0_grid": _optional_grid,
    "chi0_grid": _optional_grid,
    "sweep_omega": parse_sweep_tokens,
    "workers": int,
    "strong_threshold": float,
    "equidistant_tol": float,
    "out_dir": str,
    "log_level": str,
}


@dataclass
class ExperimentConfig:
    """Everything one subcommand needs, fully resolved"""
    chi0: float = 0.05
    b0: float = 1.0
    v0: Optional[float] = None
    f0: Optional[float] = None
    epsilon: Optional[float] = None
    alpha: float = 0.1383
    omega: str = "2k1"
    t_final: float = 600.0
    t_max: float = 1100.0
    n_modes: int = 10
    dt: Optional[float] = None
    points_per_period: int = DEFAULT_POINTS_PER_PERIOD
    sample_stride: Optional[int] = None
    init: str = "columns"
    match_tol: float = 1e-2
    spectrum_tol: float = 1e-6
    fit_window: Optional[Tuple[float, float]] = None
    late_fit_window: Optional[Tuple[float, float]] = None
    fit_modes: List[int] = field(default_factory=lambda: [1])
    fit_model: str = "exponential"
    b0_grid: Optional[List[float]] = None
    chi0_grid: Optional[List[float]] = None
    sweep_omega: Optional[List[str]] = None
    workers: int = 1
    strong_threshold: float = 0.5
    equidistant_tol: float = 0.05
    out_dir: str = "results"
    log_level: str = "INFO"
    source: str = "defaults"

    def __post_init__(self):
        if self.init not in ("columns", "superposition"):
            raise ConfigurationError(f"INIT must be 'columns' or 'superposition', got {self.init!r}")
        if self.fit_model not in ("exponential", "power-law"):
            raise ConfigurationError(f"FIT_MODEL must be 'exponential' or 'power-law', got {self.fit_model!r}")
        if self.workers < 1:
            raise ConfigurationError(f"WORKERS must be >= 1, got {self.workers}")
        if self.match_tol <= 0 or self.spectrum_tol <= 0:
            raise ConfigurationError("MATCH_TOL and SPECTRUM_TOL must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError(f"DT must be positive, got {self.dt}")
        if any(n < 1 for n in self.fit_modes):
            raise ConfigurationError(f"FIT_MODES must be 1-based mode indices, got {self.fit_modes}")

    def cavity_params(self, omega_drive: float = 0.0) -> CavityParams:
        return CavityParams(
            chi0=self.chi0,
            b0=self.b0,
            alpha=self.alpha,
            omega_drive=omega_drive,
            t_final=self.t_final,
            t_max=self.t_max,
            n_modes=self.n_modes,
            v0=self.v0,
            f0=self.f0,
            epsilon=self.epsilon,
        )

    def ensure_out_dir(self) -> str:
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"cannot create output directory {self.out_dir!r}: {e}") from e
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigurationError(f"output directory {self.out_dir!r} is not writable")
        return self.out_dir

    def header_lines(self) -> List[str]:
        """Resolved configuration as sorted 'key = value' lines"""
        values = asdict(self)
        values.pop("source")
        return [f"{key} = {values[key]}" for key in sorted(values)]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _coerce(key: str, raw: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    try:
        return _PARSERS[key](raw)
    except (ValueError, TypeError) as e:
        raise ConfigurationError(f"invalid value {raw!r} for {key.upper()}: {e}") from e


def _from_file(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise ConfigurationError(f"config file {path!r} not found")
    values = {}
    for key, raw in dotenv_values(path).items():
        name = key.lower()
        if name not in _PARSERS:
            raise ConfigurationError(f"unknown config key {key!r} in {path}")
        values[name] = _coerce(name, raw if raw is not None else "")
    return values


def _from_environment(environ: Mapping[str, str]) -> Dict[str, Any]:
    values = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        if name not in _PARSERS:
            logger.warning(f"Ignoring unknown environment variable {key}")
            continue
        values[name] = _coerce(name, raw)
    return values


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Layer defaults < file < environment < overrides (None overrides are ignored)"""
    values: Dict[str, Any] = {}
    sources = ["defaults"]
    if path:
        values.update(_from_file(path))
        sources.append(path)
    env_values = _from_environment(os.environ if environ is None else environ)
    if env_values:
        values.update(env_values)
        sources.append("environment")

    cli = {k: _coerce(k, v) for k, v in (overrides or {}).items() if v is not None}
    if cli:
        sources.append("command line")
    if "alpha" in cli and all(values.get(k) is not None for k in ("v0", "f0", "epsilon")):
        # An explicit alpha replaces the circuit-derived one; keep the bias point it implies.
        values["b0"] = values["v0"] * float(np.cos(values["f0"]))
        values["v0"] = values["f0"] = values["epsilon"] = None
    values.update(cli)

    known = {f.name for f in fields(ExperimentConfig)}
    config = ExperimentConfig(**{k: v for k, v in values.items() if k in known}, source=" < ".join(sources))
    logger.info(f"Loaded configuration from {config.source}")
    return config
