import math
import logging
from dataclasses import dataclass, asdict, replace
from typing import Dict, Any, Optional

from simulation_errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CavityParams:
    """Dimensionless cavity and drive configuration (units where d = v = 1)

    Either pass (b0, alpha) directly or the circuit triple (v0, f0, epsilon);
    when the triple is complete, b0 = v0*cos(f0) and
    alpha = 2*v0*sin(f0)*epsilon/k1**2 are recomputed from it on every
    construction, so the stored values can never disagree.
    """
    chi0: float
    b0: float = 0.0
    alpha: float = 0.0
    omega_drive: float = 0.0
    t_final: float = 1.0
    t_max: float = 1.0
    n_modes: int = 1
    v0: Optional[float] = None
    f0: Optional[float] = None
    epsilon: Optional[float] = None
    t_start: float = 0.0

    def __post_init__(self):
        for name in ("chi0", "b0", "alpha", "omega_drive", "t_final", "t_max"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigurationError(f"{name} must be a finite number, got {value!r}")
        if self.chi0 < 0:
            raise ConfigurationError(f"chi0 must be >= 0, got {self.chi0}")
        if isinstance(self.n_modes, bool) or not isinstance(self.n_modes, int) or self.n_modes < 1:
            raise ConfigurationError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        if self.t_start != 0.0:
            raise ConfigurationError("the drive window always opens at t=0")
        if not 0 < self.t_final <= self.t_max:
            raise ConfigurationError(
                f"need 0 < t_final <= t_max, got t_final={self.t_final}, t_max={self.t_max}"
            )
        if self.omega_drive < 0:
            raise ConfigurationError(f"omega_drive must be >= 0, got {self.omega_drive}")

        triple = (self.v0, self.f0, self.epsilon)
        if any(v is not None for v in triple) and not all(v is not None for v in triple):
            raise ConfigurationError("v0, f0 and epsilon must be given together")
        if self.has_circuit_drive:
            # Lazy import: the spectrum module imports this one.
            from cavity_spectrum import first_root

            b0 = self.v0 * math.cos(self.f0)
            k1 = first_root(self.chi0, b0)
            object.__setattr__(self, "b0", b0)
            object.__setattr__(self, "alpha", 2.0 * self.v0 * math.sin(self.f0) * self.epsilon / k1 ** 2)

        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")

    @classmethod
    def from_circuit(cls, chi0: float, v0: float, f0: float, epsilon: float, **kwargs) -> "CavityParams":
        """Build parameters from the SQUID bias (v0, f0) and flux modulation depth epsilon"""
        return cls(chi0=chi0, v0=v0, f0=f0, epsilon=epsilon, **kwargs)

    @property
    def has_circuit_drive(self) -> bool:
        return self.v0 is not None and self.f0 is not None and self.epsilon is not None

    @property
    def perturbation_amplitude(self) -> float:
        """b0*epsilon when the circuit triple is known, otherwise the mode-equation drive alpha"""
        if self.has_circuit_drive:
            return abs(self.b0 * self.epsilon)
        return self.alpha

    def with_drive(self, omega_drive: float) -> "CavityParams":
        return replace(self, omega_drive=float(omega_drive))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
