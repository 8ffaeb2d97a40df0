"""
Exception hierarchy for the cavity simulator.

Library code raises these; only main.py turns them into process exit codes.
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for every failure the simulator reports"""
    exit_code = 1


class ConfigurationError(SimulationError):
    """Invalid parameters, unreadable config files or unmet step-size preconditions"""
    exit_code = 2


class SpectrumError(SimulationError):
    """Root finding failed on a branch of the boundary-condition equation"""
    exit_code = 3

    def __init__(self, message: str, branch: Optional[int] = None, b0: Optional[float] = None):
        self.reason = message
        self.branch = branch
        self.b0 = b0
        details = []
        if branch is not None:
            details.append(f"branch {branch}")
        if b0 is not None:
            details.append(f"b0={b0:g}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class IntegrationError(SimulationError):
    """The mode integrator produced a non-finite state"""
    exit_code = 4

    def __init__(self, message: str, time: Optional[float] = None, column: Optional[int] = None):
        self.time = time
        self.column = column
        if time is not None:
            message = f"{message} at t={time:.6g}"
        if column is not None:
            message = f"{message} (in-mode column {column})"
        super().__init__(message)


class FitError(SimulationError):
    """A growth-law fit could not be performed on the requested window"""
    exit_code = 5
