"""
Exception hierarchy shared across the simulation and optimization packages.

The CLI maps these onto exit codes: configuration problems exit with 2,
simulation divergence with 3.
"""

from typing import Optional


class GranularDigError(Exception):
    """Base class for all errors raised by this package"""


class ConfigError(GranularDigError, ValueError):
    """Invalid configuration or usage"""


class PointCloudFormatError(ConfigError):
    """A point-cloud or trajectory file could not be parsed"""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ContractViolation(GranularDigError, ValueError):
    """A documented precondition of an operation does not hold"""


class SimulationDivergedError(GranularDigError, RuntimeError):
    """The simulation produced non-finite or out-of-domain state"""

    def __init__(self, message: str, substep: Optional[int] = None, step: Optional[int] = None):
        self.substep = substep
        self.step = step
        location = []
        if step is not None:
            location.append(f"global step {step}")
        if substep is not None:
            location.append(f"substep {substep}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class OutOfDomainError(SimulationDivergedError):
    """A particle left the interior of the background grid"""


class LineSearchDivergedError(SimulationDivergedError):
    """Every line-search candidate rollout diverged"""
