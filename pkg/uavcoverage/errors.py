"""Exception family shared by every module of the toolkit."""

from typing import Optional, Tuple


class UavCoverageError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(UavCoverageError, ValueError):
    """A configuration value is missing, malformed or violates an invariant.

    ``key`` is the dotted configuration key (``deployment.altitude_m``) or the
    dataclass field name when the error comes from direct construction.
    """

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


class DomainError(UavCoverageError, ValueError):
    """An argument lies outside the domain of a model function."""


class QuadratureError(UavCoverageError, ArithmeticError):
    """Adaptive quadrature stopped before reaching the requested tolerance."""

    def __init__(
        self,
        message: str,
        value: float,
        error: float,
        worst_interval: Optional[Tuple[float, float]] = None,
    ):
        detail = f"{message} (value={value:.6g}, error={error:.3g}"
        if worst_interval is not None:
            detail += f", worst subinterval=[{worst_interval[0]:.6g}, {worst_interval[1]:.6g}]"
        super().__init__(detail + ")")
        self.value = value
        self.error = error
        self.worst_interval = worst_interval
