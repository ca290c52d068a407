"""Exception types shared across the toolkit."""

from __future__ import annotations


class KimuraError(Exception):
    """Base class for all toolkit errors."""


class DomainError(KimuraError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class QuadratureConvergenceError(KimuraError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance.

    Carries the last two estimates so the caller can judge how far off
    the result is.
    """

    def __init__(self, message: str, last_estimates: tuple[float, float]):
        super().__init__(f"{message} (last two estimates: {last_estimates[0]!r}, {last_estimates[1]!r})")
        self.last_estimates = last_estimates


class RootSearchError(KimuraError, RuntimeError):
    """A bracketing scan found no sign change inside its search range."""


class ModelError(KimuraError, ValueError):
    """Operator data is inconsistent (e.g. drift incompatible with positive weights)."""


class NumericalError(KimuraError, RuntimeError):
    """A linear-algebra step failed (singular solve, indefinite mass matrix, ...)."""


class UnsupportedOperatorError(KimuraError, ValueError):
    """The requested operator shape is outside the supported diagonal class."""


class DegenerateWindowError(KimuraError, RuntimeError):
    """A Harnack window sampled an exact zero of the solution."""

    def __init__(self, message: str, location=None):
        super().__init__(message if location is None else f"{message} at {location}")
        self.location = location


class InsufficientSpectrumError(KimuraError, RuntimeError):
    """Not enough reliable eigenvalues for the requested asymptotic fit."""


class SeriesInvariantError(KimuraError, RuntimeError):
    """A formal log-series operation produced a term outside the triangular shape."""


class ConfigError(KimuraError, ValueError):
    """Run configuration failed validation (unknown key, bad type, parse error)."""
