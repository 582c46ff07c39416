"""Exception hierarchy for the simulator.

Every error the public API can raise derives from :class:`ChemoSimError`,
so callers (notably the CLI) can map library failures onto exit codes
without enumerating each type.
"""

from __future__ import annotations


class ChemoSimError(Exception):
    """Base class for all simulator errors."""


class ValidationError(ChemoSimError):
    """A configuration or parameter set violates a documented invariant."""


class NonPositive(ValidationError):
    """A strictly positive quantity (tau, k_A, sigma, T, ...) is <= 0."""


class NegativeRate(ValidationError):
    """A nonnegative rate constant is < 0."""


class DegenerateDenominator(ChemoSimError):
    """Equilibrium denominator mu_N + beta_1*A2 vanished with r_N > 0."""


class BadResolution(ValidationError):
    """Grid resolution below the minimum (n >= 2)."""


class EmptyRegion(ValidationError):
    """An infusion region thinner than the grid spacing: no node inside."""


class GridMismatch(ChemoSimError):
    """Fields passed to one operation live on different grids."""


class HistoryTooShort(ChemoSimError):
    """Kernel evaluation requested beyond the stored drug history."""


class NegativeInput(ChemoSimError):
    """An initial field that must be nonnegative has a negative node."""


class ConfigError(ValidationError):
    """Solver configuration violates an invariant (e.g. dt ceiling)."""


class Instability(ChemoSimError):
    """Integration produced non-finite values or left the invariant region.

    Signals that dt is too large for the requested problem.
    """


class NoConvergence(ChemoSimError):
    """Fixed-point iteration hit max_iter; carries the last residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class UnknownScenario(ValidationError):
    """Scenario id outside the built-in table."""


class ParseError(ValidationError):
    """Config text could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class UnknownKey(ParseError):
    """A config key that matches no documented field (no silent typos)."""


class MissingSnapshot(ChemoSimError):
    """A run directory lacks a snapshot required for rendering."""


class MalformedCsv(ChemoSimError):
    """A snapshot file does not follow the documented CSV schema."""
