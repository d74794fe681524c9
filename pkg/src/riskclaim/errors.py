"""Semantic exception hierarchy shared by all riskclaim modules."""

from __future__ import annotations


class RiskclaimError(Exception):
    """Base error for this library."""


class InvalidParameter(RiskclaimError, ValueError):
    """An argument violates its contract (domain, shape, ordering)."""


class UnsupportedDensity(RiskclaimError):
    """The operation requires a continuous, strictly increasing CDF.

    Discrete models should be routed to the oracle module instead.
    """


class NoBracket(RiskclaimError):
    """No sign change could be established for a root search."""


# Name used by the risk-measure contracts for failed m-bracketing.
BracketFailure = NoBracket


class NonConvergence(RiskclaimError):
    """An iterative scheme exhausted its iteration budget.

    Carries the last residual seen so callers can report it.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class Infeasible(RiskclaimError):
    """No candidate satisfies the stated constraints."""


class CurveShapeViolation(RiskclaimError):
    """A minimal-risk curve failed its monotonicity/convexity check."""


class ConfigError(RiskclaimError, ValueError):
    """A CLI/config specification string could not be parsed."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position
