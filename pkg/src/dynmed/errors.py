"""Exception and warning types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Raised when a parameter record violates the model's assumptions."""


class OrderViolation(ValidationError):
    """Output probabilities are not ordered as 0 < q < p < 1."""


class SignViolation(ValidationError):
    """A sign or range restriction on w, r, delta or beta fails."""


class OutputValueViolation(ValidationError):
    """Expected client payoffs do not straddle zero (v_lo < 0 < v_bar)."""


class DomainError(ValueError):
    """A utility argument lies outside the admissible interval."""


class RegimeError(ValueError):
    """The requested object does not exist in the current parameter regime."""


class DegenerateError(RegimeError):
    """The mediated payoff set collapses to the origin (delta below cutoff)."""


class NonConvergence(RuntimeError):
    """Value iteration hit its iteration cap before meeting the tolerance."""


class OptimalityViolation(RuntimeError):
    """The brute-force Bellman oracle beat the closed-form policy by too much."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SlopeSignError(RuntimeError):
    """The measured slope of F on the secret-randomization segment is not negative."""


class Infeasible(RuntimeError):
    """No admissible point was found by the brute-force search."""


class TruncationWarning(UserWarning):
    """Simulation horizon leaves a non-negligible discounted tail."""


class NonMonotoneWarning(UserWarning):
    """F_delta evaluated at U_bar decreased between bisection probes."""
