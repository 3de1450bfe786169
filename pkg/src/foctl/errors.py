"""Exception types shared across the toolkit."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit-specific errors."""


class IdentifiabilityError(ToolkitError):
    """Raised when a regression design cannot pin down the parameters.

    Carries the dimension of the design null space so callers can report
    how many directions are unidentified.
    """

    def __init__(self, message: str, null_space_dim: int):
        super().__init__(message)
        self.null_space_dim = int(null_space_dim)


class SingularSystemError(ToolkitError):
    """Raised when a linear system is singular or numerically unusable.

    ``cond_estimate`` is the condition-number estimate that triggered the
    rejection (``inf`` for an exactly singular matrix).
    """

    def __init__(self, message: str, cond_estimate: float):
        super().__init__(message)
        self.cond_estimate = float(cond_estimate)


class IterativeSolveError(ToolkitError):
    """Raised when the iterative solver stops without reaching tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = float(residual)
        self.iterations = int(iterations)
