"""Exception types shared across the toolkit."""

from __future__ import annotations


class CamdistError(Exception):
    """Base class for all toolkit errors."""


class NonConvergence(CamdistError):
    """An iterative solve failed to reach its tolerance.

    Carries the last iterate and residual so callers can report or retry.
    """

    def __init__(self, message: str, *, last_iterate=None, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations


class BudgetExhausted(CamdistError):
    """The displacement budget cannot accommodate a coefficient draw."""

    def __init__(self, message: str, *, coefficient: str | None = None,
                 displacement: float | None = None, budget: float | None = None):
        super().__init__(message)
        self.coefficient = coefficient
        self.displacement = displacement
        self.budget = budget


class ConfigError(CamdistError):
    """A sampler configuration file or value is invalid."""


class PredictionsFormatError(CamdistError):
    """A predictions file record is malformed."""

    def __init__(self, message: str, *, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number
