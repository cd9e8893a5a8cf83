"""Exception hierarchy shared by the library and the CLI.

Every error that can surface from a public operation carries a stable
machine-readable ``code`` and the exit status the CLI maps it to, so
callers can branch on failures without parsing messages.
"""

from __future__ import annotations


class WassregError(Exception):
    """Base class for all package errors."""

    code = "error"
    exit_status = 1


class InputError(WassregError):
    """Malformed or inconsistent caller input (shapes, values, formats)."""

    code = "input"
    exit_status = 2


class ConvergenceError(WassregError):
    """An iterative routine hit its budget without reaching tolerance."""

    code = "convergence"
    exit_status = 3

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(WassregError):
    """A descent run produced non-finite or persistently growing objectives."""

    code = "divergence"
    exit_status = 3

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class EnumerationLimitError(WassregError):
    """A brute-force routine refused an instance above its size bounds."""

    code = "limits"
    exit_status = 4


class DegenerateValueError(WassregError):
    """A quantity is undefined for the given data (for example an empty

    conditioning scenario, or a zero denominator in a ratio statistic)."""

    code = "degenerate-value"
    exit_status = 5
