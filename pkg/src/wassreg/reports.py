"""Shared fit-report container for the iterative solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class FitReport:
    """What a solver run did: trace, stopping state, and config echo.

    ``objective_trace`` holds (iteration, full-data objective) pairs at
    the logged iterations, always including iteration 0 and the final
    iterate.
    """

    objective_trace: list[tuple[int, float]]
    final_grad_norm: float
    iterations: int
    wall_time_s: float
    config: dict = field(default_factory=dict)
    stop_reason: str = "budget"
    regularized_steps: int = 0

    def __post_init__(self):
        values = [v for _, v in self.objective_trace]
        if values and not np.all(np.isfinite(values)):
            raise InputError("objective trace contains non-finite values")

    @property
    def initial_objective(self) -> float:
        return self.objective_trace[0][1]

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1][1]
