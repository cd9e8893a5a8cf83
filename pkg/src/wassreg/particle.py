"""Particle descent for scalar-response distribution regression.

The coefficient law is carried as a cloud of coefficient vectors.  Each
step predicts every particle at the sampled rows, ranks the predictions,
reads the response quantile at each particle's own (midpoint) rank, and
moves the particle along the covariate direction by the gap.  All
particles move simultaneously against ranks frozen at the start of the
step.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DivergenceError, InputError
from .linalg import as_design
from .reports import FitReport
from .rng import stream
from .transport import Empirical, GaussianMeasure, QuantileGrid, quantiles_of, w2_squared


@dataclass(frozen=True)
class ParticleCloud:
    """A sampled coefficient law: one coefficient vector per particle."""

    particles: np.ndarray

    def __post_init__(self):
        parts = np.asarray(self.particles, dtype=float)
        if parts.ndim == 1:
            parts = parts[:, None]
        if parts.ndim != 2 or parts.shape[0] < 2:
            raise InputError("particle cloud needs at least two (m, p) rows")
        if not np.all(np.isfinite(parts)):
            raise InputError("particle cloud has non-finite entries")
        object.__setattr__(self, "particles", parts)

    @property
    def m(self) -> int:
        return self.particles.shape[0]

    @property
    def p(self) -> int:
        return self.particles.shape[1]

    def pushforward(self, x) -> Empirical:
        """Predicted response law at covariate vector ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.p,):
            raise InputError(f"covariate has {x.size} entries, expected {self.p}")
        return Empirical(self.particles @ x)


@dataclass
class ParticleConfig:
    particles: int = 2000
    iters: int = 3000
    step_base: float = 0.1
    decay: float = 1e-3
    momentum: float = 0.9
    batch: int | None = 5
    seed: int = 0
    tol: float = 0.0
    patience: int | None = None
    log_every: int = 10
    init_scale: float = 1.0

    def __post_init__(self):
        if self.particles < 2:
            raise InputError("need at least two particles")
        if self.iters < 0:
            raise InputError("iters must be non-negative")
        if self.step_base <= 0 or self.decay < 0:
            raise InputError("step schedule must have positive base and non-negative decay")
        if not 0.0 <= self.momentum < 1.0:
            raise InputError("momentum must lie in [0, 1)")
        if self.batch is not None and self.batch < 1:
            raise InputError("batch size must be at least 1")
        if self.tol < 0:
            raise InputError("tolerance must be non-negative")
        if self.patience is not None and self.patience < 1:
            raise InputError("patience must be at least 1")
        if self.log_every < 1:
            raise InputError("log_every must be at least 1")
        if self.init_scale <= 0:
            raise InputError("init_scale must be positive")

    def step_size(self, k: int) -> float:
        return self.step_base / (1.0 + self.decay * k)


def _cloud_array(cloud) -> np.ndarray:
    if isinstance(cloud, ParticleCloud):
        return cloud.particles
    return ParticleCloud(np.asarray(cloud, dtype=float)).particles


def _check_responses(responses):
    if len(responses) < 1:
        raise InputError("need at least one response")
    for i, r in enumerate(responses):
        if isinstance(r, Empirical):
            if r.d != 1:
                raise InputError(f"response {i} is {r.d}-dimensional; this solver is scalar")
        elif isinstance(r, GaussianMeasure):
            if r.d != 1:
                raise InputError(f"response {i} is {r.d}-dimensional; this solver is scalar")
        elif not isinstance(r, QuantileGrid):
            raise InputError(f"unsupported response type {type(r).__name__}")


def _step_direction(parts: np.ndarray, X: np.ndarray, responses) -> np.ndarray:
    """Average over rows of (response quantile at own rank - prediction) x_i.

    Ranks are midpoint ranks of the predictions, ties broken by particle
    index (stable sort), and are frozen for the whole step.
    """
    m = parts.shape[0]
    preds = parts @ X.T  # (m, rows)
    levels = np.empty(m)
    gaps = np.empty_like(preds)
    ranks = (np.arange(m) + 0.5) / m
    for i in range(X.shape[0]):
        order = np.argsort(preds[:, i], kind="stable")
        levels[order] = ranks
        gaps[:, i] = quantiles_of(responses[i], levels) - preds[:, i]
    return gaps @ X / X.shape[0]


def objective(cloud, design, responses) -> float:
    """Mean squared distance between pushforwards and responses."""
    parts = _cloud_array(cloud)
    X = as_design(design)
    if len(responses) != X.shape[0]:
        raise InputError("design and responses have different lengths")
    _check_responses(responses)
    if X.shape[1] != parts.shape[1]:
        raise InputError("cloud and design have different covariate counts")
    preds = parts @ X.T
    total = 0.0
    for i, resp in enumerate(responses):
        total += w2_squared(Empirical(preds[:, i]), resp)
    return total / X.shape[0]


def gradient_step(cloud, design, responses, tau: float) -> ParticleCloud:
    """One full-batch step without momentum, at step size ``tau``."""
    parts = _cloud_array(cloud)
    X = as_design(design)
    _check_responses(responses)
    if len(responses) != X.shape[0]:
        raise InputError("design and responses have different lengths")
    if tau <= 0:
        raise InputError("step size must be positive")
    return ParticleCloud(parts + tau * _step_direction(parts, X, responses))


def normal_equation_residual(cloud, design, responses) -> float:
    """Mean particle-wise norm of the update direction; zero at a fixed point."""
    parts = _cloud_array(cloud)
    X = as_design(design)
    _check_responses(responses)
    direction = _step_direction(parts, X, responses)
    return float(np.mean(np.linalg.norm(direction, axis=1)))


def fit(design, responses, config: ParticleConfig | None = None):
    """Run the particle descent; returns ``(cloud, report)``.

    The trace logs the full-data objective every ``log_every`` steps.
    ``patience`` counts iterations since the best logged objective and
    stops once it is exceeded; ``tol`` stops on a small update direction.
    """
    config = config or ParticleConfig()
    X = as_design(design)
    n, p = X.shape
    if len(responses) != n:
        raise InputError("design and responses have different lengths")
    _check_responses(responses)

    start = time.perf_counter()
    parts = config.init_scale * stream(config.seed, "init").standard_normal(
        (config.particles, p)
    )
    batch_rng = stream(config.seed, "batch")
    batch = config.batch if config.batch is not None and config.batch < n else None
    velocity = np.zeros_like(parts)

    trace = [(0, objective(parts, X, responses))]
    best_value, best_iter = trace[0][1], 0
    stop_reason = "budget"
    ran = 0

    for k in range(config.iters):
        if batch is None:
            rows_x, rows_resp = X, responses
        else:
            rows = batch_rng.choice(n, size=batch, replace=False)
            rows_x = X[rows]
            rows_resp = [responses[i] for i in rows]
        velocity = config.momentum * velocity + config.step_size(k) * _step_direction(
            parts, rows_x, rows_resp
        )
        parts = parts + velocity
        ran = k + 1
        if not np.all(np.isfinite(parts)):
            raise DivergenceError("particles went non-finite", iteration=ran)
        if ran % config.log_every == 0 or ran == config.iters:
            value = objective(parts, X, responses)
            if not np.isfinite(value):
                raise DivergenceError("objective went non-finite", iteration=ran)
            trace.append((ran, value))
            if value < best_value - 1e-12:
                best_value, best_iter = value, ran
            if config.patience is not None and ran - best_iter >= config.patience:
                stop_reason = "patience"
                break
            if config.tol > 0.0:
                if normal_equation_residual(parts, X, responses) <= config.tol:
                    stop_reason = "tolerance"
                    break

    if trace[-1][0] != ran:
        trace.append((ran, objective(parts, X, responses)))

    cloud = ParticleCloud(parts)
    report = FitReport(
        objective_trace=trace,
        final_grad_norm=normal_equation_residual(parts, X, responses),
        iterations=ran,
        wall_time_s=time.perf_counter() - start,
        config=asdict(config),
        stop_reason=stop_reason,
    )
    return cloud, report
