"""Gaussian coefficient laws and their fixed-step descent solver.

A coefficient law here is a Gaussian over the stacked coefficient
matrix: for ``p`` covariates and response dimension ``d`` the law lives
on R^(p*d), ordered covariate-major (the d entries for covariate 1,
then the d entries for covariate 2, ...).  Predicting at a covariate
vector x is the linear image under (x^T kron I_d), which is again
Gaussian, so the whole regression stays in closed form.

The solver alternates nothing: the mean part is an ordinary least
squares problem solved once in closed form, and the covariance part is
driven by multiplicative updates Sigma <- M Sigma M with
M = tau * M0 + I, where M0 averages kron(x x^T, T_i - I) over rows and
T_i is the optimal-transport coefficient from the current predicted
marginal covariance to the response covariance.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DivergenceError, InputError
from .linalg import as_design, as_spd, kron, pinv
from .reports import FitReport
from .transport import (
    REG_JITTER,
    GaussianMeasure,
    gaussian_transport_coeff,
    gaussian_w2_squared,
)


@dataclass(frozen=True)
class CoeffGaussian:
    """Gaussian law of the coefficient matrix, stored in stacked form."""

    mean: np.ndarray
    cov: np.ndarray
    p: int
    d: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if self.p < 1 or self.d < 1:
            raise InputError("coefficient law needs p >= 1 and d >= 1")
        if mean.shape != (self.p * self.d,):
            raise InputError(
                f"coefficient mean has {mean.size} entries, expected {self.p * self.d}"
            )
        cov = as_spd(np.asarray(self.cov, dtype=float), name="coefficient covariance")
        if cov.shape != (self.p * self.d, self.p * self.d):
            raise InputError("coefficient covariance does not match p*d")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def coeff_mean_matrix(self) -> np.ndarray:
        """Mean coefficients as a (p, d) matrix."""
        return self.mean.reshape(self.p, self.d)

    def marginal(self, x) -> GaussianMeasure:
        """Predicted response law at covariate vector ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.p,):
            raise InputError(f"covariate has {x.size} entries, expected {self.p}")
        mean = x @ self.mean.reshape(self.p, self.d)
        blocks = self.cov.reshape(self.p, self.d, self.p, self.d)
        cov = np.einsum("i,j,irjs->rs", x, x, blocks)
        cov = 0.5 * (cov + cov.T)
        return GaussianMeasure(mean, cov)


def marginal(law: CoeffGaussian, x) -> GaussianMeasure:
    return law.marginal(x)


def smoothness_constant(design) -> float:
    """Curvature bound for the covariance objective: (2/n) sum ||x_i||^2."""
    X = _design(design)
    return float(2.0 * np.sum(X * X) / X.shape[0])


_design = as_design


def _response_covs(responses: Sequence, d: int | None = None) -> np.ndarray:
    covs = []
    for i, r in enumerate(responses):
        cov = r.cov if isinstance(r, GaussianMeasure) else np.asarray(r, dtype=float)
        cov = as_spd(cov, name=f"response covariance {i}")
        if d is None:
            d = cov.shape[0]
        elif cov.shape[0] != d:
            raise InputError("response covariances have mixed dimensions")
        covs.append(cov)
    return np.stack(covs)


def _gradient_matrix(q_cov, X, covs) -> tuple[np.ndarray, int]:
    """Average of kron(x x^T, T_i - I) over rows, plus regularization count."""
    n, p = X.shape
    d = covs.shape[1]
    if d == 1:
        # Scalar responses: the transport coefficient collapses to a
        # variance ratio, so the whole average is one weighted Gram matrix.
        pred = np.einsum("ij,jk,ik->i", X, q_cov, X)
        floor = REG_JITTER * np.where(pred > 0, pred, 1.0)
        low = pred <= floor
        src = np.where(low, pred + floor, pred)
        ratio = np.sqrt(covs[:, 0, 0] / src) - 1.0
        acc = (X * ratio[:, None]).T @ X / n
        return 0.5 * (acc + acc.T), int(np.count_nonzero(low))
    blocks = q_cov.reshape(p, d, p, d)
    eye = np.eye(d)
    acc = np.zeros((p * d, p * d))
    regularized = 0
    for i in range(n):
        x = X[i]
        pred = np.einsum("i,j,irjs->rs", x, x, blocks)
        pred = 0.5 * (pred + pred.T)
        coeff = gaussian_transport_coeff(pred, covs[i])
        regularized += int(coeff.regularized)
        acc += kron(np.outer(x, x), coeff.matrix - eye)
    acc /= n
    return 0.5 * (acc + acc.T), regularized


class BwStep(NamedTuple):
    cov: np.ndarray
    regularized: int


def bw_gradient_step(q_cov, design, response_covs, tau: float) -> BwStep:
    """One multiplicative covariance update with step size ``tau``."""
    X = _design(design)
    q_cov = as_spd(np.asarray(q_cov, dtype=float), name="coefficient covariance")
    covs = _response_covs(response_covs)
    if q_cov.shape[0] != X.shape[1] * covs.shape[1]:
        raise InputError("coefficient covariance does not match design and responses")
    if tau <= 0:
        raise InputError("step size must be positive")
    m0, regularized = _gradient_matrix(q_cov, X, covs)
    step = tau * m0 + np.eye(q_cov.shape[0])
    nxt = step @ q_cov @ step
    return BwStep(0.5 * (nxt + nxt.T), regularized)


def gradient_norm(q_cov, design, response_covs) -> float:
    """Riemannian gradient norm sqrt(tr(M0 Sigma M0)) at the current iterate."""
    X = _design(design)
    covs = _response_covs(response_covs)
    m0, _ = _gradient_matrix(q_cov, X, covs)
    val = float(np.trace(m0 @ q_cov @ m0))
    return float(np.sqrt(max(val, 0.0)))


def gaussian_foc_residual(law, design, responses) -> float:
    """First-order-condition residual: spectral norm of the gradient matrix
    restricted to the range of the coefficient covariance."""
    q_cov = law.cov if isinstance(law, CoeffGaussian) else as_spd(
        np.asarray(law, dtype=float), name="coefficient covariance"
    )
    X = _design(design)
    covs = _response_covs(responses)
    m0, _ = _gradient_matrix(q_cov, X, covs)
    vals, vecs = np.linalg.eigh(q_cov)
    keep = vals > 1e-12 * max(float(vals[-1]), 1e-300)
    if not np.any(keep):
        return 0.0
    basis = vecs[:, keep]
    return float(np.linalg.norm(basis.T @ m0 @ basis, ord=2))


def gaussian_objective(law: CoeffGaussian, design, responses) -> float:
    """Mean squared distance between predicted marginals and responses."""
    X = _design(design)
    if len(responses) != X.shape[0]:
        raise InputError("design and responses have different lengths")
    total = 0.0
    for x, resp in zip(X, responses):
        total += gaussian_w2_squared(law.marginal(x), resp)
    return total / X.shape[0]


@dataclass
class GaussianConfig:
    """Knobs for the covariance descent; mean part has no knobs."""

    steps: int = 300
    step_size: float | None = None
    tol: float = 0.0
    log_every: int = 10

    def __post_init__(self):
        if self.steps < 0:
            raise InputError("steps must be non-negative")
        if self.step_size is not None and self.step_size <= 0:
            raise InputError("step size must be positive")
        if self.tol < 0:
            raise InputError("tolerance must be non-negative")
        if self.log_every < 1:
            raise InputError("log_every must be at least 1")


def fit_gaussian(design, responses, config: GaussianConfig | None = None):
    """Fit a Gaussian coefficient law to Gaussian responses.

    Returns ``(law, report)``.  Raises DivergenceError if the logged
    objective increases ten times in a row or an iterate goes
    non-finite.
    """
    config = config or GaussianConfig()
    X = _design(design)
    n, p = X.shape
    if len(responses) != n:
        raise InputError("design and responses have different lengths")
    if not all(isinstance(r, GaussianMeasure) for r in responses):
        raise InputError("gaussian solver needs GaussianMeasure responses")
    d = responses[0].d
    covs = _response_covs(responses, d=d)
    means = np.stack([r.mean for r in responses])

    start = time.perf_counter()

    # Mean subproblem: ordinary least squares, solved exactly once.
    coeff_mean = pinv(X) @ means
    mean_sse = float(np.sum((means - X @ coeff_mean) ** 2) / n)

    tau = config.step_size if config.step_size is not None else 0.5 / smoothness_constant(X)
    dim = p * d
    cov = np.eye(dim)

    def objective(c):
        blocks = c.reshape(p, d, p, d)
        acc = 0.0
        for i in range(n):
            pred = np.einsum("i,j,irjs->rs", X[i], X[i], blocks)
            pred = 0.5 * (pred + pred.T)
            acc += gaussian_w2_squared(
                GaussianMeasure(np.zeros(d), pred), GaussianMeasure(np.zeros(d), covs[i])
            )
        return mean_sse + acc / n

    trace = [(0, objective(cov))]
    regularized_total = 0
    stop_reason = "budget"
    increases = 0
    last_logged = trace[0][1]
    ran = 0

    for k in range(config.steps):
        m0, reg = _gradient_matrix(cov, X, covs)
        step = tau * m0 + np.eye(dim)
        cov = step @ cov @ step
        cov = 0.5 * (cov + cov.T)
        regularized_total += reg
        ran = k + 1
        if not np.all(np.isfinite(cov)):
            raise DivergenceError("covariance iterate went non-finite", iteration=ran)
        if ran % config.log_every == 0 or ran == config.steps:
            value = objective(cov)
            if not np.isfinite(value):
                raise DivergenceError("objective went non-finite", iteration=ran)
            trace.append((ran, value))
            increases = increases + 1 if value > last_logged else 0
            last_logged = value
            if increases >= 10:
                raise DivergenceError(
                    "objective increased over ten consecutive logged steps",
                    iteration=ran,
                )
            if config.tol > 0.0:
                grad = float(np.sqrt(max(np.trace(m0 @ cov @ m0), 0.0)))
                if grad <= config.tol:
                    stop_reason = "tolerance"
                    break

    if trace[-1][0] != ran:
        trace.append((ran, objective(cov)))

    m0, _ = _gradient_matrix(cov, X, covs)
    final_grad = float(np.sqrt(max(np.trace(m0 @ cov @ m0), 0.0)))
    law = CoeffGaussian(mean=coeff_mean.reshape(-1), cov=cov, p=p, d=d)
    report = FitReport(
        objective_trace=trace,
        final_grad_norm=final_grad,
        iterations=ran,
        wall_time_s=time.perf_counter() - start,
        config=asdict(config),
        stop_reason=stop_reason,
        regularized_steps=regularized_total,
    )
    return law, report
