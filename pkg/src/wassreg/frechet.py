"""Global linear quantile / moment regression baselines.

The scalar baseline regresses the response quantile functions on the
covariates level by level, then repairs each predicted quantile curve
by isotonic projection.  The Gaussian baseline does the same with
means and covariance entries, followed by an eigenvalue clamp to get
back into the positive semi-definite cone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .linalg import as_design, pinv
from .transport import Empirical, GaussianMeasure, QuantileGrid, quantiles_of

DEFAULT_LEVELS = 200


def pava(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto non-decreasing sequences.

    Pool-adjacent-violators with block merging; O(k) for k values.
    """
    y = np.asarray(values, dtype=float).reshape(-1)
    if y.size == 0:
        raise InputError("cannot project an empty sequence")
    if not np.all(np.isfinite(y)):
        raise InputError("sequence has non-finite entries")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape != y.shape or np.any(w <= 0):
            raise InputError("weights must be positive and match the values")
    means: list[float] = []
    sizes: list[int] = []
    wsums: list[float] = []
    for value, weight in zip(y, w):
        means.append(float(value))
        wsums.append(float(weight))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, s2 = means.pop(), wsums.pop(), sizes.pop()
            m1, w1, s1 = means.pop(), wsums.pop(), sizes.pop()
            total = w1 + w2
            means.append((m1 * w1 + m2 * w2) / total)
            wsums.append(total)
            sizes.append(s1 + s2)
    return np.repeat(means, sizes)


@dataclass(frozen=True)
class FrechetModel1D:
    """Per-level linear coefficients for scalar responses."""

    levels: np.ndarray  # (k,)
    beta: np.ndarray  # (k, p)

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float).reshape(-1)
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 2 or beta.shape[0] != levels.size:
            raise InputError("coefficient rows must match the level grid")
        if np.any(np.diff(levels) <= 0) or levels[0] <= 0 or levels[-1] >= 1:
            raise InputError("levels must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "beta", beta)

    @property
    def p(self) -> int:
        return self.beta.shape[1]


def frechet_fit_1d(design, responses, k_levels: int = DEFAULT_LEVELS) -> FrechetModel1D:
    X = as_design(design)
    if len(responses) != X.shape[0]:
        raise InputError("design and responses have different lengths")
    if k_levels < 2:
        raise InputError("need at least two quantile levels")
    levels = np.linspace(0.001, 0.999, k_levels)
    curves = np.stack([quantiles_of(r, levels) for r in responses])  # (n, k)
    beta = (pinv(X) @ curves).T
    return FrechetModel1D(levels=levels, beta=beta)


def frechet_predict_1d(model: FrechetModel1D, x) -> QuantileGrid:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (model.p,):
        raise InputError(f"covariate has {x.size} entries, expected {model.p}")
    return QuantileGrid(model.levels, pava(model.beta @ x))


def frechet_coeff_law(model: FrechetModel1D) -> Empirical:
    """The per-level coefficient rows read as a uniform coefficient cloud."""
    return Empirical(model.beta)


@dataclass(frozen=True)
class FrechetModelGauss:
    """Linear coefficients for response means and covariance entries."""

    mean_coef: np.ndarray  # (p, d)
    cov_coef: np.ndarray  # (p, d*(d+1)/2), upper triangle row-major
    d: int

    def __post_init__(self):
        mean_coef = np.asarray(self.mean_coef, dtype=float)
        cov_coef = np.asarray(self.cov_coef, dtype=float)
        if mean_coef.ndim != 2 or mean_coef.shape[1] != self.d:
            raise InputError("mean coefficients must be (p, d)")
        tri = self.d * (self.d + 1) // 2
        if cov_coef.shape != (mean_coef.shape[0], tri):
            raise InputError("covariance coefficients must be (p, d*(d+1)/2)")
        object.__setattr__(self, "mean_coef", mean_coef)
        object.__setattr__(self, "cov_coef", cov_coef)

    @property
    def p(self) -> int:
        return self.mean_coef.shape[0]


def frechet_fit_gauss(design, responses) -> FrechetModelGauss:
    X = as_design(design)
    if len(responses) != X.shape[0]:
        raise InputError("design and responses have different lengths")
    if not all(isinstance(r, GaussianMeasure) for r in responses):
        raise InputError("gaussian baseline needs GaussianMeasure responses")
    d = responses[0].d
    if any(r.d != d for r in responses):
        raise InputError("responses have mixed dimensions")
    iu = np.triu_indices(d)
    means = np.stack([r.mean for r in responses])
    entries = np.stack([r.cov[iu] for r in responses])
    solver = pinv(X)
    return FrechetModelGauss(mean_coef=solver @ means, cov_coef=solver @ entries, d=d)


def frechet_predict_gauss(model: FrechetModelGauss, x) -> GaussianMeasure:
    """Predict at ``x``; the raw covariance is clamped to the PSD cone."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (model.p,):
        raise InputError(f"covariate has {x.size} entries, expected {model.p}")
    mean = x @ model.mean_coef
    d = model.d
    cov = np.zeros((d, d))
    iu = np.triu_indices(d)
    cov[iu] = x @ model.cov_coef
    cov = cov + np.triu(cov, 1).T
    vals, vecs = np.linalg.eigh(cov)
    clamped = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return GaussianMeasure(mean, 0.5 * (clamped + clamped.T))
