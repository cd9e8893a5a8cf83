"""Conditional inference on a fitted coefficient cloud.

Conditioning filters particles by windows on predicted values at chosen
covariate points; everything downstream (trajectory bands, exceedance
probabilities, summaries) is a pure query over the retained subset.
An empty retained set is a first-class outcome, not an error: for the
per-level baseline cloud some windows are structurally impossible, and
that emptiness is exactly what the queries are meant to surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateValueError, InputError
from .frechet import FrechetModel1D, frechet_coeff_law
from .linalg import as_spd
from .particle import ParticleCloud
from .transport import Empirical


@dataclass(frozen=True)
class Constraint:
    """Window on the predicted value at one covariate point."""

    x: np.ndarray
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise InputError("constraint covariate has non-finite entries")
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise InputError("constraint bounds cannot be NaN")
        if self.lo > self.hi:
            raise InputError(f"empty constraint window [{self.lo}, {self.hi}]")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class ConditionSpec:
    constraints: tuple

    def __post_init__(self):
        constraints = tuple(self.constraints)
        if not constraints:
            raise InputError("need at least one constraint")
        for c in constraints:
            if not isinstance(c, Constraint):
                raise InputError("constraints must be Constraint instances")
        object.__setattr__(self, "constraints", constraints)


def _coeff_matrix(cloud) -> np.ndarray:
    if isinstance(cloud, ParticleCloud):
        return cloud.particles
    if isinstance(cloud, FrechetModel1D):
        cloud = frechet_coeff_law(cloud)
    if isinstance(cloud, Empirical):
        atoms = cloud.atoms
        return atoms[:, None] if atoms.ndim == 1 else atoms
    arr = np.asarray(cloud, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InputError("coefficient cloud must be a (m, p) array")
    if not np.all(np.isfinite(arr)):
        raise InputError("coefficient cloud has non-finite entries")
    return arr


def select(cloud, spec: ConditionSpec) -> np.ndarray:
    """Indices of particles satisfying every window; may be empty."""
    coeff = _coeff_matrix(cloud)
    mask = np.ones(coeff.shape[0], dtype=bool)
    for c in spec.constraints:
        if c.x.shape != (coeff.shape[1],):
            raise InputError(
                f"constraint covariate has {c.x.size} entries, expected {coeff.shape[1]}"
            )
        preds = coeff @ c.x
        mask &= (preds >= c.lo) & (preds <= c.hi)
    return np.nonzero(mask)[0]


def _midpoint_percentile(values: np.ndarray, percents) -> np.ndarray:
    """Percentiles by interpolating the midpoint-rank empirical CDF."""
    v = np.sort(np.asarray(values, dtype=float))
    mids = (np.arange(v.size) + 0.5) / v.size
    return np.interp(np.asarray(percents, dtype=float) / 100.0, mids, v)


@dataclass(frozen=True)
class BandResult:
    """Conditional trajectory: mean and percentile bands per grid point.

    ``retained == 0`` means the scenario is empty; mean and bands are
    then None.
    """

    retained: int
    mean: np.ndarray | None
    bands: dict | None  # level -> (lo array, hi array)


def conditional_band(cloud, indices, x_grid, levels: Sequence[float] = (75.0, 99.0)) -> BandResult:
    coeff = _coeff_matrix(cloud)
    indices = np.asarray(indices, dtype=int)
    grid = np.asarray(x_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.ndim != 2 or grid.shape[1] != coeff.shape[1]:
        raise InputError("grid rows must match the coefficient dimension")
    for lvl in levels:
        if not 0.0 < lvl < 100.0:
            raise InputError(f"band level {lvl} must lie in (0, 100)")
    if indices.size == 0:
        return BandResult(retained=0, mean=None, bands=None)
    preds = coeff[indices] @ grid.T  # (retained, G)
    mean = preds.mean(axis=0)
    bands = {}
    for lvl in levels:
        pair = ((100.0 - lvl) / 2.0, (100.0 + lvl) / 2.0)
        lo = np.empty(grid.shape[0])
        hi = np.empty(grid.shape[0])
        for g in range(grid.shape[0]):
            lo[g], hi[g] = _midpoint_percentile(preds[:, g], pair)
        bands[float(lvl)] = (lo, hi)
    return BandResult(retained=int(indices.size), mean=mean, bands=bands)


def exceedance_prob(cloud, indices, x, threshold: float) -> float:
    """Fraction of retained particles predicting at or above the threshold."""
    coeff = _coeff_matrix(cloud)
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        raise DegenerateValueError("empty conditional scenario: no particles retained")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (coeff.shape[1],):
        raise InputError(f"covariate has {x.size} entries, expected {coeff.shape[1]}")
    preds = coeff[indices] @ x
    return float(np.mean(preds >= threshold))


@dataclass(frozen=True)
class CoeffSummary:
    mean: np.ndarray
    std: np.ndarray
    q_low: np.ndarray  # 2.5%
    q_high: np.ndarray  # 97.5%
    prob_positive: np.ndarray
    cov: np.ndarray
    corr: np.ndarray
    zero_variance: np.ndarray


def coeff_summary(cloud) -> CoeffSummary:
    """Per-coordinate moments, tail quantiles, sign probabilities, and the
    covariance/correlation of the coefficient cloud (ddof=1)."""
    coeff = _coeff_matrix(cloud)
    m, p = coeff.shape
    if m < 2:
        raise InputError("summaries need at least two particles")
    mean = coeff.mean(axis=0)
    cov = np.atleast_2d(np.cov(coeff, rowvar=False, ddof=1))
    std = np.sqrt(np.diag(cov))
    zero = std <= 1e-15 * max(1.0, float(np.abs(coeff).max()))
    denom = np.where(zero, 1.0, std)
    corr = cov / denom[:, None] / denom[None, :]
    corr[zero, :] = 0.0
    corr[:, zero] = 0.0
    np.fill_diagonal(corr, np.where(zero, 0.0, 1.0))
    q = np.stack([_midpoint_percentile(coeff[:, j], (2.5, 97.5)) for j in range(p)])
    return CoeffSummary(
        mean=mean,
        std=std,
        q_low=q[:, 0],
        q_high=q[:, 1],
        prob_positive=(coeff > 0).mean(axis=0),
        cov=cov,
        corr=corr,
        zero_variance=zero,
    )


class SchurResult(NamedTuple):
    cov: np.ndarray
    regularized: bool


def conditional_variance_schur(cov, given: int) -> SchurResult:
    """Covariance of the remaining coordinates given one coordinate:
    S22 - S21 S11^{-1} S12, with a floor on S11 when it is singular."""
    cov = as_spd(cov, name="covariance")
    k = cov.shape[0]
    if not 0 <= given < k:
        raise InputError(f"given index {given} out of range for a {k}x{k} matrix")
    if k < 2:
        raise InputError("need at least two coordinates to condition")
    rest = [j for j in range(k) if j != given]
    s11 = float(cov[given, given])
    s12 = cov[given, rest]
    s22 = cov[np.ix_(rest, rest)]
    tol = 1e-12 * max(float(np.max(np.diag(cov))), 1e-300)
    regularized = s11 <= tol
    s11_use = s11 + tol if regularized else s11
    out = s22 - np.outer(s12, s12) / s11_use
    out = 0.5 * (out + out.T)
    vals, vecs = np.linalg.eigh(out)
    out = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return SchurResult(cov=0.5 * (out + out.T), regularized=bool(regularized))
