r"""Closed-form optimal-transport primitives.

This module owns the measure representations used everywhere else
(empirical clouds, quantile grids, Gaussians) and the two regimes where
2-Wasserstein geometry is available in closed form:

- univariate measures, where optimal transport is quantile matching: the
  squared distance is :math:`\int_0^1 (F_a^{-1} - F_b^{-1})^2`, and the
  Brenier map between an empirical source and any target is the composed
  map :math:`z \mapsto F_{\mathrm{target}}^{-1}(\hat g(z))` with
  :math:`\hat g` the source's empirical CDF;
- Gaussian measures, where the squared distance is the Bures metric plus
  the squared mean gap, and the transport map is linear with a symmetric
  PSD coefficient.

Conventions used throughout: empirical CDFs assign midpoint ranks
:math:`(k - 1/2)/m` to sorted atoms (so the top atom never maps to
quantile level 1), and mixed-representation distances integrate squared
quantile differences with the trapezoid rule over the union of the fixed
500-level grid on [0.001, 0.999] and any operand's own levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtri

from .errors import ConvergenceError, InputError
from .linalg import as_spd, spd_sqrt, spd_sqrt_and_invsqrt

#: fixed level grid for mixed-representation distances
LEVEL_GRID: NDArray[np.float64] = np.linspace(0.001, 0.999, 500)

#: relative jitter added to singular transport sources
REG_JITTER = 1e-9

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


# ---------------------------------------------------------------------------
# measure representations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Empirical:
    """Uniform empirical measure: sorted atoms with weights 1/m.

    ``atoms`` has shape (m,) for univariate measures (sorted ascending)
    and (m, d) for multivariate ones (rows sorted lexicographically).
    """

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 2 and atoms.shape[1] == 1:
            atoms = atoms[:, 0]
        if atoms.ndim == 1:
            atoms = np.sort(atoms)
        elif atoms.ndim == 2:
            order = np.lexsort(atoms.T[::-1])
            atoms = atoms[order]
        else:
            raise InputError(f"atoms must be 1- or 2-dimensional, got {atoms.ndim}")
        if atoms.shape[0] < 1:
            raise InputError("empirical measure needs at least one atom")
        if not np.all(np.isfinite(atoms)):
            raise InputError("empirical atoms must be finite")
        object.__setattr__(self, "atoms", atoms)

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return 1 if self.atoms.ndim == 1 else self.atoms.shape[1]


@dataclass(frozen=True)
class GaussianMeasure:
    """Gaussian measure N(mean, cov) with an SPD-validated covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1:
            raise InputError(f"Gaussian mean must be a vector, got shape {mean.shape}")
        if not np.all(np.isfinite(mean)):
            raise InputError("Gaussian mean must be finite")
        cov = as_spd(cov, "Gaussian covariance")
        if cov.shape[0] != mean.shape[0]:
            raise InputError(
                f"mean dim {mean.shape[0]} does not match cov dim {cov.shape[0]}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class QuantileGrid:
    """A univariate quantile function tabulated on levels in (0, 1)."""

    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if levels.ndim != 1 or values.shape != levels.shape:
            raise InputError("levels and values must be equal-length vectors")
        if levels.size < 1:
            raise InputError("quantile grid needs at least one level")
        if np.any(levels <= 0.0) or np.any(levels >= 1.0):
            raise InputError("levels must lie strictly inside (0, 1)")
        if np.any(np.diff(levels) <= 0.0):
            raise InputError("levels must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise InputError("quantile values must be finite")
        scale = max(1.0, float(np.max(np.abs(values))))
        if np.any(np.diff(values) < -1e-12 * scale):
            raise InputError("quantile values must be non-decreasing")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", np.maximum.accumulate(values))

    @property
    def k(self) -> int:
        return self.levels.size


# ---------------------------------------------------------------------------
# quantile evaluation
# ---------------------------------------------------------------------------


def _as_univariate(dist) -> object:
    if isinstance(dist, Empirical):
        if dist.d != 1:
            raise InputError("expected a univariate measure")
        return dist
    if isinstance(dist, (QuantileGrid, GaussianMeasure)):
        if isinstance(dist, GaussianMeasure) and dist.d != 1:
            raise InputError("expected a univariate measure")
        return dist
    return Empirical(np.asarray(dist, dtype=float))


def quantiles_of(dist, levels: ArrayLike) -> NDArray[np.float64]:
    """Evaluate the quantile function of a univariate measure.

    Empirical measures use midpoint ranks with linear interpolation
    between sorted atoms (clamped at the extremes); quantile grids
    interpolate their tabulated values; univariate Gaussians are exact.
    """
    dist = _as_univariate(dist)
    levels = np.asarray(levels, dtype=float)
    if isinstance(dist, Empirical):
        mids = (np.arange(dist.m) + 0.5) / dist.m
        return np.interp(levels, mids, dist.atoms)
    if isinstance(dist, QuantileGrid):
        return np.interp(levels, dist.levels, dist.values)
    mean = float(dist.mean[0])
    std = float(np.sqrt(dist.cov[0, 0]))
    return mean + std * ndtri(levels)


def quantile_grid_of(dist, levels: ArrayLike = LEVEL_GRID) -> QuantileGrid:
    """Resample any univariate measure onto a quantile grid."""
    levels = np.asarray(levels, dtype=float)
    return QuantileGrid(levels, quantiles_of(dist, levels))


# ---------------------------------------------------------------------------
# 1-D distances and maps
# ---------------------------------------------------------------------------


def _w2sq_empirical(x: NDArray, y: NDArray) -> float:
    # Exact integral of the squared gap between the two step quantile
    # functions, split at the union of their level breakpoints.
    big, small = x.size, y.size
    if big == small:
        return float(np.mean((x - y) ** 2))
    breaks = np.union1d(np.arange(1, big + 1) / big, np.arange(1, small + 1) / small)
    edges = np.concatenate(([0.0], breaks))
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    ix = np.minimum((mids * big).astype(int), big - 1)
    iy = np.minimum((mids * small).astype(int), small - 1)
    return float(np.sum(widths * (x[ix] - y[iy]) ** 2))


def w2_squared_1d(a, b) -> float:
    r"""Squared 2-Wasserstein distance between univariate measures.

    Empirical-vs-empirical pairs are computed exactly by matching the two
    step quantile functions (for equal atom counts this is the mean
    squared difference of sorted atoms). Any pair involving a quantile
    grid or an analytic Gaussian integrates the squared quantile gap by
    the trapezoid rule over the common level grid (the fixed 500-level
    grid joined with the operands' own levels).
    """
    a = _as_univariate(a)
    b = _as_univariate(b)
    if isinstance(a, Empirical) and isinstance(b, Empirical):
        return _w2sq_empirical(a.atoms, b.atoms)
    levels = LEVEL_GRID
    for side in (a, b):
        if isinstance(side, QuantileGrid):
            levels = np.union1d(levels, side.levels)
    gap = quantiles_of(a, levels) - quantiles_of(b, levels)
    return max(float(_trapezoid(gap**2, levels)), 0.0)


def brenier_1d(source, target) -> Callable[[ArrayLike], NDArray[np.float64]]:
    r"""Monotone transport map from an empirical source to a target.

    Returns the composed map :math:`z \mapsto F_{\mathrm{target}}^{-1}(\hat
    g(z))` where :math:`\hat g` is the source's empirical CDF with midrank
    tie handling. The map is non-decreasing and single valued; solvers
    that need per-particle tie breaking rank their atoms directly.
    """
    source = _as_univariate(source)
    if not isinstance(source, Empirical):
        raise InputError("brenier_1d source must be an empirical measure")
    atoms = source.atoms
    m = source.m
    target = _as_univariate(target)

    def transport(z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        lo = np.searchsorted(atoms, z, side="left")
        hi = np.searchsorted(atoms, z, side="right")
        levels = np.clip((lo + hi) / (2.0 * m), 0.5 / m, 1.0 - 0.5 / m)
        return quantiles_of(target, levels)

    return transport


def barycenter_1d(grids: Sequence[QuantileGrid], weights: ArrayLike) -> QuantileGrid:
    """Weighted Wasserstein barycenter of univariate quantile grids.

    In one dimension the barycenter's quantile function is the weighted
    average of the input quantile functions, so the inputs must share one
    level grid (resample with :func:`quantile_grid_of` first).
    """
    if not grids:
        raise InputError("barycenter needs at least one input")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(grids),):
        raise InputError("one weight per input required")
    if np.any(weights < 0.0) or abs(float(weights.sum()) - 1.0) > 1e-9:
        raise InputError("weights must be a probability vector (sum 1 within 1e-9)")
    levels = grids[0].levels
    for g in grids[1:]:
        if g.levels.shape != levels.shape or not np.array_equal(g.levels, levels):
            raise InputError("inputs must share one level grid; resample first")
    values = np.zeros_like(levels)
    for w, g in zip(weights, grids):
        values = values + w * g.values
    return QuantileGrid(levels, values)


# ---------------------------------------------------------------------------
# Gaussian distances and maps
# ---------------------------------------------------------------------------


def gaussian_w2_squared(a: GaussianMeasure, b: GaussianMeasure) -> float:
    r"""Squared 2-Wasserstein distance between Gaussian measures.

    .. math::
        W_2^2 = \|m_a - m_b\|^2 + \operatorname{tr}\Sigma_a
        + \operatorname{tr}\Sigma_b
        - 2\operatorname{tr}\bigl(\Sigma_a^{1/2}\Sigma_b\Sigma_a^{1/2}\bigr)^{1/2}.
    """
    if a.d != b.d:
        raise InputError(f"dimension mismatch: {a.d} vs {b.d}")
    root_a = spd_sqrt(a.cov)
    cross = spd_sqrt(root_a @ b.cov @ root_a)
    bures = float(np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    gap = float(np.sum((a.mean - b.mean) ** 2))
    return gap + max(bures, 0.0)


class TransportCoeff(NamedTuple):
    """Linear Gaussian transport coefficient plus a regularization flag."""

    matrix: np.ndarray
    regularized: bool


def gaussian_transport_coeff(src: ArrayLike, dst: ArrayLike) -> TransportCoeff:
    r"""Coefficient of the linear map pushing N(0, src) to N(0, dst).

    .. math::
        T = \mathrm{src}^{-1/2}\bigl(\mathrm{src}^{1/2}\,\mathrm{dst}\,
        \mathrm{src}^{1/2}\bigr)^{1/2}\mathrm{src}^{-1/2},

    the symmetric PSD matrix with ``T @ src @ T == dst``. A source whose
    smallest eigenvalue sits at or below the jitter floor is regularized
    by adding ``REG_JITTER * tr(src)/d`` to its diagonal; the returned
    flag records that this happened.
    """
    src = as_spd(src, "transport source")
    dst = as_spd(dst, "transport target")
    if src.shape != dst.shape:
        raise InputError("source and target covariance dims differ")
    d = src.shape[0]
    scale = float(np.trace(src)) / d
    floor = REG_JITTER * (scale if scale > 0.0 else 1.0)
    eigvals = np.linalg.eigvalsh(src)
    regularized = bool(eigvals[0] <= floor)
    if regularized:
        src = src + floor * np.eye(d)
    root, inv_root = spd_sqrt_and_invsqrt(src)
    mid = spd_sqrt(root @ dst @ root)
    coeff = inv_root @ mid @ inv_root
    return TransportCoeff(0.5 * (coeff + coeff.T), regularized)


def gaussian_barycenter_fixedpoint(
    covs: Sequence[ArrayLike],
    weights: ArrayLike,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> NDArray[np.float64]:
    r"""Covariance of the Gaussian barycenter by fixed-point iteration.

    Iterates :math:`S \leftarrow S^{-1/2}\bigl(\sum_i \lambda_i
    (S^{1/2}\Sigma_i S^{1/2})^{1/2}\bigr)^2 S^{-1/2}` from the Euclidean
    mean of the covariances, and returns the first iterate whose
    barycenter-equation residual :math:`\|\sum_i \lambda_i (S^{1/2}
    \Sigma_i S^{1/2})^{1/2} - S\|_F` is at most ``tol * ||S||_F``.
    """
    if not covs:
        raise InputError("barycenter needs at least one covariance")
    mats = [as_spd(c, f"covariance {i}") for i, c in enumerate(covs)]
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(mats),):
        raise InputError("one weight per covariance required")
    if np.any(weights < 0.0) or abs(float(weights.sum()) - 1.0) > 1e-9:
        raise InputError("weights must be a probability vector (sum 1 within 1e-9)")

    s = sum(w * c for w, c in zip(weights, mats))
    residual = np.inf
    for _ in range(max_iter):
        root, inv_root = spd_sqrt_and_invsqrt(s)
        mixed = sum(w * spd_sqrt(root @ c @ root) for w, c in zip(weights, mats))
        residual = float(np.linalg.norm(mixed - s)) / max(
            float(np.linalg.norm(s)), np.finfo(float).tiny
        )
        if residual <= tol:
            return s
        s = inv_root @ mixed @ mixed @ inv_root
        s = 0.5 * (s + s.T)
    raise ConvergenceError(
        f"barycenter fixed point stalled at residual {residual:.3e} "
        f"after {max_iter} iterations",
        residual=residual,
    )


# ---------------------------------------------------------------------------
# representation dispatch
# ---------------------------------------------------------------------------


def w2_squared(a, b) -> float:
    """Squared W2 between two measures, routed by representation.

    Gaussian pairs use the closed form; anything univariate (empirical,
    quantile grid, or 1-D Gaussian mixed with either) goes through the
    quantile route. Multivariate empirical measures are not comparable
    here.
    """
    if isinstance(a, GaussianMeasure) and isinstance(b, GaussianMeasure):
        return gaussian_w2_squared(a, b)
    return w2_squared_1d(a, b)
