r"""Dense symmetric linear-algebra kernels for the Gaussian solver.

Square roots and inverse square roots of covariance matrices are computed
through the symmetric eigendecomposition with eigenvalue clamping at zero,
which stays well behaved for the near-singular covariances that show up
mid-descent. The pseudo-inverse uses a relative singular-value cutoff so
that all least-squares solves are scale invariant.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InputError

#: relative symmetry tolerance accepted by :func:`as_spd`
SYM_TOL = 1e-10

#: eigenvalues below ``-EIG_TOL * lambda_max`` are rejected, above are clamped to 0
EIG_TOL = 1e-10

#: relative singular-value cutoff of :func:`pinv`
PINV_RCOND = 1e-12


def as_design(design: ArrayLike) -> NDArray[np.float64]:
    """Validate a covariate matrix; a 1-d array becomes a single column."""
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InputError("design must be a non-empty (n, p) array")
    if not np.all(np.isfinite(x)):
        raise InputError("design contains non-finite entries")
    return x


def as_spd(a: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    r"""Validate a symmetric positive semi-definite matrix.

    Parameters
    ----------
    a : array-like, shape (d, d)
        Candidate matrix. Must be symmetric up to ``SYM_TOL`` relative to
        its largest absolute entry, with eigenvalues no smaller than
        ``-EIG_TOL`` times the largest eigenvalue.
    name : str
        Label used in error messages.

    Returns
    -------
    ndarray, shape (d, d)
        The symmetrized matrix with any tiny negative eigenvalues clamped
        to zero.

    Raises
    ------
    InputError
        If ``a`` is not square, not finite, not symmetric, or has a
        genuinely negative eigenvalue.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0 and np.max(np.abs(a - a.T)) > SYM_TOL * scale:
        raise InputError(f"{name} is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(sym)
    top = max(w[-1], 0.0)
    if w[0] < -EIG_TOL * max(top, 1.0):
        raise InputError(f"{name} has negative eigenvalue {w[0]:.3e}")
    if w[0] < 0.0:
        w = np.clip(w, 0.0, None)
        sym = (v * w) @ v.T
        sym = 0.5 * (sym + sym.T)
    return sym


def spd_sqrt(a: ArrayLike) -> NDArray[np.float64]:
    r"""Symmetric PSD square root, :math:`S` with :math:`S S = A`.

    Computed as :math:`V \sqrt{\Lambda} V^\top` from the eigendecomposition
    of the symmetrized input; eigenvalues are clamped at zero first.
    """
    a = as_spd(a, "spd_sqrt input")
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def spd_sqrt_and_invsqrt(
    a: ArrayLike, floor: float = 0.0
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    r"""Square root and pseudo-inverse square root in one decomposition.

    Eigenvalues at or below ``floor`` contribute zero to the inverse root,
    so the pair is usable on PSD matrices with a known regularization
    floor; for strictly positive definite input it is the exact pair
    :math:`(A^{1/2}, A^{-1/2})`.
    """
    a = as_spd(a, "spd_sqrt input")
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    root = np.sqrt(w)
    inv_root = np.where(root > floor, 1.0 / np.where(root > floor, root, 1.0), 0.0)
    s = (v * root) @ v.T
    si = (v * inv_root) @ v.T
    return 0.5 * (s + s.T), 0.5 * (si + si.T)


def pinv(a: ArrayLike) -> NDArray[np.float64]:
    """Moore-Penrose pseudo-inverse with relative cutoff ``PINV_RCOND``.

    Singular values below ``PINV_RCOND`` times the largest are treated as
    zero, so the result satisfies the four Penrose identities to high
    accuracy on rank-deficient input as well.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InputError("pinv input has non-finite entries")
    return np.linalg.pinv(a, rcond=PINV_RCOND)


def kron(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Kronecker product, block ``a[i, j] * b``."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def vec_t(b: ArrayLike) -> NDArray[np.float64]:
    r"""Vectorize the transpose of a coefficient matrix.

    For ``b`` of shape (p, d), stacks the columns of :math:`B^\top`
    (equivalently the rows of ``b``) into a vector of length ``p * d``,
    covariate-major with blocks of size ``d``. This is the coordinate
    system of the Gaussian coefficient law throughout the package.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 2:
        raise InputError(f"vec_t expects a matrix, got shape {b.shape}")
    return b.reshape(-1)


def unvec_t(v: ArrayLike, p: int, d: int) -> NDArray[np.float64]:
    """Inverse of :func:`vec_t`: rebuild the (p, d) coefficient matrix."""
    v = np.asarray(v, dtype=float)
    if v.size != p * d:
        raise InputError(f"cannot reshape length {v.size} into ({p}, {d})")
    return v.reshape(p, d)
