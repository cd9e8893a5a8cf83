"""Exact enumeration oracle for tiny discrete instances.

With n uniform empirical responses of m atoms each, couplings supported
on matchings are enough: the cost is linear in the coupling and the
extreme points of the uniform coupling polytope are permutation tensors.
The oracle fixes the first response to the identity and enumerates the
remaining (n-1) permutations, scoring each m-tuple coupling by the
closed-form least-squares cost of its tuples.  An LP over the full
coupling polytope is provided as an independent cross-check for m = 2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from .errors import EnumerationLimitError, InputError
from .linalg import as_design, pinv, spd_sqrt
from .transport import Empirical

MAX_ROWS = 4
MAX_ATOMS = 4


@dataclass(frozen=True)
class DiscreteProblem:
    design: np.ndarray
    responses: list

    def __post_init__(self):
        design = as_design(self.design)
        if len(self.responses) != design.shape[0]:
            raise InputError("design and responses have different lengths")
        if design.shape[0] > MAX_ROWS:
            raise EnumerationLimitError(
                f"enumeration supports at most n={MAX_ROWS} rows, got {design.shape[0]}"
            )
        atoms = []
        for i, r in enumerate(self.responses):
            if not isinstance(r, Empirical):
                raise InputError(f"response {i} must be an empirical measure")
            a = r.atoms if r.atoms.ndim == 2 else r.atoms[:, None]
            atoms.append(a)
        counts = {a.shape[0] for a in atoms}
        if len(counts) != 1:
            raise InputError("responses must share the same atom count")
        dims = {a.shape[1] for a in atoms}
        if len(dims) != 1:
            raise InputError("responses must share the same dimension")
        m = counts.pop()
        if m > MAX_ATOMS:
            raise EnumerationLimitError(
                f"enumeration supports at most m={MAX_ATOMS} atoms, got {m}"
            )
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "_atoms", np.stack(atoms))  # (n, m, d)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    @property
    def m(self) -> int:
        return self._atoms.shape[1]

    @property
    def d(self) -> int:
        return self._atoms.shape[2]

    @property
    def atoms(self) -> np.ndarray:
        return self._atoms


def inner_ols_cost(y_tuple, design) -> tuple[float, np.ndarray]:
    """Least-squares cost of fitting one point tuple, with the minimal-norm
    coefficient matrix: E = (1/n) sum_i ||y_i - B^T x_i||^2."""
    X = as_design(design)
    Y = np.asarray(y_tuple, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != X.shape[0]:
        raise InputError("tuple length does not match the design")
    B = pinv(X) @ Y
    resid = Y - X @ B
    return float(np.sum(resid * resid) / X.shape[0]), B


class OracleResult(NamedTuple):
    value: float
    matching: np.ndarray  # (n, m) atom indices, first row the identity
    coeff_law: Empirical  # m stacked coefficient vectors, uniform weights
    explained_variance: float
    marginal_energy: float


def solve_multimarginal(prob: DiscreteProblem) -> OracleResult:
    """Enumerate permutation couplings and return the exact minimizer.

    Ties are broken lexicographically (the first minimizer in iteration
    order of the permutation tuples is kept).  Also reports both sides
    of the marginal decomposition: value = marginal_energy - maximal
    explained variance.
    """
    X = prob.design
    atoms = prob.atoms  # (n, m, d)
    n, m, d = atoms.shape
    solver = pinv(X)  # (p, n)
    half = spd_sqrt(pinv(X.T @ X)) @ X.T  # (p, n)

    marginal_energy = float(np.sum(atoms * atoms) / (n * m))

    base = np.arange(m)
    best_value = np.inf
    best_ev = -np.inf
    best_idx = None
    best_coeff = None
    for combo in itertools.product(itertools.permutations(range(m)), repeat=n - 1):
        idx = np.vstack([base] + [np.asarray(perm) for perm in combo])  # (n, m)
        tuples = np.swapaxes(atoms[np.arange(n)[:, None], idx], 0, 1)  # (m, n, d)
        coeff = np.einsum("pn,knd->kpd", solver, tuples)
        resid = tuples - np.einsum("np,kpd->knd", X, coeff)
        value = float(np.sum(resid * resid) / (n * m))
        ev = float(np.sum(np.einsum("pn,knd->kpd", half, tuples) ** 2) / (n * m))
        if value < best_value:
            best_value = value
            best_idx = idx
            best_coeff = coeff
        if ev > best_ev:
            best_ev = ev
    law = Empirical(best_coeff.reshape(m, -1))
    return OracleResult(
        value=best_value,
        matching=best_idx,
        coeff_law=law,
        explained_variance=best_ev,
        marginal_energy=marginal_energy,
    )


def solve_multimarginal_lp(prob: DiscreteProblem) -> float:
    """Linear program over the full coupling polytope (no permutation
    restriction); independent cross-check of the enumeration."""
    X = prob.design
    atoms = prob.atoms
    n, m, d = atoms.shape
    cells = m**n
    if cells > 4096:
        raise EnumerationLimitError(f"LP grid of {cells} cells is too large")

    grid = np.array(list(itertools.product(range(m), repeat=n)))  # (cells, n)
    tuples = atoms[np.arange(n)[None, :], grid]  # (cells, n, d)
    solver = pinv(X)
    coeff = np.einsum("pn,knd->kpd", solver, tuples)
    resid = tuples - np.einsum("np,kpd->knd", X, coeff)
    cost = np.sum(resid * resid, axis=(1, 2)) / n

    rows, cols, data = [], [], []
    rhs = []
    row = 0
    for r in range(n):
        for a in range(m):
            mask = np.nonzero(grid[:, r] == a)[0]
            rows.extend([row] * mask.size)
            cols.extend(mask.tolist())
            data.extend([1.0] * mask.size)
            rhs.append(1.0 / m)
            row += 1
    from scipy.sparse import coo_matrix

    A = coo_matrix((data, (rows, cols)), shape=(row, cells))
    res = linprog(cost, A_eq=A, b_eq=rhs, bounds=(0, None), method="highs")
    if not res.success:
        raise InputError(f"coupling LP failed: {res.message}")
    return float(res.fun)
