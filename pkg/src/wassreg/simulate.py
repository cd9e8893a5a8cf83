"""Synthetic data: template coefficient laws warped by random deformations.

Each dataset row draws one random map T from a named family, then pushes
m latent draws of the row's template marginal through that same map.
Families are built so that (a) E[T(y)] = y pointwise, which keeps the
template the population-optimal coefficient law, and (b) every drawn
map has derivative (eigenvalues, in two dimensions) inside the family's
band [alpha, beta], so the maps are strictly increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .data import Dataset
from .errors import InputError
from .gaussian import CoeffGaussian
from .rng import stream
from .transport import Empirical, GaussianMeasure

# Families used in the scalar-response comparison sweep.  The remaining
# scalar settings (the sharp sinusoid and the bump) stress the band
# checks but are kept out of the sweep.
SWEEP_FAMILIES_1D = ("additive", "radial", "location_scale", "sinusoidal", "tanh_warp")
FAMILIES_2D = ("additive2d", "radial2d", "rotation_scale2d")

_DEFAULTS = {
    "additive": {"sigma": 0.3},
    "radial": {"a": 0.3},
    "location_scale": {"sigma_s": 0.2},
    "sinusoidal": {"k": 1.2, "a_max": 0.25},
    "gaussian_bump": {"a_max": 0.8, "sigma_b": 1.0},
    "tanh_warp": {"k": 0.8, "a_max": 0.4},
    "additive2d": {"sigma": 0.3},
    "radial2d": {"a": 0.3},
    "rotation_scale2d": {"theta_sd": 0.3, "s_lo": 0.8, "s_hi": 1.2},
}

_DIMS = {name: (2 if name.endswith("2d") else 1) for name in _DEFAULTS}
_AFFINE = {
    "additive",
    "radial",
    "location_scale",
    "additive2d",
    "radial2d",
    "rotation_scale2d",
}


def _tight_band(family: str, params: dict) -> tuple[float, float]:
    if family in ("additive", "additive2d"):
        return (1.0, 1.0)
    if family in ("radial", "radial2d"):
        return (1.0 - params["a"], 1.0 + params["a"])
    if family == "location_scale":
        s = 3.0 * params["sigma_s"]
        return (1.0 - s, 1.0 + s)
    if family in ("sinusoidal", "tanh_warp"):
        s = params["k"] * params["a_max"]
        return (1.0 - s, 1.0 + s)
    if family == "gaussian_bump":
        return (1.0 - params["a_max"], 1.0 + params["a_max"])
    if family == "rotation_scale2d":
        return (params["s_lo"], params["s_hi"])
    raise InputError(f"unknown deformation family {family!r}")


@dataclass(frozen=True)
class DeformSpec:
    """A deformation family with parameters and its derivative band."""

    family: str
    params: dict
    alpha: float
    beta: float

    def __post_init__(self):
        if self.family not in _DEFAULTS:
            raise InputError(f"unknown deformation family {self.family!r}")
        known = set(_DEFAULTS[self.family])
        extra = set(self.params) - known
        if extra:
            raise InputError(f"{self.family}: unknown parameters {sorted(extra)}")
        missing = known - set(self.params)
        if missing:
            raise InputError(f"{self.family}: missing parameters {sorted(missing)}")
        for key, value in self.params.items():
            if not np.isfinite(value):
                raise InputError(f"{self.family}: parameter {key} is not finite")
            if key == "sigma_b":
                if value <= 0:
                    raise InputError(f"{self.family}: parameter {key} must be positive")
            elif value < 0:
                raise InputError(f"{self.family}: parameter {key} must be non-negative")
        if not (0.0 < self.alpha <= 1.0 <= self.beta):
            raise InputError("derivative band must satisfy 0 < alpha <= 1 <= beta")
        if self.family == "location_scale":
            # The band doubles as the truncation window of the scale draw;
            # symmetry around 1 keeps the scale mean-one.
            if abs((self.beta - 1.0) - (1.0 - self.alpha)) > 1e-12:
                raise InputError("location_scale band must be symmetric around 1")
            if self.alpha >= 1.0 or self.beta <= 1.0:
                raise InputError("location_scale band must have positive width")
        else:
            lo, hi = _tight_band(self.family, self.params)
            if lo <= 0.0:
                raise InputError(
                    f"{self.family}: parameters allow non-increasing maps (band low {lo:.3g})"
                )
            if self.alpha > lo + 1e-12 or self.beta < hi - 1e-12:
                raise InputError(
                    f"{self.family}: band [{self.alpha}, {self.beta}] does not contain "
                    f"the attainable derivative range [{lo}, {hi}]"
                )
        if self.family == "rotation_scale2d":
            if abs(self.params["s_lo"] + self.params["s_hi"] - 2.0) > 1e-12:
                raise InputError("rotation_scale2d scale range must average to 1")

    @property
    def d(self) -> int:
        return _DIMS[self.family]

    @property
    def is_affine(self) -> bool:
        return self.family in _AFFINE


def deform_spec(family: str, *, alpha: float | None = None, beta: float | None = None, **params) -> DeformSpec:
    """Build a DeformSpec with defaults filled in and the band derived."""
    if family not in _DEFAULTS:
        raise InputError(f"unknown deformation family {family!r}")
    merged = dict(_DEFAULTS[family])
    merged.update(params)
    if family == "location_scale":
        lo = 0.4 if alpha is None else alpha
        hi = 1.6 if beta is None else beta
    else:
        tight_lo, tight_hi = _tight_band(family, merged)
        lo = tight_lo if alpha is None else alpha
        hi = tight_hi if beta is None else beta
    return DeformSpec(family=family, params=merged, alpha=lo, beta=hi)


def figure_only_specs() -> list[DeformSpec]:
    """The two scalar settings kept out of the comparison sweep."""
    return [deform_spec("sinusoidal", k=2.5, a_max=0.30), deform_spec("gaussian_bump")]


# ---------------------------------------------------------------------------
# Drawing maps


def _draw_batch(spec: DeformSpec, rng: np.random.Generator, size: int) -> dict:
    params = spec.params
    fam = spec.family
    if fam in ("additive", "additive2d"):
        shape = size if spec.d == 1 else (size, 2)
        return {"shift": rng.normal(0.0, params["sigma"], shape)}
    if fam in ("radial", "radial2d"):
        return {"scale": 1.0 + rng.uniform(-params["a"], params["a"], size)}
    if fam == "location_scale":
        sig = params["sigma_s"]
        scale = rng.normal(1.0, sig, size)
        bad = (scale < spec.alpha) | (scale > spec.beta)
        while np.any(bad):
            scale[bad] = rng.normal(1.0, sig, int(bad.sum()))
            bad = (scale < spec.alpha) | (scale > spec.beta)
        shift = rng.normal(0.0, sig, size)
        return {"scale": scale, "shift": shift}
    if fam in ("sinusoidal", "gaussian_bump", "tanh_warp"):
        return {"amp": rng.uniform(-params["a_max"], params["a_max"], size)}
    if fam == "rotation_scale2d":
        theta = rng.normal(0.0, params["theta_sd"], size)
        scales = rng.uniform(params["s_lo"], params["s_hi"], (size, 2))
        c, s = np.cos(theta), np.sin(theta)
        s1, s2 = scales[:, 0], scales[:, 1]
        w = np.empty((size, 2, 2))
        w[:, 0, 0] = c * c * s1 + s * s * s2
        w[:, 1, 1] = s * s * s1 + c * c * s2
        w[:, 0, 1] = w[:, 1, 0] = c * s * (s1 - s2)
        return {"matrix": w}
    raise InputError(f"unknown deformation family {fam!r}")


def _apply_batch(spec: DeformSpec, drawn: dict, grid: np.ndarray) -> np.ndarray:
    """Apply a batch of drawn maps to a shared grid.

    Scalar families: grid (G,) -> (size, G).  Planar families:
    grid (G, 2) -> (size, G, 2).
    """
    fam = spec.family
    params = spec.params
    if fam == "additive":
        return grid[None, :] + drawn["shift"][:, None]
    if fam == "radial":
        return drawn["scale"][:, None] * grid[None, :]
    if fam == "location_scale":
        return drawn["scale"][:, None] * grid[None, :] + drawn["shift"][:, None]
    if fam == "sinusoidal":
        return grid[None, :] + drawn["amp"][:, None] * np.sin(params["k"] * grid)[None, :]
    if fam == "gaussian_bump":
        bump = grid * np.exp(-(grid**2) / (2.0 * params["sigma_b"] ** 2))
        return grid[None, :] + drawn["amp"][:, None] * bump[None, :]
    if fam == "tanh_warp":
        return grid[None, :] + drawn["amp"][:, None] * np.tanh(params["k"] * grid)[None, :]
    if fam == "additive2d":
        return grid[None, :, :] + drawn["shift"][:, None, :]
    if fam == "radial2d":
        return drawn["scale"][:, None, None] * grid[None, :, :]
    if fam == "rotation_scale2d":
        return np.einsum("sij,gj->sgi", drawn["matrix"], grid)
    raise InputError(f"unknown deformation family {fam!r}")


@dataclass(frozen=True)
class RealizedMap:
    """One drawn deformation, applicable to points of the right dimension."""

    spec: DeformSpec
    drawn: dict = field(repr=False)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.spec.d == 1:
            flat = points.reshape(-1)
            return _apply_batch(self.spec, _one(self.drawn), flat)[0].reshape(points.shape)
        pts = points.reshape(-1, 2)
        return _apply_batch(self.spec, _one(self.drawn), pts)[0].reshape(points.shape)

    def linear(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (W, b) with T(y) = W y + b; only affine families have one."""
        if not self.spec.is_affine:
            raise InputError(f"{self.spec.family} maps are not affine")
        d = self.spec.d
        fam = self.spec.family
        eye = np.eye(d)
        if fam in ("additive", "additive2d"):
            return eye, np.atleast_1d(np.asarray(self.drawn["shift"], dtype=float))
        if fam in ("radial", "radial2d"):
            return float(self.drawn["scale"]) * eye, np.zeros(d)
        if fam == "location_scale":
            return float(self.drawn["scale"]) * eye, np.atleast_1d(float(self.drawn["shift"]))
        return np.asarray(self.drawn["matrix"], dtype=float), np.zeros(2)


def _one(drawn: dict) -> dict:
    """Reshape a single stored draw back into a batch of size one."""
    return {k: np.asarray(v, dtype=float)[None, ...] for k, v in drawn.items()}


def sample_deformation(spec: DeformSpec, rng: np.random.Generator) -> RealizedMap:
    batch = _draw_batch(spec, rng, 1)
    return RealizedMap(spec=spec, drawn={k: v[0] for k, v in batch.items()})


# ---------------------------------------------------------------------------
# Family diagnostics


class C2Result(NamedTuple):
    deviation: float  # max over grid of |mean displacement|
    ratio: float  # same, standardized by the Monte Carlo standard error


class C3Result(NamedTuple):
    min_deriv: float
    max_deriv: float


def check_c2_montecarlo(spec: DeformSpec, grid, n_draws: int, rng: np.random.Generator) -> C2Result:
    """Monte Carlo check that drawn maps average to the identity."""
    if n_draws < 2:
        raise InputError("need at least two draws")
    drawn = _draw_batch(spec, rng, n_draws)
    if spec.d == 1:
        grid = np.asarray(grid, dtype=float).reshape(-1)
        vals = _apply_batch(spec, drawn, grid)
        dev = np.abs(vals.mean(axis=0) - grid)
        stderr = np.sqrt(vals.var(axis=0, ddof=1) / n_draws)
    else:
        grid = np.asarray(grid, dtype=float).reshape(-1, 2)
        vals = _apply_batch(spec, drawn, grid)
        dev = np.linalg.norm(vals.mean(axis=0) - grid, axis=1)
        stderr = np.sqrt(vals.var(axis=0, ddof=1).sum(axis=1) / n_draws)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dev == 0.0, 0.0, dev / stderr)
    return C2Result(float(dev.max()), float(np.max(ratio)))


def check_c3(
    spec: DeformSpec,
    grid,
    n_draws: int,
    rng: np.random.Generator,
    fd_step: float = 1e-5,
) -> C3Result:
    """Range of map derivatives over draws and grid, by central differences.

    In two dimensions the Jacobian is symmetrized and its eigenvalues
    are taken; the families only produce symmetric linear parts.
    """
    drawn = _draw_batch(spec, rng, n_draws)
    h = fd_step
    if spec.d == 1:
        grid = np.asarray(grid, dtype=float).reshape(-1)
        deriv = (_apply_batch(spec, drawn, grid + h) - _apply_batch(spec, drawn, grid - h)) / (2 * h)
        return C3Result(float(deriv.min()), float(deriv.max()))
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        cols.append((_apply_batch(spec, drawn, grid + e) - _apply_batch(spec, drawn, grid - e)) / (2 * h))
    jac = np.stack(cols, axis=-1)  # (draws, G, 2, 2)
    jac = 0.5 * (jac + np.swapaxes(jac, -1, -2))
    eigs = np.linalg.eigvalsh(jac)
    return C3Result(float(eigs.min()), float(eigs.max()))


# ---------------------------------------------------------------------------
# Templates and dataset generation


@dataclass(frozen=True)
class TemplateSpec:
    """A named coefficient law plus the covariate sampling range."""

    kind: str
    law: CoeffGaussian
    covariate_low: float = -2.0
    covariate_high: float = 2.0

    def __post_init__(self):
        if self.covariate_low >= self.covariate_high:
            raise InputError("covariate range is empty")

    @property
    def p(self) -> int:
        return self.law.p

    @property
    def d(self) -> int:
        return self.law.d


def univariate_template() -> TemplateSpec:
    """Scalar responses: intercept/slope coefficients, standard normal law."""
    law = CoeffGaussian(mean=np.array([0.0, 1.0]), cov=np.eye(2), p=2, d=1)
    return TemplateSpec(kind="univariate", law=law)


def bivariate_template() -> TemplateSpec:
    """Planar responses with correlated intercept and slope blocks."""
    mean = np.array([0.0, 0.0, 0.0, 1.0])
    a = np.eye(2)
    b = np.array([[0.5, 0.2], [0.2, 0.1]])
    c = np.diag([1.0, 0.3])
    cov = np.block([[a, b], [b.T, c]])
    law = CoeffGaussian(mean=mean, cov=cov, p=2, d=2)
    return TemplateSpec(kind="bivariate", law=law)


def custom_template(mean, cov, p: int, d: int, kind: str = "custom") -> TemplateSpec:
    return TemplateSpec(kind=kind, law=CoeffGaussian(mean=mean, cov=cov, p=p, d=d))


def sample_design(template: TemplateSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Intercept column plus uniform draws for the remaining covariates."""
    if n < 1:
        raise InputError("need at least one row")
    extra = rng.uniform(template.covariate_low, template.covariate_high, (n, template.p - 1))
    return np.hstack([np.ones((n, 1)), extra])


def _latents(truth, m: int, rng: np.random.Generator) -> np.ndarray:
    if truth.d == 1:
        return truth.mean[0] + np.sqrt(truth.cov[0, 0]) * rng.standard_normal(m)
    chol = np.linalg.cholesky(truth.cov)
    return truth.mean + rng.standard_normal((m, truth.d)) @ chol.T


def generate_dataset(
    template: TemplateSpec, spec: DeformSpec, n: int, m: int, seed: int
) -> Dataset:
    """Sampled responses: one map draw per row, m pushed latents each."""
    if template.d != spec.d:
        raise InputError(
            f"template dimension {template.d} does not match family dimension {spec.d}"
        )
    if m < 1:
        raise InputError("need at least one sample per row")
    design = sample_design(template, n, stream(seed, "covariates"))
    responses, truth = [], []
    for i in range(n):
        row_rng = stream(seed, f"row:{i}")
        realized = sample_deformation(spec, row_rng)
        marg = template.law.marginal(design[i])
        if np.linalg.eigvalsh(marg.cov)[0] <= 0:
            raise InputError(f"template marginal at row {i} is not positive definite")
        atoms = realized(_latents(marg, m, row_rng))
        responses.append(Empirical(atoms))
        truth.append(marg)
    return Dataset(
        design=design,
        responses=responses,
        truth=truth,
        seed=seed,
        meta={
            "template": template.kind,
            "family": spec.family,
            "params": dict(spec.params),
            "alpha": spec.alpha,
            "beta": spec.beta,
            "m": m,
        },
    )


def exact_responses(template: TemplateSpec, spec: DeformSpec, n: int, seed: int) -> Dataset:
    """Infinite-sample responses: the exact Gaussian image of each truth
    marginal under the drawn affine map.  Shares map draws with
    generate_dataset at the same seed."""
    if not spec.is_affine:
        raise InputError(f"{spec.family} has no closed-form response law")
    if template.d != spec.d:
        raise InputError(
            f"template dimension {template.d} does not match family dimension {spec.d}"
        )
    design = sample_design(template, n, stream(seed, "covariates"))
    responses, truth = [], []
    for i in range(n):
        row_rng = stream(seed, f"row:{i}")
        realized = sample_deformation(spec, row_rng)
        marg = template.law.marginal(design[i])
        w, b = realized.linear()
        mean = w @ marg.mean + b
        cov = w @ marg.cov @ w.T
        responses.append(GaussianMeasure(mean, 0.5 * (cov + cov.T)))
        truth.append(marg)
    return Dataset(
        design=design,
        responses=responses,
        truth=truth,
        seed=seed,
        meta={
            "template": template.kind,
            "family": spec.family,
            "params": dict(spec.params),
            "alpha": spec.alpha,
            "beta": spec.beta,
            "m": None,
        },
    )
