"""Evaluation: in-sample error, Wasserstein R^2, LOO-CV, leverage
diagnostics, and the shrinking-error study over growing designs."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .data import Dataset
from .errors import ConvergenceError, DegenerateValueError, InputError, WassregError
from .frechet import FrechetModel1D, FrechetModelGauss, frechet_predict_1d, frechet_predict_gauss
from .gaussian import CoeffGaussian, GaussianConfig, fit_gaussian
from .linalg import as_design, pinv
from .particle import ParticleCloud
from .rng import subseed
from .simulate import DeformSpec, TemplateSpec, exact_responses
from .transport import (
    LEVEL_GRID,
    Empirical,
    GaussianMeasure,
    QuantileGrid,
    gaussian_barycenter_fixedpoint,
    gaussian_w2_squared,
    quantiles_of,
    w2_squared,
)


def thread_count() -> int:
    """Worker count for embarrassingly parallel loops (WASSREG_THREADS)."""
    raw = os.environ.get("WASSREG_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise InputError(f"WASSREG_THREADS must be an integer, got {raw!r}") from None
    return max(count, 1)


def _run_jobs(jobs: Sequence[Callable[[], object]]) -> list:
    workers = thread_count()
    if workers == 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def predict_marginal(model, x):
    """Predicted response law of any fitted model at one covariate vector."""
    if isinstance(model, ParticleCloud):
        return model.pushforward(x)
    if isinstance(model, CoeffGaussian):
        return model.marginal(x)
    if isinstance(model, FrechetModel1D):
        return frechet_predict_1d(model, x)
    if isinstance(model, FrechetModelGauss):
        return frechet_predict_gauss(model, x)
    raise InputError(f"cannot predict with a {type(model).__name__}")


def pairwise_w2(predicted: Sequence, targets: Sequence) -> np.ndarray:
    if len(predicted) != len(targets):
        raise InputError("lists have different lengths")
    return np.sqrt([w2_squared(a, b) for a, b in zip(predicted, targets)])


def in_sample_error(predicted: Sequence, targets: Sequence) -> float:
    """Mean squared distance between aligned marginal lists."""
    if len(predicted) != len(targets):
        raise InputError("lists have different lengths")
    if not predicted:
        raise InputError("need at least one pair")
    return float(np.mean([w2_squared(a, b) for a, b in zip(predicted, targets)]))


def _barycenter(responses):
    if all(isinstance(r, GaussianMeasure) for r in responses):
        mean = np.mean([r.mean for r in responses], axis=0)
        cov = gaussian_barycenter_fixedpoint([r.cov for r in responses],
                                             np.full(len(responses), 1.0 / len(responses)))
        return GaussianMeasure(mean, cov)
    for r in responses:
        if isinstance(r, Empirical) and r.d != 1:
            raise InputError("barycenter is only available for scalar or Gaussian responses")
    curves = np.stack([quantiles_of(r, LEVEL_GRID) for r in responses])
    return QuantileGrid(LEVEL_GRID, curves.mean(axis=0))


def wasserstein_r2(fitted: Sequence, responses: Sequence) -> float:
    """1 - (residual spread around the fit) / (spread around the barycenter)."""
    if len(fitted) != len(responses):
        raise InputError("lists have different lengths")
    if len(responses) < 2:
        raise InputError("need at least two responses")
    bary = _barycenter(responses)
    numer = float(np.sum([w2_squared(r, f) for r, f in zip(responses, fitted)]))
    denom = float(np.sum([w2_squared(r, bary) for r in responses]))
    if denom <= 1e-12 * max(1.0, numer):
        raise DegenerateValueError("all responses coincide; spread around the barycenter is zero")
    return 1.0 - numer / denom


@dataclass
class LooResult:
    mean: float
    std: float
    errors: list
    failures: int


def loo_cv(fit_fn, design, responses) -> LooResult:
    """Leave-one-out errors: W2 (not squared) from the held-out response.

    ``fit_fn(design, responses) -> model`` is refit per fold; folds whose
    fit raises a solver error are excluded and counted.
    """
    X = as_design(design)
    n = X.shape[0]
    if len(responses) != n:
        raise InputError("design and responses have different lengths")
    if n < 3:
        raise InputError("leave-one-out needs at least three rows")

    def fold(i):
        keep = [j for j in range(n) if j != i]
        try:
            model = fit_fn(X[keep], [responses[j] for j in keep])
        except WassregError:
            return None
        pred = predict_marginal(model, X[i])
        return float(np.sqrt(w2_squared(pred, responses[i])))

    results = _run_jobs([lambda i=i: fold(i) for i in range(n)])
    errors = [r for r in results if r is not None]
    failures = len(results) - len(errors)
    if not errors:
        raise DegenerateValueError("every leave-one-out fold failed")
    std = float(np.std(errors, ddof=1)) if len(errors) > 1 else 0.0
    return LooResult(mean=float(np.mean(errors)), std=std, errors=errors, failures=failures)


class IncoherenceResult(NamedTuple):
    mu: float
    leverages: np.ndarray


def incoherence(design) -> IncoherenceResult:
    """Leverage diagnostic: h_i = x_i^T (X^T X)^+ x_i and mu = (n/p) max h_i."""
    X = as_design(design)
    n, p = X.shape
    gram_inv = pinv(X.T @ X)
    lev = np.einsum("ij,jk,ik->i", X, gram_inv, X)
    return IncoherenceResult(mu=float(n / p * np.max(lev)), leverages=lev)


@dataclass
class RateStudyResult:
    rows: list  # (n, seed index, squared error)
    medians: dict
    slope: float | None
    degenerate: bool
    failures: int


def rate_study(
    template: TemplateSpec,
    spec: DeformSpec,
    n_values: Sequence[int],
    n_seeds: int,
    base_seed: int = 0,
    config: GaussianConfig | None = None,
) -> RateStudyResult:
    """Median in-sample squared error against exact responses, per design
    size, with the log-log slope across sizes.

    Responses are the closed-form Gaussian images of the truth marginals
    (no sampling), so the only error sources are the finite design and
    the solver.  Cells are independent jobs keyed by (n, seed index).
    """
    n_values = [int(v) for v in n_values]
    if len(n_values) < 2 or len(set(n_values)) != len(n_values):
        raise InputError("need at least two distinct design sizes")
    if any(v < 2 for v in n_values):
        raise InputError("design sizes must be at least 2")
    if n_seeds < 1:
        raise InputError("need at least one seed")
    config = config or GaussianConfig(steps=500)

    def cell(n, s):
        seed = subseed(base_seed, f"rate:{n}:{s}")
        ds = exact_responses(template, spec, n, seed)
        try:
            law, _ = fit_gaussian(ds.design, ds.responses, config)
        except WassregError:
            return (n, s, np.nan)
        preds = [law.marginal(x) for x in ds.design]
        err = float(np.mean([gaussian_w2_squared(a, b) for a, b in zip(preds, ds.truth)]))
        return (n, s, err)

    jobs = [lambda n=n, s=s: cell(n, s) for n in n_values for s in range(n_seeds)]
    rows = _run_jobs(jobs)

    medians = {}
    failures = 0
    for n in n_values:
        errs = [e for (nn, _, e) in rows if nn == n and np.isfinite(e)]
        failures += sum(1 for (nn, _, e) in rows if nn == n and not np.isfinite(e))
        if not errs:
            raise ConvergenceError(f"every seed failed at n={n}")
        medians[n] = float(np.median(errs))

    med = np.array([medians[n] for n in n_values])
    degenerate = bool(np.any(med <= 1e-12))
    slope = None
    if not degenerate:
        slope = float(np.polyfit(np.log(np.asarray(n_values, dtype=float)), np.log(med), 1)[0])
    return RateStudyResult(rows=rows, medians=medians, slope=slope,
                           degenerate=degenerate, failures=failures)


@dataclass
class EvalReport:
    """Per-row distances plus aggregates; truth columns when available."""

    response_w2: np.ndarray
    mean_response_w2: float
    std_response_w2: float
    r2: float | None
    truth_w2: np.ndarray | None = None
    mean_truth_w2: float | None = None
    in_sample_error_truth: float | None = None
    meta: dict = field(default_factory=dict)


def evaluate(model, dataset: Dataset) -> EvalReport:
    preds = [predict_marginal(model, x) for x in dataset.design]
    resp_w2 = pairwise_w2(preds, dataset.responses)
    try:
        r2 = wasserstein_r2(preds, dataset.responses)
    except (DegenerateValueError, InputError) as exc:
        r2 = None
        note = {"r2_unavailable": str(exc)}
    else:
        note = {}
    report = EvalReport(
        response_w2=resp_w2,
        mean_response_w2=float(resp_w2.mean()),
        std_response_w2=float(resp_w2.std(ddof=1)) if resp_w2.size > 1 else 0.0,
        r2=r2,
        meta=note,
    )
    if dataset.truth is not None:
        truth_w2 = pairwise_w2(preds, dataset.truth)
        report.truth_w2 = truth_w2
        report.mean_truth_w2 = float(truth_w2.mean())
        report.in_sample_error_truth = float(np.mean(truth_w2**2))
    return report
