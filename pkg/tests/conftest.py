"""Session fixtures for the desk-scale comparison sweeps.

The univariate and bivariate reference sweeps are fitted once per
session and shared by the acceptance tests plus a few structural
tests.  A terminal-summary hook prints one verdict line per acceptance
criterion at the end of the run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pytest

from wassreg.frechet import (
    frechet_fit_1d,
    frechet_fit_gauss,
    frechet_predict_1d,
    frechet_predict_gauss,
)
from wassreg.gaussian import GaussianConfig, fit_gaussian, smoothness_constant
from wassreg.particle import ParticleConfig, fit, gradient_step
from wassreg.simulate import (
    FAMILIES_2D,
    SWEEP_FAMILIES_1D,
    bivariate_template,
    deform_spec,
    generate_dataset,
    univariate_template,
)
from wassreg.transport import w2_squared

SEEDS = tuple(range(5))
POLISH_STEPS = 200


def mean_w2(marginals, truths) -> float:
    """Average non-squared distance between aligned marginal lists."""
    return float(np.mean([np.sqrt(w2_squared(a, b)) for a, b in zip(marginals, truths)]))


@dataclass
class SweepRun:
    """One (family, seed) cell of a comparison sweep."""

    family: str
    seed: int
    dataset: object
    moments: object | None  # Gaussian view of the dataset (bivariate only)
    model: object  # ParticleCloud or CoeffGaussian
    polished: object | None  # cloud after the full-batch polish (univariate only)
    report: object
    error: float  # mean W2 of fitted marginals vs truth
    error_polished: float | None
    frechet_model: object
    frechet_error: float
    wall_s: float


def _univariate_run(family: str, seed: int) -> SweepRun:
    ds = generate_dataset(univariate_template(), deform_spec(family), n=50, m=500, seed=seed)
    t0 = time.perf_counter()
    cloud, report = fit(ds.design, ds.responses, ParticleConfig(particles=2000, iters=3000, seed=seed))
    tau = 1.0 / smoothness_constant(ds.design)
    polished = cloud
    for _ in range(POLISH_STEPS):
        polished = gradient_step(polished, ds.design, ds.responses, tau)
    wall = time.perf_counter() - t0
    frechet = frechet_fit_1d(ds.design, ds.responses)
    return SweepRun(
        family=family,
        seed=seed,
        dataset=ds,
        moments=None,
        model=cloud,
        polished=polished,
        report=report,
        error=mean_w2([cloud.pushforward(x) for x in ds.design], ds.truth),
        error_polished=mean_w2([polished.pushforward(x) for x in ds.design], ds.truth),
        frechet_model=frechet,
        frechet_error=mean_w2([frechet_predict_1d(frechet, x) for x in ds.design], ds.truth),
        wall_s=wall,
    )


def _bivariate_run(family: str, seed: int) -> SweepRun:
    ds = generate_dataset(bivariate_template(), deform_spec(family), n=50, m=500, seed=seed)
    moments = ds.to_gaussian()
    t0 = time.perf_counter()
    law, report = fit_gaussian(moments.design, moments.responses, GaussianConfig(steps=300))
    wall = time.perf_counter() - t0
    frechet = frechet_fit_gauss(moments.design, moments.responses)
    return SweepRun(
        family=family,
        seed=seed,
        dataset=ds,
        moments=moments,
        model=law,
        polished=None,
        report=report,
        error=mean_w2([law.marginal(x) for x in ds.design], ds.truth),
        error_polished=None,
        frechet_model=frechet,
        frechet_error=mean_w2([frechet_predict_gauss(frechet, x) for x in ds.design], ds.truth),
        wall_s=wall,
    )


@pytest.fixture(scope="session")
def table5_runs() -> dict[str, list[SweepRun]]:
    """Univariate comparison sweep: 5 noise families x 5 seeds."""
    return {f: [_univariate_run(f, s) for s in SEEDS] for f in SWEEP_FAMILIES_1D}


@pytest.fixture(scope="session")
def table6_runs() -> dict[str, list[SweepRun]]:
    """Bivariate Gaussian comparison sweep: 3 noise families x 5 seeds."""
    return {f: [_bivariate_run(f, s) for s in SEEDS] for f in FAMILIES_2D}


# --- acceptance verdict reporting ------------------------------------------

_criterion_lines: list[tuple[int, str]] = []


def record_criterion(number: int, label: str, ok: bool, detail: str) -> None:
    """Queue one pass/fail line for the end-of-run summary."""
    verdict = "PASS" if ok else "FAIL"
    line = f"criterion {number} [{label}]: {verdict} ({detail})"
    _criterion_lines.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_criterion_lines):
            terminalreporter.write_line(line)
