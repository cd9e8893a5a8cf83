"""File-only matplotlib renderings of run artifacts."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .conditional import BandResult  # noqa: E402
from .data import Dataset  # noqa: E402
from .errors import InputError  # noqa: E402
from .metrics import EvalReport, RateStudyResult  # noqa: E402

_DPI = 150


def _axis_of(design: np.ndarray) -> np.ndarray:
    # Prefer the first non-constant covariate as the x-axis.
    for j in range(design.shape[1]):
        if np.ptp(design[:, j]) > 0:
            return design[:, j]
    return np.arange(design.shape[0], dtype=float)


def save_trace_figure(trace, path):
    iters = [k for k, _ in trace]
    values = [v for _, v in trace]
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(iters, values, lw=1.2, color="tab:blue")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    if min(values) > 0:
        ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_dataset_figure(ds: Dataset, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    axis = _axis_of(ds.design)
    order = np.argsort(axis)
    if ds.representation == "samples" and ds.d == 1:
        for i, r in enumerate(ds.responses):
            ax.scatter(np.full(r.m, axis[i]), r.atoms, s=2.0, alpha=0.2, color="tab:blue",
                       rasterized=True)
        if ds.truth is not None:
            ax.plot(axis[order], [ds.truth[i].mean[0] for i in order], color="tab:red",
                    lw=1.5, label="truth mean")
            ax.legend(loc="best", fontsize=8)
        ax.set_ylabel("response samples")
    elif ds.representation == "samples":
        for i, r in enumerate(ds.responses):
            atoms = r.atoms
            ax.scatter(atoms[:, 0], atoms[:, 1], s=2.0, alpha=0.2, rasterized=True)
        ax.set_xlabel("response dim 1")
        ax.set_ylabel("response dim 2")
        fig.tight_layout()
        fig.savefig(path, dpi=_DPI)
        plt.close(fig)
        return
    elif ds.representation == "gaussian":
        means = np.stack([r.mean for r in ds.responses])
        sds = np.stack([np.sqrt(np.diag(r.cov)) for r in ds.responses])
        for c in range(means.shape[1]):
            ax.errorbar(axis[order], means[order, c], yerr=sds[order, c], fmt="o",
                        ms=2.5, lw=0.8, capsize=0, label=f"component {c + 1}")
        ax.legend(loc="best", fontsize=8)
        ax.set_ylabel("response mean ± sd")
    else:
        for r in ds.responses:
            ax.plot(r.levels, r.values, lw=0.6, alpha=0.5, color="tab:blue")
        ax.set_xlabel("level")
        ax.set_ylabel("quantile")
        fig.tight_layout()
        fig.savefig(path, dpi=_DPI)
        plt.close(fig)
        return
    ax.set_xlabel("covariate")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_eval_figure(report: EvalReport, path):
    n = report.response_w2.size
    idx = np.arange(n)
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(idx, report.response_w2, "o-", ms=3, lw=0.8, label="vs responses")
    if report.truth_w2 is not None:
        ax.plot(idx, report.truth_w2, "s-", ms=3, lw=0.8, label="vs truth")
    ax.axhline(report.mean_response_w2, color="tab:gray", lw=0.8, ls="--")
    ax.set_xlabel("row")
    ax.set_ylabel("Wasserstein error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_rate_figure(result: RateStudyResult, path):
    ns = sorted(result.medians)
    med = [result.medians[n] for n in ns]
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for (n, _, err) in result.rows:
        if np.isfinite(err):
            ax.plot(n, err, ".", color="tab:gray", alpha=0.4, ms=4)
    ax.plot(ns, med, "o-", color="tab:blue", label="median")
    if result.slope is not None and med[0] > 0:
        ref = med[0] * (np.asarray(ns, dtype=float) / ns[0]) ** (-0.5)
        ax.plot(ns, ref, "--", color="tab:red", lw=1.0, label="slope -1/2")
        ax.set_title(f"fitted slope {result.slope:.2f}", fontsize=9)
    ax.set_xscale("log")
    if max(med) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("design size n")
    ax.set_ylabel("median squared error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_band_figure(axis, band: BandResult, path):
    if band.retained == 0 or band.mean is None:
        raise InputError("cannot draw bands for an empty scenario")
    axis = np.asarray(axis, dtype=float).reshape(-1)
    if axis.size != band.mean.size:
        raise InputError("axis length does not match the band grid")
    order = np.argsort(axis)
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for lvl in sorted(band.bands, reverse=True):
        lo, hi = band.bands[lvl]
        ax.fill_between(axis[order], lo[order], hi[order], alpha=0.25,
                        label=f"{lvl:g}% band")
    ax.plot(axis[order], band.mean[order], color="tab:red", lw=1.4, label="conditional mean")
    ax.set_xlabel("covariate")
    ax.set_ylabel("predicted value")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
