"""Dataset container plus JSON/CSV persistence.

All on-disk floats go through ``repr``-style shortest round-trip
formatting (what ``json`` does natively and what we format explicitly
for CSV), so save/load is bit-exact.  Writes are atomic: temp file in
the target directory, then ``os.replace``.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .transport import Empirical, GaussianMeasure, QuantileGrid

FORMAT_VERSION = 1


def _rep_of(resp) -> str:
    if isinstance(resp, Empirical):
        return "samples"
    if isinstance(resp, QuantileGrid):
        return "quantile"
    if isinstance(resp, GaussianMeasure):
        return "gaussian"
    raise InputError(f"unsupported response type {type(resp).__name__}")


@dataclass
class Dataset:
    """A regression problem: covariate rows plus one response law per row."""

    design: np.ndarray
    responses: list
    truth: list | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        if design.ndim == 1:
            design = design[:, None]
        if design.ndim != 2 or design.shape[0] < 1 or design.shape[1] < 1:
            raise InputError("design must be a non-empty (n, p) array")
        if not np.all(np.isfinite(design)):
            raise InputError("design contains non-finite entries")
        if len(self.responses) != design.shape[0]:
            raise InputError(
                f"{design.shape[0]} design rows but {len(self.responses)} responses"
            )
        reps = {_rep_of(r) for r in self.responses}
        if len(reps) != 1:
            raise InputError(f"mixed response representations: {sorted(reps)}")
        if isinstance(self.responses[0], (Empirical, GaussianMeasure)):
            dims = {r.d for r in self.responses}
            if len(dims) != 1:
                raise InputError(f"mixed response dimensions: {sorted(dims)}")
        if self.truth is not None:
            if len(self.truth) != design.shape[0]:
                raise InputError("truth marginals do not match the number of rows")
            for t in self.truth:
                if not isinstance(t, GaussianMeasure):
                    raise InputError("truth marginals must be GaussianMeasure")
        self.design = design

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    @property
    def representation(self) -> str:
        return _rep_of(self.responses[0])

    @property
    def d(self) -> int:
        r = self.responses[0]
        return r.d if not isinstance(r, QuantileGrid) else 1

    def to_gaussian(self, ddof: int = 1) -> "Dataset":
        """Moment-match each sampled response to a Gaussian."""
        if self.representation != "samples":
            raise InputError("to_gaussian needs sampled responses")
        out = []
        for r in self.responses:
            atoms = r.atoms if r.atoms.ndim == 2 else r.atoms[:, None]
            if atoms.shape[0] <= ddof:
                raise InputError("too few atoms for the requested ddof")
            mean = atoms.mean(axis=0)
            cov = np.cov(atoms, rowvar=False, ddof=ddof).reshape(atoms.shape[1], -1)
            out.append(GaussianMeasure(mean, cov))
        return Dataset(
            design=self.design.copy(),
            responses=out,
            truth=list(self.truth) if self.truth is not None else None,
            seed=self.seed,
            meta=dict(self.meta),
        )


# ---------------------------------------------------------------------------
# JSON helpers


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def atomic_write_text(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path):
    atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def load_json(path):
    with open(path) as handle:
        return json.load(handle)


def _gaussian_to_json(g: GaussianMeasure) -> dict:
    return {"mean": g.mean.tolist(), "cov": g.cov.tolist()}


def _gaussian_from_json(obj) -> GaussianMeasure:
    return GaussianMeasure(np.asarray(obj["mean"]), np.asarray(obj["cov"]))


def dataset_to_json(ds: Dataset) -> dict:
    rep = ds.representation
    if rep == "samples":
        responses = [r.atoms.tolist() for r in ds.responses]
    elif rep == "quantile":
        responses = [
            {"levels": r.levels.tolist(), "values": r.values.tolist()} for r in ds.responses
        ]
    else:
        responses = [_gaussian_to_json(r) for r in ds.responses]
    return {
        "format_version": FORMAT_VERSION,
        "kind": "dataset",
        "representation": rep,
        "design": ds.design.tolist(),
        "responses": responses,
        "truth": [_gaussian_to_json(t) for t in ds.truth] if ds.truth is not None else None,
        "seed": ds.seed,
        "meta": _jsonable(ds.meta),
    }


def dataset_from_json(obj) -> Dataset:
    if not isinstance(obj, dict) or obj.get("kind") != "dataset":
        raise InputError("not a dataset document")
    if obj.get("format_version") != FORMAT_VERSION:
        raise InputError(f"unsupported dataset format_version {obj.get('format_version')!r}")
    rep = obj["representation"]
    if rep == "samples":
        responses = [Empirical(np.asarray(r, dtype=float)) for r in obj["responses"]]
    elif rep == "quantile":
        responses = [
            QuantileGrid(np.asarray(r["levels"], dtype=float), np.asarray(r["values"], dtype=float))
            for r in obj["responses"]
        ]
    elif rep == "gaussian":
        responses = [_gaussian_from_json(r) for r in obj["responses"]]
    else:
        raise InputError(f"unknown response representation {rep!r}")
    truth = obj.get("truth")
    return Dataset(
        design=np.asarray(obj["design"], dtype=float),
        responses=responses,
        truth=[_gaussian_from_json(t) for t in truth] if truth is not None else None,
        seed=obj.get("seed"),
        meta=obj.get("meta") or {},
    )


def save_dataset_json(ds: Dataset, path):
    dump_json(dataset_to_json(ds), path)


def load_dataset_json(path) -> Dataset:
    return dataset_from_json(load_json(path))


# ---------------------------------------------------------------------------
# CSV: long format, one sampled value per line


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset_csv(ds: Dataset, path):
    if ds.representation != "samples" or ds.d != 1:
        raise InputError("CSV export covers scalar sampled responses only")
    p = ds.p
    rows = [["cell_id"] + [f"x{j + 1}" for j in range(p)] + ["value"]]
    for i, resp in enumerate(ds.responses):
        covs = [_fmt(v) for v in ds.design[i]]
        for v in np.atleast_1d(resp.atoms):
            rows.append([str(i)] + covs + [_fmt(v)])
    out = []
    for row in rows:
        out.append(",".join(row))
    atomic_write_text(path, "\n".join(out) + "\n")


@dataclass
class IngestReport:
    kept: int
    dropped: list  # (cell_id, count) pairs below the threshold


def load_dataset_csv(path, min_count: int = 1) -> tuple[Dataset, IngestReport]:
    """Read the long CSV format, grouping sample values by cell.

    Cells with fewer than ``min_count`` values are dropped and reported
    rather than silently kept.  Malformed lines fail with their line
    number.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "cell_id" or header[-1] != "value":
            raise InputError(f"{path}: header must be cell_id,x1..xp,value")
        p = len(header) - 2
        if [h for h in header[1:-1]] != [f"x{j + 1}" for j in range(p)]:
            raise InputError(f"{path}: covariate columns must be named x1..x{p}")
        order: list = []
        cells: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p + 2:
                raise InputError(f"{path}:{lineno}: expected {p + 2} fields, got {len(row)}")
            cell = row[0]
            try:
                covs = tuple(float(v) for v in row[1:-1])
                value = float(row[-1])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(covs)) or not np.isfinite(value):
                raise InputError(f"{path}:{lineno}: non-finite value")
            if cell not in cells:
                cells[cell] = (covs, [])
                order.append(cell)
            elif cells[cell][0] != covs:
                raise InputError(
                    f"{path}:{lineno}: covariates disagree with an earlier line of cell {cell!r}"
                )
            cells[cell][1].append(value)
    if not order:
        raise InputError(f"{path}: no data rows")
    design, responses, dropped = [], [], []
    for cell in order:
        covs, values = cells[cell]
        if len(values) < min_count:
            dropped.append((cell, len(values)))
            continue
        design.append(covs)
        responses.append(Empirical(np.asarray(values)))
    if not design:
        raise InputError(f"{path}: every cell fell below min_count={min_count}")
    ds = Dataset(design=np.asarray(design), responses=responses)
    return ds, IngestReport(kept=len(design), dropped=dropped)


# ---------------------------------------------------------------------------
# Model persistence


def model_to_json(model, fit: dict | None = None) -> dict:
    from .frechet import FrechetModel1D, FrechetModelGauss
    from .gaussian import CoeffGaussian
    from .particle import ParticleCloud

    if isinstance(model, ParticleCloud):
        body = {"kind": "particle_cloud", "particles": model.particles.tolist()}
    elif isinstance(model, CoeffGaussian):
        body = {
            "kind": "coeff_gaussian",
            "mean": model.mean.tolist(),
            "cov": model.cov.tolist(),
            "p": model.p,
            "d": model.d,
        }
    elif isinstance(model, FrechetModel1D):
        body = {
            "kind": "frechet_1d",
            "levels": model.levels.tolist(),
            "beta": model.beta.tolist(),
        }
    elif isinstance(model, FrechetModelGauss):
        body = {
            "kind": "frechet_gauss",
            "mean_coef": model.mean_coef.tolist(),
            "cov_coef": model.cov_coef.tolist(),
            "d": model.d,
        }
    else:
        raise InputError(f"cannot serialize a {type(model).__name__}")
    body["format_version"] = FORMAT_VERSION
    if fit is not None:
        body["fit"] = _jsonable(fit)
    return body


def model_from_json(obj):
    from .frechet import FrechetModel1D, FrechetModelGauss
    from .gaussian import CoeffGaussian
    from .particle import ParticleCloud

    if not isinstance(obj, dict) or "kind" not in obj:
        raise InputError("not a model document")
    if obj.get("format_version") != FORMAT_VERSION:
        raise InputError(f"unsupported model format_version {obj.get('format_version')!r}")
    kind = obj["kind"]
    if kind == "particle_cloud":
        return ParticleCloud(np.asarray(obj["particles"], dtype=float))
    if kind == "coeff_gaussian":
        return CoeffGaussian(
            mean=np.asarray(obj["mean"], dtype=float),
            cov=np.asarray(obj["cov"], dtype=float),
            p=int(obj["p"]),
            d=int(obj["d"]),
        )
    if kind == "frechet_1d":
        return FrechetModel1D(
            levels=np.asarray(obj["levels"], dtype=float),
            beta=np.asarray(obj["beta"], dtype=float),
        )
    if kind == "frechet_gauss":
        return FrechetModelGauss(
            mean_coef=np.asarray(obj["mean_coef"], dtype=float),
            cov_coef=np.asarray(obj["cov_coef"], dtype=float),
            d=int(obj["d"]),
        )
    raise InputError(f"unknown model kind {kind!r}")


def save_model_json(model, path, fit: dict | None = None):
    dump_json(model_to_json(model, fit=fit), path)


def load_model_json(path):
    return model_from_json(load_json(path))


def save_table_csv(path, header: Sequence[str], rows: Sequence[Sequence]):
    """Small helper for result tables; floats go out in round-trip form."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(_fmt(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
