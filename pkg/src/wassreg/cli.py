"""Command-line surface.

Every subcommand writes its artifacts plus a ``manifest.json`` echoing
the resolved configuration, the seed, and package versions.  JSON and
CSV artifacts are deterministic given configuration and seed; with
``--verify`` the command re-runs itself into a scratch directory and
byte-compares those artifacts (figures are skipped and the manifest is
compared with its timing block dropped).  Failures exit nonzero with a
one-line error JSON on stderr carrying a stable error code.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np
import scipy

from . import __version__
from .conditional import ConditionSpec, Constraint, coeff_summary, conditional_band, exceedance_prob, select
from .data import (
    FORMAT_VERSION,
    Dataset,
    dump_json,
    load_dataset_csv,
    load_dataset_json,
    load_json,
    load_model_json,
    save_dataset_csv,
    save_dataset_json,
    save_model_json,
    save_table_csv,
)
from .errors import InputError, WassregError
from .frechet import FrechetModel1D, frechet_fit_1d, frechet_fit_gauss
from .gaussian import GaussianConfig, fit_gaussian
from .metrics import evaluate, incoherence, rate_study
from .oracle import DiscreteProblem, solve_multimarginal, solve_multimarginal_lp
from .particle import ParticleCloud, ParticleConfig
from .particle import fit as particle_fit
from .simulate import (
    bivariate_template,
    deform_spec,
    exact_responses,
    generate_dataset,
    univariate_template,
)

# ---------------------------------------------------------------------------
# helpers


def _ensure_outdir(outdir: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _template(name: str):
    if name == "univariate":
        return univariate_template()
    if name == "bivariate":
        return bivariate_template()
    raise InputError(f"unknown template {name!r}")


def _family_params(raw: str | None) -> dict:
    if not raw:
        return {}
    try:
        params = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"--params is not valid JSON: {exc}") from None
    if not isinstance(params, dict):
        raise InputError("--params must be a JSON object")
    return params


def _load_dataset(path: str) -> Dataset:
    if path.endswith(".csv"):
        ds, report = load_dataset_csv(path)
        if report.dropped:
            print(f"dropped {len(report.dropped)} under-filled cells", file=sys.stderr)
        return ds
    return load_dataset_json(path)


def _public_args(args: argparse.Namespace) -> dict:
    skip = {"handler", "command", "out", "verify"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _write_trace_csv(trace, path):
    save_table_csv(path, ["iteration", "objective"], [(k, v) for k, v in trace])


# ---------------------------------------------------------------------------
# subcommand handlers; each returns the list of files written (no manifest)


def _cmd_simulate(args, outdir: str) -> list[str]:
    template = _template(args.template)
    spec = deform_spec(args.noise, alpha=args.alpha, beta=args.beta,
                       **_family_params(args.params))
    if args.representation == "exact":
        ds = exact_responses(template, spec, args.n, args.seed)
    else:
        ds = generate_dataset(template, spec, args.n, args.m, args.seed)
        if args.representation == "moments":
            ds = ds.to_gaussian()
    outputs = ["dataset.json"]
    save_dataset_json(ds, os.path.join(outdir, "dataset.json"))
    if ds.representation == "samples" and ds.d == 1:
        save_dataset_csv(ds, os.path.join(outdir, "dataset.csv"))
        outputs.append("dataset.csv")
    if not args.no_figures:
        from .figures import save_dataset_figure

        save_dataset_figure(ds, os.path.join(outdir, "dataset.png"))
        outputs.append("dataset.png")
    return outputs


def _cmd_fit(args, outdir: str) -> list[str]:
    ds = _load_dataset(args.data)
    if args.moments:
        ds = ds.to_gaussian()
    outputs = ["model.json"]
    report = None
    if args.solver == "particle":
        config = ParticleConfig(
            particles=args.particles,
            iters=args.iters,
            step_base=args.step_base,
            decay=args.decay,
            momentum=args.momentum,
            batch=(None if args.batch == 0 else args.batch),
            seed=args.seed,
            tol=args.tol,
            patience=args.patience,
            log_every=args.log_every,
        )
        model, report = particle_fit(ds.design, ds.responses, config)
    elif args.solver == "gaussian":
        if ds.representation != "gaussian":
            raise InputError(
                "gaussian solver needs Gaussian responses; simulate with "
                "--representation moments/exact or pass --moments"
            )
        config = GaussianConfig(steps=args.steps, step_size=args.step_size,
                                tol=args.tol, log_every=args.log_every)
        model, report = fit_gaussian(ds.design, ds.responses, config)
    elif args.solver == "frechet":
        if ds.representation == "gaussian":
            model = frechet_fit_gauss(ds.design, ds.responses)
        else:
            model = frechet_fit_1d(ds.design, ds.responses, k_levels=args.levels)
    else:
        raise InputError(f"unknown solver {args.solver!r}")

    fit_info: dict = {"solver": args.solver, "data": args.data, "seed": args.seed}
    if report is not None:
        fit_info.update(
            config=report.config,
            iterations=report.iterations,
            stop_reason=report.stop_reason,
            final_grad_norm=report.final_grad_norm,
            final_objective=report.final_objective,
            initial_objective=report.initial_objective,
            regularized_steps=report.regularized_steps,
        )
    elif args.solver == "frechet" and isinstance(model, FrechetModel1D):
        fit_info["levels"] = args.levels
    save_model_json(model, os.path.join(outdir, "model.json"), fit=fit_info)
    if report is not None:
        _write_trace_csv(report.objective_trace, os.path.join(outdir, "trace.csv"))
        outputs.append("trace.csv")
        if not args.no_figures:
            from .figures import save_trace_figure

            save_trace_figure(report.objective_trace, os.path.join(outdir, "trace.png"))
            outputs.append("trace.png")
    return outputs


def _cmd_eval(args, outdir: str) -> list[str]:
    ds = _load_dataset(args.data)
    model = load_model_json(args.model)
    report = evaluate(model, ds)
    inc = incoherence(ds.design)
    payload = {
        "format_version": FORMAT_VERSION,
        "data": args.data,
        "model": args.model,
        "n": ds.n,
        "r2": report.r2,
        "mean_response_w2": report.mean_response_w2,
        "std_response_w2": report.std_response_w2,
        "mean_truth_w2": report.mean_truth_w2,
        "in_sample_error_truth": report.in_sample_error_truth,
        "incoherence_mu": inc.mu,
        "meta": report.meta,
    }
    dump_json(payload, os.path.join(outdir, "eval.json"))
    header = ["row", "leverage", "response_w2"]
    rows = []
    for i in range(ds.n):
        row = [i, float(inc.leverages[i]), float(report.response_w2[i])]
        if report.truth_w2 is not None:
            row.append(float(report.truth_w2[i]))
        rows.append(row)
    if report.truth_w2 is not None:
        header.append("truth_w2")
    save_table_csv(os.path.join(outdir, "per_row.csv"), header, rows)
    outputs = ["eval.json", "per_row.csv"]
    if not args.no_figures:
        from .figures import save_eval_figure

        save_eval_figure(report, os.path.join(outdir, "eval.png"))
        outputs.append("eval.png")
    return outputs


def _cmd_oracle(args, outdir: str) -> list[str]:
    ds = _load_dataset(args.data)
    prob = DiscreteProblem(ds.design, ds.responses)
    res = solve_multimarginal(prob)
    identity_gap = abs(res.value - (res.marginal_energy - res.explained_variance))
    payload = {
        "format_version": FORMAT_VERSION,
        "data": args.data,
        "value": res.value,
        "matching": res.matching.tolist(),
        "coeff_atoms": res.coeff_law.atoms.tolist(),
        "explained_variance": res.explained_variance,
        "marginal_energy": res.marginal_energy,
        "identity_gap": identity_gap,
    }
    if args.lp_check:
        payload["lp_value"] = solve_multimarginal_lp(prob)
    dump_json(payload, os.path.join(outdir, "oracle.json"))
    return ["oracle.json"]


def _cmd_rate_study(args, outdir: str) -> list[str]:
    template = _template(args.template)
    spec = deform_spec(args.noise, **_family_params(args.params))
    try:
        n_values = [int(v) for v in args.n_list.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--n-list must be comma-separated integers, got {args.n_list!r}") from None
    result = rate_study(
        template,
        spec,
        n_values,
        n_seeds=args.seeds,
        base_seed=args.seed,
        config=GaussianConfig(steps=args.steps),
    )
    save_table_csv(os.path.join(outdir, "rate.csv"), ["n", "seed", "error"], result.rows)
    payload = {
        "format_version": FORMAT_VERSION,
        "medians": {str(k): v for k, v in result.medians.items()},
        "slope": result.slope,
        "degenerate": result.degenerate,
        "failures": result.failures,
        "n_values": n_values,
        "seeds": args.seeds,
        "seed": args.seed,
    }
    dump_json(payload, os.path.join(outdir, "rate.json"))
    outputs = ["rate.csv", "rate.json"]
    if not args.no_figures:
        from .figures import save_rate_figure

        save_rate_figure(result, os.path.join(outdir, "rate.png"))
        outputs.append("rate.png")
    return outputs


def _cmd_condition(args, outdir: str) -> list[str]:
    model = load_model_json(args.model)
    if not isinstance(model, (ParticleCloud, FrechetModel1D)):
        raise InputError("conditioning needs a particle cloud or per-level coefficient model")
    query = load_json(args.query)
    if not isinstance(query, dict) or "constraints" not in query:
        raise InputError("query must be a JSON object with a 'constraints' list")
    constraints = []
    for c in query["constraints"]:
        constraints.append(
            Constraint(
                np.asarray(c["x"], dtype=float),
                float(c.get("lo", -math.inf)),
                float(c.get("hi", math.inf)),
            )
        )
    spec = ConditionSpec(tuple(constraints))
    indices = select(model, spec)
    from .conditional import _coeff_matrix

    coeff = _coeff_matrix(model)
    retained = int(indices.size)
    payload: dict = {
        "format_version": FORMAT_VERSION,
        "model": args.model,
        "query": query,
        "total": int(coeff.shape[0]),
        "retained": retained,
        "empty": retained == 0,
    }
    outputs = ["condition.json"]

    grid = query.get("grid")
    levels = [float(v) for v in query.get("levels", (75.0, 99.0))]
    band = None
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        band = conditional_band(model, indices, grid, levels)
        if band.retained > 0:
            payload["mean"] = band.mean.tolist()
            payload["bands"] = {
                f"{lvl:g}": {"lo": lo.tolist(), "hi": hi.tolist()}
                for lvl, (lo, hi) in band.bands.items()
            }
            header = ["grid_index", "mean"]
            for lvl in levels:
                header += [f"lo{lvl:g}", f"hi{lvl:g}"]
            rows = []
            for g in range(grid.shape[0]):
                row = [g, float(band.mean[g])]
                for lvl in levels:
                    lo, hi = band.bands[float(lvl)]
                    row += [float(lo[g]), float(hi[g])]
                rows.append(row)
            save_table_csv(os.path.join(outdir, "bands.csv"), header, rows)
            outputs.append("bands.csv")
        else:
            payload["mean"] = None
            payload["bands"] = None

    exceed = []
    for q in query.get("exceedance", []):
        entry = {"x": list(map(float, q["x"])), "threshold": float(q["threshold"])}
        entry["prob"] = (
            exceedance_prob(model, indices, q["x"], float(q["threshold"]))
            if retained > 0
            else None
        )
        exceed.append(entry)
    if exceed:
        payload["exceedance"] = exceed

    if query.get("summary") and retained >= 2:
        s = coeff_summary(coeff[indices])
        payload["summary"] = {
            "mean": s.mean.tolist(),
            "std": s.std.tolist(),
            "q_low": s.q_low.tolist(),
            "q_high": s.q_high.tolist(),
            "prob_positive": s.prob_positive.tolist(),
            "cov": s.cov.tolist(),
            "corr": s.corr.tolist(),
            "zero_variance": s.zero_variance.tolist(),
        }
    elif query.get("summary"):
        payload["summary"] = None

    dump_json(payload, os.path.join(outdir, "condition.json"))
    if band is not None and band.retained > 0 and not args.no_figures:
        axis = query.get("axis")
        if axis is None:
            axis = grid[:, 1] if grid.shape[1] > 1 else np.arange(grid.shape[0])
        from .figures import save_band_figure

        save_band_figure(np.asarray(axis, dtype=float), band, os.path.join(outdir, "condition.png"))
        outputs.append("condition.png")
    return outputs


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wassreg",
        description="Distribution-response regression: simulate, fit, evaluate, condition.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        p.add_argument("--no-figures", action="store_true", help="skip PNG artifacts")
        p.add_argument("--verify", action="store_true",
                       help="re-run and byte-compare JSON/CSV artifacts")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--template", default="univariate", choices=["univariate", "bivariate"])
    p.add_argument("--noise", default="additive", help="deformation family name")
    p.add_argument("--params", default=None, help="family parameter overrides as JSON")
    p.add_argument("--alpha", type=float, default=None, help="derivative band low")
    p.add_argument("--beta", type=float, default=None, help="derivative band high")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--m", type=int, default=500, help="samples per row (ignored with --representation exact)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--representation", default="samples", choices=["samples", "moments", "exact"],
                   help="samples, moment-matched Gaussians, or exact Gaussians (affine families)")
    common(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--solver", required=True, choices=["particle", "gaussian", "frechet"])
    p.add_argument("--moments", action="store_true",
                   help="moment-match sampled responses to Gaussians before fitting")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--particles", type=int, default=2000)
    p.add_argument("--iters", type=int, default=3000)
    p.add_argument("--step-base", type=float, default=0.1)
    p.add_argument("--decay", type=float, default=1e-3)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch", type=int, default=5, help="mini-batch rows; 0 for full batch")
    p.add_argument("--patience", type=int, default=None,
                   help="stop after this many iterations without improvement")
    p.add_argument("--steps", type=int, default=300, help="gaussian solver steps")
    p.add_argument("--step-size", type=float, default=None,
                   help="gaussian solver step size (default 0.5/eta)")
    p.add_argument("--tol", type=float, default=0.0)
    p.add_argument("--log-every", type=int, default=10)
    p.add_argument("--levels", type=int, default=200, help="quantile levels (frechet baseline)")
    common(p)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("eval", help="evaluate a fitted model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    common(p)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("oracle", help="exact enumeration on a tiny discrete dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--lp-check", action="store_true",
                   help="also solve the full coupling LP as a cross-check")
    common(p)
    p.set_defaults(handler=_cmd_oracle)

    p = sub.add_parser("rate-study", help="error-vs-n study against exact responses")
    p.add_argument("--template", default="univariate", choices=["univariate", "bivariate"])
    p.add_argument("--noise", default="additive")
    p.add_argument("--params", default=None, help="family parameter overrides as JSON")
    p.add_argument("--n-list", default="10,25,50,100,200,500")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(handler=_cmd_rate_study)

    p = sub.add_parser("condition", help="conditional queries on a fitted cloud")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True, help="query JSON path")
    common(p)
    p.set_defaults(handler=_cmd_condition)

    return parser


# ---------------------------------------------------------------------------
# driver


def _produce(args, outdir: str) -> list[str]:
    _ensure_outdir(outdir)
    start = time.perf_counter()
    outputs = args.handler(args, outdir)
    manifest = {
        "format_version": FORMAT_VERSION,
        "command": args.command,
        "config": _public_args(args),
        "seed": getattr(args, "seed", None),
        "versions": {
            "wassreg": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": sorted(outputs),
        "timing": {"wall_s": time.perf_counter() - start},
    }
    dump_json(manifest, os.path.join(outdir, "manifest.json"))
    return outputs + ["manifest.json"]


def _strip_timing(path: str) -> str:
    doc = load_json(path)
    doc.pop("timing", None)
    return json.dumps(doc, sort_keys=True)


def _verify(args, outputs: list[str]):
    with tempfile.TemporaryDirectory(prefix="wassreg-verify-") as tmp:
        _produce(args, tmp)
        bad = []
        for name in outputs:
            if name.endswith(".png"):
                continue
            first = os.path.join(args.out, name)
            second = os.path.join(tmp, name)
            if name == "manifest.json":
                if _strip_timing(first) != _strip_timing(second):
                    bad.append(name)
                continue
            with open(first, "rb") as f1, open(second, "rb") as f2:
                if f1.read() != f2.read():
                    bad.append(name)
        if bad:
            raise WassregError(f"verification failed: artifacts differ: {', '.join(bad)}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        outputs = _produce(args, args.out)
        if args.verify:
            _verify(args, outputs)
    except WassregError as exc:
        payload = {"error": exc.code, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return exc.exit_status
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        payload = {"error": "input", "message": f"{type(exc).__name__}: {exc}"}
        print(json.dumps(payload), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
