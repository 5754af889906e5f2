"""Command-line entry point: ``funclustvb {simulate,fit,replicate,dic-scan}``.

Exit codes: 0 success, 2 usage, 3 data or I/O problem, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, simgen
from .basis import basis_matrix
from .core import PriorConfig, SpecialFn
from .dataio import (
    read_dataset_csv,
    write_curves_csv,
    write_dataset_csv,
    write_json,
    write_labels_csv,
    write_table_csv,
)
from .errors import DataError, FunclustError, NumericFailure
from .initialization import PRESETS, InitConfig, default_priors, kmeans_init
from .metrics import mismatch_rate, v_measure
from .model1 import DEFAULT_MAX_ITER, DEFAULT_THRESHOLD, fit_model1
from .model2 import fit_model2
from .replicate import ReplicationConfig, run_replication
from .selection import DEFAULT_FITS_PER_K, dic, k_scan

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# priors for user-supplied data; d0 = 1/K and s0 = 0.1 throughout
REAL_DATA_PRESETS = {
    "data": {"shape_tau": 1.0, "rate_tau": 1.0, "basis": 6, "threshold": DEFAULT_THRESHOLD},
    "growth": {"shape_tau": 2000.0, "rate_tau": 100.0, "basis": 10, "threshold": 0.001},
    "weather": {"shape_tau": 1000.0, "rate_tau": 800.0, "basis": 6, "threshold": 0.001},
}
REAL_DATA_S0 = 0.1


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return value


def parse_k_range(text: str) -> list[int]:
    """``"2-5"``, ``"2,3,5"`` or a mix such as ``"2-3,5"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            values = range(int(lo), int(hi) + 1) if sep else [int(lo)]
        except ValueError:
            raise UsageError(f"bad K range element {part!r}") from None
        out.extend(values)
    if not out:
        raise UsageError(f"empty K range {text!r}")
    if min(out) < 1:
        raise UsageError("K values must be >= 1")
    return out


def _fit_options(p, *, preset_choices, preset_default, need_k=True):
    p.add_argument("--model", choices=("m1", "m2"), default="m1")
    if need_k:
        p.add_argument("--k", type=_positive_int, required=True, help="number of clusters")
    p.add_argument("--basis", type=_positive_int, default=None, help="number of B-spline functions")
    p.add_argument("--order", type=_positive_int, default=4, help="spline order (4 = cubic)")
    p.add_argument("--threshold", type=_nonneg_float, default=None)
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=_positive_int, default=10, help="k-means restarts")
    p.add_argument("--special-fn", choices=[s.value for s in SpecialFn], default="exact")
    p.add_argument("--prior-preset", choices=preset_choices, default=preset_default)
    p.add_argument("--workers", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funclustvb",
                                     description="Variational Bayes clustering of functional data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write simulated datasets")
    p.add_argument("--scenario", type=int, required=True, choices=sorted(simgen.SCENARIOS))
    p.add_argument("--replicates", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="fit one dataset CSV")
    p.add_argument("dataset")
    p.add_argument("--labels", help="optional labels CSV for scoring")
    p.add_argument("--prior-json", help="full prior configuration as JSON")
    _fit_options(p, preset_choices=sorted(REAL_DATA_PRESETS), preset_default="data")
    p.add_argument("--out", help="result JSON path (default: stdout)")

    p = sub.add_parser("replicate", help="run a simulation study for one scenario")
    p.add_argument("--scenario", type=int, required=True, choices=sorted(simgen.SCENARIOS))
    p.add_argument("--replicates", type=_positive_int, default=50)
    p.add_argument("--k", type=_positive_int, default=None)
    _fit_options(p, preset_choices=list(PRESETS), preset_default="setting1", need_k=False)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("dic-scan", help="choose K by DIC (independent-error model)")
    p.add_argument("dataset")
    p.add_argument("--k-range", required=True, help='e.g. "2-5" or "2,3,5"')
    p.add_argument("--fits-per-k", type=_positive_int, default=DEFAULT_FITS_PER_K)
    _fit_options(p, preset_choices=sorted(REAL_DATA_PRESETS), preset_default="data", need_k=False)
    p.add_argument("--out", help="scan JSON path (default: stdout)")
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _emit(payload, out):
    if out:
        write_json(out, payload)
    else:
        from .dataio import to_jsonable
        sys.stdout.write(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> dict:
    spec = simgen.get_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    truth = None
    for r in range(args.replicates):
        data, truth = simgen.generate(spec, args.seed, r)
        stem = f"scenario{spec.id}_rep{r:03d}"
        write_dataset_csv(out / f"{stem}.csv", data)
        write_labels_csv(out / f"{stem}_labels.csv", data.true_labels)
        files.append({"replicate": r, "data": f"{stem}.csv", "labels": f"{stem}_labels.csv"})
    write_curves_csv(out / f"scenario{spec.id}_truth.csv", spec.grid, truth,
                     ids=[f"cluster{k + 1}" for k in range(spec.K)])
    manifest = {
        "command": "simulate",
        "version": __version__,
        "scenario": {"id": spec.id, "K": spec.K, "n": spec.n, "N": spec.N,
                     "domain": list(spec.domain), "noise_sd": spec.noise_sd,
                     "intercept": None if spec.intercept is None else list(spec.intercept),
                     "n_basis": spec.n_basis},
        "seed": args.seed,
        "replicates": args.replicates,
        "files": files,
        "truth": f"scenario{spec.id}_truth.csv",
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def _preset(args):
    return REAL_DATA_PRESETS[args.prior_preset]


def _basis_for(data, args, default_size):
    size = args.basis or default_size
    return basis_matrix(data.grid[0], data.grid[-1], size, data.grid, args.order)


def _priors_from_json(path, K, M) -> PriorConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"prior JSON is malformed: {exc}") from None
    fields = {f.name for f in dataclasses.fields(PriorConfig)}
    unknown = set(raw) - fields
    if unknown:
        raise DataError(f"unknown prior fields: {sorted(unknown)}")
    raw.setdefault("K", K)
    if "s0" in raw:
        raise DataError("give the coefficient precision as v0")
    priors = PriorConfig(**raw)
    if priors.K != K or priors.M != M:
        raise DataError(f"prior JSON is for K={priors.K}, M={priors.M}; run uses K={K}, M={M}")
    return priors


def cmd_fit(args) -> dict:
    preset = _preset(args)
    data = read_dataset_csv(args.dataset, args.labels)
    B = _basis_for(data, args, preset["basis"])
    threshold = preset["threshold"] if args.threshold is None else args.threshold
    init_p = kmeans_init(data, InitConfig(K=args.k, restarts=args.restarts, seed=args.seed))
    if args.prior_json:
        priors = _priors_from_json(args.prior_json, args.k, B.shape[1])
    else:
        priors = default_priors(data, B, args.k, init_p, s0=REAL_DATA_S0,
                                shape_tau=preset["shape_tau"], rate_tau=preset["rate_tau"])
    fitter = fit_model1 if args.model == "m1" else fit_model2
    start = time.perf_counter()
    fit = fitter(data, B, priors, init_p, threshold=threshold, max_iter=args.max_iter,
                 special_fn=args.special_fn, seed=args.seed)
    wall = time.perf_counter() - start
    st = fit.state
    result = {
        "command": "fit",
        "version": __version__,
        "config": {"model": args.model, "K": args.k, "M": B.shape[1], "order": args.order,
                   "threshold": threshold, "max_iter": args.max_iter,
                   "special_fn": args.special_fn, "prior_preset": args.prior_preset,
                   "restarts": args.restarts, "dataset": str(args.dataset)},
        "seed": args.seed,
        "priors": {"d0": priors.d0, "m0": priors.m0, "v0": priors.v0,
                   "shape_tau": priors.shape_tau, "rate_tau": priors.rate_tau,
                   "alpha0": priors.alpha0, "beta0": priors.beta0},
        "grid": data.grid,
        "assignments": fit.assignments,
        "responsibilities": st.p_star,
        "m_star": st.m_star,
        "mean_curves": fit.mean_curves,
        "E_tau": st.E_tau,
        "elbo_trace": fit.elbo_trace,
        "elbo_parts": fit.elbo_parts,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "wall_time_s": wall,
    }
    if args.model == "m2":
        result["intercepts"] = {"mu": st.mu_a, "sigma2": st.sigma2_a}
    if args.model == "m1" and fit.converged:
        result["dic"] = dic(fit, data, B)
    if data.true_labels is not None:
        result["mismatch"] = mismatch_rate(fit.assignments, data.true_labels)
        result["v_measure"] = v_measure(fit.assignments, data.true_labels)
    _emit(result, args.out)
    return result


def cmd_replicate(args) -> dict:
    threshold = DEFAULT_THRESHOLD if args.threshold is None else args.threshold
    cfg = ReplicationConfig(
        scenario=args.scenario, replicates=args.replicates, seed=args.seed, model=args.model,
        prior_preset=args.prior_preset, K=args.k, n_basis=args.basis, order=args.order,
        threshold=threshold, max_iter=args.max_iter, special_fn=args.special_fn,
        restarts=args.restarts, workers=args.workers)
    report = run_replication(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"command": "replicate", "version": __version__, **report.as_dict()}
    write_json(out / "summary.json", summary)
    write_table_csv(out / "replicates.csv", [o.row() for o in report.outcomes])
    emse_rows = [{"t": float(t), **{f"cluster{k + 1}": float(report.emse[k, j])
                                    for k in range(report.emse.shape[0])}}
                 for j, t in enumerate(report.grid)]
    write_table_csv(out / "emse.csv", emse_rows)
    return summary


def cmd_dic_scan(args) -> dict:
    if args.model != "m1":
        raise UsageError("dic-scan supports --model m1 only")
    Ks = parse_k_range(args.k_range)
    preset = _preset(args)
    data = read_dataset_csv(args.dataset)
    B = _basis_for(data, args, preset["basis"])
    threshold = preset["threshold"] if args.threshold is None else args.threshold

    def factory(d, basis, K, init_p):
        return default_priors(d, basis, K, init_p, s0=REAL_DATA_S0,
                              shape_tau=preset["shape_tau"], rate_tau=preset["rate_tau"])

    res = k_scan(data, B, Ks, fits_per_K=args.fits_per_k, seed=args.seed, prior_factory=factory,
                 threshold=threshold, max_iter=args.max_iter, special_fn=args.special_fn,
                 workers=args.workers)
    payload = {
        "command": "dic-scan",
        "version": __version__,
        "config": {"K_range": Ks, "M": B.shape[1], "order": args.order, "threshold": threshold,
                   "max_iter": args.max_iter, "special_fn": args.special_fn,
                   "prior_preset": args.prior_preset, "fits_per_K": args.fits_per_k,
                   "dataset": str(args.dataset)},
        "seed": args.seed,
        "rows": [{"K": r.K, "dic": r.dic, "error": r.error,
                  "elbo": None if r.fit is None else r.fit.elbo,
                  "cluster_sizes": None if r.fit is None else r.fit.state.p_star.sum(axis=0)}
                 for r in res.rows],
        "best_K": res.best_K,
    }
    _emit(payload, args.out)
    return payload


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "replicate": cmd_replicate,
            "dic-scan": cmd_dic_scan}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"funclustvb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"funclustvb: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FunclustError, OSError) as exc:
        print(f"funclustvb: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
