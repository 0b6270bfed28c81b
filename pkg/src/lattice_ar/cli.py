"""Command-line driver.

Exit codes: 0 success, 1 a validation found failing conditions, 2 bad
arguments, I/O or numerical errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .convert import car_from_covariance, haining_c_from_b, sar_from_covariance
from .errors import LatticeARError
from .fit import DEFAULT_SEED, FAMILIES, FitData, ModelSpec, fit
from .io import (load_centroids, load_dataset, load_design, load_diagonal, load_matrix, load_model,
                 load_response, read_neighbors, save_matrix, save_model, save_vector, write_json)
from .lattice import build_binary_weights, rho_bounds, row_standardize
from .model import CarModel, SarModel, car_covariance, certify, marginal_summary, sar_covariance, validate_car, validate_sar
from .reproduce import grid_demo_covariance, reproduce_columbus
from .rotation import sparsify

THREADS_ENV = "LATTICE_AR_THREADS"


def _thread_limit():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=int(n))


def _grid(spec: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in spec.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 5x5, got {spec!r}") from None
    return r, c


def _load_covariance(args):
    if getattr(args, "covariance", None):
        return certify(load_matrix(args.covariance))
    if getattr(args, "model", None):
        m = load_model(args.model)
        return car_covariance(m) if isinstance(m, CarModel) else sar_covariance(m)
    if getattr(args, "grid", None):
        return grid_demo_covariance(*args.grid, rho=args.rho)
    raise LatticeARError("need --covariance, --model or --grid")


# ---------------------------------------------------------------------------
# subcommands; each returns (exit_code, output_paths, result_payload)


def cmd_validate(args):
    if args.car:
        model, kind = CarModel(load_matrix(args.car[0]), load_diagonal(args.car[1])), "car"
    elif args.sar:
        model, kind = SarModel(load_matrix(args.sar[0]), load_diagonal(args.sar[1])), "sar"
    else:
        model = load_model(args.model)
        kind = "car" if isinstance(model, CarModel) else "sar"
    report = validate_car(model.c, model.m) if kind == "car" else validate_sar(model.b, model.omega)
    doc = {"type": kind, "pass": report.passed, "conditions": report.to_dict()}
    outputs = []
    if args.out:
        write_json(doc, args.out)
        outputs.append(args.out)
    print(json.dumps(doc, indent=2))
    return (0 if report.passed else 1), outputs, doc


def cmd_convert(args):
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.haining:
        c, report = haining_c_from_b(load_matrix(args.haining))
        save_matrix(c, out.with_suffix(".csv"))
        doc = {"pass": report.passed, "conditions": report.to_dict(), "c": out.with_suffix(".csv").name}
        write_json(doc, out)
        print(json.dumps(doc, indent=2))
        return (0 if report.passed else 1), [str(out), str(out.with_suffix(".csv"))], doc
    sigma = _load_covariance(args)
    target = args.to
    model = car_from_covariance(sigma) if target == "car" else sar_from_covariance(sigma, args.kind)
    save_model(model, out)
    doc = json.loads(out.read_text())
    if target == "sar":
        doc["root_kind"] = args.kind
        write_json(doc, out)
    parts = [str(out.parent / v) for k, v in doc.items() if k not in ("type", "root_kind")]
    print(json.dumps(doc, indent=2))
    return 0, [str(out)] + parts, doc


def cmd_sparsify(args):
    sigma = _load_covariance(args)
    from .convert import root_of_precision

    root = root_of_precision(sigma, args.kind)
    model, trace = sparsify(root, sweeps=args.sweeps, nonneg=args.nonneg)
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / "B.csv", d / "Omega.csv", d / "trace.csv"]
    save_matrix(model.b, paths[0])
    save_vector(np.diag(model.omega), paths[1])
    trace.to_csv(paths[2])
    doc = {"root_kind": args.kind, "nonneg": args.nonneg, "sweeps": args.sweeps, "iterations": len(trace),
           "initial_fullness": trace.initial_fullness,
           "final_fullness": float(trace.values[-1]) if len(trace) else None}
    print(json.dumps(doc, indent=2))
    return 0, [str(p) for p in paths], doc


def cmd_fit(args):
    if args.dataset:
        ds = load_dataset(args.dataset)
        y, graph, cent = ds.response, ds.adjacency, ds.centroids
    else:
        if not args.data:
            raise LatticeARError("need --data or --dataset")
        y, _ = load_response(args.data, args.column)
        graph = read_neighbors(args.adjacency, n=len(y)) if args.adjacency else None
        cent = load_centroids(args.centroids) if args.centroids else None
    if args.family == "spherical":
        spec = ModelSpec("spherical", centroids=cent)
    elif args.family == "car-given-weights":
        if not (args.weights and args.m):
            raise LatticeARError("car-given-weights needs --weights and --m")
        spec = ModelSpec(args.family, weights=load_matrix(args.weights), m=load_diagonal(args.m))
    else:
        if graph is None:
            raise LatticeARError(f"{args.family} needs --adjacency")
        spec = ModelSpec(args.family, weights=build_binary_weights(graph).values)
    x = load_design(args.design) if args.design else None
    data = FitData(y, x)
    result = fit(spec, data, start=args.start, n_starts=args.n_starts, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(result.to_dict(), out)
    outputs = [str(out)]
    if args.emit_marginals:
        md = Path(args.emit_marginals)
        md.mkdir(parents=True, exist_ok=True)
        var, corr = marginal_summary(spec.covariance_array(result.theta))
        save_vector(var, md / "marginal_variances.csv")
        save_matrix(corr, md / "marginal_correlations.csv")
        outputs += [str(md / "marginal_variances.csv"), str(md / "marginal_correlations.csv")]
    print(json.dumps(result.to_dict(), indent=2))
    return 0, outputs, result.to_dict()


def cmd_report(args):
    doc = {}
    outputs = []
    if args.adjacency:
        w = build_binary_weights(read_neighbors(args.adjacency))
        if args.row_standardize:
            w, _ = row_standardize(w)
        b = rho_bounds(w)
        doc["rho_bounds"] = [b.lower, b.upper]
        doc["n"] = w.n
    else:
        sigma = _load_covariance(args)
        var, corr = marginal_summary(sigma)
        ev = np.linalg.eigvalsh(sigma.sigma)
        doc.update({"n": sigma.n, "min_eigenvalue": float(ev[0]), "max_eigenvalue": float(ev[-1]),
                    "condition_number": float(ev[-1] / ev[0]),
                    "variance_range": [float(var.min()), float(var.max())],
                    "min_correlation": float(corr.min())})
        if args.covariance_out:
            save_matrix(sigma.sigma, args.covariance_out)
            outputs.append(args.covariance_out)
        if args.marginals_dir:
            md = Path(args.marginals_dir)
            md.mkdir(parents=True, exist_ok=True)
            save_vector(var, md / "marginal_variances.csv")
            save_matrix(corr, md / "marginal_correlations.csv")
            outputs += [str(md / "marginal_variances.csv"), str(md / "marginal_correlations.csv")]
    if args.out:
        write_json(doc, args.out)
        outputs.append(args.out)
    print(json.dumps(doc, indent=2))
    return 0, outputs, doc


def cmd_reproduce(args):
    res = reproduce_columbus(args.out_dir, seed=args.seed)
    print(json.dumps(res["summary"], indent=2))
    return 0, res["outputs"], res["summary"]


# ---------------------------------------------------------------------------


def _add_covariance_inputs(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--covariance", help="dense covariance CSV")
    g.add_argument("--model", help="model JSON {type, C/M or B/omega CSV paths}")
    g.add_argument("--grid", type=_grid, help="row-standardized CAR on an RxC rook grid, e.g. 5x5")
    p.add_argument("--rho", type=float, default=0.9, help="rho for --grid (default 0.9)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lattice-ar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--manifest", help="run manifest path (default: next to the outputs)")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("validate", help="check CAR (C1-C4) or SAR (S1-S3) conditions")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--car", nargs=2, metavar=("C", "M"))
    g.add_argument("--sar", nargs=2, metavar=("B", "OMEGA"))
    g.add_argument("--model")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", help="covariance or model -> CAR / SAR model")
    _add_covariance_inputs(p)
    p.add_argument("--haining", metavar="B", help="evaluate C = B + B^T - B B^T and check it")
    p.add_argument("--to", choices=("car", "sar"), default="sar")
    p.add_argument("--kind", choices=("cholesky", "spectral", "spectral-symmetric"), default="cholesky")
    p.add_argument("--out", required=True, help="output model JSON; CSV parts go alongside")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("sparsify", help="Givens-rotation search for a sparser SAR B")
    _add_covariance_inputs(p)
    p.add_argument("--sweeps", type=int, default=8)
    p.add_argument("--nonneg", action="store_true", help="only accept angles keeping B nonnegative")
    p.add_argument("--kind", choices=("cholesky", "spectral", "spectral-symmetric"), default="spectral-symmetric")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("fit", help="REML fit of a covariance family")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--dataset", help="bundled dataset name (columbus)")
    p.add_argument("--data", help="response CSV")
    p.add_argument("--column", help="response column name")
    p.add_argument("--adjacency", help="edge list (1-based) or .gal neighbor file")
    p.add_argument("--centroids", help="centroid CSV (id,x,y)")
    p.add_argument("--weights", help="weights CSV for car-given-weights")
    p.add_argument("--m", help="conditional-variance diagonal CSV for car-given-weights")
    p.add_argument("--design", help="fixed-effects design CSV (default: intercept only)")
    p.add_argument("--start", type=float, nargs=3, metavar=("SIGMA2", "RHO_OR_ALPHA", "DELTA2"))
    p.add_argument("--n-starts", type=int, default=5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-marginals", metavar="DIR", help="write marginal variance/correlation CSVs")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="rho bounds of an adjacency, or summary of a covariance")
    _add_covariance_inputs(p)
    p.add_argument("--adjacency")
    p.add_argument("--row-standardize", action="store_true")
    p.add_argument("--covariance-out", help="also write the covariance CSV")
    p.add_argument("--marginals-dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reproduce-columbus", help="refit the four Columbus crime models")
    p.add_argument("--out-dir", default="columbus_out")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_reproduce)
    return parser


def _manifest_path(args, outputs) -> Path:
    if args.manifest:
        return Path(args.manifest)
    if getattr(args, "out_dir", None):
        return Path(args.out_dir) / f"{args.command}.manifest.json"
    if outputs:
        return Path(outputs[0]).parent / f"{args.command}.manifest.json"
    return Path(f"{args.command}.manifest.json")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    t0 = time.perf_counter()
    params = {k: v for k, v in vars(args).items() if k not in ("func", "command", "manifest")}
    with _thread_limit():
        try:
            code, outputs, _ = args.func(args)
            error = None
        except (LatticeARError, OSError, np.linalg.LinAlgError, KeyError) as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            code, outputs, error = 2, [], f"{type(exc).__name__}: {exc}"
    manifest = {
        "subcommand": args.command,
        "parameters": {k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()},
        "inputs": {k: v for k, v in params.items()
                   if k in ("covariance", "model", "car", "sar", "data", "adjacency", "centroids",
                            "weights", "m", "design", "haining", "dataset") and v},
        "outputs": [str(p) for p in outputs],
        "exit_code": code,
        "error": error,
        "wall_time_s": time.perf_counter() - t0,
        "version": __version__,
    }
    try:
        mp = _manifest_path(args, outputs)
        mp.parent.mkdir(parents=True, exist_ok=True)
        write_json(manifest, mp)
    except OSError as exc:
        print(f"error: cannot write manifest: {exc}", file=sys.stderr)
        return 2
    return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
