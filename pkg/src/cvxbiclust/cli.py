"""Command-line front end.

Subcommands: simulate, fit, path, select, refine, evaluate, heatmap.
Every command writes its outputs atomically (temp file + rename) plus a
manifest JSON capturing the resolved argument vector, so any run can be
reproduced bit-identically from the manifest alone (wall time lives in a
separate "timing" field excluded from comparisons).

Exit codes: 0 success, 1 usage or I/O errors, 2 solver did not converge
(outputs are still written, flagged).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .core import Partition, as_matrix, load_matrix_csv
from .heatmap import render_heatmap_svg
from .metrics import (
    adjusted_rand_index,
    bicluster_flatten,
    rand_index,
    variation_of_information,
)
from .pipeline import PipelineParams, fit_at_gamma, gamma_grid_for, select_and_fit, build_graphs
from .refine import adaptive_cobra, thresholded_assign
from .simulate import CheckerboardSpec, generate_checkerboard, generate_nonckb
from .solver import bicluster_means, solution_path
from .core import center_grand_mean, write_matrix_csv

SCHEMA = "cobra/1"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the documented convention is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.prog + ": error: " + message) from None


def _write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path: str, payload: dict) -> None:
    _write_text(path, json.dumps(payload, indent=2) + "\n")


def _write_matrix(path: str, X: np.ndarray) -> None:
    tmp = path + ".tmp"
    write_matrix_csv(tmp, X)
    os.replace(tmp, path)


def _write_manifest(path: str, command: str, args_ns: argparse.Namespace,
                    inputs: list, outputs: list, started: float,
                    positionals: tuple = ()) -> None:
    params = {k: v for k, v in sorted(vars(args_ns).items()) if k not in ("func", "command")}
    argv = [command] + [str(params[name]) for name in positionals]
    flag_names = {
        "fraction": "--fraction",  # dest differs from the flag on `select`
        "holdout_fraction": "--holdout-fraction" if command == "refine" else "--fraction",
    }
    for key, value in params.items():
        if key in positionals:
            continue
        flag = flag_names.get(key, "--" + key.replace("_", "-"))
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif value is not None:
            argv.extend([flag, str(value)])
    manifest = {
        "schema": SCHEMA,
        "kind": "manifest",
        "command": command,
        "argv": argv,
        "parameters": params,
        "inputs": inputs,
        "outputs": outputs,
        "version": __version__,
        "timing": {"wall_time_s": time.monotonic() - started},
    }
    _write_json(path, manifest)


def _manifest_path(args_ns: argparse.Namespace, default_anchor: str) -> str:
    if getattr(args_ns, "manifest", None):
        return args_ns.manifest
    return default_anchor + ".manifest.json"


def _params_from_args(args) -> PipelineParams:
    return PipelineParams(
        k=args.k,
        phi=args.phi,
        phi_scaling=args.phi_scaling,
        bridge=not args.no_bridge,
        center=args.center,
        holdout_fraction=getattr(args, "holdout_fraction", 0.1),
        seed=getattr(args, "seed", 0),
        grid_size=getattr(args, "grid_size", 50),
        outer_tol=args.tol,
    )


def _fit_payload(fit, X: np.ndarray, mean_offset: float, params: PipelineParams,
                 refinement: dict | None = None) -> dict:
    row_part, col_part = fit.row_partition, fit.col_partition
    means = bicluster_means(X, row_part, col_part)
    return {
        "schema": SCHEMA,
        "kind": "fit",
        "gamma": fit.gamma,
        "objective": fit.objective,
        "gap": fit.gap,
        "converged": fit.converged,
        "outer_iterations": fit.outer_iterations,
        "n_rows": int(X.shape[0]),
        "n_cols": int(X.shape[1]),
        "row_labels": fit.row_partition.labels.tolist(),
        "col_labels": fit.col_partition.labels.tolist(),
        "n_row_clusters": row_part.n_clusters,
        "n_col_clusters": col_part.n_clusters,
        "n_biclusters": fit.n_biclusters,
        "bicluster_means": [[float(v) for v in row] for row in means],
        "refinement": refinement,
        "metadata": {
            "version": __version__,
            "k": params.k,
            "phi": params.phi,
            "phi_scaling": params.phi_scaling,
            "weight_convention": "column weights sum to 1/sqrt(p), row weights to 1/sqrt(n)",
            "bridge": params.bridge,
            "centered": params.center,
            "grand_mean_offset": mean_offset,
            "outer_tol": params.outer_tol,
            "seed": params.seed,
        },
    }


def _add_common_fit_flags(sp, with_seed=False):
    sp.add_argument("--k", type=int, default=10, help="neighbors per object in the weight graphs")
    sp.add_argument("--phi", type=float, default=0.5, help="Gaussian kernel rate")
    sp.add_argument("--phi-scaling", choices=["ambient", "raw"], default="ambient",
                    help="divide phi by the vector length (default) or use it raw")
    sp.add_argument("--tol", type=float, default=1e-6, help="relative solver tolerance")
    sp.add_argument("--no-bridge", action="store_true",
                    help="reject disconnected k-NN graphs instead of bridging them")
    sp.add_argument("--center", action="store_true",
                    help="remove the grand mean before solving (recorded; results shift back)")
    if with_seed:
        sp.add_argument("--seed", type=int, default=0, help="hold-out mask seed")


def cmd_simulate(args) -> int:
    started = time.monotonic()
    outputs = [args.out, args.truth]
    replicates = args.replicates
    seeds = [args.seed + r for r in range(replicates)] if replicates > 1 else [args.seed]
    for rep, seed in enumerate(seeds):
        if replicates > 1:
            stem, ext = os.path.splitext(args.out)
            out_x = f"{stem}_r{rep:03d}{ext}"
            stem_t, ext_t = os.path.splitext(args.truth)
            out_truth = f"{stem_t}_r{rep:03d}{ext_t}"
            if rep == 0:
                outputs = []
            outputs.extend([out_x, out_truth])
        else:
            out_x, out_truth = args.out, args.truth
        if args.kind == "checkerboard":
            spec = CheckerboardSpec(
                p=args.p, n=args.n, row_groups=args.row_groups,
                col_groups=args.col_groups, sigma=args.sigma, seed=seed,
            )
            X, row_truth, col_truth, means = generate_checkerboard(spec)
            truth = {
                "schema": SCHEMA,
                "kind": "truth",
                "layout": "checkerboard",
                "row_labels": row_truth.labels.tolist(),
                "col_labels": col_truth.labels.tolist(),
                "means": [[float(v) for v in row] for row in means],
                "spec": {
                    "p": args.p, "n": args.n, "row_groups": args.row_groups,
                    "col_groups": args.col_groups, "sigma": args.sigma, "seed": seed,
                },
            }
        else:
            block_rows = tuple(int(v) for v in args.block_rows.split(","))
            block_cols = tuple(int(v) for v in args.block_cols.split(","))
            X, cell_truth = generate_nonckb(
                noise_sd=args.noise_sd, block_dims=(block_rows, block_cols), seed=seed
            )
            truth = {
                "schema": SCHEMA,
                "kind": "truth",
                "layout": "nonckb",
                "cell_labels": cell_truth.labels.tolist(),
                "spec": {
                    "block_rows": list(block_rows), "block_cols": list(block_cols),
                    "noise_sd": args.noise_sd, "seed": seed,
                },
            }
        _write_matrix(out_x, X)
        _write_json(out_truth, truth)
    _write_manifest(_manifest_path(args, args.out), "simulate", args, [], outputs, started)
    return 0


def cmd_fit(args) -> int:
    started = time.monotonic()
    X = load_matrix_csv(args.input)
    params = _params_from_args(args)
    fit, mean_offset = fit_at_gamma(X, args.gamma, params)
    payload = _fit_payload(fit, X, mean_offset, params)
    _write_json(args.out, payload)
    outputs = [args.out]
    if args.umatrix:
        _write_matrix(args.umatrix, fit.U + mean_offset)
        outputs.append(args.umatrix)
    _write_manifest(_manifest_path(args, args.out), "fit", args, [args.input], outputs, started,
                    positionals=("input",))
    return 0 if fit.converged else 2


def cmd_path(args) -> int:
    started = time.monotonic()
    X = load_matrix_csv(args.input)
    params = _params_from_args(args)
    if params.center:
        Xw, mean_offset = center_grand_mean(X)
    else:
        Xw, mean_offset = X, 0.0
    col_graph, row_graph = build_graphs(Xw, params)
    if args.grid:
        grid = np.array([float(v) for v in args.grid.split(",")])
        gmax = float(grid.max())
    else:
        grid, gmax = gamma_grid_for(Xw, col_graph, row_graph, params)
    fits = solution_path(Xw, col_graph, row_graph, grid, outer_tol=params.outer_tol)
    points = [_fit_payload(f, X, mean_offset, params) for f in fits]
    payload = {
        "schema": SCHEMA,
        "kind": "path",
        "gamma_max": gmax,
        "points": points,
    }
    _write_json(args.out, payload)
    _write_manifest(_manifest_path(args, args.out), "path", args, [args.input], [args.out], started,
                    positionals=("input",))
    return 0 if all(f.converged for f in fits) else 2


def _write_curve_csv(path: str, curve) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "holdout_error", "iterations", "converged"])
        for g, e, it, cv in curve.rows():
            writer.writerow([f"{g:.17g}", f"{e:.17g}", it, int(cv)])
    os.replace(tmp, path)


def cmd_select(args) -> int:
    started = time.monotonic()
    X = load_matrix_csv(args.input)
    params = _params_from_args(args)
    result = select_and_fit(X, params)
    payload = {
        "schema": SCHEMA,
        "kind": "selection",
        "gamma_star": result.gamma_star,
        "gamma_max": result.gamma_max,
        "holdout": {
            "fraction": result.holdout.fraction,
            "seed": result.holdout.seed,
            "count": len(result.holdout.theta),
        },
        "curve": [
            {"gamma": g, "holdout_error": e, "iterations": it, "converged": cv}
            for g, e, it, cv in result.curve.rows()
        ],
        "fit": _fit_payload(result.fit, X, result.grand_mean, params),
    }
    _write_json(args.out, payload)
    outputs = [args.out]
    if args.curve:
        _write_curve_csv(args.curve, result.curve)
        outputs.append(args.curve)
    if args.umatrix:
        _write_matrix(args.umatrix, result.smoothed())
        outputs.append(args.umatrix)
    _write_manifest(_manifest_path(args, args.out), "select", args, [args.input], outputs, started,
                    positionals=("input",))
    return 0 if result.fit.converged else 2


def cmd_refine(args) -> int:
    started = time.monotonic()
    X = load_matrix_csv(args.input)
    params = _params_from_args(args)
    if args.mode == "adaptive":
        first, second = adaptive_cobra(X, params)
        payload = _fit_payload(second.fit, X, second.grand_mean, params,
                               refinement={"method": "adaptive"})
        payload["gamma_star"] = second.gamma_star
        payload["first_pass"] = {
            "gamma_star": first.gamma_star,
            "n_row_clusters": first.fit.row_partition.n_clusters,
            "n_col_clusters": first.fit.col_partition.n_clusters,
        }
        converged = second.fit.converged
    else:
        result = select_and_fit(X, params)
        row_part, col_part = thresholded_assign(result.fit, args.fraction)
        payload = _fit_payload(result.fit, X, result.grand_mean, params,
                               refinement={"method": "threshold", "fraction": args.fraction})
        payload["gamma_star"] = result.gamma_star
        payload["row_labels"] = row_part.labels.tolist()
        payload["col_labels"] = col_part.labels.tolist()
        payload["n_row_clusters"] = row_part.n_clusters
        payload["n_col_clusters"] = col_part.n_clusters
        payload["n_biclusters"] = row_part.n_clusters * col_part.n_clusters
        means = bicluster_means(X, row_part, col_part)
        payload["bicluster_means"] = [[float(v) for v in row] for row in means]
        converged = result.fit.converged
    _write_json(args.out, payload)
    _write_manifest(_manifest_path(args, args.out), "refine", args, [args.input], [args.out], started,
                    positionals=("input",))
    return 0 if converged else 2


def _load_assignment(path: str) -> Partition:
    """Assignment CSV (object_id, label) or a fit JSON (flattened)."""
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "row_labels" in doc and "col_labels" in doc:
            return bicluster_flatten(
                Partition.from_labels(np.array(doc["row_labels"])),
                Partition.from_labels(np.array(doc["col_labels"])),
            )
        if "cell_labels" in doc:
            return Partition.from_labels(np.array(doc["cell_labels"]))
        if "fit" in doc:
            return bicluster_flatten(
                Partition.from_labels(np.array(doc["fit"]["row_labels"])),
                Partition.from_labels(np.array(doc["fit"]["col_labels"])),
            )
        raise ValueError(f"{path}: no assignment arrays found")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    pairs = [(int(r[0]), r[1].strip()) for r in rows]
    pairs.sort(key=lambda kv: kv[0])
    return Partition.from_labels(np.array([label for _, label in pairs]))


def cmd_evaluate(args) -> int:
    started = time.monotonic()
    p1 = _load_assignment(args.a)
    p2 = _load_assignment(args.b)
    ari = adjusted_rand_index(p1, p2)
    payload = {
        "schema": SCHEMA,
        "kind": "metrics",
        "ri": rand_index(p1, p2),
        "ari": ari,
        "vi": variation_of_information(p1, p2),
        "q": p1.q,
        "clusters_1": p1.n_clusters,
        "clusters_2": p2.n_clusters,
    }
    _write_json(args.out, payload)
    _write_manifest(_manifest_path(args, args.out), "evaluate", args, [args.a, args.b], [args.out], started)
    return 0


def cmd_heatmap(args) -> int:
    started = time.monotonic()
    X = load_matrix_csv(args.input)
    with open(args.fit, encoding="utf-8") as fh:
        doc = json.load(fh)
    fit_doc = doc.get("fit", doc)
    if fit_doc.get("n_rows") != X.shape[0] or fit_doc.get("n_cols") != X.shape[1]:
        raise ValueError("fit does not match the matrix shape")
    row_part = Partition.from_labels(np.array(fit_doc["row_labels"]))
    col_part = Partition.from_labels(np.array(fit_doc["col_labels"]))
    if args.umatrix:
        U = load_matrix_csv(args.umatrix)
        if U.shape != X.shape:
            raise ValueError("smoothed matrix does not match the input shape")
    else:
        # fall back to the block-mean estimate implied by the assignments
        means = np.array(fit_doc["bicluster_means"])
        U = means[row_part.labels - 1][:, col_part.labels - 1]
    svg = render_heatmap_svg(U, row_part, col_part)
    _write_text(args.out, svg)
    _write_manifest(_manifest_path(args, args.out), "heatmap", args, [args.fit, args.input], [args.out],
                    started, positionals=("fit", "input"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvxbiclust", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate benchmark matrices with known structure")
    sp.add_argument("--kind", choices=["checkerboard", "nonckb"], default="checkerboard")
    sp.add_argument("--p", type=int, default=60)
    sp.add_argument("--n", type=int, default=60)
    sp.add_argument("--row-groups", type=int, default=4)
    sp.add_argument("--col-groups", type=int, default=4)
    sp.add_argument("--sigma", type=float, default=1.5)
    sp.add_argument("--noise-sd", type=float, default=float(np.sqrt(0.1)),
                    help="nonckb noise standard deviation")
    sp.add_argument("--block-rows", default="10,10", help="nonckb row block sizes")
    sp.add_argument("--block-cols", default="10,10,10", help="nonckb column block sizes")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicates", type=int, default=1)
    sp.add_argument("--out", required=True, help="output matrix CSV")
    sp.add_argument("--truth", required=True, help="output truth JSON")
    sp.add_argument("--manifest", default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="solve at a fixed gamma")
    sp.add_argument("input", help="matrix CSV")
    sp.add_argument("--gamma", type=float, required=True)
    _add_common_fit_flags(sp)
    sp.add_argument("--out", required=True, help="output fit JSON")
    sp.add_argument("--umatrix", default=None, help="also write the smoothed matrix CSV")
    sp.add_argument("--manifest", default=None)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("path", help="solution path over a gamma grid")
    sp.add_argument("input")
    _add_common_fit_flags(sp)
    sp.add_argument("--grid", default=None, help="comma-separated gammas (default: auto grid)")
    sp.add_argument("--grid-size", type=int, default=50)
    sp.add_argument("--out", required=True)
    sp.add_argument("--manifest", default=None)
    sp.set_defaults(func=cmd_path)

    sp = sub.add_parser("select", help="hold-out validation and final fit")
    sp.add_argument("input")
    sp.add_argument("--fraction", dest="holdout_fraction", type=float, default=0.1,
                    help="fraction of entries to hold out")
    sp.add_argument("--grid-size", type=int, default=50)
    _add_common_fit_flags(sp, with_seed=True)
    sp.add_argument("--out", required=True, help="selection JSON")
    sp.add_argument("--curve", default=None, help="also write the validation curve CSV")
    sp.add_argument("--umatrix", default=None)
    sp.add_argument("--manifest", default=None)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("refine", help="adaptive two-pass or thresholded assignments")
    sp.add_argument("input")
    sp.add_argument("--mode", choices=["adaptive", "threshold"], required=True)
    sp.add_argument("--fraction", dest="fraction", type=float, default=0.25,
                    help="threshold fraction of the edge-norm spread")
    sp.add_argument("--holdout-fraction", dest="holdout_fraction", type=float, default=0.1)
    sp.add_argument("--grid-size", type=int, default=50)
    _add_common_fit_flags(sp, with_seed=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--manifest", default=None)
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("evaluate", help="compare two assignments (RI, ARI, VI)")
    sp.add_argument("--a", required=True, help="assignment CSV or fit/truth JSON")
    sp.add_argument("--b", required=True)
    sp.add_argument("--out", required=True, help="metrics JSON")
    sp.add_argument("--manifest", default=None)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("heatmap", help="cluster-sorted SVG heatmap of a fit")
    sp.add_argument("fit", help="fit or selection JSON")
    sp.add_argument("input", help="matrix CSV the fit was computed from")
    sp.add_argument("--umatrix", default=None,
                    help="smoothed matrix CSV to color by (default: block means)")
    sp.add_argument("--out", required=True, help="output SVG")
    sp.add_argument("--manifest", default=None)
    sp.set_defaults(func=cmd_heatmap)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return 0 if not exc.code else 1
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"cvxbiclust {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
