"""End-to-end plumbing: weights from data, grid from the coalescence bound,
hold-out selection, and a final full-data fit.

Centering: the checkerboard model assumes a zero baseline, but the solve is
translation-equivariant and the Gaussian-kernel weights depend only on
differences, so removing the grand mean changes nothing except the
reporting convention.  It is therefore exposed as an explicit, recorded
option (default off); when enabled, the returned fit lives in centered
coordinates and ``PipelineResult.grand_mean`` carries the offset to add
back for display.
"""

from __future__ import annotations

import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import as_matrix, center_grand_mean
from .selection import (
    HoldoutSpec,
    ValidationCurve,
    cobra_missing,
    holdout_error,
    sample_holdout,
    select_gamma,
)
from .solver import (
    BiclustProblem,
    BiclusterFit,
    cobra_fit,
    default_gamma_grid,
    gamma_max_certificate,
    gamma_max_search,
)
from .weights import (
    ConnectivityError,
    WeightedGraph,
    WeightParams,
    bridge_components,
    default_target_sums,
    is_connected,
    knn_gaussian_weights,
)


@dataclass(frozen=True)
class PipelineParams:
    """Everything the full pipeline needs besides the data.

    ``phi`` is the Gaussian kernel rate; with the default "ambient"
    scaling it is divided by the compared vectors' length (p for columns,
    n for rows), i.e. the kernel sees the mean squared coordinate
    difference.  Without this, exp(-phi * d^2) underflows on
    high-dimensional data and the far-pair weights become denormal noise
    that inflates the coalescence bound astronomically.  Set
    ``phi_scaling="raw"`` to apply phi to the summed squared distance
    as written.

    ``col_target_sum`` / ``row_target_sum`` default to 1/sqrt(p) and
    1/sqrt(n).  ``bridge`` controls whether fragmented k-NN graphs are
    repaired or rejected.
    """

    k: int = 10
    phi: float = 0.5
    phi_scaling: str = "ambient"
    col_target_sum: float | None = None
    row_target_sum: float | None = None
    bridge: bool = True
    center: bool = False
    holdout_fraction: float = 0.1
    seed: int = 0
    grid_size: int = 50
    max_grid_extensions: int = 6
    outer_tol: float = 1e-6
    mm_tol: float = 1e-4
    max_mm: int = 100
    mm_fit_outer_tol: float = 1e-4
    mm_fit_max_outer: int = 100
    mm_max_prox_iter: int = 4000
    gamma_cert_cap: int = 20_000_000


def _debug(msg: str) -> None:
    if os.environ.get("CVXBICLUST_DEBUG"):
        print(f"[cvxbiclust {time.strftime('%H:%M:%S')}] {msg}", file=sys.stderr, flush=True)


@dataclass(eq=False)
class PipelineResult:
    fit: BiclusterFit
    gamma_star: float
    gamma_max: float
    curve: ValidationCurve
    holdout: HoldoutSpec
    col_graph: WeightedGraph
    row_graph: WeightedGraph
    grand_mean: float
    params: PipelineParams

    def smoothed(self) -> np.ndarray:
        """Fitted centroid matrix in the original (uncentered) coordinates."""
        return self.fit.U + self.grand_mean


def build_graphs(
    X: np.ndarray, params: PipelineParams
) -> tuple[WeightedGraph, WeightedGraph]:
    """k-NN Gaussian weight graphs for both axes, bridged or validated."""
    X = as_matrix(X)
    p, n = X.shape
    col_sum, row_sum = default_target_sums(p, n)
    if params.col_target_sum is not None:
        col_sum = params.col_target_sum
    if params.row_target_sum is not None:
        row_sum = params.row_target_sum

    if p < 2 or n < 2:
        raise ValueError("both axes need at least two objects to build weight graphs")
    k_col = min(params.k, n - 1)
    k_row = min(params.k, p - 1)

    if params.phi_scaling == "ambient":
        phi_col, phi_row = params.phi / p, params.phi / n
    elif params.phi_scaling == "raw":
        phi_col = phi_row = params.phi
    else:
        raise ValueError(f"phi_scaling must be 'ambient' or 'raw', got {params.phi_scaling!r}")

    col_graph = knn_gaussian_weights(
        X, "columns", WeightParams(k=k_col, phi=phi_col, target_sum=col_sum)
    )
    row_graph = knn_gaussian_weights(
        X, "rows", WeightParams(k=k_row, phi=phi_row, target_sum=row_sum)
    )
    if params.bridge:
        col_graph = bridge_components(col_graph, X, "columns")
        row_graph = bridge_components(row_graph, X, "rows")
    else:
        for g, what in ((col_graph, "column"), (row_graph, "row")):
            if not is_connected(g):
                raise ConnectivityError(
                    f"{what} k-NN graph is disconnected; increase k or enable bridging"
                )
    return col_graph, row_graph


def gamma_grid_for(
    X: np.ndarray,
    col_graph: WeightedGraph,
    row_graph: WeightedGraph,
    params: PipelineParams,
) -> tuple[np.ndarray, float]:
    """Default grid reaching the certified coalescence bound.

    Falls back to the doubling search if the certificate's size guard
    trips.
    """
    try:
        gmax = gamma_max_certificate(X, col_graph, row_graph, size_cap=params.gamma_cert_cap)
    except ValueError:
        gmax = gamma_max_search(X, col_graph, row_graph, outer_tol=params.outer_tol)
    if gmax <= 0:
        # constant data coalesces at any positive gamma
        gmax = 1.0
    return default_gamma_grid(gmax, params.grid_size), gmax


def _merge_curves(low: ValidationCurve, high: ValidationCurve) -> ValidationCurve:
    return ValidationCurve(
        gammas=np.concatenate([low.gammas, high.gammas]),
        errors=np.concatenate([low.errors, high.errors]),
        iterations=np.concatenate([low.iterations, high.iterations]),
        converged=np.concatenate([low.converged, high.converged]),
    )


def _probe_below(X, holdout, curve, col_graph, row_graph, params) -> ValidationCurve:
    """Extend the hold-out curve below its lowest gamma until it turns.

    The coalescence bound can sit several decades above the gamma range
    where structure resolves (the last merges are forced through the
    smallest kernel weights), so the minimum of the initial curve often
    lands on its lowest point.  Probe descending at the same per-decade
    density, warm-starting each point from the one above, and stop once two
    consecutive probes sit clearly above the running minimum (or after
    ``max_grid_extensions`` decades).
    """
    per_decade = max(2, round((params.grid_size - 1) / 3))
    ratio = 10.0 ** (1.0 / per_decade)
    max_probes = params.max_grid_extensions * per_decade

    rows = []  # (gamma, error, iterations, converged), descending
    gamma = float(curve.gammas[0])
    best = float(curve.errors.min())
    rising = 0
    U_prev, state = None, None
    for _ in range(max_probes):
        gamma /= ratio
        t0 = time.monotonic()
        result = cobra_missing(
            X, holdout.theta, col_graph, row_graph, gamma,
            mm_tol=params.mm_tol, max_mm=params.max_mm,
            fit_outer_tol=params.mm_fit_outer_tol,
            fit_max_outer=params.mm_fit_max_outer,
            max_prox_iter=params.mm_max_prox_iter,
            init=U_prev, warm=state,
        )
        U_prev, state = result.U, result.state
        err = holdout_error(X, holdout.theta, result.U)
        _debug(f"probe gamma={gamma:.4g} err={err:.4g} mm={result.iterations} "
               f"conv={result.converged} ({time.monotonic() - t0:.1f}s)")
        rows.append((gamma, err, result.iterations, result.converged))
        if err <= best:
            best = err
            rising = 0
        elif err > best * 1.02:
            rising += 1
            if rising >= 2:
                break
    if not rows:
        return curve
    rows.reverse()
    probe_curve = ValidationCurve(
        gammas=np.array([r[0] for r in rows]),
        errors=np.array([r[1] for r in rows]),
        iterations=np.array([r[2] for r in rows], dtype=np.int64),
        converged=np.array([r[3] for r in rows], dtype=bool),
    )
    return _merge_curves(probe_curve, curve)


def select_and_fit(X: np.ndarray, params: PipelineParams) -> PipelineResult:
    """Full pipeline: weights, grid, hold-out selection, final fit at the
    selected gamma on the complete data.

    If the hold-out minimum lands on the grid's lowest positive point the
    curve is extended downward (see ``_probe_below``) before the winner is
    chosen; ties go to the smaller gamma.
    """
    X = as_matrix(X)
    if params.center:
        Xw, mean = center_grand_mean(X)
    else:
        Xw, mean = X, 0.0

    col_graph, row_graph = build_graphs(Xw, params)
    t0 = time.monotonic()
    grid, gmax = gamma_grid_for(Xw, col_graph, row_graph, params)
    _debug(f"grid anchor gamma_max={gmax:.4g} ({time.monotonic() - t0:.1f}s)")
    holdout = sample_holdout(X.shape[0], X.shape[1], params.holdout_fraction, params.seed)
    t0 = time.monotonic()
    gamma_star, curve = select_gamma(
        Xw, holdout.theta, grid, col_graph, row_graph,
        mm_tol=params.mm_tol, max_mm=params.max_mm,
        fit_outer_tol=params.mm_fit_outer_tol,
        fit_max_outer=params.mm_fit_max_outer,
        max_prox_iter=params.mm_max_prox_iter,
    )
    _debug(f"base selection gamma*={gamma_star:.4g} over {curve.gammas.size} points "
           f"({time.monotonic() - t0:.1f}s)")
    if gamma_star <= curve.gammas[0] and params.max_grid_extensions > 0:
        curve = _probe_below(Xw, holdout, curve, col_graph, row_graph, params)
        gamma_star = float(curve.gammas[int(np.argmin(curve.errors))])
        _debug(f"after probing gamma*={gamma_star:.4g} ({curve.gammas.size} points)")
    t0 = time.monotonic()
    fit = cobra_fit(
        BiclustProblem(Xw, col_graph, row_graph, gamma_star),
        outer_tol=params.outer_tol,
    )
    _debug(f"final fit outer={fit.outer_iterations} converged={fit.converged} "
           f"({time.monotonic() - t0:.1f}s)")
    return PipelineResult(
        fit=fit,
        gamma_star=gamma_star,
        gamma_max=gmax,
        curve=curve,
        holdout=holdout,
        col_graph=col_graph,
        row_graph=row_graph,
        grand_mean=mean,
        params=params,
    )


def fit_at_gamma(X: np.ndarray, gamma: float, params: PipelineParams) -> tuple[BiclusterFit, float]:
    """Weights plus a single fit at a fixed gamma (no selection).

    Returns (fit, grand_mean_offset); the offset is 0 unless centering is
    enabled.
    """
    X = as_matrix(X)
    if params.center:
        Xw, mean = center_grand_mean(X)
    else:
        Xw, mean = X, 0.0
    col_graph, row_graph = build_graphs(Xw, params)
    fit = cobra_fit(
        BiclustProblem(Xw, col_graph, row_graph, gamma),
        outer_tol=params.outer_tol,
    )
    return fit, mean


def with_seed(params: PipelineParams, seed: int) -> PipelineParams:
    return replace(params, seed=seed)
