"""Post-hoc refinements of a base fit.

Adaptive two-pass: run the full pipeline, recompute the weight graphs
treating the smoothed estimate as the data, then select and fit again on
the original data with the new graphs.  Similar objects end up closer in
the smoothed estimate, so the second pass shrinks them together harder.

Thresholding: fuse every edge whose difference-vector norm falls below a
fraction of the norms' standard deviation, coarsening the base partitions
without re-solving anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Partition, partition_from_components
from .pipeline import PipelineParams, PipelineResult, build_graphs, gamma_grid_for, select_and_fit
from .selection import select_gamma
from .solver import BiclustProblem, cobra_fit
from .weights import WeightedGraph


@dataclass(frozen=True)
class RefinementParams:
    """Hard-threshold level as a fraction of the edge-norm spread."""

    threshold_fraction: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.threshold_fraction <= 1.0:
            raise ValueError("threshold_fraction must be in (0, 1]")


def _axis_threshold(norms: np.ndarray, fraction: float) -> float:
    # population standard deviation; undefined spread (fewer than 2 edges)
    # means no extra fusions
    if norms.size < 2:
        return 0.0
    return fraction * float(np.std(norms))


def _threshold_axis(
    differences: np.ndarray, graph: WeightedGraph, fraction: float, fuse_tol: float
) -> Partition:
    if graph.n_edges == 0:
        return Partition.from_labels(np.arange(graph.node_count))
    norms = np.linalg.norm(differences, axis=0)
    tau = _axis_threshold(norms, fraction)
    # edges at exactly tau keep their difference (fuse only strictly below),
    # and base-fit fusions are never undone
    fused = (norms < tau) | (norms <= fuse_tol)
    return partition_from_components(graph.node_count, graph.heads[fused], graph.tails[fused])


def thresholded_assign(fit, fraction: float) -> tuple[Partition, Partition]:
    """Partitions after hard-thresholding the difference vectors of both
    axes at ``fraction`` times the per-axis norm standard deviation.

    fraction = 0 reproduces the base fit's partitions.
    """
    if fraction < 0:
        raise ValueError("fraction must be >= 0")
    row_part = _threshold_axis(
        fit.row_differences, fit.problem.row_graph, fraction, fit.row_fuse_tol
    )
    col_part = _threshold_axis(
        fit.col_differences, fit.problem.col_graph, fraction, fit.col_fuse_tol
    )
    return row_part, col_part


def adaptive_cobra(X: np.ndarray, params: PipelineParams) -> tuple[PipelineResult, PipelineResult]:
    """Two-pass fit: reweight using the first pass's smoothed estimate.

    Returns (first_pass, second_pass).  The second pass re-selects its own
    gamma: the reweighted penalty lives on a different scale, so the first
    pass's value is not transferable.  Both passes share the hold-out seed.
    """
    first = select_and_fit(X, params)

    smoothed = first.fit.U  # same coordinates as the matrix the graphs see
    col_graph, row_graph = build_graphs(smoothed, params)

    Xw = first.fit.problem.X  # centered iff params.center
    grid, gmax = gamma_grid_for(Xw, col_graph, row_graph, params)
    gamma_star, curve = select_gamma(
        Xw, first.holdout.theta, grid, col_graph, row_graph,
        mm_tol=params.mm_tol, max_mm=params.max_mm,
        fit_outer_tol=params.mm_fit_outer_tol,
        fit_max_outer=params.mm_fit_max_outer,
        max_prox_iter=params.mm_max_prox_iter,
    )
    fit = cobra_fit(
        BiclustProblem(Xw, col_graph, row_graph, gamma_star),
        outer_tol=params.outer_tol,
    )
    second = PipelineResult(
        fit=fit,
        gamma_star=gamma_star,
        gamma_max=gmax,
        curve=curve,
        holdout=first.holdout,
        col_graph=col_graph,
        row_graph=row_graph,
        grand_mean=first.grand_mean,
        params=params,
    )
    return first, second
