"""Biclustering solver: alternating row/column fusion proxes with Dykstra
correction terms, solution paths, and coalescence-point estimation.

The objective being minimized is

    F_gamma(U) = 0.5 * ||X - U||_F^2
                 + gamma * [ Omega_col(U) + Omega_row(U^T) ],

where each Omega is a weighted sum of pairwise l2 column differences over a
sparse graph.  F_gamma is strictly convex, so the minimizer is unique; the
splitting below provably converges to it.  At gamma = 0 the solution is the
data itself, and once gamma passes the coalescence point the solution is
the grand-mean matrix (single bicluster), provided both graphs are
connected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsqr

from .core import Partition, as_matrix, grand_mean
from .prox import (
    FusionProxProblem,
    default_fuse_tol,
    edge_differences,
    extract_partition,
    fusion_penalty,
    incidence,
    prox_fusion,
)
from .weights import ConnectivityError, WeightedGraph, is_connected


@dataclass(frozen=True, eq=False)
class BiclustProblem:
    """Data matrix, both fusion graphs, and the regularization level."""

    X: np.ndarray
    col_graph: WeightedGraph
    row_graph: WeightedGraph
    gamma: float

    def __post_init__(self):
        X = as_matrix(self.X)
        p, n = X.shape
        if self.col_graph.node_count != n:
            raise ValueError(f"column graph has {self.col_graph.node_count} nodes, X has {n} columns")
        if self.row_graph.node_count != p:
            raise ValueError(f"row graph has {self.row_graph.node_count} nodes, X has {p} rows")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        object.__setattr__(self, "X", X)


@dataclass(eq=False)
class DykstraState:
    """Iterates of the splitting loop, kept for warm starts.

    U and P are p x n; Y and Q live in the row-prox operand space (n x p).
    ``gamma`` records the regularization the duals were computed at:
    active-edge duals scale linearly with gamma, so warm starts across a
    gamma change are rescaled by the ratio (then reprojected).
    """

    U: np.ndarray
    Y: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    iteration: int = 0
    gap: float = np.inf
    row_duals: np.ndarray | None = None
    col_duals: np.ndarray | None = None
    gamma: float | None = None


@dataclass(eq=False)
class BiclusterFit:
    """Solution of one biclustering problem plus extraction byproducts."""

    problem: BiclustProblem
    U: np.ndarray
    row_partition: Partition
    col_partition: Partition
    row_duals: np.ndarray
    col_duals: np.ndarray
    row_differences: np.ndarray
    col_differences: np.ndarray
    row_fuse_tol: float
    col_fuse_tol: float
    gamma: float
    gap: float
    objective: float
    converged: bool
    outer_iterations: int
    warm_started: bool = False
    state: DykstraState | None = field(default=None, repr=False)

    @property
    def n_biclusters(self) -> int:
        return self.row_partition.n_clusters * self.col_partition.n_clusters


def penalty_value(U: np.ndarray, row_graph: WeightedGraph, col_graph: WeightedGraph) -> float:
    """J(U): weighted column differences over the column graph plus weighted
    row differences over the row graph."""
    U = np.asarray(U, dtype=np.float64)
    p, n = U.shape
    if col_graph.node_count != n or row_graph.node_count != p:
        raise ValueError("graph node counts do not match the matrix shape")
    return fusion_penalty(U, col_graph) + fusion_penalty(U.T, row_graph)


def biclust_objective(prob: BiclustProblem, U: np.ndarray) -> float:
    fit = 0.5 * float(np.sum((prob.X - U) ** 2))
    return fit + prob.gamma * penalty_value(U, prob.row_graph, prob.col_graph)


class _SplittingLoop:
    """Mutable state of the alternating-prox iteration for one problem."""

    def __init__(self, prob: BiclustProblem, warm: DykstraState | None, max_prox_iter: int):
        self.prob = prob
        self.max_prox_iter = max_prox_iter
        X = prob.X
        if warm is not None:
            self.U = warm.U.copy()
            self.P = warm.P.copy()
            self.Q = warm.Q.copy()
            scale = 1.0
            if warm.gamma and prob.gamma > 0 and warm.gamma > 0:
                scale = prob.gamma / warm.gamma
            self.row_duals = None if warm.row_duals is None else warm.row_duals * scale
            self.col_duals = None if warm.col_duals is None else warm.col_duals * scale
        else:
            self.U = X.copy()
            self.P = np.zeros_like(X)
            self.Q = np.zeros_like(X.T)
            self.row_duals = None
            self.col_duals = None
        self.Y = self.U.T.copy()
        self.row_sol = None
        self.col_sol = None
        self.iteration = 0
        self.gap = np.inf

    def step(self, prox_tol: float) -> float:
        prob = self.prob
        self.row_sol = prox_fusion(
            FusionProxProblem((self.U + self.P).T, prob.row_graph, prob.gamma),
            tol=prox_tol,
            max_iter=self.max_prox_iter,
            warm_duals=self.row_duals,
        )
        self.Y = self.row_sol.U
        self.row_duals = self.row_sol.duals
        self.P = self.U + self.P - self.Y.T
        self.col_sol = prox_fusion(
            FusionProxProblem((self.Y + self.Q).T, prob.col_graph, prob.gamma),
            tol=prox_tol,
            max_iter=self.max_prox_iter,
            warm_duals=self.col_duals,
        )
        self.U = self.col_sol.U
        self.col_duals = self.col_sol.duals
        self.Q = self.Y + self.Q - self.U.T
        self.iteration += 1
        self.gap = float(np.linalg.norm(self.U - self.Y.T))
        if not np.isfinite(self.gap):
            raise FloatingPointError("splitting iterate became non-finite")
        return self.gap

    def state(self) -> DykstraState:
        return DykstraState(
            U=self.U, Y=self.Y, P=self.P, Q=self.Q,
            iteration=self.iteration, gap=self.gap,
            row_duals=self.row_duals, col_duals=self.col_duals,
            gamma=self.prob.gamma,
        )


def _check_problem_connectivity(prob: BiclustProblem) -> None:
    for g, what in ((prob.col_graph, "column"), (prob.row_graph, "row")):
        if not is_connected(g):
            raise ConnectivityError(
                f"{what} graph is disconnected; bridge it or pass allow_disconnected=True"
            )


def _run_splitting(
    prob: BiclustProblem,
    outer_tol: float,
    inner_tol: float | None,
    max_outer: int,
    warm: DykstraState | None,
    max_prox_iter: int,
) -> tuple[_SplittingLoop, bool, float]:
    """Iterate to the outer gap target; returns (loop, converged, inner_rel)."""
    if max_outer < 1:
        raise ValueError("max_outer must be >= 1")
    scale = 1.0 + float(np.linalg.norm(prob.X))
    gap_target = outer_tol * scale
    inner_rel = (outer_tol / 10.0) if inner_tol is None else inner_tol

    loop = _SplittingLoop(prob, warm, max_prox_iter)
    gaps: list[float] = []
    converged = False
    stall_streak = 0
    while loop.iteration < max_outer:
        gap = loop.step(inner_rel * scale)
        gaps.append(gap)
        if gap <= gap_target:
            converged = True
            break
        stalled = len(gaps) > 5 and gaps[-6] > 0 and (gaps[-6] - gaps[-1]) / gaps[-6] < 0.01
        if stalled:
            stall_streak += 1
            # a stalled gap with fully converged proxes means they are not
            # accurate enough; tightening is pointless once they already
            # exhaust their iteration budget
            if loop.row_sol.converged and loop.col_sol.converged:
                inner_rel = max(inner_rel * 0.5, 1e-15)
            if stall_streak >= 25:
                break  # no realistic progress; return flagged best iterate
        else:
            stall_streak = 0
    return loop, converged, inner_rel


def dykstra_solve(
    prob: BiclustProblem,
    outer_tol: float = 1e-6,
    inner_tol: float | None = None,
    max_outer: int = 500,
    warm: DykstraState | None = None,
    allow_disconnected: bool = False,
    max_prox_iter: int = 10000,
) -> tuple[np.ndarray, DykstraState, bool]:
    """Centroid estimate only (no partition extraction); used by loops that
    re-solve many times, such as the hold-out imputation."""
    if not allow_disconnected:
        _check_problem_connectivity(prob)
    loop, converged, _ = _run_splitting(prob, outer_tol, inner_tol, max_outer, warm, max_prox_iter)
    return loop.U, loop.state(), converged


def cobra_fit(
    prob: BiclustProblem,
    outer_tol: float = 1e-6,
    inner_tol: float | None = None,
    max_outer: int = 500,
    warm: DykstraState | None = None,
    allow_disconnected: bool = False,
    max_prox_iter: int = 10000,
    fuse_tol: float | None = None,
) -> BiclusterFit:
    """Minimize the biclustering objective by Dykstra-like splitting.

    Alternates the row-fusion prox and the column-fusion prox with
    correction matrices until the two centroid estimates agree:
    ||U_m - Y_m^T||_F <= outer_tol * (1 + ||X||_F).  Tolerances are
    relative; ``inner_tol`` (prox KKT budget) defaults to outer_tol / 10
    and is halved whenever the outer gap stalls, since the splitting
    theory assumes the proxes become exact.

    Hitting ``max_outer`` returns the best iterate with converged=False
    instead of raising, so callers can retry with adjusted budgets.
    """
    if not allow_disconnected:
        _check_problem_connectivity(prob)
    loop, converged, inner_rel = _run_splitting(
        prob, outer_tol, inner_tol, max_outer, warm, max_prox_iter
    )
    scale = 1.0 + float(np.linalg.norm(prob.X))

    row_fuse = fuse_tol if fuse_tol is not None else default_fuse_tol((loop.U + loop.P).T)
    col_fuse = fuse_tol if fuse_tol is not None else default_fuse_tol(loop.U)
    if converged and prob.gamma > 0:
        # re-solve the final proxes tight enough that fused differences sit
        # well below the extraction threshold
        polish_tol = min(inner_rel * scale, 0.5 * min(row_fuse, col_fuse))
        loop.step(polish_tol)

    row_partition = extract_partition(loop.row_sol, prob.row_graph, row_fuse)
    col_partition = extract_partition(loop.col_sol, prob.col_graph, col_fuse)

    return BiclusterFit(
        problem=prob,
        U=loop.U,
        row_partition=row_partition,
        col_partition=col_partition,
        row_duals=loop.row_duals,
        col_duals=loop.col_duals,
        row_differences=loop.row_sol.differences,
        col_differences=loop.col_sol.differences,
        row_fuse_tol=row_fuse,
        col_fuse_tol=col_fuse,
        gamma=prob.gamma,
        gap=loop.gap,
        objective=biclust_objective(prob, loop.U),
        converged=converged,
        outer_iterations=loop.iteration,
        warm_started=warm is not None,
        state=loop.state(),
    )


def bicluster_means(X: np.ndarray, row_part: Partition, col_part: Partition) -> np.ndarray:
    """R x C table of block averages of X over the assignment cross-product."""
    X = as_matrix(X)
    R, C = row_part.n_clusters, col_part.n_clusters
    means = np.zeros((R, C))
    for r, rows in enumerate(row_part.clusters()):
        for c, cols in enumerate(col_part.clusters()):
            means[r, c] = X[np.ix_(rows, cols)].mean()
    return means


def _check_connected_pair(col_graph: WeightedGraph, row_graph: WeightedGraph) -> None:
    for g, what in ((col_graph, "column"), (row_graph, "row")):
        if not is_connected(g):
            raise ConnectivityError(f"{what} graph is disconnected")


def gamma_max_search(
    X: np.ndarray,
    col_graph: WeightedGraph,
    row_graph: WeightedGraph,
    factor: float = 2.0,
    start: float | None = None,
    outer_tol: float = 1e-6,
    max_doublings: int = 200,
) -> float:
    """Smallest tested gamma at which the fit collapses to the grand mean.

    Geometric bracketing (multiply by ``factor``) followed by bisection to
    1% relative width; the returned value always coalesces.  Requires both
    graphs connected, otherwise no finite gamma coalesces.
    """
    X = as_matrix(X)
    if factor <= 1:
        raise ValueError("factor must be > 1")
    _check_connected_pair(col_graph, row_graph)
    Xbar = grand_mean(X)
    target = outer_tol * (1.0 + float(np.linalg.norm(X)))

    warm: dict = {"state": None}

    def coalesces(gamma: float) -> bool:
        fit = cobra_fit(
            BiclustProblem(X, col_graph, row_graph, gamma),
            outer_tol=outer_tol,
            warm=warm["state"],
        )
        warm["state"] = fit.state
        return float(np.linalg.norm(fit.U - Xbar)) <= target

    if start is None:
        start = 1e-3 * (1.0 + float(np.linalg.norm(X)))
    if start <= 0:
        raise ValueError("start must be > 0")

    if coalesces(start):
        return start
    lo, hi = start, start
    for _ in range(max_doublings):
        lo, hi = hi, hi * factor
        if coalesces(hi):
            break
    else:
        raise RuntimeError("coalescence bracket not found; graphs may be effectively disconnected")

    while (hi - lo) > 0.01 * hi:
        mid = 0.5 * (lo + hi)
        if coalesces(mid):
            hi = mid
        else:
            lo = mid
    return hi


def gamma_max_certificate(
    X: np.ndarray,
    col_graph: WeightedGraph,
    row_graph: WeightedGraph,
    size_cap: int = 20_000_000,
) -> float:
    """Upper bound on the coalescence point from a least-squares dual.

    Solves the minimum-norm least-squares system A^T v = vec(X - grand
    mean), where A stacks the column-graph and row-graph edge-difference
    operators, then returns the largest per-edge dual norm divided by its
    weight.  At any gamma at or above this value the dual vector is
    feasible and certifies the grand mean as the unique minimizer.

    The operators are applied implicitly (Kronecker structure, never
    materialized); ``size_cap`` guards the dual vector length
    |E_col| * p + |E_row| * n.
    """
    X = as_matrix(X)
    p, n = X.shape
    _check_connected_pair(col_graph, row_graph)
    m_col, m_row = col_graph.n_edges, row_graph.n_edges
    dual_len = m_col * p + m_row * n
    if dual_len > size_cap:
        raise ValueError(f"dual dimension {dual_len} exceeds size_cap={size_cap}")
    if dual_len == 0:
        return 0.0

    Phi_c = incidence(col_graph)
    Phi_r = incidence(row_graph)
    split = m_col * p

    def matvec(v: np.ndarray) -> np.ndarray:
        Vc = v[:split].reshape(p, m_col)
        Vr = v[split:].reshape(m_row, n)
        out = np.zeros((p, n))
        if m_col:
            out += (Phi_c.T @ Vc.T).T
        if m_row:
            out += Phi_r.T @ Vr
        return out.ravel()

    def rmatvec(u: np.ndarray) -> np.ndarray:
        U = u.reshape(p, n)
        parts = []
        if m_col:
            parts.append(((Phi_c @ U.T).T).ravel())
        if m_row:
            parts.append((Phi_r @ U).ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    op = LinearOperator((p * n, dual_len), matvec=matvec, rmatvec=rmatvec)
    b = (X - grand_mean(X)).ravel()
    result = lsqr(op, b, atol=1e-12, btol=1e-12, iter_lim=100_000)
    v = result[0]

    bound = 0.0
    if m_col:
        norms = np.linalg.norm(v[:split].reshape(p, m_col), axis=0)
        bound = max(bound, float((norms / col_graph.weights).max()))
    if m_row:
        norms = np.linalg.norm(v[split:].reshape(m_row, n), axis=1)
        bound = max(bound, float((norms / row_graph.weights).max()))
    return bound


def default_gamma_grid(gmax: float, count: int = 50) -> np.ndarray:
    """{0} followed by count-1 log-spaced values from gmax/1000 up to gmax."""
    if gmax <= 0:
        raise ValueError("gmax must be > 0")
    if count < 2:
        raise ValueError("count must be >= 2")
    if count == 2:
        return np.array([0.0, gmax])
    tail = gmax * np.logspace(-3.0, 0.0, count - 1)
    return np.concatenate([[0.0], tail])


def solution_path(
    X: np.ndarray,
    col_graph: WeightedGraph,
    row_graph: WeightedGraph,
    grid,
    outer_tol: float = 1e-6,
    max_outer: int = 500,
    allow_disconnected: bool = False,
) -> list[BiclusterFit]:
    """Fit every gamma in an increasing grid, warm-starting each point from
    the previous one."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if grid[0] < 0:
        raise ValueError("grid values must be >= 0")

    fits: list[BiclusterFit] = []
    state: DykstraState | None = None
    for gamma in grid:
        fit = cobra_fit(
            BiclustProblem(X, col_graph, row_graph, float(gamma)),
            outer_tol=outer_tol,
            max_outer=max_outer,
            warm=state,
            allow_disconnected=allow_disconnected,
        )
        state = fit.state
        fits.append(fit)
    return fits
