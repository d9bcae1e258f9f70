"""Proximal operator of the weighted l2 fusion penalty.

Evaluating prox_{gamma * Omega_W}(Z) means solving one convex clustering
problem over the columns of Z:

    minimize_U  0.5 * ||Z - U||_F^2 + gamma * sum_l w_l ||U_(.i_l) - U_(.j_l)||_2

The solver runs projected gradient ascent on the Lagrangian dual: one dual
vector per graph edge, constrained to the ball of radius gamma * w_l.  The
primal iterate is always U = Z - A(lambda), where A scatters the edge duals
through the signed incidence matrix, so dual feasibility gives primal
optimality certificates for free.  Nesterov momentum with gradient-based
restart is used by default; the step size is fixed per solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .core import Partition, partition_from_components
from .weights import WeightedGraph


@dataclass(frozen=True, eq=False)
class FusionProxProblem:
    """Prox anchor Z (ambient dim x q), the fusion graph over Z's columns,
    and the regularization level."""

    Z: np.ndarray
    graph: WeightedGraph
    gamma: float

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=np.float64)
        if Z.ndim != 2:
            raise ValueError("Z must be 2-dimensional")
        if Z.shape[1] != self.graph.node_count:
            raise ValueError(
                f"graph has {self.graph.node_count} nodes but Z has {Z.shape[1]} columns"
            )
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        object.__setattr__(self, "Z", Z)


@dataclass(eq=False)
class ProxSolution:
    """Smoothed matrix, edge duals/differences, and solve diagnostics.

    ``duals`` and ``differences`` have one column per graph edge (shape
    ambient_dim x n_edges); ``differences[:, l]`` is U_(.i_l) - U_(.j_l).
    """

    U: np.ndarray
    duals: np.ndarray
    differences: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool


def incidence(graph: WeightedGraph) -> csr_matrix:
    """Signed edge incidence: +1 at the head, -1 at the tail of each edge."""
    m = graph.n_edges
    rows = np.concatenate([np.arange(m), np.arange(m)])
    cols = np.concatenate([graph.heads, graph.tails])
    vals = np.concatenate([np.ones(m), -np.ones(m)])
    return csr_matrix((vals, (rows, cols)), shape=(m, graph.node_count))


def edge_differences(U: np.ndarray, graph: WeightedGraph) -> np.ndarray:
    return U[:, graph.heads] - U[:, graph.tails]


def fusion_penalty(U: np.ndarray, graph: WeightedGraph) -> float:
    """sum_l w_l ||U_(.i_l) - U_(.j_l)||_2 over the graph's edges."""
    if graph.n_edges == 0:
        return 0.0
    norms = np.linalg.norm(edge_differences(U, graph), axis=0)
    return float(np.dot(graph.weights, norms))


def prox_objective(problem: FusionProxProblem, U: np.ndarray) -> float:
    fit = 0.5 * float(np.sum((problem.Z - U) ** 2))
    return fit + problem.gamma * fusion_penalty(U, problem.graph)


def default_fuse_tol(Z: np.ndarray) -> float:
    """Scale-aware threshold below which a difference vector counts as zero."""
    Z = np.asarray(Z)
    return 1e-6 * (1.0 + float(np.linalg.norm(Z)) / np.sqrt(Z.size))


def _project_balls(lam: np.ndarray, radii: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(lam, axis=0)
    scale = np.ones_like(norms)
    over = norms > radii
    scale[over] = radii[over] / norms[over]
    return lam * scale


def _kkt_residual(lam: np.ndarray, V: np.ndarray, radii: np.ndarray, tol: float) -> float:
    """Complementary-slackness violation summed over edges.

    Edges with a difference norm above ``tol`` must carry a dual exactly on
    the ball boundary, aligned with the difference; the rest only need ball
    feasibility.  (The stationarity part of the KKT system is zero by
    construction since U = Z - A(lambda).)
    """
    if lam.size == 0:
        return 0.0
    v_norms = np.linalg.norm(V, axis=0)
    lam_norms = np.linalg.norm(lam, axis=0)
    active = v_norms > tol
    total = float(np.maximum(lam_norms[~active] - radii[~active], 0.0).sum())
    if np.any(active):
        target = V[:, active] * (radii[active] / v_norms[active])
        total += float(np.linalg.norm(lam[:, active] - target, axis=0).sum())
    return total


def prox_fusion(
    problem: FusionProxProblem,
    tol: float = 1e-8,
    max_iter: int = 10000,
    warm_duals: np.ndarray | None = None,
    accelerate: bool = True,
) -> ProxSolution:
    """Evaluate the fusion prox by projected dual ascent.

    Stops once the KKT residual falls to ``tol``; if ``max_iter`` is hit
    first the best (final) iterate is returned with ``converged=False`` so
    outer loops can tighten adaptively.  ``warm_duals`` seeds the dual
    variables (shape ambient_dim x n_edges); cold start is all zeros.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    Z, graph, gamma = problem.Z, problem.graph, problem.gamma
    d, q = Z.shape
    m = graph.n_edges

    if m == 0 or gamma == 0.0:
        duals = np.zeros((d, m))
        return ProxSolution(
            U=Z.copy(),
            duals=duals,
            differences=edge_differences(Z, graph),
            kkt_residual=0.0,
            iterations=0,
            converged=True,
        )

    Phi = incidence(graph)
    PhiT = Phi.T.tocsr()
    radii = gamma * graph.weights
    # dual gradient is Lipschitz with the graph Laplacian's top eigenvalue,
    # which 2 * max degree bounds without an eigen-decomposition
    step = 1.0 / (2.0 * float(graph.degrees().max()))

    if warm_duals is not None and warm_duals.shape == (d, m):
        lam = _project_balls(np.array(warm_duals, dtype=np.float64), radii)
    else:
        lam = np.zeros((d, m))

    y = lam.copy()
    t_mom = 1.0
    U = Z - (PhiT @ lam.T).T
    V = (Phi @ U.T).T
    residual = _kkt_residual(lam, V, radii, tol)
    iterations = 0

    while residual > tol and iterations < max_iter:
        if accelerate:
            U_y = Z - (PhiT @ y.T).T
            grad = (Phi @ U_y.T).T
            lam_new = _project_balls(y + step * grad, radii)
            if float(np.vdot(y - lam_new, lam_new - lam)) > 0.0:
                # momentum points uphill; restart
                t_mom = 1.0
                y = lam_new.copy()
            else:
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
                y = lam_new + ((t_mom - 1.0) / t_next) * (lam_new - lam)
                t_mom = t_next
            lam = lam_new
        else:
            lam = _project_balls(lam + step * V, radii)
        U = Z - (PhiT @ lam.T).T
        V = (Phi @ U.T).T
        iterations += 1
        residual = _kkt_residual(lam, V, radii, tol)

    if not np.all(np.isfinite(U)):
        raise FloatingPointError("prox iterate became non-finite")
    return ProxSolution(
        U=U,
        duals=lam,
        differences=V,
        kkt_residual=residual,
        iterations=iterations,
        converged=residual <= tol,
    )


def extract_partition(
    sol: ProxSolution, g: WeightedGraph, fuse_tol: float | None = None
) -> Partition:
    """Hard cluster assignments from the difference vectors.

    Edges whose difference norm is at most ``fuse_tol`` are treated as
    fused; the partition is the connected components of the fused edges,
    labeled in smallest-member order.
    """
    if fuse_tol is None:
        fuse_tol = default_fuse_tol(sol.U)
    if g.n_edges == 0:
        return Partition.from_labels(np.arange(g.node_count))
    norms = np.linalg.norm(sol.differences, axis=0)
    fused = norms <= fuse_tol
    return partition_from_components(g.node_count, g.heads[fused], g.tails[fused])
