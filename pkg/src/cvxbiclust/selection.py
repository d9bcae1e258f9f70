"""Hold-out validation for the regularization level.

A random ~10% of matrix entries is masked, the masked problem

    0.5 * || P_obs(X) - P_obs(U) ||_F^2 + gamma * J(U)

is solved by repeatedly filling the masked entries with the current
estimate and re-running the complete-data solver (a
majorization-minimization scheme, so the masked objective never
increases), and gamma is chosen to minimize prediction error on the
masked entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import IndexPairSet, as_matrix, make_rng
from .solver import (
    BiclustProblem,
    DykstraState,
    dykstra_solve,
    penalty_value,
)
from .weights import WeightedGraph


@dataclass(frozen=True)
class HoldoutSpec:
    """Masked index pairs plus the sampling parameters that produced them."""

    theta: IndexPairSet
    fraction: float
    seed: int


@dataclass(eq=False)
class ValidationCurve:
    """Per-gamma hold-out records, gammas strictly increasing."""

    gammas: np.ndarray
    errors: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.gammas) <= 0):
            raise ValueError("gammas must be strictly increasing")
        if np.any(self.errors < 0):
            raise ValueError("errors must be nonnegative")

    def rows(self):
        for g, e, it, cv in zip(self.gammas, self.errors, self.iterations, self.converged):
            yield float(g), float(e), int(it), bool(cv)


def sample_holdout(p: int, n: int, fraction: float, seed: int, max_attempts: int = 10000) -> HoldoutSpec:
    """Uniform mask of round(fraction * p * n) entries, resampled until
    every row and every column keeps at least one observed entry."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    count = int(round(fraction * p * n))
    if count < 1:
        raise ValueError("fraction too small: empty hold-out set")
    if count > p * n - max(p, n):
        raise ValueError("fraction too large: some row or column would lose all observed entries")
    rng = make_rng(seed)
    for _ in range(max_attempts):
        flat = rng.choice(p * n, size=count, replace=False)
        pairs = np.column_stack([flat // n, flat % n])
        masked_per_row = np.bincount(pairs[:, 0], minlength=p)
        masked_per_col = np.bincount(pairs[:, 1], minlength=n)
        if masked_per_row.max() < n and masked_per_col.max() < p:
            theta = IndexPairSet(p, n, pairs)
            return HoldoutSpec(theta=theta, fraction=fraction, seed=seed)
    raise RuntimeError(f"no feasible mask after {max_attempts} attempts")


def masked_objective(
    X: np.ndarray,
    mask: np.ndarray,
    U: np.ndarray,
    row_graph: WeightedGraph,
    col_graph: WeightedGraph,
    gamma: float,
) -> float:
    """Validation objective: squared error over observed entries only, plus
    the fusion penalty."""
    resid = (X - U)[~mask]
    return 0.5 * float(np.dot(resid, resid)) + gamma * penalty_value(U, row_graph, col_graph)


@dataclass(eq=False)
class ImputationResult:
    U: np.ndarray
    iterations: int
    converged: bool
    objectives: np.ndarray
    state: DykstraState


def cobra_missing(
    X: np.ndarray,
    theta: IndexPairSet,
    col_graph: WeightedGraph,
    row_graph: WeightedGraph,
    gamma: float,
    mm_tol: float = 1e-5,
    max_mm: int = 100,
    fit_outer_tol: float = 1e-7,
    fit_max_outer: int = 500,
    max_prox_iter: int = 10000,
    init: np.ndarray | None = None,
    warm: DykstraState | None = None,
    allow_disconnected: bool = False,
) -> ImputationResult:
    """Solve the masked problem by iterative imputation.

    Each round fills the masked entries of X with the current estimate and
    runs the complete-data solver on the filled matrix; the masked
    objective is non-increasing across rounds.  Stops when consecutive
    estimates agree to mm_tol * (1 + ||X||_F).  The complete-data solves
    run at ``fit_outer_tol`` (tighter than the default solver tolerance)
    so solver error cannot mask the descent property.

    gamma must be positive when the mask is nonempty: at gamma = 0 the
    masked entries do not appear in the objective at all.
    """
    X = as_matrix(X)
    if theta.p != X.shape[0] or theta.n != X.shape[1]:
        raise ValueError("hold-out set does not match the matrix shape")
    if gamma <= 0 and len(theta) > 0:
        raise ValueError("gamma must be > 0 when entries are masked")
    mask = theta.mask()

    if init is not None:
        U = np.array(init, dtype=np.float64)
        if U.shape != X.shape:
            raise ValueError("init must match the matrix shape")
    else:
        U = X.copy()
        U[mask] = X[~mask].mean()

    scale = 1.0 + float(np.linalg.norm(X))
    objectives = [masked_objective(X, mask, U, row_graph, col_graph, gamma)]
    converged = False
    iterations = 0
    for iterations in range(1, max_mm + 1):
        M = np.where(mask, U, X)
        U_next, warm, _ = dykstra_solve(
            BiclustProblem(M, col_graph, row_graph, gamma),
            outer_tol=fit_outer_tol,
            max_outer=fit_max_outer,
            max_prox_iter=max_prox_iter,
            warm=warm,
            allow_disconnected=allow_disconnected,
        )
        objectives.append(masked_objective(X, mask, U_next, row_graph, col_graph, gamma))
        step = float(np.linalg.norm(U_next - U))
        U = U_next
        if step <= mm_tol * scale:
            converged = True
            break

    return ImputationResult(
        U=U,
        iterations=iterations,
        converged=converged,
        objectives=np.array(objectives),
        state=warm,
    )


def holdout_error(X: np.ndarray, theta: IndexPairSet, U: np.ndarray) -> float:
    """Frobenius norm of X - U restricted to the held-out entries."""
    mask = theta.mask()
    diff = (X - U)[mask]
    return float(np.sqrt(np.dot(diff, diff)))


def select_gamma(
    X: np.ndarray,
    theta: IndexPairSet,
    grid,
    col_graph: WeightedGraph,
    row_graph: WeightedGraph,
    mm_tol: float = 1e-5,
    max_mm: int = 100,
    fit_outer_tol: float = 1e-7,
    fit_max_outer: int = 500,
    max_prox_iter: int = 10000,
    allow_disconnected: bool = False,
) -> tuple[float, ValidationCurve]:
    """Hold-out prediction error over a gamma grid; returns the minimizer
    (ties broken toward the smaller gamma) and the full curve.

    Nonpositive grid values are dropped: the masked objective cannot pin
    down the masked entries at gamma = 0.  Each gamma's imputation is
    warm-started from the previous gamma's result.
    """
    grid = np.asarray(grid, dtype=np.float64)
    grid = grid[grid > 0]
    if grid.size == 0:
        raise ValueError("grid contains no positive gamma values")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")

    X = as_matrix(X)
    errors = np.zeros(grid.size)
    iters = np.zeros(grid.size, dtype=np.int64)
    flags = np.zeros(grid.size, dtype=bool)
    U_prev = None
    state = None
    for idx, gamma in enumerate(grid):
        result = cobra_missing(
            X, theta, col_graph, row_graph, float(gamma),
            mm_tol=mm_tol, max_mm=max_mm, fit_outer_tol=fit_outer_tol,
            fit_max_outer=fit_max_outer, max_prox_iter=max_prox_iter,
            init=U_prev, warm=state, allow_disconnected=allow_disconnected,
        )
        U_prev = result.U
        state = result.state
        errors[idx] = holdout_error(X, theta, result.U)
        iters[idx] = result.iterations
        flags[idx] = result.converged

    best = int(np.argmin(errors))  # argmin returns the first (smallest gamma) tie
    curve = ValidationCurve(gammas=grid, errors=errors, iterations=iters, converged=flags)
    return float(grid[best]), curve
