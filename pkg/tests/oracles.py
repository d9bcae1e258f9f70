"""Independent reference implementations used only to check the package.

Everything here is written directly from the defining formulas, favoring
brute force over cleverness, and never calls into the code paths it
verifies (generic convex solvers via cvxpy, exhaustive pair enumeration,
plain-loop summation, a deliberately slow projected dual ascent).
"""

from __future__ import annotations

import math

import cvxpy as cp
import numpy as np


def prox_objective_oracle(Z, heads, tails, weights, gamma, tol=1e-9):
    """High-precision optimum of the fusion prox via a generic conic solver."""
    d, q = Z.shape
    U = cp.Variable((d, q))
    penalty = 0
    for h, t, w in zip(heads, tails, weights):
        penalty += w * cp.norm(U[:, int(h)] - U[:, int(t)], 2)
    problem = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(Z - U) + gamma * penalty))
    problem.solve(solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol,
                  max_iter=2000)
    assert problem.status in ("optimal", "optimal_inaccurate"), problem.status
    return float(problem.value), U.value


def biclust_objective_oracle(X, col_edges, row_edges, gamma, tol=1e-9):
    """Generic joint solve of the two-sided fusion objective."""
    p, n = X.shape
    U = cp.Variable((p, n))
    penalty = 0
    for h, t, w in col_edges:
        penalty += w * cp.norm(U[:, int(h)] - U[:, int(t)], 2)
    for h, t, w in row_edges:
        penalty += w * cp.norm(U[int(h), :] - U[int(t), :], 2)
    problem = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(X - U) + gamma * penalty))
    problem.solve(solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol,
                  max_iter=2000)
    assert problem.status in ("optimal", "optimal_inaccurate"), problem.status
    return float(problem.value), U.value


def masked_objective_oracle(X, mask, col_edges, row_edges, gamma, tol=1e-9):
    """Generic solve of the hold-out objective (masked quadratic term)."""
    p, n = X.shape
    U = cp.Variable((p, n))
    penalty = 0
    for h, t, w in col_edges:
        penalty += w * cp.norm(U[:, int(h)] - U[:, int(t)], 2)
    for h, t, w in row_edges:
        penalty += w * cp.norm(U[int(h), :] - U[int(t), :], 2)
    observed = np.argwhere(~mask)
    fit = cp.sum_squares(cp.hstack([X[i, j] - U[i, j] for i, j in observed]))
    problem = cp.Problem(cp.Minimize(0.5 * fit + gamma * penalty))
    problem.solve(solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol,
                  max_iter=2000)
    assert problem.status in ("optimal", "optimal_inaccurate"), problem.status
    return float(problem.value), U.value


def slow_prox_dual_ascent(Z, heads, tails, weights, gamma, iters=200000):
    """Plain projected dual ascent, small fixed step, cold start, no
    acceleration: an independent route to the same prox."""
    d, q = Z.shape
    m = len(heads)
    if m == 0 or gamma == 0:
        return Z.copy()
    deg = np.zeros(q)
    for h, t in zip(heads, tails):
        deg[h] += 1
        deg[t] += 1
    step = 1.0 / (2.0 * deg.max()) / 4.0
    lam = np.zeros((d, m))
    radii = gamma * np.asarray(weights)
    for _ in range(iters):
        U = Z.copy()
        for l, (h, t) in enumerate(zip(heads, tails)):
            U[:, h] -= lam[:, l]
            U[:, t] += lam[:, l]
        for l, (h, t) in enumerate(zip(heads, tails)):
            lam[:, l] += step * (U[:, h] - U[:, t])
            nrm = np.linalg.norm(lam[:, l])
            if nrm > radii[l]:
                lam[:, l] *= radii[l] / nrm
    U = Z.copy()
    for l, (h, t) in enumerate(zip(heads, tails)):
        U[:, h] -= lam[:, l]
        U[:, t] += lam[:, l]
    return U


def penalty_double_loop(U, row_edges, col_edges):
    """Direct summation of the fusion penalty, one edge at a time."""
    total = 0.0
    for h, t, w in col_edges:
        total += w * math.sqrt(float(np.sum((U[:, int(h)] - U[:, int(t)]) ** 2)))
    for h, t, w in row_edges:
        total += w * math.sqrt(float(np.sum((U[int(h), :] - U[int(t), :]) ** 2)))
    return total


def knn_weights_brute(V, k, phi, target_sum):
    """Weights recomputed from the definition: all pairwise distances,
    sorted with index tie-breaks, mutual-OR mask, kernel, normalize.
    V holds one object per row."""
    q = V.shape[0]
    d = np.zeros((q, q))
    for i in range(q):
        for j in range(q):
            d[i, j] = math.sqrt(float(np.sum((V[i] - V[j]) ** 2)))
    neighbor = [set() for _ in range(q)]
    for i in range(q):
        others = sorted((d[i, j], j) for j in range(q) if j != i)
        neighbor[i] = {j for _, j in others[:k]}
    edges = {}
    for i in range(q):
        for j in range(i + 1, q):
            if j in neighbor[i] or i in neighbor[j]:
                w = math.exp(-phi * d[i, j] ** 2)
                if w > 0:
                    edges[(i, j)] = w
    total = sum(edges.values())
    return {e: w * target_sum / total for e, w in edges.items()}


def union_find_components(q, edges):
    parent = list(range(q))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    return [find(i) for i in range(q)]


def rand_index_pairs(labels1, labels2):
    """O(q^2) enumeration of agreeing pairs."""
    q = len(labels1)
    agree = 0
    for i in range(q):
        for j in range(i + 1, q):
            same1 = labels1[i] == labels1[j]
            same2 = labels2[i] == labels2[j]
            if same1 == same2:
                agree += 1
    return agree / (q * (q - 1) / 2)


def vi_direct(labels1, labels2):
    """Variation of information from raw cluster sets in bits."""
    q = len(labels1)
    clusters1 = {}
    clusters2 = {}
    for idx in range(q):
        clusters1.setdefault(labels1[idx], set()).add(idx)
        clusters2.setdefault(labels2[idx], set()).add(idx)

    def H(clusters):
        return -sum((len(c) / q) * math.log2(len(c) / q) for c in clusters.values())

    mi = 0.0
    for a in clusters1.values():
        for b in clusters2.values():
            inter = len(a & b)
            if inter:
                mi += (inter / q) * math.log2(inter * q / (len(a) * len(b)))
    return H(clusters1) + H(clusters2) - 2 * mi


def random_connected_graph(rng, q, extra_edges=2):
    """Random spanning tree plus a few extra edges, random weights."""
    nodes = list(rng.permutation(q))
    edges = set()
    for idx in range(1, q):
        a = nodes[idx]
        b = nodes[int(rng.integers(0, idx))]
        edges.add((min(a, b), max(a, b)))
    attempts = 0
    while len(edges) < q - 1 + extra_edges and attempts < 50:
        a, b = rng.integers(0, q, size=2)
        attempts += 1
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    edges = sorted(edges)
    heads = np.array([e[0] for e in edges], dtype=np.int64)
    tails = np.array([e[1] for e in edges], dtype=np.int64)
    weights = rng.uniform(0.5, 1.5, size=len(edges))
    weights = weights / weights.sum()
    return heads, tails, weights
