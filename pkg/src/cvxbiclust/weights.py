"""Sparse Gaussian-kernel k-nearest-neighbor weight graphs over the rows or
columns of a data matrix, plus connectivity checks and repair.

The fusion penalty needs one graph per axis.  Column weights conventionally
sum to 1/sqrt(p) and row weights to 1/sqrt(n), which keeps the two penalty
terms on the same scale; both sums are configurable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import as_matrix


class ConnectivityError(ValueError):
    """Raised when a weight graph does not connect all nodes."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with strictly positive edge weights.

    Edges are stored as parallel arrays (heads, tails, weights) with
    heads < tails, sorted by (head, tail), no duplicates.  Indices are
    0-based in memory; the CSV interface is 1-based.
    """

    node_count: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("graph needs at least one node")
        heads = np.asarray(self.heads, dtype=np.int64)
        tails = np.asarray(self.tails, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not (heads.shape == tails.shape == weights.shape) or heads.ndim != 1:
            raise ValueError("heads, tails, weights must be equal-length 1-d arrays")
        if heads.size:
            if heads.min() < 0 or tails.max() >= self.node_count:
                raise ValueError("edge index out of range")
            if np.any(heads >= tails):
                raise ValueError("edges must satisfy head < tail")
            if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise ValueError("edge weights must be finite and strictly positive")
            order = np.lexsort((tails, heads))
            heads, tails, weights = heads[order], tails[order], weights[order]
            key = heads * self.node_count + tails
            if np.unique(key).size != key.size:
                raise ValueError("duplicate edges")
        object.__setattr__(self, "heads", heads)
        object.__setattr__(self, "tails", tails)
        object.__setattr__(self, "weights", weights)

    @property
    def n_edges(self) -> int:
        return int(self.heads.size)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        np.add.at(deg, self.heads, 1)
        np.add.at(deg, self.tails, 1)
        return deg

    def to_csv(self, path) -> None:
        """Edge list as CSV with 1-based indices and 17-digit weights."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "w"])
            for i, j, w in zip(self.heads, self.tails, self.weights):
                writer.writerow([int(i) + 1, int(j) + 1, f"{w:.17g}"])

    @classmethod
    def from_csv(cls, path, node_count: int) -> "WeightedGraph":
        heads, tails, weights = [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip().lower() for h in header] != ["i", "j", "w"]:
                raise ValueError(f"{path}: expected header i,j,w")
            for row in reader:
                if not row:
                    continue
                i, j, w = int(row[0]) - 1, int(row[1]) - 1, float(row[2])
                heads.append(min(i, j))
                tails.append(max(i, j))
                weights.append(w)
        return cls(node_count, np.array(heads, dtype=np.int64),
                   np.array(tails, dtype=np.int64), np.array(weights))


@dataclass(frozen=True)
class WeightParams:
    """k-nearest-neighbor count, Gaussian kernel rate, and the value the
    weights are normalized to sum to."""

    k: int = 10
    phi: float = 0.5
    target_sum: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.phi < 0:
            raise ValueError("phi must be >= 0")
        if not self.target_sum > 0:
            raise ValueError("target_sum must be > 0")


def default_target_sums(p: int, n: int) -> tuple[float, float]:
    """(column graph sum, row graph sum) = (1/sqrt(p), 1/sqrt(n)).

    Columns live in R^p and rows in R^n, so these sums put the two fusion
    terms on the same scale.
    """
    if p < 1 or n < 1:
        raise ValueError("p and n must be >= 1")
    return 1.0 / np.sqrt(p), 1.0 / np.sqrt(n)


def _axis_vectors(X: np.ndarray, axis: str) -> np.ndarray:
    """Objects to be compared, one per row of the returned array."""
    X = as_matrix(X)
    if axis == "columns":
        return X.T
    if axis == "rows":
        return X
    raise ValueError(f"axis must be 'columns' or 'rows', got {axis!r}")


def knn_gaussian_weights(X: np.ndarray, axis: str, params: WeightParams) -> WeightedGraph:
    """Gaussian-kernel weights restricted to mutual-OR k-nearest neighbors.

    Pre-weight for pair (i, j): exp(-phi * d_ij^2) if j is among i's k
    nearest neighbors or i among j's (ties broken toward the lower index),
    else 0.  Pre-weights are then rescaled to sum to ``params.target_sum``.
    """
    V = _axis_vectors(X, axis)
    q = V.shape[0]
    if params.k >= q:
        raise ValueError(f"k={params.k} must be smaller than the number of objects q={q}")

    sq = np.sum(V * V, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (V @ V.T)
    np.maximum(d2, 0.0, out=d2)

    # k nearest per node, self excluded, distance ties broken by lower index
    idx = np.arange(q)
    neighbor = np.zeros((q, q), dtype=bool)
    for i in range(q):
        d_i = d2[i].copy()
        d_i[i] = np.inf
        order = np.lexsort((idx, d_i))
        neighbor[i, order[: params.k]] = True
    mask = neighbor | neighbor.T

    heads, tails = np.nonzero(np.triu(mask, 1))
    pre = np.exp(-params.phi * d2[heads, tails])
    keep = pre > 0.0
    heads, tails, pre = heads[keep], tails[keep], pre[keep]
    total = pre.sum()
    if not total > 0.0:
        raise ValueError("all pre-weights are zero; cannot normalize")
    return WeightedGraph(q, heads, tails, pre * (params.target_sum / total))


def is_connected(g: WeightedGraph) -> bool:
    """True iff the positive-weight edges form one component over all nodes."""
    if g.node_count == 1:
        return True
    if g.n_edges == 0:
        return False
    adj = coo_matrix(
        (g.weights, (g.heads, g.tails)), shape=(g.node_count, g.node_count)
    )
    n_comp, _ = connected_components(adj, directed=False)
    return n_comp == 1


def _component_labels(g: WeightedGraph) -> np.ndarray:
    adj = coo_matrix(
        (np.ones(g.n_edges), (g.heads, g.tails)), shape=(g.node_count, g.node_count)
    )
    _, labels = connected_components(adj, directed=False)
    return labels


def bridge_components(g: WeightedGraph, X: np.ndarray, axis: str) -> WeightedGraph:
    """Connect a fragmented graph by adding one edge per missing link.

    Components are joined greedily by minimum inter-component Euclidean
    distance (a minimum spanning tree over components); each bridge gets
    the smallest existing positive weight, then all weights are rescaled so
    the total matches the input graph's total.  Connected input is returned
    unchanged.
    """
    if is_connected(g):
        return g
    V = _axis_vectors(X, axis)
    if V.shape[0] != g.node_count:
        raise ValueError("matrix does not match graph node count")
    labels = _component_labels(g)
    n_comp = int(labels.max()) + 1

    # candidate bridge per component pair: the closest node pair across it
    cand: dict[tuple[int, int], tuple[float, int, int]] = {}
    for a in range(n_comp):
        ia = np.flatnonzero(labels == a)
        for b in range(a + 1, n_comp):
            ib = np.flatnonzero(labels == b)
            diff = V[ia][:, None, :] - V[ib][None, :, :]
            d = np.sqrt(np.sum(diff * diff, axis=2))
            flat = int(np.argmin(d))
            r, c = divmod(flat, d.shape[1])
            cand[(a, b)] = (float(d[r, c]), int(ia[r]), int(ib[c]))

    # Kruskal over components, ties broken by (distance, node pair)
    order = sorted(cand.items(), key=lambda kv: (kv[1][0], kv[1][1], kv[1][2]))
    parent = list(range(n_comp))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    bridge_weight = float(g.weights.min()) if g.n_edges else 1.0
    new_h, new_t, new_w = [], [], []
    for (a, b), (_, i, j) in order:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        parent[max(ra, rb)] = min(ra, rb)
        new_h.append(min(i, j))
        new_t.append(max(i, j))
        new_w.append(bridge_weight)

    heads = np.concatenate([g.heads, np.array(new_h, dtype=np.int64)])
    tails = np.concatenate([g.tails, np.array(new_t, dtype=np.int64)])
    weights = np.concatenate([g.weights, np.array(new_w)])
    if g.total_weight > 0:
        weights = weights * (g.total_weight / weights.sum())
    return WeightedGraph(g.node_count, heads, tails, weights)
