"""Partition-similarity measures and bicluster flattening.

All three indices are computed from one contingency table, so comparing
partitions of q objects costs O(q + table) rather than O(q^2) pair
enumeration.  Entropies and mutual information use log base 2, making the
variation of information a metric measured in bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Partition


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Joint cluster-membership counts of two partitions of q objects."""

    counts: np.ndarray

    @property
    def q(self) -> int:
        return int(self.counts.sum())

    @property
    def row_marginals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_marginals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @classmethod
    def from_partitions(cls, p1: Partition, p2: Partition) -> "ContingencyTable":
        if p1.q != p2.q:
            raise ValueError(f"partitions cover different object counts: {p1.q} vs {p2.q}")
        counts = np.zeros((p1.n_clusters, p2.n_clusters), dtype=np.int64)
        np.add.at(counts, (p1.labels - 1, p2.labels - 1), 1)
        return cls(counts)


def _choose2(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def rand_index(p1: Partition, p2: Partition) -> float:
    """Fraction of object pairs on which the two partitions agree
    (both together or both apart); 1 means identical groupings."""
    table = ContingencyTable.from_partitions(p1, p2)
    q = table.q
    if q < 2:
        raise ValueError("need at least two objects")
    pairs = _choose2(np.array(q))
    together = _choose2(table.counts).sum()
    same_1 = _choose2(table.row_marginals).sum()
    same_2 = _choose2(table.col_marginals).sum()
    # both-apart pairs by inclusion-exclusion
    apart = pairs - same_1 - same_2 + together
    return float((together + apart) / pairs)


def adjusted_rand_index(p1: Partition, p2: Partition) -> float:
    """Rand index recentered so random partitions score near zero under a
    hypergeometric null; can be negative, 1 at perfect agreement.

    The 0/0 degenerate cases (both all-singletons, or both one cluster)
    return 1 when the tables agree and 0 otherwise.
    """
    table = ContingencyTable.from_partitions(p1, p2)
    q = table.q
    if q < 2:
        raise ValueError("need at least two objects")
    together = _choose2(table.counts).sum()
    same_1 = _choose2(table.row_marginals).sum()
    same_2 = _choose2(table.col_marginals).sum()
    expected = same_1 * same_2 / _choose2(np.array(q))
    maximum = 0.5 * (same_1 + same_2)
    if maximum == expected:
        return 1.0 if p1.same_assignment(p2) else 0.0
    return float((together - expected) / (maximum - expected))


def _entropy_bits(sizes: np.ndarray, q: int) -> float:
    fracs = sizes[sizes > 0] / q
    return float(-(fracs * np.log2(fracs)).sum())


def variation_of_information(p1: Partition, p2: Partition) -> float:
    """VI(A, B) = H(A) + H(B) - 2 I(A, B), in bits; zero iff the partitions
    agree, and a genuine metric on partitions."""
    table = ContingencyTable.from_partitions(p1, p2)
    q = table.q
    h1 = _entropy_bits(table.row_marginals, q)
    h2 = _entropy_bits(table.col_marginals, q)
    counts = table.counts
    nz = counts > 0
    joint = counts[nz] / q
    outer = (table.row_marginals[:, None] * table.col_marginals[None, :])[nz] / (q * q)
    mi = float((joint * np.log2(joint / outer)).sum())
    vi = h1 + h2 - 2.0 * mi
    return max(vi, 0.0)


def bicluster_flatten(row_part: Partition, col_part: Partition) -> Partition:
    """Cell-level partition induced by the row/column cross-product.

    Cell (i, j), enumerated row-major, joins the bicluster identified by
    (row label of i, column label of j).
    """
    C = col_part.n_clusters
    pair_index = (row_part.labels[:, None] - 1) * C + (col_part.labels[None, :] - 1)
    return Partition.from_labels(pair_index.ravel())
