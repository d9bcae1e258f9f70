"""Dense matrix containers, partitions, seeded RNG, and CSV ingestion.

Conventions used throughout the package:

- data matrices are dense float64 arrays of shape (p, n) with rows =
  features and columns = observations;
- all indices are 0-based in memory and 1-based in CSV/JSON interfaces;
- every stochastic operation takes an explicit integer seed and uses a
  counter-based generator, so equal seeds give bit-identical streams.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; no global state is touched anywhere."""
    return np.random.Generator(np.random.Philox(int(seed)))


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and return a dense float64 matrix (p >= 1, n >= 1, finite)."""
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def grand_mean(X: np.ndarray) -> np.ndarray:
    """Constant matrix whose entries all equal the average of X."""
    X = as_matrix(X)
    return np.full_like(X, X.mean())


def center_grand_mean(X: np.ndarray) -> tuple[np.ndarray, float]:
    """Remove the grand mean; returns (X - m, m) with m the scalar mean."""
    X = as_matrix(X)
    m = float(X.mean())
    return X - m, m


def frobenius_distance(A: np.ndarray, B: np.ndarray) -> float:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B))


@dataclass(frozen=True, eq=False)
class Partition:
    """Disjoint grouping of objects 0..q-1 into clusters labeled 1..K.

    Labels are dense: every value in 1..K occurs at least once.  The label
    ORDER carries no meaning; use :meth:`same_assignment` to compare.
    """

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size < 1:
            raise ValueError("partition labels must be a non-empty 1-d array")
        present = np.unique(labels)
        k = present.size
        if present[0] != 1 or present[-1] != k:
            raise ValueError("partition labels must be dense in 1..K")
        object.__setattr__(self, "labels", labels)

    @property
    def q(self) -> int:
        return int(self.labels.size)

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max())

    @classmethod
    def from_labels(cls, raw) -> "Partition":
        """Densify arbitrary labels; cluster of the smallest object index
        becomes 1, next unseen cluster becomes 2, and so on."""
        raw = np.asarray(raw)
        if raw.ndim != 1 or raw.size < 1:
            raise ValueError("labels must be a non-empty 1-d array")
        mapping: dict = {}
        out = np.empty(raw.size, dtype=np.int64)
        for idx, lab in enumerate(raw.tolist()):
            if lab not in mapping:
                mapping[lab] = len(mapping) + 1
            out[idx] = mapping[lab]
        return cls(out)

    def clusters(self) -> list[np.ndarray]:
        """Member index arrays, one per cluster label in 1..K order."""
        return [np.flatnonzero(self.labels == k) for k in range(1, self.n_clusters + 1)]

    def canonical(self) -> "Partition":
        """Relabel so clusters are ordered by their smallest member index."""
        return Partition.from_labels(self.labels)

    def same_assignment(self, other: "Partition") -> bool:
        """True iff both group the objects identically, up to relabeling."""
        if self.q != other.q:
            return False
        return np.array_equal(self.canonical().labels, other.canonical().labels)


def partition_from_components(q: int, heads: np.ndarray, tails: np.ndarray) -> Partition:
    """Connected components of the graph on q nodes with the given edges,
    labeled in smallest-member order."""
    parent = list(range(q))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in zip(np.asarray(heads).tolist(), np.asarray(tails).tolist()):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.fromiter((find(i) for i in range(q)), dtype=np.int64, count=q)
    return Partition.from_labels(roots)


@dataclass(frozen=True)
class IndexPairSet:
    """Set of (row, col) index pairs into a p x n matrix, 0-based, no
    duplicates, strictly fewer pairs than p*n."""

    p: int
    n: int
    pairs: np.ndarray = field(repr=False)

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("pairs must have shape (m, 2)")
        if pairs.shape[0] >= self.p * self.n:
            raise ValueError("pair set must leave at least one entry uncovered")
        if pairs.shape[0] > 0:
            if pairs.min() < 0 or pairs[:, 0].max() >= self.p or pairs[:, 1].max() >= self.n:
                raise ValueError("pair indices out of bounds")
            flat = pairs[:, 0] * self.n + pairs[:, 1]
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate index pairs")
            order = np.argsort(flat)
            pairs = pairs[order]
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    def mask(self) -> np.ndarray:
        """Boolean p x n mask, True on the held-out pairs."""
        m = np.zeros((self.p, self.n), dtype=bool)
        if len(self):
            m[self.pairs[:, 0], self.pairs[:, 1]] = True
        return m


def _is_numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_matrix_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV.

    A single header row and/or a single leading label column are skipped
    when auto-detected (any field that does not parse as a number at all).
    Numeric but non-finite values (nan, inf) are always an error.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(f.strip() for f in row)]
    if not rows:
        raise ValueError(f"{path}: empty CSV")

    has_header = any(not _is_numeric(f) for f in rows[0])
    body = rows[1:] if has_header else rows
    if not body:
        raise ValueError(f"{path}: no data rows")
    has_labels = any(not _is_numeric(r[0]) for r in body)
    if has_header and not has_labels and len(rows[0]) == len(body[0]) + 1:
        # header carries a corner cell for an all-numeric label column
        has_labels = True

    width = len(body[0])
    data = []
    for lineno, row in enumerate(body, start=2 if has_header else 1):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: ragged row ({len(row)} fields, expected {width})")
        fields = row[1:] if has_labels else row
        vals = []
        for f in fields:
            if not _is_numeric(f):
                raise ValueError(f"{path}:{lineno}: non-numeric value {f!r}")
            v = float(f)
            if not math.isfinite(v):
                raise ValueError(f"{path}:{lineno}: non-finite value {f!r}")
            vals.append(v)
        data.append(vals)
    return as_matrix(np.array(data, dtype=np.float64), name=str(path))


def write_matrix_csv(path, X: np.ndarray) -> None:
    """Write a matrix as plain numeric CSV at full (17 significant digit)
    precision, no header or labels."""
    X = as_matrix(X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in X:
            writer.writerow([f"{v:.17g}" for v in row])
