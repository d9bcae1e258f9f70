"""Synthetic data generators for benchmarking bicluster recovery.

The checkerboard generator draws a block-constant mean matrix with
nonuniformly sized row/column groups plus iid Gaussian noise.  A second
generator builds a five-bicluster layout that deliberately violates the
checkerboard cross-product assumption.  Everything is deterministic in the
seed; draw order is part of the contract (means, then row groups, then
column groups, then noise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Partition, make_rng


DEFAULT_MEAN_LEVELS = tuple(np.linspace(-6.0, 6.0, 25))


@dataclass(frozen=True)
class CheckerboardSpec:
    p: int
    n: int
    row_groups: int
    col_groups: int
    sigma: float
    seed: int
    mean_levels: tuple = field(default=DEFAULT_MEAN_LEVELS)

    def __post_init__(self):
        if self.row_groups > self.p or self.col_groups > self.n:
            raise ValueError("cannot make every group nonempty: more groups than objects")
        if self.row_groups < 1 or self.col_groups < 1:
            raise ValueError("need at least one group per axis")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if len(self.mean_levels) == 0:
            raise ValueError("mean_levels must be nonempty")


def _assign_nonuniform(rng: np.random.Generator, count: int, groups: int) -> np.ndarray:
    """Each object joins group g (1-based) with probability proportional to
    1/g; the whole vector is redrawn until every group is hit, which keeps
    the law exactly the stated one conditioned on nonemptiness."""
    probs = 1.0 / np.arange(1, groups + 1)
    probs /= probs.sum()
    while True:
        labels = rng.choice(groups, size=count, p=probs) + 1
        if np.unique(labels).size == groups:
            return labels.astype(np.int64)


def generate_checkerboard(spec: CheckerboardSpec):
    """Returns (X, row_truth, col_truth, means).

    ``means`` is the R x C table of block means, indexed by the generator's
    group labels (row_truth/col_truth use those same labels, so
    means[r-1, c-1] is the mean of cell (i, j) whenever row i has label r
    and column j label c).
    """
    rng = make_rng(spec.seed)
    R, C = spec.row_groups, spec.col_groups
    levels = np.asarray(spec.mean_levels, dtype=np.float64)
    means = levels[rng.integers(0, levels.size, size=(R, C))]
    row_labels = _assign_nonuniform(rng, spec.p, R)
    col_labels = _assign_nonuniform(rng, spec.n, C)
    X = means[row_labels[:, None] - 1, col_labels[None, :] - 1].copy()
    if spec.sigma > 0:
        X += spec.sigma * rng.standard_normal((spec.p, spec.n))
    return X, Partition(row_labels), Partition(col_labels), means


NONCKB_MEANS = (1.0, 0.0, 0.25, -1.0, 1.25)


def generate_nonckb(
    noise_sd: float = float(np.sqrt(0.1)),
    block_dims: tuple = ((10, 10), (10, 10, 10)),
    seed: int = 0,
):
    """Five-bicluster layout that breaks the checkerboard assumption.

    Two row blocks by three column blocks, but the first two blocks of the
    top row share one mean:

        [ a a d ]
        [ b c e ]      with (a, b, c, d, e) = (1, 0, 0.25, -1, 1.25).

    Returns (X, cell_truth) where cell_truth is a 5-cluster partition of
    the p*n cells in row-major order.
    """
    (r1, r2), (c1, c2, c3) = block_dims
    if min(r1, r2, c1, c2, c3) < 1:
        raise ValueError("every block must be nonempty")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    a, b, c, d, e = NONCKB_MEANS
    p, n = r1 + r2, c1 + c2 + c3
    mean = np.zeros((p, n))
    labels = np.zeros((p, n), dtype=np.int64)
    top, bottom = slice(0, r1), slice(r1, p)
    cols1, cols2, cols3 = slice(0, c1), slice(c1, c1 + c2), slice(c1 + c2, n)
    for block, (rows, cols, mu) in enumerate(
        [
            (top, cols1, a),
            (top, cols2, a),
            (bottom, cols1, b),
            (bottom, cols2, c),
            (top, cols3, d),
            (bottom, cols3, e),
        ]
    ):
        mean[rows, cols] = mu
        # the two top-left blocks share bicluster label 1
        labels[rows, cols] = 1 if block <= 1 else block
    rng = make_rng(seed)
    X = mean + noise_sd * rng.standard_normal((p, n))
    return X, Partition.from_labels(labels.ravel())


def perturb(X: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """X plus iid N(0, sigma^2) noise, deterministic in the seed."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    X = np.asarray(X, dtype=np.float64)
    if sigma == 0:
        return X.copy()
    rng = make_rng(seed)
    return X + sigma * rng.standard_normal(X.shape)
