import numpy as np
import pytest

from cvxbiclust.core import make_rng
from cvxbiclust.pipeline import PipelineParams, select_and_fit
from cvxbiclust.refine import RefinementParams, adaptive_cobra, thresholded_assign
from cvxbiclust.simulate import CheckerboardSpec, generate_checkerboard
from cvxbiclust.solver import BiclustProblem, cobra_fit
from cvxbiclust.weights import WeightedGraph


def complete_graph(q, total, seed=0):
    heads, tails = np.triu_indices(q, 1)
    w = make_rng(seed).uniform(0.5, 1.5, size=heads.size)
    w = w * (total / w.sum())
    return WeightedGraph(q, heads.astype(np.int64), tails.astype(np.int64), w)


def moderate_fit(seed=0, gamma=0.4):
    rng = make_rng(seed)
    X = rng.standard_normal((6, 7))
    cg = complete_graph(7, 1 / np.sqrt(6), seed=seed + 1)
    rg = complete_graph(6, 1 / np.sqrt(7), seed=seed + 2)
    return cobra_fit(BiclustProblem(X, cg, rg, gamma), outer_tol=1e-8)


class TestThresholdedAssign:
    def test_fraction_zero_identity(self):
        fit = moderate_fit(seed=1)
        rows, cols = thresholded_assign(fit, 0.0)
        assert rows.same_assignment(fit.row_partition)
        assert cols.same_assignment(fit.col_partition)

    def test_equal_norms_unchanged(self):
        # all difference norms equal -> zero spread -> tau = 0 -> identity
        fit = moderate_fit(seed=2, gamma=0.0)
        # gamma=0 keeps U = X; rebuild differences as constants
        fit.col_differences = np.ones_like(fit.col_differences)
        fit.row_differences = np.ones_like(fit.row_differences)
        rows, cols = thresholded_assign(fit, 0.25)
        assert rows.n_clusters == 6
        assert cols.n_clusters == 7

    def test_hand_computed_threshold(self):
        # norms {0.01, 0.011, 5.0, 5.2}: population sd = 2.5679...,
        # tau = 0.25 * sd = 0.642 -> first two edges fuse
        from types import SimpleNamespace

        norms = np.array([0.01, 0.011, 5.0, 5.2])
        tau = 0.25 * float(np.std(norms))
        assert tau == pytest.approx(0.6419, abs=1e-3)
        path5 = WeightedGraph(5, np.array([0, 1, 2, 3]), np.array([1, 2, 3, 4]),
                              np.full(4, 0.25))
        lonely = WeightedGraph(2, np.array([0]), np.array([1]), np.array([1.0]))
        fake = SimpleNamespace(
            col_differences=np.vstack([norms, np.zeros(4)]),
            row_differences=np.array([[7.0], [0.0]]),
            col_fuse_tol=1e-9,
            row_fuse_tol=1e-9,
            problem=SimpleNamespace(col_graph=path5, row_graph=lonely),
        )
        rows, cols = thresholded_assign(fake, 0.25)
        # edges 0-1 and 1-2 fused; 2-3, 3-4 kept apart
        assert cols.labels.tolist() == [1, 1, 1, 2, 3]
        # single row edge: sd undefined -> no extra fusion
        assert rows.labels.tolist() == [1, 2]

    def test_monotone_coarsening(self):
        fit = moderate_fit(seed=4, gamma=0.25)
        prev_rows, prev_cols = thresholded_assign(fit, 0.0)
        for frac in [0.1, 0.25, 0.5, 1.0]:
            rows, cols = thresholded_assign(fit, frac)
            # every previously-fused pair stays fused
            for part, prev in ((rows, prev_rows), (cols, prev_cols)):
                q = part.q
                for a in range(q):
                    for b in range(a + 1, q):
                        if prev.labels[a] == prev.labels[b]:
                            assert part.labels[a] == part.labels[b]
            prev_rows, prev_cols = rows, cols

    def test_never_splits_base_fusions(self):
        fit = moderate_fit(seed=5, gamma=2.0)  # heavy fusion
        rows, cols = thresholded_assign(fit, 0.25)
        assert rows.n_clusters <= fit.row_partition.n_clusters
        assert cols.n_clusters <= fit.col_partition.n_clusters

    def test_refinement_params_validation(self):
        RefinementParams(0.25)
        with pytest.raises(ValueError):
            RefinementParams(0.0)
        with pytest.raises(ValueError):
            RefinementParams(1.5)


class TestAdaptiveCobra:
    def test_noiseless_blocks_reproduce_plain_partition(self):
        spec = CheckerboardSpec(p=12, n=12, row_groups=2, col_groups=3, sigma=0.0, seed=21)
        X, rows, cols, _ = generate_checkerboard(spec)
        params = PipelineParams(k=5, grid_size=8, seed=77)
        first, second = adaptive_cobra(X, params)
        assert second.fit.row_partition.same_assignment(first.fit.row_partition)
        assert second.fit.col_partition.same_assignment(first.fit.col_partition)

    def test_constant_matrix_single_bicluster(self):
        X = np.full((8, 9), 3.25) + 1e-9 * make_rng(1).standard_normal((8, 9))
        params = PipelineParams(k=4, grid_size=6, seed=5)
        first, second = adaptive_cobra(X, params)
        assert first.fit.n_biclusters == 1
        assert second.fit.n_biclusters == 1

    def test_determinism(self):
        spec = CheckerboardSpec(p=10, n=10, row_groups=2, col_groups=2, sigma=0.5, seed=31)
        X, *_ = generate_checkerboard(spec)
        params = PipelineParams(k=4, grid_size=6, seed=9)
        _, a = adaptive_cobra(X, params)
        _, b = adaptive_cobra(X, params)
        assert a.gamma_star == b.gamma_star
        assert np.array_equal(a.fit.U, b.fit.U)
        assert a.fit.row_partition.same_assignment(b.fit.row_partition)
