import numpy as np
import pytest

from oracles import knn_weights_brute, union_find_components

from cvxbiclust.core import make_rng
from cvxbiclust.weights import (
    WeightParams,
    WeightedGraph,
    bridge_components,
    default_target_sums,
    is_connected,
    knn_gaussian_weights,
)


def graph_edges(g):
    return {(int(i), int(j)): float(w) for i, j, w in zip(g.heads, g.tails, g.weights)}


class TestWeightedGraph:
    def test_validation(self):
        WeightedGraph(3, np.array([0]), np.array([2]), np.array([0.5]))
        with pytest.raises(ValueError):
            WeightedGraph(3, np.array([2]), np.array([0]), np.array([0.5]))  # head >= tail
        with pytest.raises(ValueError):
            WeightedGraph(3, np.array([0]), np.array([1]), np.array([0.0]))  # zero weight
        with pytest.raises(ValueError):
            WeightedGraph(3, np.array([0, 0]), np.array([1, 1]), np.array([0.5, 0.5]))

    def test_csv_round_trip(self, tmp_path):
        g = WeightedGraph(4, np.array([0, 1]), np.array([2, 3]), np.array([0.125, 1e-7]))
        path = tmp_path / "g.csv"
        g.to_csv(path)
        back = WeightedGraph.from_csv(path, 4)
        assert graph_edges(back) == graph_edges(g)
        # file itself is 1-based
        assert path.read_text().splitlines()[1].startswith("1,3,")


class TestKnnGaussianWeights:
    def test_two_nodes_forced_weight(self):
        X = np.array([[0.0, 3.0]])
        g = knn_gaussian_weights(X, "columns", WeightParams(k=1, phi=0.0, target_sum=1.0))
        assert g.n_edges == 1
        assert g.weights[0] == pytest.approx(1.0)

    def test_uniform_kernel_complete_graph(self):
        rng = make_rng(2)
        X = rng.standard_normal((3, 6))
        q = 6
        g = knn_gaussian_weights(X, "columns", WeightParams(k=q - 1, phi=0.0, target_sum=1.0))
        assert g.n_edges == q * (q - 1) // 2
        assert np.allclose(g.weights, 2.0 / (q * (q - 1)))

    def test_matches_brute_force_oracle(self):
        rng = make_rng(14)
        X = rng.standard_normal((3, 5))
        params = WeightParams(k=2, phi=0.5, target_sum=1.0 / np.sqrt(3))
        g = knn_gaussian_weights(X, "columns", params)
        expected = knn_weights_brute(X.T, k=2, phi=0.5, target_sum=params.target_sum)
        got = graph_edges(g)
        assert set(got) == set(expected)
        for e in expected:
            assert got[e] == pytest.approx(expected[e], rel=1e-12)

    def test_rows_axis_matches_transposed_columns(self):
        rng = make_rng(8)
        X = rng.standard_normal((5, 4))
        params = WeightParams(k=2, phi=0.3, target_sum=0.7)
        rows = knn_gaussian_weights(X, "rows", params)
        cols_of_t = knn_gaussian_weights(X.T, "columns", params)
        assert graph_edges(rows) == graph_edges(cols_of_t)

    def test_normalization_exact(self):
        rng = make_rng(4)
        X = rng.standard_normal((4, 9))
        for target in (1.0, 1 / 3, 0.017):
            g = knn_gaussian_weights(X, "columns", WeightParams(k=3, phi=0.5, target_sum=target))
            assert g.total_weight == pytest.approx(target, rel=1e-12)

    def test_kernel_monotone_in_distance(self):
        rng = make_rng(6)
        X = rng.standard_normal((3, 8))
        g = knn_gaussian_weights(X, "columns", WeightParams(k=7, phi=0.8, target_sum=1.0))
        V = X.T
        dists = np.array([np.linalg.norm(V[i] - V[j]) for i, j in zip(g.heads, g.tails)])
        order = np.argsort(dists)
        w_sorted = g.weights[order]
        assert np.all(np.diff(w_sorted) <= 1e-15)

    def test_relabel_round_trip_identity(self):
        rng = make_rng(10)
        X = rng.standard_normal((6, 5))
        params = WeightParams(k=2, phi=0.5, target_sum=1.0)
        base = knn_gaussian_weights(X, "rows", params)
        perm = rng.permutation(6)
        permuted = knn_gaussian_weights(X[perm], "rows", params)
        # relabel the permuted graph's nodes back through perm
        inv = {int(new): int(old) for new, old in enumerate(perm)}
        back = {}
        for i, j, w in zip(permuted.heads, permuted.tails, permuted.weights):
            a, b = inv[int(i)], inv[int(j)]
            back[(min(a, b), max(a, b))] = float(w)
        assert back.keys() == graph_edges(base).keys()
        for e, w in graph_edges(base).items():
            assert back[e] == pytest.approx(w, rel=1e-12)

    def test_k_too_large_rejected(self):
        X = np.zeros((2, 3))
        with pytest.raises(ValueError):
            knn_gaussian_weights(X, "columns", WeightParams(k=3, phi=0.5, target_sum=1.0))


def test_default_target_sums():
    assert default_target_sums(4, 9) == (0.5, pytest.approx(1 / 3))
    assert default_target_sums(1, 1) == (1.0, 1.0)
    col, row = default_target_sums(500, 56)
    assert col == pytest.approx(1 / np.sqrt(500))
    assert row == pytest.approx(1 / np.sqrt(56))


class TestConnectivity:
    def test_path_graph_connected(self):
        g = WeightedGraph(3, np.array([0, 1]), np.array([1, 2]), np.array([1.0, 1.0]))
        assert is_connected(g)

    def test_disjoint_edges_disconnected(self):
        g = WeightedGraph(4, np.array([0, 2]), np.array([1, 3]), np.array([1.0, 1.0]))
        assert not is_connected(g)

    def test_single_node_connected(self):
        g = WeightedGraph(1, np.array([], dtype=int), np.array([], dtype=int), np.array([]))
        assert is_connected(g)

    def test_matches_union_find_oracle_on_blob_knn(self):
        rng = make_rng(33)
        # two well-separated blobs; small k keeps them apart
        blob1 = rng.standard_normal((3, 6))
        blob2 = rng.standard_normal((3, 6)) + 50.0
        X = np.hstack([blob1, blob2])
        g = knn_gaussian_weights(X, "columns", WeightParams(k=2, phi=0.1, target_sum=1.0))
        comps = union_find_components(g.node_count, list(zip(g.heads.tolist(), g.tails.tolist())))
        assert is_connected(g) == (len(set(comps)) == 1)
        assert not is_connected(g)


class TestBridgeComponents:
    def test_connected_unchanged(self):
        g = WeightedGraph(3, np.array([0, 1]), np.array([1, 2]), np.array([0.25, 0.75]))
        X = np.zeros((2, 3))
        assert bridge_components(g, X, "columns") is g

    def test_two_components_one_bridge(self):
        X = np.array([[0.0, 1.0, 10.0, 11.0]])
        g = WeightedGraph(4, np.array([0, 2]), np.array([1, 3]), np.array([0.5, 0.5]))
        bridged = bridge_components(g, X, "columns")
        assert bridged.n_edges == 3
        assert is_connected(bridged)
        # bridge joins the closest cross pair (columns 1 and 2)
        assert (1, 2) in graph_edges(bridged)
        assert bridged.total_weight == pytest.approx(g.total_weight, rel=1e-12)

    def test_three_blobs_match_component_mst_oracle(self):
        rng = make_rng(44)
        centers = [0.0, 100.0, 220.0]
        cols = np.hstack([c + rng.standard_normal((2, 4)) for c in centers])
        g = knn_gaussian_weights(cols, "columns", WeightParams(k=2, phi=0.01, target_sum=1.0))
        comps = union_find_components(g.node_count, list(zip(g.heads.tolist(), g.tails.tolist())))
        n_comp = len(set(comps))
        assert n_comp == 3
        bridged = bridge_components(g, cols, "columns")
        assert is_connected(bridged)
        assert bridged.n_edges == g.n_edges + n_comp - 1

        # oracle: Kruskal over component-pair minimum distances
        V = cols.T
        comp_ids = sorted(set(comps))
        best = {}
        for a_pos, a in enumerate(comp_ids):
            for b in comp_ids[a_pos + 1:]:
                ia = [i for i in range(12) if comps[i] == a]
                ib = [i for i in range(12) if comps[i] == b]
                d = min(np.linalg.norm(V[i] - V[j]) for i in ia for j in ib)
                best[(a, b)] = d
        chosen = []
        parent = {c: c for c in comp_ids}

        def find(c):
            while parent[c] != c:
                c = parent[c]
            return c

        for (a, b), d in sorted(best.items(), key=lambda kv: kv[1]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                chosen.append(frozenset((a, b)))
        new_edges = set(graph_edges(bridged)) - set(graph_edges(g))
        got = {frozenset((comps[i], comps[j])) for i, j in new_edges}
        assert got == set(chosen)

    def test_bridge_weight_is_min_existing(self):
        X = np.array([[0.0, 1.0, 50.0, 51.0]])
        g = WeightedGraph(4, np.array([0, 2]), np.array([1, 3]), np.array([0.1, 0.9]))
        bridged = bridge_components(g, X, "columns")
        edges = graph_edges(bridged)
        # pre-rescale the bridge weight equals min existing (0.1); after
        # rescaling ratios are preserved
        w_bridge = edges[(1, 2)]
        assert w_bridge == pytest.approx(edges[(0, 1)], rel=1e-12)
