import itertools
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from funcnet.controllability import (DirectedGraph, RankSizeError, controllability_report, controllability_timeseries,
                                     edge_fraction, kalman_rank, krylov_rank, lndm_driver_count, line_digraph,
                                     maximum_matching, sbd_driver_count, sbd_rank_check)
from funcnet.dynamics import Network


def exhaustive_matching_size(n, edges):
    """Independent oracle: exact DP over (left node, set of used in-copies)."""
    adj = [[t for s, t in edges if s == u] for u in range(n)]

    @lru_cache(maxsize=None)
    def best(u, used):
        if u == n:
            return 0
        out = best(u + 1, used)
        for v in adj[u]:
            if not used >> v & 1:
                out = max(out, 1 + best(u + 1, used | 1 << v))
        return out

    return best(0, 0)


def random_graph(rng, n, p):
    return [(s, t) for s in range(n) for t in range(n) if rng.random() < p]


def test_matching_agrees_with_exhaustive_oracle():
    rng = np.random.default_rng(77)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        edges = random_graph(rng, n, rng.uniform(0.05, 0.7))
        g = DirectedGraph.from_edges(n, edges)
        N_L, drivers, matched = lndm_driver_count(g)
        size = exhaustive_matching_size(n, edges)
        assert len(matched) == size
        assert N_L == max(n - size, 1)
        # the matching is valid: edges exist, no shared endpoints
        assert set(matched) <= set(edges)
        assert len({s for s, _ in matched}) == len(matched) == len({t for _, t in matched})
        assert len(drivers) == N_L


def test_matching_on_larger_graph_matches_scipy():
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_bipartite_matching
    rng = np.random.default_rng(5)
    for n, p in [(60, 0.03), (200, 0.01), (500, 0.004)]:
        edges = random_graph(rng, n, p)
        g = DirectedGraph.from_edges(n, edges)
        _, _, matched = lndm_driver_count(g)
        A = csr_matrix((np.ones(len(edges)), ([s for s, _ in edges], [t for _, t in edges])), shape=(n, n))
        ref = maximum_bipartite_matching(A, perm_type="column")
        assert len(matched) == int(np.sum(ref >= 0))


def test_maximum_matching_low_level():
    # left 0 -> {0, 1}, left 1 -> {0}
    match = maximum_matching(2, 2, np.array([0, 2, 3]), np.array([0, 1, 0]))
    assert sorted(match.tolist()) == [0, 1]


def test_path_edgeless_and_dense():
    path = DirectedGraph.from_edges(3, [(0, 1), (1, 2)])
    assert lndm_driver_count(path)[0] == 1
    assert lndm_driver_count(path)[1] == [0]
    assert lndm_driver_count(DirectedGraph.from_edges(3, []))[0] == 3
    dense = DirectedGraph.from_weights(np.full((3, 3), 0.5))
    assert lndm_driver_count(dense)[0] == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.data())
def test_adding_an_edge_never_increases_N_L(n, data):
    all_edges = [(s, t) for s in range(n) for t in range(n)]
    edges = data.draw(st.lists(st.sampled_from(all_edges), unique=True))
    extra = data.draw(st.sampled_from(all_edges))
    before = lndm_driver_count(DirectedGraph.from_edges(n, edges))[0]
    after = lndm_driver_count(DirectedGraph.from_edges(n, edges + [extra]))[0]
    assert after <= before
    assert before >= 1
    if edges:
        assert sbd_driver_count(DirectedGraph.from_edges(n, edges))[0] >= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.data())
def test_self_loops_give_one_driver(n, data):
    extra = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))))
    g = DirectedGraph.from_edges(n, [(i, i) for i in range(n)] + extra)
    assert lndm_driver_count(g)[0] == 1


def test_weights_orientation_and_threshold():
    W = np.array([[0.0, 0.0], [0.5, 0.0005]])  # W[1, 0] is the edge 0 -> 1
    g = DirectedGraph.from_weights(W)
    assert g.edges() == [(0, 1)]
    assert edge_fraction(g) == 0.25
    assert DirectedGraph.from_weights(W, theta=1e-4).n_edges == 2


def test_edge_fraction_bounds():
    assert edge_fraction(DirectedGraph.from_weights(np.ones((4, 4)))) == 1.0
    assert edge_fraction(DirectedGraph.from_weights(np.zeros((4, 4)))) == 0.0


# --- SBD -------------------------------------------------------------------

def test_cycle_has_one_sbd_driver():
    g = DirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert sbd_driver_count(g) == (1, [0], False)


def test_edgeless_sbd_is_degenerate():
    assert sbd_driver_count(DirectedGraph.from_edges(3, [])) == (0, [], True)


def test_divergent_node_is_driver():
    g = DirectedGraph.from_edges(3, [(0, 1), (0, 2), (1, 0)])
    N_S, drivers, _ = sbd_driver_count(g)
    assert 0 in drivers and N_S == 1


def _min_edge_driver_nodes(graph, rng):
    """Brute force: smallest node sets whose out-edges, driven independently,
    make the generic line-digraph system full rank."""
    M = line_digraph(graph) * rng.uniform(0.5, 1.5, (graph.n_edges, graph.n_edges))
    m = graph.n_edges
    for size in range(1, graph.n + 1):
        hits = []
        for S in itertools.combinations(range(graph.n), size):
            cols = [k for k in range(m) if graph.sources[k] in S]
            if not cols:
                continue
            B = np.zeros((m, len(cols)))
            B[cols, np.arange(len(cols))] = 1
            C = np.hstack([np.linalg.matrix_power(M, j) @ B for j in range(m)])
            if np.linalg.matrix_rank(C) == m:
                hits.append(set(S))
        if hits:
            return size, hits
    return None, []


def test_divergent_driver_confirmed_by_brute_force_rank():
    g = DirectedGraph.from_edges(3, [(0, 1), (0, 2), (1, 0)])
    size, hits = _min_edge_driver_nodes(g, np.random.default_rng(0))
    assert size == sbd_driver_count(g)[0]
    assert all(0 in S for S in hits)


def test_cycle_line_digraph_rank_matches_dense_oracle():
    net = Network.from_weights(np.array([[0, 0, 1.0], [1.0, 0, 0], [0, 1.0, 0]]))
    g = DirectedGraph.from_network(net)
    L = line_digraph(g)
    # the line digraph of a 3-cycle is a 3-cycle
    assert L.sum() == 3 and np.all(L.sum(axis=0) == 1) and np.all(L.sum(axis=1) == 1)
    rank, full = sbd_rank_check(net, np.array([0.3, 0.0, 0.0]))
    from funcnet.dynamics import sigmoid
    A = L - np.diag(net.k2[g.sources])
    b = sigmoid(np.array([0.3, 0.0, 0.0]))[g.sources]
    C = np.column_stack([np.linalg.matrix_power(A, j) @ b for j in range(3)])
    assert rank == np.linalg.matrix_rank(C)


def test_sbd_rank_errors():
    with pytest.raises(ValueError):
        sbd_rank_check(Network.from_weights(np.zeros((3, 3))))
    with pytest.raises(RankSizeError):
        sbd_rank_check(Network.from_weights(np.ones((17, 17))))


# --- Kalman rank ---------------------------------------------------------------

def test_kalman_examples():
    assert kalman_rank(np.eye(2), [0]) == (1, False)
    assert kalman_rank(np.array([[0.0, 1.0], [0.0, 0.0]]), [1]) == (2, True)


def test_kalman_rank_matches_numpy_rank(rng):
    for _ in range(30):
        n = int(rng.integers(2, 8))
        W = rng.normal(0, 1, (n, n)) * (rng.random((n, n)) < 0.4)
        B = rng.normal(0, 1, (n, int(rng.integers(1, 3))))
        C = np.hstack([np.linalg.matrix_power(W, j) @ B for j in range(n)])
        assert krylov_rank(W, B) == np.linalg.matrix_rank(C)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(1e-3, 1e3), st.integers(0, 2 ** 32 - 1))
def test_kalman_rank_is_scale_invariant(n, c, seed):
    r = np.random.default_rng(seed)
    W = r.normal(0, 1, (n, n)) * (r.random((n, n)) < 0.5)
    drivers = [0]
    assert kalman_rank(W, drivers)[0] == kalman_rank(c * W, drivers)[0]


def test_kalman_size_cap():
    with pytest.raises(RankSizeError):
        kalman_rank(np.eye(65), [0])


# --- reports -------------------------------------------------------------------

def test_report_fields_and_invariants(rng):
    net = Network.random(5, rng)
    rep = controllability_report(net)
    assert rep.n_L == rep.N_L / 5 and rep.n_S == rep.N_S / 5
    assert 0 < rep.n_L <= 1 and 0 < rep.n_S <= 1 and 0 <= rep.e <= 1
    assert rep.kalman_full is not None
    d = rep.to_dict()
    assert {"N_L", "n_L", "N_S", "n_S", "e"} <= set(d)


def test_large_report_skips_rank():
    W = np.random.default_rng(0).uniform(0, 1, (100, 100))
    rep = controllability_report(W)
    assert rep.N_L == 1 and rep.kalman_rank is None


def test_timeseries_averages():
    nets = [np.eye(2), np.ones((2, 2))]
    s = controllability_timeseries(nets)
    assert s.mean_e == pytest.approx((0.5 + 1.0) / 2)
    assert s.final.e == 1.0 and s.n_snapshots == 2
    with pytest.raises(ValueError):
        controllability_timeseries([])
