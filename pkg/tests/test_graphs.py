import io

import numpy as np
import pytest

from supercut import (AdjacencyGraph, DataError, ParameterError,
                      build_knn_graph, superpoint_adjacency)

from oracles import knn_edges_bruteforce


# ---------------------------------------------------------------------------
# AdjacencyGraph invariants


def test_graph_rejects_self_loops():
    with pytest.raises(DataError):
        AdjacencyGraph(3, np.array([[1, 1]]), np.ones(1))


def test_graph_rejects_unsorted():
    with pytest.raises(DataError):
        AdjacencyGraph(3, np.array([[1, 2], [0, 1]]), np.ones(2))


def test_graph_rejects_duplicates():
    with pytest.raises(DataError):
        AdjacencyGraph(3, np.array([[0, 1], [0, 1]]), np.ones(2))


def test_graph_rejects_negative_weight():
    with pytest.raises(DataError):
        AdjacencyGraph(2, np.array([[0, 1]]), np.array([-1.0]))


def test_graph_csv_roundtrip():
    g = AdjacencyGraph(4, np.array([[0, 1], [1, 3]]),
                       np.array([0.5, 1.25]), agreement=np.array([0.1, 0.9]))
    buf = io.StringIO()
    g.to_csv(buf)
    buf.seek(0)
    h = AdjacencyGraph.from_csv(buf, node_count=4)
    assert np.array_equal(g.edges, h.edges)
    assert np.array_equal(g.weight, h.weight)
    assert np.array_equal(g.agreement, h.agreement)


def test_graph_csv_blank_agreement():
    g = AdjacencyGraph(2, np.array([[0, 1]]), np.array([2.0]))
    buf = io.StringIO()
    g.to_csv(buf)
    assert buf.getvalue().splitlines()[1].endswith(",")
    buf.seek(0)
    h = AdjacencyGraph.from_csv(buf)
    assert h.agreement is None


# ---------------------------------------------------------------------------
# build_knn_graph


def test_two_points_one_edge():
    g = build_knn_graph(np.array([[0.0, 0, 0], [1.0, 0, 0]]), 1)
    assert g.edges.tolist() == [[0, 1]]


def test_collinear_k1():
    pos = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
    g = build_knn_graph(pos, 1)
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_degree_at_least_k(rng):
    pos = rng.random((10, 3))
    g = build_knn_graph(pos, 3)
    deg = np.bincount(g.edges.ravel(), minlength=10)
    assert np.all(deg >= 3)


def test_knn_matches_bruteforce(rng):
    for n, k in [(20, 1), (50, 3), (200, 5)]:
        pos = rng.random((n, 3))
        g = build_knn_graph(pos, k)
        expect = knn_edges_bruteforce(pos, k)
        assert g.edges.tolist() == [list(e) for e in expect]


def test_knn_contains_nearest_neighbor(rng):
    pos = rng.random((300, 3))
    g = build_knn_graph(pos, 4)
    edge_set = set(map(tuple, g.edges.tolist()))
    for i in range(300):
        d = np.linalg.norm(pos - pos[i], axis=1)
        d[i] = np.inf
        j = int(np.argmin(d))
        assert (min(i, j), max(i, j)) in edge_set


def test_knn_ties_break_to_lower_index():
    # four corners of a square: each point has two equidistant neighbors
    pos = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0], [1.0, 1, 0]])
    g = build_knn_graph(pos, 1)
    # node 0 ties between 1 and 2 -> picks 1; node 3 ties between 1 and 2 -> 1
    assert [1, 3] in g.edges.tolist() or [0, 1] in g.edges.tolist()
    expect = knn_edges_bruteforce(pos, 1)
    assert g.edges.tolist() == [list(e) for e in expect]


def test_knn_duplicate_coordinates(rng):
    pos = np.repeat(rng.random((5, 3)), 4, axis=0)
    g = build_knn_graph(pos, 2)
    deg = np.bincount(g.edges.ravel(), minlength=20)
    assert np.all(deg >= 2)
    expect = knn_edges_bruteforce(pos, 2)
    assert g.edges.tolist() == [list(e) for e in expect]


def test_knn_worker_invariance(rng):
    pos = rng.random((500, 3))
    g1 = build_knn_graph(pos, 6, workers=1)
    g8 = build_knn_graph(pos, 6, workers=8)
    assert np.array_equal(g1.edges, g8.edges)


def test_knn_idempotent(rng):
    pos = rng.random((100, 3))
    a = build_knn_graph(pos, 4)
    b = build_knn_graph(pos, 4)
    assert np.array_equal(a.edges, b.edges)


def test_knn_parameter_errors():
    pos = np.zeros((3, 3))
    with pytest.raises(ParameterError):
        build_knn_graph(pos, 0)
    with pytest.raises(ParameterError):
        build_knn_graph(pos, 3)
    with pytest.raises(ParameterError):
        build_knn_graph(np.zeros((1, 3)), 1)


# ---------------------------------------------------------------------------
# superpoint_adjacency


def test_superpoint_adjacency_single_superpoint():
    pg = AdjacencyGraph(4, np.array([[0, 1], [1, 2], [2, 3]]), np.ones(3))
    sg = superpoint_adjacency(np.zeros(4, dtype=np.int64), pg, 1)
    assert sg.edge_count == 0


def test_superpoint_adjacency_crossing_count():
    # 3 point edges between superpoint 0 {0,1,2} and superpoint 1 {3,4,5}
    edges = np.array([[0, 3], [1, 4], [1, 5], [2, 4]])
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    pg = AdjacencyGraph(6, edges, np.ones(4))
    sg = superpoint_adjacency(np.array([0, 0, 0, 1, 1, 1]), pg, 2)
    assert sg.edges.tolist() == [[0, 1]]
    assert sg.crossings.tolist() == [4]


def test_superpoint_adjacency_chain():
    pg = AdjacencyGraph(6, np.array([[0, 1], [1, 2], [2, 3], [3, 4], [4, 5]]),
                        np.ones(5))
    sg = superpoint_adjacency(np.array([0, 0, 1, 1, 2, 2]), pg, 3)
    assert sg.edges.tolist() == [[0, 1], [1, 2]]
    assert sg.crossings.tolist() == [1, 1]


def test_superpoint_adjacency_identity(rng):
    pos = rng.random((40, 3))
    pg = build_knn_graph(pos, 3)
    sg = superpoint_adjacency(np.arange(40), pg, 40)
    assert np.array_equal(sg.edges, pg.edges)


def test_superpoint_adjacency_size_mismatch():
    pg = AdjacencyGraph(3, np.array([[0, 1]]), np.ones(1))
    with pytest.raises(DataError):
        superpoint_adjacency(np.zeros(5, dtype=np.int64), pg)
