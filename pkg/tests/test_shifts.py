import numpy as np
import pytest

from boundary_ot.ground_cost import GroundCost
from boundary_ot.grid import ActiveSet
from boundary_ot.measure import DensityPiece, normalize, uniform
from boundary_ot.shifts import (AdjacencyGraph, Edge, GraphError, build_adjacency, estimate_shift_difference,
                                lemma_violations, reconstruct_partition, region_masses, solve_shifts)


def graph_from(n, diffs, bound=0.0):
    edges = {}
    for (i, j), a in diffs.items():
        e = Edge(i, j, np.zeros((1, 2, 2)), np.zeros((1, 2, 2), dtype=np.int64))
        e.estimate, e.bound = a, bound
        edges[(i, j)] = e
    return AdjacencyGraph(n, edges)


def row_of_boxes(labels):
    k = len(labels)
    idx = np.array([[i, 0] for i in range(k)])
    return ActiveSet(float(k), 2, 1.0, 1, idx, np.full(k, 1.0 / k), labels)


def strip(k):
    return normalize([DensityPiece((0, 0), (k, 1))], float(k))


def test_row_of_boxes_single_edge():
    act = row_of_boxes([0, 0, 1, 1])
    status, ref = act.neighbor_table(strip(4))
    g = build_adjacency(act, np.arange(4), act.label, 2, status=status, ref=ref)
    assert list(g.edges) == [(0, 1)]
    pairs = g.edges[(0, 1)].pairs
    assert pairs.shape == (1, 2, 2)
    assert np.allclose(pairs[0], [[1.5, 0.5], [2.5, 0.5]])


def test_disconnected_graph():
    act = row_of_boxes([0, 0, 1, 1])
    status, ref = act.neighbor_table(strip(4))
    with pytest.raises(GraphError) as info:
        build_adjacency(act, np.arange(4), act.label, 3, status=status, ref=ref)
    assert info.value.components == [[0, 1], [2]]


def test_symmetric_pair_gives_zero():
    e = Edge(0, 1, np.array([[[0.25, 0.75], [0.75, 0.25]]]), np.array([[[0, 0], [1, 0]]]))
    est, bound = estimate_shift_difference(e, GroundCost.lp(2), [[0.25, 0.75], [0.75, 0.25]])
    assert est == 0.0
    assert bound == pytest.approx(2 * np.hypot(0.25, 0.25))


def test_quadratic_midpoint_is_mean():
    cost = GroundCost.lp(2, 2)
    yi, yj = np.array([0.2, 0.3]), np.array([0.9, 0.6])
    g = lambda x: np.sum((x - yi) ** 2) - np.sum((x - yj) ** 2)  # noqa: E731
    xi, xj = np.array([0.5, 0.5]), np.array([0.5625, 0.5])
    e = Edge(0, 1, np.array([[xi, xj]]), np.array([[[0, 0], [1, 0]]]))
    est, _ = estimate_shift_difference(e, cost, [yi, yj])
    assert est == pytest.approx(0.5 * (g(xi) + g(xj)), abs=1e-15)


def test_best_pair_prefers_face_neighbors():
    cost = GroundCost.lp(2)
    # a diagonal pair then a face pair
    pairs = np.array([[[0.5, 0.5], [1.5, 1.5]], [[0.5, 0.5], [1.5, 0.5]]]) / 4
    keys = np.array([[[0, 0], [1, 1]], [[0, 0], [1, 0]]])
    e = Edge(0, 1, pairs, keys)
    estimate_shift_difference(e, cost, [[0, 0], [1, 0]], width=0.25)
    assert np.allclose(e.pair[1], [0.375, 0.125])


def test_chain_solve():
    g = graph_from(3, {(0, 1): 2.0, (1, 2): -1.0})
    s = solve_shifts(g)
    assert s.anchor == 1
    assert len(s.tree) == 2
    a = s.values - s.values[0]
    assert np.allclose(a, [0.0, -2.0, -1.0])
    for (i, j), edge in g.edges.items():
        assert s.values[i] - s.values[j] == edge.estimate


def test_triangle_residual():
    g = graph_from(3, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 2.5}, bound=0.1)
    s = solve_shifts(g)
    assert len(s.tree) == 2
    assert len(s.residuals) == 1
    assert list(s.residuals.values())[0] == pytest.approx(0.5)
    assert s.error[s.anchor] == 0.0 and s.error.max() == pytest.approx(0.1)


def test_all_zero_differences():
    g = graph_from(4, {(0, 1): 0.0, (1, 2): 0.0, (2, 3): 0.0, (0, 3): 0.0})
    assert np.all(solve_shifts(g).values == 0.0)


def test_reconstruct_examples():
    cost = GroundCost.lp(2)
    targets = np.array([[0.25, 0.25], [0.75, 0.25], [0.5, 0.8]])
    lab = reconstruct_partition(np.zeros(3), cost, targets, 32)
    xs = (np.arange(32) + 0.5) / 32
    pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1)
    d = np.linalg.norm(pts[:, :, None, :] - targets[None, None], axis=-1)
    assert np.array_equal(lab, np.argmin(d, axis=-1))

    two = reconstruct_partition(np.zeros(2), cost, [[0.25, 0.75], [0.75, 0.25]], 64)
    i, j = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
    assert np.array_equal(two[i < j], np.zeros((i < j).sum()))
    assert np.all(two[i > j] == 1)


@pytest.mark.parametrize("sigma", [1.0, -1.0, 10.0, -10.0])
def test_gauge_invariance(sigma):
    rng = np.random.default_rng(4)
    targets = rng.random((6, 2))
    a = rng.random(6) * 0.1
    cost = GroundCost.lp(2, 2)
    base = reconstruct_partition(a, cost, targets, 48)
    assert np.array_equal(base, reconstruct_partition(a + sigma, cost, targets, 48))


def test_region_masses_and_lemma():
    cost = GroundCost.lp(2)
    targets = np.array([[0.25, 0.75], [0.75, 0.25]])
    lab = reconstruct_partition(np.zeros(2), cost, targets, 64)
    m = region_masses(lab, uniform(), 2)
    assert m.sum() == pytest.approx(1.0)
    # diagonal cells tie and go to the lower index
    assert m[0] == pytest.approx(0.5 + 64 / (2 * 64 * 64))
    assert lemma_violations(np.zeros(2), cost, targets) == []
    assert lemma_violations(np.array([1.0, 0.0]), cost, targets) == [(0, 1)]


def test_shift_rows():
    g = graph_from(2, {(0, 1): 0.5}, bound=0.01)
    rows = solve_shifts(g).to_rows([[0.1, 0.2], [0.3, 0.4]], [0.4, 0.6])
    assert rows[0][:4] == [0, 0.1, 0.2, 0.4]
    assert rows[0][4] - rows[1][4] == pytest.approx(0.5)
