"""Adjacency graph of the boundary set, shift differences and the greedy shift solve."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .ground_cost import GroundCost, evaluate, g_ij, neighbor_cost_bound
from .grid import ACTIVE, ActiveSet


class GraphError(RuntimeError):
    """The adjacency graph is disconnected (under-refinement or a degenerate instance)."""

    def __init__(self, msg, components=None):
        super().__init__(msg)
        self.components = components


@dataclass
class Edge:
    i: int
    j: int
    pairs: np.ndarray            # (P, 2, d) box centers; [:, 0] labeled i, [:, 1] labeled j
    keys: np.ndarray             # (P, 2) lexicographic sort keys of the two boxes
    estimate: float = float("nan")
    bound: float = float("nan")
    pair: tuple | None = None    # chosen (x_i, x_j)


@dataclass
class AdjacencyGraph:
    n: int
    edges: dict[tuple[int, int], Edge]

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, v: int) -> list[int]:
        out = []
        for i, j in self.edges:
            if i == v:
                out.append(j)
            elif j == v:
                out.append(i)
        return sorted(out)

    def difference(self, i: int, j: int) -> float:
        """Estimated ``a_i - a_j`` (antisymmetric)."""
        if (i, j) in self.edges:
            return self.edges[(i, j)].estimate
        return -self.edges[(j, i)].estimate

    def bound(self, i: int, j: int) -> float:
        key = (i, j) if (i, j) in self.edges else (j, i)
        return self.edges[key].bound

    def components(self) -> list[list[int]]:
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in self.edges:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        groups: dict[int, list[int]] = {}
        for v in range(self.n):
            groups.setdefault(find(v), []).append(v)
        return sorted(groups.values())

    @property
    def connected(self) -> bool:
        return len(self.components()) == 1


def build_adjacency(active: ActiveSet, boundary_rows: np.ndarray, labels: np.ndarray, n: int,
                    status=None, ref=None, density=None, require_connected: bool = True) -> AdjacencyGraph:
    """Collect neighboring boundary boxes with distinct labels into per-edge pair sets.

    ``labels`` holds one label per active row.  Only rows in ``boundary_rows``
    take part.  The neighbor table ``(status, ref)`` may be passed in to avoid
    recomputation.
    """
    if status is None:
        status, ref = active.neighbor_table(density)
    rows = np.asarray(boundary_rows, dtype=np.int64)
    in_b = np.zeros(len(active), dtype=bool)
    in_b[rows] = True
    a_rows = np.repeat(rows, status.shape[1])
    st = status[rows].ravel()
    rf = ref[rows].ravel()
    ok = st == ACTIVE
    a_rows, b_rows = a_rows[ok], rf[ok]
    ok = in_b[b_rows]
    a_rows, b_rows = a_rows[ok], b_rows[ok]
    la, lb = labels[a_rows], labels[b_rows]
    # each unordered pair once, oriented so the first box has the smaller label
    ok = (la < lb) & (la >= 0)
    a_rows, b_rows, la, lb = a_rows[ok], b_rows[ok], la[ok], lb[ok]
    centers = active.centers
    keys = active.keys
    edges: dict[tuple[int, int], Edge] = {}
    if a_rows.size:
        code = la * n + lb
        order = np.lexsort((keys[b_rows], keys[a_rows], code))
        a_rows, b_rows, code = a_rows[order], b_rows[order], code[order]
        uniq, start = np.unique(code, return_index=True)
        stops = list(start[1:]) + [code.size]
        for c, s0, s1 in zip(uniq, start, stops):
            i, j = int(c // n), int(c % n)
            ar, br = a_rows[s0:s1], b_rows[s0:s1]
            pairs = np.stack([centers[ar], centers[br]], axis=1)
            edges[(i, j)] = Edge(i, j, pairs, np.stack([active.index[ar], active.index[br]], axis=1))
    graph = AdjacencyGraph(n, edges)
    if require_connected and not graph.connected:
        comps = graph.components()
        raise GraphError(f"adjacency graph is disconnected: components {comps}", comps)
    return graph


def estimate_shift_difference(edge: Edge, cost: GroundCost, targets, width: float | None = None,
                              mode: str = "best") -> tuple[float, float]:
    """``(a~_ij, error bound)`` from the pair set of one edge.

    ``mode="best"`` evaluates ``g_ij`` at the midpoint of the pair with the
    smallest separation cost (ties broken lexicographically by box index);
    ``mode="mean"`` averages ``g_ij`` over every pair midpoint.
    """
    targets = np.asarray(targets, dtype=float)
    yi, yj = targets[edge.i], targets[edge.j]
    xi, xj = edge.pairs[:, 0], edge.pairs[:, 1]
    mid = 0.5 * (xi + xj)
    # separation from integer offsets so equal offsets tie exactly
    step = np.max(np.abs(xi - xj)) if width is None else width
    offs = (edge.keys[:, 1] - edge.keys[:, 0]).astype(float) * step
    sep = np.atleast_1d(evaluate(cost, np.zeros_like(offs), offs))
    if mode == "mean":
        vals = np.atleast_1d(g_ij(cost, mid, yi, yj))
        est = float(np.mean(vals))
        k = int(np.argmin(sep))
    else:
        d = edge.keys.shape[2]
        cols = [edge.keys[:, 1, c] for c in range(d - 1, -1, -1)] + \
               [edge.keys[:, 0, c] for c in range(d - 1, -1, -1)] + [sep]
        k = int(np.lexsort(cols)[0])
        est = float(g_ij(cost, mid[k], yi, yj))
    if cost.is_norm:
        bound = 2.0 * float(evaluate(cost, mid[k], xj[k]))
    else:
        bound = neighbor_cost_bound(cost, float(step), xi.shape[1])
    edge.estimate, edge.bound, edge.pair = est, bound, (xi[k].copy(), xj[k].copy())
    return est, bound


@dataclass
class ShiftSet:
    values: np.ndarray
    anchor: int
    tree: list[tuple[int, int]]          # (known j, new i) in solve order
    error: np.ndarray                    # accumulated per-shift error bound
    residuals: dict = field(default_factory=dict)   # unused edge -> |(a_i - a_j) - a~_ij|

    def to_rows(self, targets, weights):
        rows = []
        for i, (y, nu) in enumerate(zip(np.asarray(targets), weights)):
            rows.append([i] + [float(v) for v in y] + [float(nu), float(self.values[i]), float(self.error[i])])
        return rows


def solve_shifts(graph: AdjacencyGraph) -> ShiftSet:
    """Fix one shift to zero and walk a greedy spanning tree applying ``a_i = a_j + a~_ij``."""
    n = graph.n
    if not graph.connected:
        comps = graph.components()
        raise GraphError(f"adjacency graph is disconnected: components {comps}", comps)
    deg = graph.degree()
    anchor = int(np.argmax(deg))         # first maximum = lowest index
    values = np.zeros(n)
    error = np.zeros(n)
    known = np.zeros(n, dtype=bool)
    known[anchor] = True
    adj = {v: graph.neighbors(v) for v in range(n)}
    tree: list[tuple[int, int]] = []
    while not known.all():
        best = None
        for j in np.flatnonzero(known):
            unknown = [i for i in adj[int(j)] if not known[i]]
            if unknown and (best is None or len(unknown) > best[0]):
                best = (len(unknown), int(j), unknown[0])
        _, j, i = best
        values[i] = values[j] + graph.difference(i, j)
        error[i] = error[j] + graph.bound(i, j)
        known[i] = True
        tree.append((j, i))
    used = {tuple(sorted(e)) for e in tree}
    residuals = {}
    for (i, j) in graph.edges:
        if (i, j) not in used:
            residuals[(i, j)] = abs((values[i] - values[j]) - graph.difference(i, j))
    return ShiftSet(values, anchor, tree, error, residuals)


def raster_centers(side: float, dim: int, resolution: int) -> np.ndarray:
    h = side / resolution
    axes = [(np.arange(resolution) + 0.5) * h] * dim
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


def reconstruct_partition(shifts, cost: GroundCost, targets, resolution: int, side: float = 1.0,
                          dim: int | None = None) -> np.ndarray:
    """Label raster ``argmax_i (a_i - c(x, y_i))`` at cell centers, lowest index on ties.

    Returns an integer array of shape ``(resolution,) * dim`` indexed ``[i_1, ..., i_d]``.
    """
    targets = np.asarray(targets, dtype=float)
    a = np.asarray(getattr(shifts, "values", shifts), dtype=float)
    dim = targets.shape[1] if dim is None else dim
    pts = raster_centers(side, dim, resolution)
    best = np.full(pts.shape[0], -np.inf)
    label = np.zeros(pts.shape[0], dtype=np.int64)
    for i, y in enumerate(targets):
        val = a[i] - np.asarray(evaluate(cost, pts, y))
        better = val > best
        best = np.where(better, val, best)
        label = np.where(better, i, label)
    return label.reshape((resolution,) * dim)


def region_masses(labels: np.ndarray, density, n: int, side: float = 1.0) -> np.ndarray:
    """mu-mass of each rastered region, using exact cell masses."""
    dim = labels.ndim
    R = labels.shape[0]
    h = side / R
    idx = np.stack(np.meshgrid(*[np.arange(R)] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    cell = density.box_masses(idx * h, (idx + 1) * h)
    return np.bincount(labels.ravel(), weights=cell, minlength=n)


def lemma_violations(shifts, cost: GroundCost, targets) -> list[tuple[int, int]]:
    """Pairs with ``c(y_i, y_j) < a_i - a_j``, which would force an empty region ``j``."""
    targets = np.asarray(targets, dtype=float)
    a = np.asarray(getattr(shifts, "values", shifts), dtype=float)
    bad = []
    for i, j in itertools.permutations(range(len(a)), 2):
        if evaluate(cost, targets[i], targets[j]) < a[i] - a[j] - 1e-12:
            bad.append((i, j))
    return bad
