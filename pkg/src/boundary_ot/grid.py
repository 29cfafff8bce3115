"""Adaptive Cartesian discretization of ``[0, l]**d``: boxes, neighbors, refinement.

Boxes at level ``r`` have width ``w_r = w_1 * 2**-(r-1)`` and integer index
vectors; box ``idx`` covers ``[idx * w_r, (idx + 1) * w_r]``.  Boxes discarded
as region interiors are kept in a *halo* (level, index, frozen label) so later
levels can still see which destination surrounds them.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .measure import Density

log = logging.getLogger(__name__)

# neighbor status codes
ACTIVE = 0
ZERO = 1
OUTSIDE = 2
HALO = 3
STATUS_NAMES = {ACTIVE: "active", ZERO: "zero-mass", OUTSIDE: "outside-domain", HALO: "discarded"}

UNASSIGNED = -1


class GridError(ValueError):
    pass


def adjacency_vectors(d: int) -> np.ndarray:
    """All ``3**d - 1`` offsets in ``{-1, 0, 1}**d`` except zero, in lexicographic order."""
    vs = [v for v in itertools.product((-1, 0, 1), repeat=d) if any(v)]
    return np.array(vs, dtype=np.int64)


@dataclass(frozen=True)
class Box:
    level: int
    index: tuple[int, ...]
    w1: float

    @property
    def width(self) -> float:
        return self.w1 * 2.0 ** -(self.level - 1)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 0.5) * self.width

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * self.width

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.width

    def key(self) -> tuple[int, ...]:
        return (self.level,) + tuple(self.index)


@dataclass
class HaloLevel:
    level: int
    keys: np.ndarray      # sorted linear keys at this level
    labels: np.ndarray    # frozen destination per key


@dataclass
class ActiveSet:
    """Boxes of positive mass at one refinement level plus the discard halo."""

    side: float
    dim: int
    w1: float
    level: int
    index: np.ndarray                  # (B, d) int64, sorted by linear key
    mass: np.ndarray                   # (B,)
    label: np.ndarray                  # (B,) int64, UNASSIGNED if none
    edge: np.ndarray = None            # (B,) bool
    internal: np.ndarray = None        # (B,) bool
    halo: list[HaloLevel] = field(default_factory=list)

    def __post_init__(self):
        self.index = np.asarray(self.index, dtype=np.int64).reshape(-1, self.dim)
        order = np.argsort(self.keys_of(self.index), kind="stable")
        self.index = self.index[order]
        self.mass = np.asarray(self.mass, dtype=float)[order]
        self.label = np.asarray(self.label, dtype=np.int64)[order]
        if self.edge is None:
            self.edge = np.zeros(len(self), dtype=bool)
            self.internal = np.zeros(len(self), dtype=bool)
        else:
            self.edge = np.asarray(self.edge, dtype=bool)[order]
            self.internal = np.asarray(self.internal, dtype=bool)[order]
        self._keys = self.keys_of(self.index)

    def __len__(self) -> int:
        return self.index.shape[0]

    @property
    def cells(self) -> int:
        """Boxes per axis at this level."""
        return int(round(self.side / self.width))

    @property
    def width(self) -> float:
        return self.w1 * 2.0 ** -(self.level - 1)

    @property
    def centers(self) -> np.ndarray:
        return (self.index + 0.5) * self.width

    @property
    def lo(self) -> np.ndarray:
        return self.index * self.width

    @property
    def hi(self) -> np.ndarray:
        return (self.index + 1) * self.width

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    def keys_of(self, index: np.ndarray, level: int | None = None) -> np.ndarray:
        n = int(round(self.side / self.w1)) * 2 ** ((self.level if level is None else level) - 1)
        key = np.zeros(index.shape[0], dtype=np.int64)
        for k in range(self.dim - 1, -1, -1):
            key = key * n + index[:, k]
        return key

    def box(self, row: int) -> Box:
        return Box(self.level, tuple(int(v) for v in self.index[row]), self.w1)

    def row_of(self, index) -> int:
        key = self.keys_of(np.asarray(index, dtype=np.int64).reshape(1, -1))[0]
        pos = int(np.searchsorted(self._keys, key))
        if pos < len(self) and self._keys[pos] == key:
            return pos
        raise KeyError(tuple(index))

    def halo_lookup(self, index: np.ndarray) -> np.ndarray:
        """Frozen label of the deepest discarded ancestor of each position, or -1."""
        out = np.full(index.shape[0], UNASSIGNED, dtype=np.int64)
        for hl in self.halo:  # ascending level; deeper levels overwrite
            if hl.keys.size == 0:
                continue
            anc = index >> (self.level - hl.level)
            k = self.keys_of(anc, hl.level)
            pos = np.searchsorted(hl.keys, k)
            pos = np.minimum(pos, hl.keys.size - 1)
            found = hl.keys[pos] == k
            out[found] = hl.labels[pos[found]]
        return out

    def neighbor_table(self, density: Density, rows: np.ndarray | None = None):
        """Status and reference for every (box, adjacency vector) pair.

        Returns ``(status, ref)`` arrays of shape ``(B, 3**d - 1)``.  ``ref`` is the
        active row for ACTIVE entries, the frozen label for HALO entries and -1
        otherwise.
        """
        index = self.index if rows is None else self.index[rows]
        return _table_for(self, index, density)

    def neighbors(self, row: int, density: Density):
        """``[(index, status name, label or None), ...]`` for one box."""
        status, ref = self.neighbor_table(density, np.array([row]))
        V = adjacency_vectors(self.dim)
        out = []
        for k, v in enumerate(V):
            pos = tuple(int(a) for a in self.index[row] + v)
            s = int(status[0, k])
            if s == ACTIVE:
                lab = int(self.label[ref[0, k]])
                out.append((pos, STATUS_NAMES[s], None if lab == UNASSIGNED else lab))
            elif s == HALO:
                out.append((pos, STATUS_NAMES[s], int(ref[0, k])))
            else:
                out.append((pos, STATUS_NAMES[s], None))
        return out

    def classify(self, density: Density):
        """Set edge/internal flags; returns the neighbor table for reuse."""
        status, ref = self.neighbor_table(density)
        self.edge = np.any((status == ZERO) | (status == OUTSIDE), axis=1)
        self.internal = ~self.edge
        return status, ref

    def to_records(self) -> list[tuple[int, ...]]:
        return [(self.level,) + tuple(int(v) for v in row) for row in self.index]


def _table_for(active: ActiveSet, index: np.ndarray, density: Density):
    V = adjacency_vectors(active.dim)
    B = index.shape[0]
    nb = (index[:, None, :] + V[None, :, :]).reshape(-1, active.dim)
    n = active.cells
    inside = np.all((nb >= 0) & (nb < n), axis=1)
    status = np.full(nb.shape[0], OUTSIDE, dtype=np.int8)
    ref = np.full(nb.shape[0], -1, dtype=np.int64)
    cand = np.flatnonzero(inside)
    keys = active.keys_of(nb[cand])
    pos = np.minimum(np.searchsorted(active.keys, keys), max(len(active) - 1, 0))
    hit = active.keys[pos] == keys if len(active) else np.zeros(cand.size, dtype=bool)
    status[cand[hit]] = ACTIVE
    ref[cand[hit]] = pos[hit]
    rest = cand[~hit]
    if rest.size:
        w = active.width
        zero = density.zero_mask(nb[rest] * w, (nb[rest] + 1) * w)
        status[rest[zero]] = ZERO
        other = rest[~zero]
        status[other] = HALO
        ref[other] = active.halo_lookup(nb[other])
        if np.any(ref[other] == UNASSIGNED):
            raise GridError("positive-mass neighbor is neither active nor discarded")
    return status.reshape(B, -1), ref.reshape(B, -1)


def check_initial_width(side: float, w1: float) -> int:
    ratio = side / w1
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise GridError(f"domain side {side} is not an integer multiple of w1={w1}")
    return n


def initial_grid(side: float, w1: float, density: Density, targets=None) -> ActiveSet:
    """Uniform tiling at level 1 keeping boxes of positive mass, with flags computed."""
    n = check_initial_width(side, w1)
    d = density.dim
    axes = [np.arange(n, dtype=np.int64)] * d
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    lo, hi = idx * w1, (idx + 1) * w1
    zero = density.zero_mask(lo, hi)
    idx = idx[~zero]
    mass = density.box_masses(idx * w1, (idx + 1) * w1)
    active = ActiveSet(side, d, w1, 1, idx, mass, np.full(idx.shape[0], UNASSIGNED))
    active.classify(density)
    if targets is not None:
        cells = np.floor(np.asarray(targets, dtype=float) / w1).astype(np.int64)
        cells = np.minimum(cells, n - 1)
        _, counts = np.unique(cells, axis=0, return_counts=True)
        if np.any(counts > 1):
            warnings.warn("two or more targets share an initial box; consider a smaller w1", stacklevel=2)
    return active


def refine(active: ActiveSet, rows: np.ndarray, density: Density,
           discarded_rows: np.ndarray | None = None) -> ActiveSet:
    """Split the boxes ``rows`` of ``active`` into ``2**d`` children each.

    ``discarded_rows`` (interior boxes removed at this level) are appended to
    the halo with their labels.  Children inherit the parent label as a
    warm-start label; zero-mass children are dropped.
    """
    d = active.dim
    rows = np.asarray(rows, dtype=np.int64)
    offsets = np.array(list(itertools.product((0, 1), repeat=d)), dtype=np.int64)
    parent = active.index[rows]
    child = (2 * parent[:, None, :] + offsets[None, :, :]).reshape(-1, d)
    child_label = np.repeat(active.label[rows], offsets.shape[0])
    w = active.width / 2.0
    lo, hi = child * w, (child + 1) * w
    zero = density.zero_mask(lo, hi)
    child, child_label = child[~zero], child_label[~zero]
    mass = density.box_masses(child * w, (child + 1) * w)

    halo = list(active.halo)
    if discarded_rows is not None and len(discarded_rows):
        dr = np.asarray(discarded_rows, dtype=np.int64)
        keys = active.keys[dr]
        order = np.argsort(keys, kind="stable")
        halo.append(HaloLevel(active.level, keys[order], active.label[dr][order].copy()))
    nxt = ActiveSet(active.side, d, active.w1, active.level + 1, child, mass, child_label, halo=halo)
    nxt.classify(density)
    return nxt
