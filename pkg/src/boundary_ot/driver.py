"""The boundary method: solve, discard interiors, refine; then shifts and the final estimate."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import auction, wasserstein
from .ground_cost import GroundCost, cost_matrix
from .grid import ACTIVE, HALO, ActiveSet, initial_grid, refine
from .measure import Density
from .shifts import (AdjacencyGraph, ShiftSet, build_adjacency, estimate_shift_difference,
                     solve_shifts)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid run configuration; ``problems`` lists every violated rule."""

    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class AccountingError(RuntimeError):
    """Remaining target capacity went negative: a mass bookkeeping bug."""


@dataclass
class RunConfig:
    cost: GroundCost
    density: Density
    targets: np.ndarray
    weights: np.ndarray
    side: float = 1.0
    w1_exp: int = 4
    target_exp: int = 9
    accumulate_wasserstein: bool = True
    emit_partition: bool = True
    emit_shifts: bool = True
    seed: int = 0
    name: str = ""
    pair_mode: str = "best"
    threads: int = 1

    def __post_init__(self):
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()

    @property
    def dim(self) -> int:
        return self.density.dim

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    @property
    def w1(self) -> float:
        return 2.0 ** -self.w1_exp

    @property
    def w_target(self) -> float:
        return 2.0 ** -self.target_exp

    def problems(self) -> list[str]:
        out = []
        n = self.n
        if n < 2:
            out.append(f"need at least 2 targets, got {n}")
        if self.weights.shape != (n,):
            out.append(f"{self.weights.size} weights for {n} targets")
        else:
            if np.any(self.weights <= 0):
                out.append("all target weights must be positive")
            if abs(self.weights.sum() - 1.0) > 1e-12:
                out.append(f"target weights sum to {self.weights.sum()!r}, not 1")
        if self.targets.shape[1] != self.density.dim:
            out.append(f"targets have dimension {self.targets.shape[1]}, density has {self.density.dim}")
        elif np.any(self.targets < 0) or np.any(self.targets > self.side):
            out.append(f"targets must lie in [0, {self.side}]^{self.dim}")
        if self.side != self.density.side:
            out.append("density domain side differs from run domain side")
        ratio = self.side / self.w1
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            out.append(f"side {self.side} is not a multiple of w1 = 2^-{self.w1_exp}")
        if self.target_exp < self.w1_exp:
            out.append("target width must not exceed the initial width")
        if self.pair_mode not in ("best", "mean"):
            out.append(f"unknown pair mode {self.pair_mode!r}")
        if self.threads < 1:
            out.append("threads must be >= 1")
        return out

    def validate(self) -> "RunConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self


@dataclass
class BoundaryState:
    active: ActiveSet
    partial: float | None            # P~ (None once unavailable)
    remaining: np.ndarray            # nu~
    level: int
    prices: np.ndarray
    discarded_mass: np.ndarray       # per target, for partition-recovery checks


@dataclass
class LevelStats:
    level: int
    width: float
    active: int
    boundary: int
    partial: float | None
    worst_case_error: float
    seconds: float
    bids: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    config: RunConfig
    state: BoundaryState
    boundary_rows: np.ndarray
    labels: np.ndarray               # per active row
    plan: np.ndarray                 # (|B|, n) shares of boundary boxes
    candidates: np.ndarray           # (|B|, n) labels of box and neighbors
    graph: AdjacencyGraph | None
    shifts: ShiftSet | None
    report: wasserstein.WassersteinReport | None
    stats: list[LevelStats] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def boundary_index(self) -> np.ndarray:
        return self.state.active.index[self.boundary_rows]

    @property
    def boundary_labels(self) -> np.ndarray:
        return self.labels[self.boundary_rows]


def _solve_level(cfg: RunConfig, state: BoundaryState):
    active = state.active
    n = cfg.n
    live = np.flatnonzero(state.remaining > 1e-13)
    cap = state.remaining[live].copy()
    total = float(active.mass.sum())
    drift = total - cap.sum()
    if abs(drift) > 1e-9 * max(total, 1e-300):
        raise AccountingError(f"active mass {total!r} and remaining capacity {cap.sum()!r} disagree")
    cap[int(np.argmax(cap))] += drift
    C = cost_matrix(cfg.cost, active.centers, cfg.targets[live])
    problem = auction.TransportProblem(C, active.mass, cap)
    sol = auction.solve(problem, warm_prices=state.prices[live])
    state.prices[live] = sol.prices
    # back to global target ids
    sol_sink = live[sol.sink]
    labels = live[sol.label]
    return sol, sol_sink, labels


def _neighbor_labels(labels, split, status, ref):
    """Per (box, adjacency vector) destination; -1 where not comparable, -2 for split neighbors."""
    nl = np.full(status.shape, -1, dtype=np.int64)
    act = status == ACTIVE
    nl[act] = labels[ref[act]]
    nl[act & split[np.where(act, ref, 0)]] = -2
    halo = status == HALO
    nl[halo] = ref[halo]
    return nl


def discard_interiors(cfg: RunConfig, state: BoundaryState, labels, split, status, ref,
                      integrals: bool = True) -> np.ndarray:
    """Remove interior boxes whose neighborhood agrees on one destination.

    Returns the discarded rows (ascending).  Updates ``state.partial`` and
    ``state.remaining`` in place.
    """
    active = state.active
    nl = _neighbor_labels(labels, split, status, ref)
    agree = np.all(nl == labels[:, None], axis=1)
    rows = np.flatnonzero(active.internal & ~split & agree)
    if rows.size == 0:
        return rows
    lab = labels[rows]
    mass = active.mass[rows]
    if state.partial is not None and integrals:
        add = 0.0
        for t in np.unique(lab):
            sel = rows[lab == t]
            vals = wasserstein.box_cost_integral(cfg.cost, cfg.density, active.lo[sel], active.hi[sel],
                                                 cfg.targets[t])
            add += float(np.sum(vals))
        state.partial += add
    taken = np.bincount(lab, weights=mass, minlength=cfg.n)
    state.remaining -= taken
    state.discarded_mass += taken
    if np.any(state.remaining < -1e-9):
        raise AccountingError(f"remaining capacity went negative: {state.remaining}")
    return rows


def _candidates(labels, split_plan, nl, n):
    B = nl.shape[0]
    cand = np.zeros((B, n), dtype=bool)
    cand[np.arange(B), labels] = True
    cand |= split_plan > 0
    for k in range(nl.shape[1]):
        col = nl[:, k]
        ok = col >= 0
        cand[np.flatnonzero(ok), col[ok]] = True
    return cand


def sample_points(lo, hi):
    """Corners and center of each box: ``(B, 2**d + 1, d)``."""
    d = lo.shape[1]
    corners = [np.where(np.array(m, dtype=bool), hi, lo) for m in itertools.product((0, 1), repeat=d)]
    return np.stack(corners + [0.5 * (lo + hi)], axis=1)


def worst_case_running_error(cfg: RunConfig, lo, hi, mass, labels, candidates) -> float:
    """Sum over boundary boxes of ``mu(box) * max |g_ij|`` over sampled points.

    ``i`` is the box's destination and ``j`` ranges over the other destinations
    seen in its neighborhood (``candidates``).
    """
    if lo.shape[0] == 0:
        return 0.0
    pts = sample_points(lo, hi)
    B, P, d = pts.shape
    flat = pts.reshape(-1, d)
    costs = cost_matrix(cfg.cost, flat, cfg.targets).reshape(B, P, -1)
    own = costs[np.arange(B), :, labels]                       # (B, P)
    diff = np.abs(own[:, :, None] - costs).max(axis=1)          # (B, n)
    mask = candidates.copy()
    mask[np.arange(B), labels] = False
    worst = np.where(mask, diff, 0.0).max(axis=1)
    return float(np.sum(mass * worst))


def run(cfg: RunConfig, progress=None) -> RunResult:
    """Run the full boundary method for one configuration."""
    cfg.validate()
    notes: list[str] = []
    density = cfg.density
    n = cfg.n
    closed = wasserstein.has_closed_form(cfg.cost, density)
    want_cost = cfg.accumulate_wasserstein and closed
    if cfg.accumulate_wasserstein and not closed:
        notes.append("P~ unavailable: no closed-form cost integral for this cost/density")

    active = initial_grid(cfg.side, cfg.w1, density, cfg.targets)
    state = BoundaryState(active, 0.0 if want_cost else None, cfg.weights.copy(), 1, np.zeros(n), np.zeros(n))
    stats: list[LevelStats] = []
    while True:
        t0 = time.perf_counter()
        active = state.active
        status, ref = active.neighbor_table(density)
        sol, sol_sink, labels = _solve_level(cfg, state)
        split = sol.split
        active.label = labels
        discarded = discard_interiors(cfg, state, labels, split, status, ref, integrals=want_cost)
        keep = np.ones(len(active), dtype=bool)
        keep[discarded] = False
        b_rows = np.flatnonzero(keep)

        # shares of boundary boxes and the destinations around them
        plan_full = np.zeros((len(active), n))
        np.add.at(plan_full, (sol.src, sol_sink), sol.amount)
        plan = plan_full[b_rows]
        nl = _neighbor_labels(labels, np.zeros(len(active), dtype=bool), status, ref)[b_rows]
        cand = _candidates(labels[b_rows], plan, nl, n)
        wce = worst_case_running_error(cfg, active.lo[b_rows], active.hi[b_rows], active.mass[b_rows],
                                       labels[b_rows], cand)
        level_stats = LevelStats(state.level, active.width, len(active), int(b_rows.size),
                                 state.partial, wce, time.perf_counter() - t0, int(sol.bids))
        stats.append(level_stats)
        if progress is not None:
            progress(level_stats)
        log.info("level %d: |A|=%d |B|=%d P~=%s err=%.3g", state.level, len(active), b_rows.size,
                 state.partial, wce)
        if active.width <= cfg.w_target * (1 + 1e-12):
            break
        state.active = refine(active, b_rows, density, discarded_rows=discarded)
        state.level += 1

    graph = shifts = None
    if cfg.emit_shifts:
        graph = build_adjacency(active, b_rows, labels, n, status=status, ref=ref)
        for edge in graph.edges.values():
            estimate_shift_difference(edge, cfg.cost, cfg.targets, width=active.width, mode=cfg.pair_mode)
        shifts = solve_shifts(graph)
    report = None
    if want_cost:
        # each boundary box is charged to its destination label
        onehot = np.zeros_like(plan)
        onehot[np.arange(b_rows.size), labels[b_rows]] = active.mass[b_rows]
        report = wasserstein.finalize(state.partial, cfg.cost, density, active.lo[b_rows], active.hi[b_rows],
                                      cfg.targets, onehot, cand)
    return RunResult(cfg, state, b_rows, labels, plan, cand, graph, shifts, report, stats, notes)
