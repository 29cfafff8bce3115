"""Forward auction with epsilon scaling for transport problems with divisible masses.

Sources (boxes) carry masses, sinks (targets) carry capacities.  A source
with unassigned mass bids its whole remainder for its best sink; the sink
keeps the highest bids up to capacity and evicts the cheapest shares.  The
price of a full sink is the lowest bid it holds, so prices only rise.  Bids
are processed one at a time from a FIFO queue seeded in ascending source id,
so results never depend on thread count.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _auction_kernel as _k

log = logging.getLogger(__name__)


# leftover mass below this fraction of a source's mass is assigned without bidding
DUST_FRACTION = 1e-7

class AuctionError(RuntimeError):
    """Solver failure; ``best`` holds the last assignment reached, if any."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass
class TransportProblem:
    cost: np.ndarray        # (S, n)
    mass: np.ndarray        # (S,)
    capacity: np.ndarray    # (n,)

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        self.capacity = np.asarray(self.capacity, dtype=float)
        S, n = self.cost.shape
        if self.mass.shape != (S,) or self.capacity.shape != (n,):
            raise ValueError("cost matrix shape does not match masses/capacities")
        if np.any(self.mass <= 0) or np.any(self.capacity <= 0):
            raise ValueError("masses and capacities must be positive")
        if not np.all(np.isfinite(self.cost)):
            raise ValueError("cost matrix must be finite")
        tm, tc = self.mass.sum(), self.capacity.sum()
        if abs(tm - tc) > 1e-9 * max(tm, tc):
            raise ValueError(f"unbalanced problem: mass {tm!r} vs capacity {tc!r}")

    @property
    def shape(self):
        return self.cost.shape


@dataclass
class Assignment:
    """Sparse transport plan: rows ``(src[k], sink[k], amount[k])`` sorted by source, sink."""

    src: np.ndarray
    sink: np.ndarray
    amount: np.ndarray
    prices: np.ndarray
    epsilon_final: float
    n_sources: int
    bids: int = 0
    label: np.ndarray = field(default=None)
    split: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.label is None:
            self.label, self.split = _labels(self.src, self.sink, self.amount, self.n_sources)

    def destination(self, source: int) -> int:
        return int(self.label[source])

    def shares(self, source: int) -> list[tuple[int, float]]:
        lo, hi = np.searchsorted(self.src, [source, source + 1])
        return [(int(t), float(a)) for t, a in zip(self.sink[lo:hi], self.amount[lo:hi])]

    def dense(self, n_sinks: int) -> np.ndarray:
        plan = np.zeros((self.n_sources, n_sinks))
        np.add.at(plan, (self.src, self.sink), self.amount)
        return plan

    def total_cost(self, cost: np.ndarray) -> float:
        return float(np.sum(cost[self.src, self.sink] * self.amount))

    def write_csv(self, path, centers=None) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["kind", "id", "sink", "value"])
            for t, p in enumerate(self.prices):
                wr.writerow(["price", "", t, repr(float(p))])
            for s, t, a in zip(self.src, self.sink, self.amount):
                wr.writerow(["share", int(s), int(t), repr(float(a))])


def _labels(src, sink, amount, n_sources, split_tol=1e-9):
    label = np.full(n_sources, -1, dtype=np.int64)
    best = np.zeros(n_sources)
    total = np.zeros(n_sources)
    np.add.at(total, src, amount)
    # rows are sorted by (src, sink); strict '>' keeps the lowest sink on ties
    for s, t, a in zip(src.tolist(), sink.tolist(), amount.tolist()):
        if a > best[s]:
            best[s] = a
            label[s] = t
    split = (total - best) > split_tol * np.maximum(total, 1e-300)
    return label, split


def default_schedule(cost: np.ndarray) -> tuple[float, float, float]:
    rng = float(cost.max() - cost.min()) if cost.size else 0.0
    if rng <= 0:
        rng = 1.0
    return rng / 8.0, 4.0, 1e-9 * rng


def solve(problem: TransportProblem, warm_prices=None, eps_schedule=None,
          max_bids: int | None = None) -> Assignment:
    """Solve the transport problem to epsilon-complementary slackness.

    Parameters
    ----------
    problem : TransportProblem
    warm_prices : array, optional
        Initial sink prices (e.g. from the previous refinement level).
    eps_schedule : (eps0, factor, eps_min), optional
        Defaults to ``(range/8, 4, 1e-9 * range)`` of the cost matrix.
    max_bids : int, optional
        Bid budget across all phases; exceeding it raises :class:`AuctionError`
        carrying the partial assignment.
    """
    C = np.ascontiguousarray(problem.cost)
    S, n = C.shape
    mass = problem.mass
    cap = problem.capacity.copy()
    # fold floating-point imbalance into the largest capacity
    cap[int(np.argmax(cap))] += mass.sum() - cap.sum()

    if n == 1:
        p0 = np.zeros(1) if warm_prices is None else np.asarray(warm_prices, float).copy()
        return Assignment(np.arange(S), np.zeros(S, dtype=np.int64), mass.copy(), p0 - p0.min(), 0.0, S)

    eps0, factor, eps_min = default_schedule(C) if eps_schedule is None else eps_schedule
    if not (eps0 >= eps_min > 0 and factor > 1):
        raise ValueError("eps schedule needs eps0 >= eps_min > 0 and factor > 1")
    if max_bids is None:
        max_bids = 2_000 * (S + n) + 10_000_000

    p = np.zeros(n) if warm_prices is None else np.asarray(warm_prices, dtype=float).copy()
    p -= p.min()
    tol = 1e-15 * float(mass.sum())
    # leftovers this small stop bidding and go to their best sink at the end;
    # otherwise two sources can trade a tiny packet for millions of bids
    dust = np.maximum(DUST_FRACTION * mass, tol)
    width = max(16, 2 * S // n + 16)
    hb = np.empty((n, width))
    hs = np.empty((n, width), dtype=np.int64)
    ha = np.empty((n, width))
    size = np.zeros(n, dtype=np.int64)
    held = np.zeros(n)
    rem = mass.copy()
    eps = eps0
    bids = 0
    while True:
        hb, hs, ha, bids, ok = _k.run_phase(C, cap, p, hb, hs, ha, size, held, rem, eps, dust, tol, max_bids, bids)
        if not ok:
            best = _collect(C, p, hb, hs, ha, size, rem, eps, S, bids)
            raise AuctionError(f"auction exceeded {max_bids} bids at eps={eps:g}", best)
        if eps <= eps_min:
            break
        eps = max(eps / factor, eps_min)
        _k.release(C, p, hb, hs, ha, size, held, rem, eps)
    return _collect(C, p, hb, hs, ha, size, rem, eps, S, bids)


def _collect(C, p, hb, hs, ha, size, rem, eps, S, bids) -> Assignment:
    n = C.shape[1]
    src = [hs[t, :size[t]] for t in range(n)]
    snk = [np.full(size[t], t, dtype=np.int64) for t in range(n)]
    amt = [ha[t, :size[t]] for t in range(n)]
    left = np.flatnonzero(rem > 0)
    if left.size:
        # sub-dust leftovers go to the best sink at current prices
        src.append(left)
        snk.append(np.argmin(C[left] + p, axis=1).astype(np.int64))
        amt.append(rem[left])
    src, snk, amt = np.concatenate(src), np.concatenate(snk), np.concatenate(amt)
    keep = amt > 0
    src, snk, amt = src[keep], snk[keep], amt[keep]
    key = src * n + snk
    order = np.argsort(key, kind="stable")
    key, amt = key[order], amt[order]
    uniq, start = np.unique(key, return_index=True)
    if amt.size:
        amt = np.add.reduceat(amt, start)
    return Assignment(uniq // n, uniq % n, amt, p - p.min(), eps, S, bids)


def verify_eps_cs(problem: TransportProblem, assignment: Assignment, eps: float | None = None,
                  tol: float = 1e-9) -> tuple[bool, dict]:
    """Independent post-hoc check of feasibility and epsilon-complementary slackness.

    Scans every source/sink pair.  Sink overflow up to ``DUST_FRACTION`` of the
    total mass is allowed (absorbed leftovers).  Returns ``(ok, details)``.
    """
    C = problem.cost
    eps = assignment.epsilon_final if eps is None else eps
    p = assignment.prices
    plan = assignment.dense(C.shape[1])
    out = plan.sum(axis=1)
    inflow = plan.sum(axis=0)
    scale = max(1.0, float(problem.mass.sum()))
    feas_src = np.max(np.abs(out - problem.mass) / problem.mass)
    feas_sink = np.max(inflow - problem.capacity)
    reduced = C + p
    best = reduced.min(axis=1)
    gap = np.where(plan > 0, reduced - best[:, None], -np.inf).max()
    crange = float(C.max() - C.min()) if C.size else 0.0
    cs_ok = gap <= eps + 1e-12 * max(1.0, crange, float(np.abs(p).max()))
    ok = bool(feas_src <= tol and feas_sink <= (DUST_FRACTION + tol) * float(problem.mass.sum()) and cs_ok)
    return ok, {"source_residual": float(feas_src), "sink_overflow": float(feas_sink),
                "max_cs_gap": float(gap), "epsilon": float(eps)}
