"""Ground costs built as positive combinations of ``k * ||y - x||_p ** q`` terms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


class CostError(ValueError):
    """Raised for malformed cost terms or mismatched point dimensions."""


@dataclass(frozen=True)
class CostTerm:
    """One ``k * l_p^q`` term. ``p`` may be ``math.inf`` for the max-norm."""

    k: float
    p: float
    q: float

    def __post_init__(self):
        try:
            object.__setattr__(self, "k", float(self.k))
            object.__setattr__(self, "p", _parse_p(self.p))
            object.__setattr__(self, "q", float(self.q))
        except (TypeError, ValueError) as exc:
            raise CostError(f"non-numeric cost term: {exc}") from exc
        if not (self.k > 0 and math.isfinite(self.k)):
            raise CostError(f"cost coefficient must be positive and finite, got k={self.k}")
        if not (self.q > 0 and math.isfinite(self.q)):
            raise CostError(f"cost exponent q must be positive and finite, got q={self.q}")
        if not (self.p > 0):
            raise CostError(f"cost exponent p must be positive or inf, got p={self.p}")

    @property
    def is_sup(self) -> bool:
        return math.isinf(self.p)

    def to_dict(self) -> dict:
        return {"k": self.k, "p": "inf" if self.is_sup else self.p, "q": self.q}

    def norm(self, diff: np.ndarray) -> np.ndarray:
        """``||diff||_p`` along the last axis."""
        a = np.abs(diff)
        if self.is_sup:
            return a.max(axis=-1)
        if self.p == 1:
            return a.sum(axis=-1)
        if self.p == 2:
            return np.sqrt((a * a).sum(axis=-1))
        with np.errstate(divide="ignore"):
            s = np.power(a, self.p).sum(axis=-1)
        return np.power(s, 1.0 / self.p)

    def __call__(self, diff: np.ndarray) -> np.ndarray:
        r = self.norm(diff)
        if self.q == 1:
            return self.k * r
        if self.q == 2 and self.p == 2:
            a = np.abs(diff)
            return self.k * (a * a).sum(axis=-1)
        return self.k * np.power(r, self.q)


def _parse_p(p) -> float:
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity"):
            return INF
        return float(p)
    return float(p)


@dataclass(frozen=True)
class GroundCost:
    """Sum of :class:`CostTerm` objects.

    All evaluation routines broadcast over leading axes; the last axis holds
    coordinates.
    """

    terms: tuple[CostTerm, ...]

    def __post_init__(self):
        if len(self.terms) == 0:
            raise CostError("a ground cost needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    @classmethod
    def lp(cls, p: float, q: float = 1.0, k: float = 1.0) -> "GroundCost":
        return cls((CostTerm(k, p, q),))

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "GroundCost":
        terms = []
        for rec in records:
            terms.append(CostTerm(float(rec.get("k", 1.0)), _parse_p(rec["p"]), float(rec.get("q", 1.0))))
        return cls(tuple(terms))

    def to_records(self) -> list[dict]:
        return [t.to_dict() for t in self.terms]

    def __call__(self, x, y) -> np.ndarray | float:
        return evaluate(self, x, y)

    @property
    def is_norm(self) -> bool:
        # a positive combination of l_p norms with p >= 1, each to the first power
        return all(t.q == 1 and t.p >= 1 for t in self.terms)

    def describe(self) -> str:
        parts = []
        for t in self.terms:
            p = "inf" if t.is_sup else f"{t.p:g}"
            s = f"l{p}"
            if t.q != 1:
                s += f"^{t.q:g}"
            if t.k != 1:
                s = f"{t.k:g}*{s}"
            parts.append(s)
        return " + ".join(parts)


def _diff(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1:] != y.shape[-1:]:
        raise CostError(f"dimension mismatch: {x.shape[-1:]} vs {y.shape[-1:]}")
    return y - x


def evaluate(cost: GroundCost, x, y):
    """``c(x, y) = sum_s k_s ||y - x||_{p_s}^{q_s}``; broadcasts over leading axes."""
    d = _diff(x, y)
    total = cost.terms[0](d)
    for t in cost.terms[1:]:
        total = total + t(d)
    if np.ndim(total) == 0:
        return float(total)
    return total


def g_ij(cost: GroundCost, x, y_i, y_j):
    """Pairwise cost difference ``c(x, y_i) - c(x, y_j)``."""
    yi = np.asarray(y_i, dtype=float)
    yj = np.asarray(y_j, dtype=float)
    if yi.shape[-1:] != yj.shape[-1:]:
        raise CostError("target points must share a dimension")
    return evaluate(cost, x, yi) - evaluate(cost, x, yj)


def cost_matrix(cost: GroundCost, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Dense ``(len(xs), len(ys))`` matrix of ``c(xs[a], ys[b])``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape[1] != ys.shape[1]:
        raise CostError(f"dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
    out = np.empty((xs.shape[0], ys.shape[0]))
    for j in range(ys.shape[0]):
        out[:, j] = evaluate(cost, xs, ys[j])
    return out


def neighbor_cost_bound(cost: GroundCost, width: float, d: int) -> float:
    """Upper bound on the cost between two neighboring grid points of the given width."""
    if width <= 0 or d < 1:
        raise CostError("width must be positive and d >= 1")
    total = 0.0
    for t in cost.terms:
        scale = 1.0 if t.is_sup else d ** (1.0 / t.p)
        total += t.k * (width * scale) ** t.q
    return total


@dataclass
class ProbeReport:
    passed: bool
    samples: int
    counterexample: dict | None = None

    def __bool__(self) -> bool:
        return self.passed


def admissibility_probe(cost: GroundCost, sample_count: int = 1000, seed: int = 0,
                        d: int = 2, tol: float = 1e-12) -> ProbeReport:
    """Sample the three admissibility properties and report the first failure."""
    if sample_count < 1:
        raise CostError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    for n in range(sample_count):
        x1, x2 = rng.uniform(-1.0, 1.0, size=(2, d))
        c_xx = evaluate(cost, x1, x1)
        if abs(c_xx) > tol:
            return ProbeReport(False, n, {"property": "identity", "x": x1.tolist(), "value": c_xx})
        a, b = evaluate(cost, x1, x2), evaluate(cost, x2, x1)
        if abs(a - b) > tol or not a > 0:
            return ProbeReport(False, n, {"property": "symmetry/positivity", "x1": x1.tolist(),
                                          "x2": x2.tolist(), "values": [a, b]})
        # collinear triple x1, x2 (pivot), x3 = x2 + s * (x1 - x2)
        s = rng.uniform(-3.0, 3.0)
        x3 = x2 + s * (x1 - x2)
        r1 = np.linalg.norm(x1 - x2)
        r3 = np.linalg.norm(x3 - x2)
        c1, c3 = evaluate(cost, x2, x1), evaluate(cost, x2, x3)
        if r1 <= r3 and c1 > c3 + tol:
            return ProbeReport(False, n, {"property": "collinear monotonicity", "x1": x1.tolist(),
                                          "x2": x2.tolist(), "x3": x3.tolist(), "values": [c1, c3]})
        if r3 <= r1 and c3 > c1 + tol:
            return ProbeReport(False, n, {"property": "collinear monotonicity", "x1": x3.tolist(),
                                          "x2": x2.tolist(), "x3": x1.tolist(), "values": [c3, c1]})
    return ProbeReport(True, sample_count)
