"""Slow, simple reference computations used to check the fast paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize

from .ground_cost import GroundCost, cost_matrix
from .measure import Density

MAX_SOURCES = 64
MAX_SINKS = 8
MAX_DEPTH = 12


class OracleError(ValueError):
    pass


@dataclass
class DenseTransportInstance:
    cost: np.ndarray
    mass: np.ndarray
    capacity: np.ndarray

    def __post_init__(self):
        self.cost = np.atleast_2d(np.asarray(self.cost, dtype=float))
        self.mass = np.asarray(self.mass, dtype=float).ravel()
        self.capacity = np.asarray(self.capacity, dtype=float).ravel()
        S, n = self.cost.shape
        if self.mass.shape != (S,) or self.capacity.shape != (n,):
            raise OracleError(f"shape mismatch: cost {self.cost.shape}, mass {self.mass.shape}, "
                              f"capacity {self.capacity.shape}")
        if not (np.all(np.isfinite(self.cost)) and np.all(np.isfinite(self.mass))
                and np.all(np.isfinite(self.capacity))):
            raise OracleError("non-finite entries")
        if np.any(self.mass < 0) or np.any(self.capacity < 0):
            raise OracleError("negative mass or capacity")
        if abs(self.mass.sum() - self.capacity.sum()) > 1e-12:
            raise OracleError(f"unbalanced: {self.mass.sum()!r} vs {self.capacity.sum()!r}")


def brute_force_transport(instance: DenseTransportInstance):
    """Exact optimum of the transport LP by dual simplex.

    Returns ``(cost, plan)`` with ``plan`` of shape ``(sources, sinks)``.
    """
    C = instance.cost
    S, n = C.shape
    if S > MAX_SOURCES or n > MAX_SINKS:
        raise OracleError(f"instance {S}x{n} exceeds the {MAX_SOURCES}x{MAX_SINKS} cap")
    if n == 1:
        plan = instance.mass[:, None].copy()
        return float(instance.mass @ C[:, 0]), plan
    # row sums = mass, column sums = capacity; drop one redundant column row
    A_rows = np.kron(np.eye(S), np.ones((1, n)))
    A_cols = np.kron(np.ones((1, S)), np.eye(n))[:-1]
    A = np.vstack([A_rows, A_cols])
    b = np.concatenate([instance.mass, instance.capacity[:-1]])
    res = linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise OracleError(f"linear program failed: {res.message}")
    plan = res.x.reshape(S, n)
    return float(np.sum(plan * C)), plan


def riemann_integral(integrand, lo, hi, depth: int, chunk: int = 1 << 20) -> float:
    """Tensor midpoint rule with ``2**depth`` points per axis.

    ``integrand`` maps an ``(N, d)`` array of points to ``N`` values.
    """
    if depth > MAX_DEPTH or depth < 0:
        raise OracleError(f"depth must be in [0, {MAX_DEPTH}]")
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    d = lo.size
    m = 1 << depth
    h = (hi - lo) / m
    axes = [lo[k] + (np.arange(m) + 0.5) * h[k] for k in range(d)]
    vol = float(np.prod(h))
    if d == 1:
        return vol * float(np.sum(integrand(axes[0][:, None])))
    # slab over the first axis keeps memory bounded
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, d - 1)
    per = max(1, chunk // rest.shape[0])
    parts = []
    for s in range(0, m, per):
        x0 = axes[0][s:s + per]
        pts = np.concatenate([np.repeat(x0, rest.shape[0])[:, None], np.tile(rest, (x0.size, 1))], axis=1)
        parts.append(np.sum(integrand(pts)))
    return vol * float(np.sum(parts))


def _dual_samples(cost, density, targets, depth):
    d = density.dim
    m = 1 << depth
    h = density.side / m
    axis = (np.arange(m) + 0.5) * h
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    weight = density.pointwise(pts) * h ** d
    keep = weight > 0
    return cost_matrix(cost, pts[keep], targets), weight[keep]


def semi_discrete_cost(cost: GroundCost, density: Density, targets, weights, depth: int = 10):
    """Optimal semi-discrete transport cost by maximizing the concave dual.

    The dual ``sum_i nu_i psi_i + int min_i (c(z, y_i) - psi_i) dmu`` is
    evaluated by the midpoint rule at ``2**depth`` points per axis.
    Returns ``(value, psi)``.  Intended for small ``n`` in 2-D.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    nu = np.asarray(weights, dtype=float).ravel()
    C, w = _dual_samples(cost, density, targets, min(depth, MAX_DEPTH))
    n = nu.size
    rows = np.arange(C.shape[0])

    def neg_dual(free):
        psi = np.concatenate([[0.0], free])
        red = C - psi
        arg = np.argmin(red, axis=1)
        val = nu @ psi + w @ red[rows, arg]
        got = np.bincount(arg, weights=w, minlength=n)
        return -val, -(nu - got)[1:]

    res = minimize(neg_dual, np.zeros(n - 1), jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12})
    psi = np.concatenate([[0.0], res.x])
    return -float(res.fun), psi
