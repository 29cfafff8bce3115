"""Quadrature helpers shared by the closed-form checks."""

import numpy as np

from boundary_ot.oracle import riemann_integral


def split_riemann(f, lo, hi, y, depth):
    """Midpoint rule on the sub-boxes cut at ``y``, so every piece has a smooth integrand."""
    cuts = [sorted({lo[k], hi[k]} | ({y[k]} if lo[k] < y[k] < hi[k] else set())) for k in range(len(lo))]
    return sum(riemann_integral(f, [a0, b0], [a1, b1], depth)
               for a0, a1 in zip(cuts[0][:-1], cuts[0][1:]) for b0, b1 in zip(cuts[1][:-1], cuts[1][1:]))


def extrapolate(values, exponents):
    """Richardson extrapolation over successive halvings, removing one error power per pass."""
    for e in exponents:
        r = 2.0 ** e
        values = [(r * b - a) / (r - 1) for a, b in zip(values[:-1], values[1:])]
    return values[-1]


def grid_points(k):
    g = (np.arange(k) + 0.5) / k
    return np.array([[x, y] for y in g for x in g])
