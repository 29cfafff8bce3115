"""Piecewise closed-form source densities and exact box masses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("uniform", "monomial", "exp")


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class DensityPiece:
    """Un-normalized density ``coefficient * f(x)`` on an axis-aligned region.

    ``kind`` selects ``f``: ``uniform`` (1), ``monomial`` (prod_i x_i**t, t > 0)
    or ``exp`` (exp(t * x[axis]), t != 0).
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    kind: str = "uniform"
    coefficient: float = 1.0
    t: float = 1.0
    axis: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or not self.lo:
            raise MeasureError("region corners must share a positive dimension")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise MeasureError(f"empty region {self.lo}..{self.hi}")
        if self.kind not in KINDS:
            raise MeasureError(f"unknown density kind {self.kind!r}")
        if not self.coefficient > 0:
            raise MeasureError("piece coefficient must be positive")
        if self.kind == "monomial" and not self.t > 0:
            raise MeasureError("monomial exponent must be positive")
        if self.kind == "exp":
            if self.t == 0:
                raise MeasureError("exp rate must be nonzero")
            if not 0 <= self.axis < len(self.lo):
                raise MeasureError("exp axis out of range")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def antiderivative(self, z) -> np.ndarray:
        """``M_hat(z)`` with ``M_hat = 0`` on the coordinate hyperplanes (up to the exp offset)."""
        z = np.asarray(z, dtype=float)
        if self.kind == "uniform":
            out = np.prod(z, axis=-1)
        elif self.kind == "monomial":
            out = (self.t + 1.0) ** (-self.dim) * np.prod(z ** (self.t + 1.0), axis=-1)
        else:
            others = np.delete(z, self.axis, axis=-1)
            out = np.prod(others, axis=-1) * np.exp(self.t * z[..., self.axis]) / self.t
        return self.coefficient * out

    def integral(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Exact un-normalized integral over boxes ``[lo, hi]`` (rows), assumed inside the region.

        Evaluated as the product of per-axis antiderivative differences, which is the
        factored form of the 2**d signed corner sum of :meth:`antiderivative`.
        """
        if self.kind == "uniform":
            f = np.prod(hi - lo, axis=-1)
        elif self.kind == "monomial":
            e = self.t + 1.0
            f = np.prod((hi ** e - lo ** e) / e, axis=-1)
        else:
            a = self.axis
            w = np.prod(np.delete(hi - lo, a, axis=-1), axis=-1)
            # exp(t b) - exp(t a) = exp(t a) * expm1(t (b - a))
            f = w * np.exp(self.t * lo[..., a]) * np.expm1(self.t * (hi[..., a] - lo[..., a])) / self.t
        return self.coefficient * f

    def to_dict(self) -> dict:
        rec = {"region": [list(self.lo), list(self.hi)], "kind": self.kind, "coefficient": self.coefficient}
        if self.kind != "uniform":
            rec["t"] = self.t
        if self.kind == "exp":
            rec["axis"] = self.axis
        return rec

    @classmethod
    def from_dict(cls, rec: dict) -> "DensityPiece":
        lo, hi = rec["region"]
        return cls(tuple(lo), tuple(hi), rec.get("kind", "uniform"), float(rec.get("coefficient", 1.0)),
                   float(rec.get("t", 1.0)), int(rec.get("axis", 0)))


def corner_difference(func, lo, hi) -> float:
    """Signed sum of ``func`` over the 2**d corners of the box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    total = 0.0
    for mask in range(1 << d):
        corner = np.where([(mask >> i) & 1 for i in range(d)], hi, lo)
        sign = -1.0 if (d - bin(mask).count("1")) % 2 else 1.0
        total += sign * float(func(corner))
    return total


@dataclass(frozen=True)
class Density:
    """Normalized piecewise density on the cube ``[0, side]**d``."""

    pieces: tuple[DensityPiece, ...]
    side: float
    dim: int
    Z: float = field(default=1.0)

    @property
    def is_uniform_everywhere(self) -> bool:
        return all(p.kind == "uniform" for p in self.pieces)

    def box_masses(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Exact normalized masses of the boxes ``[lo[k], hi[k]]``."""
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        if lo.shape[1] != self.dim:
            raise MeasureError(f"box dimension {lo.shape[1]} != density dimension {self.dim}")
        eps = 1e-12 * self.side
        if np.any(lo < -eps) or np.any(hi > self.side + eps):
            raise MeasureError("box lies outside the domain")
        total = np.zeros(lo.shape[0])
        for piece in self.pieces:
            plo = np.maximum(lo, piece.lo)
            phi = np.minimum(hi, piece.hi)
            hit = np.all(phi > plo, axis=1)
            if np.any(hit):
                total[hit] += piece.integral(plo[hit], phi[hit])
        return total / self.Z

    def zero_mask(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """True where the box meets no piece on a set of positive volume."""
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        hit = np.zeros(lo.shape[0], dtype=bool)
        for piece in self.pieces:
            hit |= np.all(np.minimum(hi, piece.hi) > np.maximum(lo, piece.lo), axis=1)
        return ~hit

    def uniform_parts(self, lo, hi):
        """Decompose a box into ``(sub_lo, sub_hi, value)`` uniform parts.

        Returns ``None`` if a non-uniform piece meets the box.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        parts = []
        for piece in self.pieces:
            plo = np.maximum(lo, piece.lo)
            phi = np.minimum(hi, piece.hi)
            if np.all(phi > plo):
                if piece.kind != "uniform":
                    return None
                parts.append((plo, phi, piece.coefficient / self.Z))
        return parts

    def pointwise(self, x) -> np.ndarray:
        """Normalized density values at points (last axis = coordinates); used by oracles."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for piece in self.pieces:
            inside = np.all((x >= piece.lo) & (x < piece.hi), axis=-1)
            if piece.kind == "uniform":
                val = np.ones(x.shape[:-1])
            elif piece.kind == "monomial":
                val = np.prod(np.abs(x) ** piece.t, axis=-1)
            else:
                val = np.exp(piece.t * x[..., piece.axis])
            out = np.where(inside, out + piece.coefficient * val, out)
        return out / self.Z

    def to_records(self) -> list[dict]:
        return [p.to_dict() for p in self.pieces]


def normalize(pieces, side: float, dim: int | None = None, grid_width: float | None = None) -> Density:
    """Build a :class:`Density` whose total mass over ``[0, side]**d`` is one."""
    pieces = tuple(pieces)
    if not pieces:
        raise MeasureError("density needs at least one piece")
    d = pieces[0].dim if dim is None else dim
    for p in pieces:
        if p.dim != d:
            raise MeasureError("pieces disagree on dimension")
        if any(l < 0 for l in p.lo) or any(h > side for h in p.hi):
            raise MeasureError(f"piece region {p.lo}..{p.hi} leaves the domain [0,{side}]^{d}")
        if grid_width is not None:
            for v in p.lo + p.hi:
                k = v / grid_width
                if abs(k - round(k)) > 1e-9:
                    raise MeasureError(f"piece boundary {v} is not on the initial grid (width {grid_width})")
    for a in range(len(pieces)):
        for b in range(a + 1, len(pieces)):
            pa, pb = pieces[a], pieces[b]
            if all(min(pa.hi[i], pb.hi[i]) > max(pa.lo[i], pb.lo[i]) for i in range(d)):
                raise MeasureError(f"density pieces {a} and {b} overlap")
    Z = 0.0
    for p in pieces:
        Z += float(p.integral(np.array([p.lo]), np.array([p.hi]))[0])
    if not (Z > 0 and math.isfinite(Z)):
        raise MeasureError(f"density has non-positive total mass {Z}")
    return Density(pieces, float(side), d, Z)


def uniform(side: float = 1.0, dim: int = 2) -> Density:
    return normalize([DensityPiece((0.0,) * dim, (side,) * dim)], side, dim)
