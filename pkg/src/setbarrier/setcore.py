"""Interval and zonotope arithmetic.

A zonotope ``<c, G>`` is the set ``{c + G @ beta | beta in [-1, 1]^q}``.  The
operations here are the exact affine map and Minkowski sum, the enclosure of
inner products, interval hulls, box conversion and splitting, plus the
scalar band constraint on zonotope factors used to prune regions that cannot
contain a zero of a network.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import ContractViolation, DimensionError, InvalidInputError

__all__ = [
    "Interval",
    "IntervalVector",
    "Zonotope",
    "FactorConstraint",
    "zono_affine",
    "zono_minkowski",
    "zono_product",
    "zono_interval_hull",
    "zono_from_interval",
    "zono_split",
    "factor_feasible",
    "factor_contract",
    "abs_row_sum",
]


def abs_row_sum(G: np.ndarray) -> np.ndarray:
    """Sum of absolute values along the last axis, accumulated column by column.

    The explicit left-to-right accumulation makes the result independent of
    BLAS/pairwise summation details.
    """
    G = np.asarray(G, dtype=float)
    out = np.zeros(G.shape[:-1])
    for j in range(G.shape[-1]):
        out = out + np.abs(G[..., j])
    return out


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not lo <= hi:
            raise InvalidInputError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def __iter__(self) -> Iterator[float]:
        yield self.lo
        yield self.hi


class IntervalVector:
    """Axis-aligned box ``[lo, hi]`` in R^n."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if not np.all(lo <= hi):
            raise InvalidInputError(f"empty interval component in [{lo}, {hi}]")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo = lo
        self.hi = hi

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "IntervalVector":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def dims(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self.lo, self.hi)]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, i: int) -> Interval:
        return Interval(self.lo[i], self.hi[i])

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        """Membership test; ``x`` may be a single point or a stack of points."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def is_subset(self, other: "IntervalVector", tol: float = 0.0) -> bool:
        return bool(np.all(self.lo >= other.lo - tol) and np.all(self.hi <= other.hi + tol))

    def volume(self) -> float:
        return float(np.prod(self.widths))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))

    def to_list(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalVector):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self) -> str:
        return f"IntervalVector({self.to_list()})"


class Zonotope:
    """Zonotope ``<center, generators>`` with an ``n x q`` generator matrix.

    All-zero generator columns are dropped by the public constructor.  Set
    propagation that relies on the position of generator columns goes through
    :meth:`raw`, which keeps every column.
    """

    __slots__ = ("center", "generators")

    def __init__(self, center, generators=None, *, drop_zero: bool = True):
        c = np.atleast_1d(np.asarray(center, dtype=float)).copy()
        if c.ndim != 1:
            raise DimensionError("center must be a vector")
        if generators is None:
            G = np.zeros((c.shape[0], 0))
        else:
            G = np.asarray(generators, dtype=float)
            if G.size == 0:
                G = np.zeros((c.shape[0], 0))
            if G.ndim == 1:
                G = G.reshape(c.shape[0], -1)
            G = G.copy()
        if G.ndim != 2 or G.shape[0] != c.shape[0]:
            raise DimensionError(
                f"generator matrix must have {c.shape[0]} rows, got shape {G.shape}")
        if drop_zero and G.shape[1]:
            G = G[:, np.any(G != 0.0, axis=0)]
        c.setflags(write=False)
        G.setflags(write=False)
        self.center = c
        self.generators = G

    @classmethod
    def raw(cls, center, generators) -> "Zonotope":
        return cls(center, generators, drop_zero=False)

    @classmethod
    def point(cls, x) -> "Zonotope":
        return cls(x)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    def is_box(self) -> bool:
        """True when every generator is axis-aligned and no axis repeats."""
        G = self.generators
        nz = G != 0.0
        if np.any(nz.sum(axis=0) > 1):
            return False
        return not np.any(nz.sum(axis=1) > 1)

    def expand(self, beta) -> np.ndarray:
        """Map factor values (shape ``(q,)`` or ``(m, q)``) to points."""
        beta = np.asarray(beta, dtype=float)
        return self.center + beta @ self.generators.T

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        beta = rng.uniform(-1.0, 1.0, size=(count, self.n_generators))
        return self.expand(beta)

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "generators": self.generators.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Zonotope":
        c = np.asarray(d["center"], dtype=float)
        G = np.asarray(d.get("generators", []), dtype=float)
        if G.size == 0:
            G = np.zeros((c.shape[0], 0))
        return cls(c, G)

    def __repr__(self) -> str:
        return f"Zonotope(center={self.center.tolist()}, generators={self.generators.tolist()})"


def _check_same_dim(Z1: Zonotope, Z2: Zonotope) -> None:
    if Z1.dim != Z2.dim:
        raise DimensionError(f"dimension mismatch: {Z1.dim} vs {Z2.dim}")


def zono_affine(W, b, Z: Zonotope) -> Zonotope:
    """Exact image ``W Z + b``; generator columns keep their positions."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if W.shape[1] != Z.dim:
        raise DimensionError(f"W has {W.shape[1]} columns, zonotope has dimension {Z.dim}")
    if b.shape != (W.shape[0],):
        raise DimensionError(f"offset must have {W.shape[0]} entries, got {b.shape}")
    return Zonotope.raw(W @ Z.center + b, W @ Z.generators)


def zono_minkowski(Z1: Zonotope, Z2: Zonotope) -> Zonotope:
    _check_same_dim(Z1, Z2)
    return Zonotope.raw(Z1.center + Z2.center, np.hstack([Z1.generators, Z2.generators]))


def zono_product(Z1: Zonotope, Z2: Zonotope) -> Zonotope:
    """One-dimensional zonotope enclosing ``{x1 . x2 | x1 in Z1, x2 in Z2}``.

    The factors of ``Z1`` and ``Z2`` are treated as independent.  Generator
    order: ``c1^T G2``, ``G1^T c2``, then ``G1[:, j]^T G2`` for each column j.
    """
    _check_same_dim(Z1, Z2)
    c1, G1 = Z1.center, Z1.generators
    c2, G2 = Z2.center, Z2.generators
    cols = [c1 @ G2, G1.T @ c2]
    cross = G1.T @ G2  # row j is G1[:, j]^T G2
    cols.extend(cross[j] for j in range(G1.shape[1]))
    G = np.concatenate(cols).reshape(1, -1)
    return Zonotope.raw([float(c1 @ c2)], G)


def zono_interval_hull(Z: Zonotope) -> IntervalVector:
    r = abs_row_sum(Z.generators)
    return IntervalVector(Z.center - r, Z.center + r)


def zono_from_interval(I: IntervalVector) -> Zonotope:
    """Box zonotope with diagonal radii; degenerate axes carry no generator."""
    return Zonotope(I.center, np.diag(I.radius))


def zono_split(Z: Zonotope, dim: int, parts: int) -> list[Zonotope]:
    """Split a box zonotope into ``parts`` equal pieces along axis ``dim``."""
    if not 0 <= dim < Z.dim:
        raise InvalidInputError(f"split dimension {dim} out of range for {Z.dim}-D set")
    if parts < 1:
        raise InvalidInputError("parts must be >= 1")
    if not Z.is_box():
        raise InvalidInputError("only axis-aligned box zonotopes can be split")
    hull = zono_interval_hull(Z)
    if parts == 1:
        return [zono_from_interval(hull)]
    cuts = np.linspace(hull.lo[dim], hull.hi[dim], parts + 1)
    cuts[-1] = hull.hi[dim]
    out = []
    for k in range(parts):
        lo, hi = hull.lo.copy(), hull.hi.copy()
        lo[dim], hi[dim] = cuts[k], cuts[k + 1]
        out.append(zono_from_interval(IntervalVector(lo, hi)))
    return out


@dataclass(frozen=True)
class FactorConstraint:
    """Band constraint ``coeffs . beta in [band.lo, band.hi]`` on ``beta in [-1, 1]^q``.

    An empty band (``lo > hi``) is allowed and marks an infeasible region, so
    the band is stored as two floats rather than an :class:`Interval`.
    """

    coeffs: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "coeffs", g)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @property
    def band(self) -> tuple[float, float]:
        return self.lo, self.hi

    def satisfied(self, beta, tol: float = 0.0) -> np.ndarray:
        v = np.asarray(beta, dtype=float) @ self.coeffs
        return (v >= self.lo - tol) & (v <= self.hi + tol)


def factor_feasible(con: FactorConstraint) -> bool:
    """Closed-form test: some ``beta`` in the unit box meets the band."""
    if con.coeffs.size < 1:
        raise InvalidInputError("constraint needs at least one factor")
    if con.lo > con.hi:
        return False
    reach = float(abs_row_sum(con.coeffs))
    return con.lo <= reach and con.hi >= -reach


def _contract_sweeps(g, band_lo, band_hi, beta_lo, beta_hi, sweeps=2):
    """Vectorised interval contraction of ``g . beta in [band_lo, band_hi]``.

    ``g``, ``beta_lo`` and ``beta_hi`` have shape ``(..., q)``; band arrays
    have shape ``(...)``.  Returns contracted bounds and an emptiness mask.
    """
    beta_lo = beta_lo.copy()
    beta_hi = beta_hi.copy()
    q = g.shape[-1]
    empty = np.zeros(g.shape[:-1], dtype=bool)
    for _ in range(sweeps):
        for j in range(q):
            gj = g[..., j]
            # range of sum_{k != j} g_k beta_k over the current box
            rest_lo = np.zeros(g.shape[:-1])
            rest_hi = np.zeros(g.shape[:-1])
            for k in range(q):
                if k == j:
                    continue
                a = g[..., k] * beta_lo[..., k]
                b = g[..., k] * beta_hi[..., k]
                rest_lo = rest_lo + np.minimum(a, b)
                rest_hi = rest_hi + np.maximum(a, b)
            num_lo = band_lo - rest_hi
            num_hi = band_hi - rest_lo
            nz = gj != 0.0
            safe = np.where(nz, gj, 1.0)
            q1 = num_lo / safe
            q2 = num_hi / safe
            new_lo = np.where(nz, np.minimum(q1, q2), -np.inf)
            new_hi = np.where(nz, np.maximum(q1, q2), np.inf)
            beta_lo[..., j] = np.maximum(beta_lo[..., j], new_lo)
            beta_hi[..., j] = np.minimum(beta_hi[..., j], new_hi)
            empty |= beta_lo[..., j] > beta_hi[..., j]
    return beta_lo, beta_hi, empty


def factor_contract(con: FactorConstraint) -> IntervalVector:
    """Tighten the factor box ``[-1, 1]^q`` under the band constraint.

    Two Gauss-Seidel sweeps of interval constraint propagation.  Factors with a
    zero coefficient keep ``[-1, 1]``.
    """
    if not factor_feasible(con):
        raise ContractViolation("factor_contract called on an infeasible constraint")
    q = con.coeffs.size
    lo, hi, empty = _contract_sweeps(
        con.coeffs, np.float64(con.lo), np.float64(con.hi),
        -np.ones(q), np.ones(q))
    if empty:
        # only reachable through rounding on a touching band; fall back to the
        # feasible boundary point rather than report an empty set
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    return IntervalVector(lo, hi)
