"""Dynamical systems: specification, flow enclosure and JSON loading."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DimensionError, InvalidInputError
from ..setcore import (IntervalVector, Zonotope, zono_affine, zono_from_interval,
                       zono_interval_hull)
from .expr import Expr, affine_coefficients, parse_expr

LOG = logging.getLogger(__name__)

DEFAULT_NONLINEAR_SUBSPLITS = 2


@dataclass(frozen=True)
class SystemSpec:
    """Vector field ``f`` on the state space ``X`` with initial and unsafe sets.

    ``A`` and ``b`` hold the closed form ``f(x) = A x + b`` when the dynamics
    are affine; ``is_linear`` is then true and flows are mapped exactly.
    """

    name: str
    dim: int
    dynamics: tuple[Expr, ...]
    state_space: IntervalVector
    initial_sets: tuple[Zonotope, ...]
    unsafe_sets: tuple[Zonotope, ...]
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        object.__setattr__(self, "initial_sets", tuple(self.initial_sets))
        object.__setattr__(self, "unsafe_sets", tuple(self.unsafe_sets))
        n = self.dim
        if len(self.dynamics) != n:
            raise DimensionError(f"{self.name}: {len(self.dynamics)} dynamics rows for dim {n}")
        if self.state_space.dim != n:
            raise DimensionError(f"{self.name}: state space has dimension {self.state_space.dim}")
        for e in self.dynamics:
            if e.max_var() >= n:
                raise InvalidInputError(f"{self.name}: dynamics use x{e.max_var() + 1} with dim {n}")
        for Z in self.initial_sets + self.unsafe_sets:
            if Z.dim != n:
                raise DimensionError(f"{self.name}: set of dimension {Z.dim} in {n}-D system")
        if not self.initial_sets:
            raise InvalidInputError(f"{self.name}: at least one initial set is required")
        for Z in self.initial_sets:
            if not zono_interval_hull(Z).is_subset(self.state_space, tol=1e-12):
                raise InvalidInputError(f"{self.name}: initial set leaves the state space")
        for Z in self.unsafe_sets:
            if not zono_interval_hull(Z).is_subset(self.state_space, tol=1e-12):
                # Darboux's published unsafe zonotope overhangs X; enclosing more is sound
                LOG.debug("%s: unsafe set hull exceeds the state space", self.name)
        if self.A is None:
            rows = [affine_coefficients(e, n) for e in self.dynamics]
            if all(r is not None for r in rows):
                object.__setattr__(self, "A", np.array([r[0] for r in rows]))
                object.__setattr__(self, "b", np.array([r[1] for r in rows]))
        else:
            A = np.asarray(self.A, dtype=float)
            if A.shape != (n, n):
                raise DimensionError(f"{self.name}: A must be {n}x{n}")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", np.zeros(n) if self.b is None
                               else np.asarray(self.b, dtype=float))

    @property
    def is_linear(self) -> bool:
        return self.A is not None

    @property
    def default_subsplits(self) -> int:
        return 0 if self.is_linear else DEFAULT_NONLINEAR_SUBSPLITS

    def f(self, x) -> np.ndarray:
        """Vector field on points of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        return np.stack([e.eval(x) for e in self.dynamics], axis=-1)

    def f_range(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Interval enclosure of ``f`` over boxes of shape ``(..., n)``."""
        parts = [e.range(lo, hi) for e in self.dynamics]
        return (np.stack([p[0] for p in parts], axis=-1),
                np.stack([p[1] for p in parts], axis=-1))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "dynamics": [str(e) for e in self.dynamics],
            "state_space": self.state_space.to_list(),
            "initial_sets": [Z.to_dict() for Z in self.initial_sets],
            "unsafe_sets": [Z.to_dict() for Z in self.unsafe_sets],
        }


def bisect_widest(lo: np.ndarray, hi: np.ndarray, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Recursively bisect boxes ``(m, n)`` along their widest axis.

    Returns arrays of shape ``(m, 2**levels, n)``.  Ties go to the lowest index.
    """
    lo = np.asarray(lo, dtype=float)[:, None, :]
    hi = np.asarray(hi, dtype=float)[:, None, :]
    for _ in range(levels):
        d = np.argmax(hi - lo, axis=-1)  # argmax returns the first maximum
        onehot = np.arange(lo.shape[-1]) == d[..., None]
        mid = 0.5 * (lo + hi)
        lo_a, hi_a = lo, np.where(onehot, mid, hi)
        lo_b, hi_b = np.where(onehot, mid, lo), hi
        lo = np.concatenate([lo_a, lo_b], axis=1)
        hi = np.concatenate([hi_a, hi_b], axis=1)
    return lo, hi


def flow_box_batch(sys: SystemSpec, lo: np.ndarray, hi: np.ndarray,
                   subsplits: int) -> tuple[np.ndarray, np.ndarray]:
    """Interval enclosure of ``f`` over each box in a batch ``(m, n)``."""
    slo, shi = bisect_widest(lo, hi, subsplits)
    flo, fhi = sys.f_range(slo, shi)
    return flo.min(axis=1), fhi.max(axis=1)


def flow_enclose(sys: SystemSpec, Z: Zonotope, subsplits: int | None = None) -> Zonotope:
    """Zonotope enclosing ``f(Z)``.

    Affine dynamics map ``Z`` exactly.  Otherwise the interval hull of ``Z`` is
    bisected ``subsplits`` times along the widest axis, ``f`` is range-bounded
    on every piece, and the union of the ranges is returned as a box.
    """
    if Z.dim != sys.dim:
        raise DimensionError(f"zonotope has dimension {Z.dim}, system has {sys.dim}")
    if sys.is_linear:
        return zono_affine(sys.A, sys.b, Z)
    if subsplits is None:
        subsplits = sys.default_subsplits
    if subsplits < 0:
        raise InvalidInputError("subsplits must be >= 0")
    hull = zono_interval_hull(Z)
    flo, fhi = flow_box_batch(sys, hull.lo[None], hull.hi[None], subsplits)
    return zono_from_interval(IntervalVector(flo[0], fhi[0]))


# ------------------------------------------------------------ JSON format

def _set_from_json(d, n: int) -> Zonotope:
    if isinstance(d, dict) and "center" in d:
        c = np.asarray(d["center"], dtype=float)
        G = np.asarray(d.get("generators", []), dtype=float)
        if G.size == 0:
            G = np.zeros((c.shape[0], 0))
        if G.ndim == 1:
            G = G.reshape(c.shape[0], -1)
        return Zonotope(c, G)
    if isinstance(d, dict) and "box" in d:
        d = d["box"]
    box = IntervalVector.from_pairs(d)
    if box.dim != n:
        raise DimensionError(f"box of dimension {box.dim} in {n}-D system")
    return zono_from_interval(box)


def system_from_dict(doc: dict, name: str | None = None) -> SystemSpec:
    """Build a system from the JSON document layout.

    Sets are ``{"center": [...], "generators": [[...], ...]}`` objects, or boxes
    given as ``[[lo, hi], ...]`` (optionally wrapped as ``{"box": ...}``).
    """
    try:
        n = int(doc["dim"])
        dyn = [parse_expr(s, n) for s in doc["dynamics"]]
        X = IntervalVector.from_pairs(doc["state_space"])
        init = [_set_from_json(s, n) for s in doc["initial_sets"]]
        unsafe = [_set_from_json(s, n) for s in doc.get("unsafe_sets", [])]
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed system document: {exc}") from None
    return SystemSpec(name=name or doc.get("name", "custom"), dim=n, dynamics=dyn,
                      state_space=X, initial_sets=init, unsafe_sets=unsafe, source=doc)


def load_system(path: str | Path) -> SystemSpec:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        doc = json.load(fh)
    return system_from_dict(doc, name=doc.get("name", path.stem))


def box(lo: Sequence[float], hi: Sequence[float]) -> Zonotope:
    return zono_from_interval(IntervalVector(lo, hi))
