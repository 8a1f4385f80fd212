"""Box covers of a network's zero-level set.

Starting from the state space, every box is propagated through the network;
the output enclosure induces a band constraint on the box's factors that any
zero of the network must satisfy.  Boxes whose constraint is infeasible are
discarded, the rest are contracted to the constraint, re-boxed and split.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import InvalidInputError, ResourceLimitError
from .neural.enclosure import abs_sum, forward_set, nn_forward_set
from .neural.network import DTYPE, Network
from .setcore import (FactorConstraint, IntervalVector, Zonotope, _contract_sweeps,
                      abs_row_sum, zono_from_interval)

DEFAULT_BOX_CAP = 2 ** 16
# relative outward slack on the band, absorbs rounding in the propagation
DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class ZeroParams:
    """Iterations, splits per dimension and number of split dimensions (None = all)."""

    iterations: int
    splits: int
    split_dims: int | None = None

    def __post_init__(self):
        if self.iterations < 1 or self.splits < 1:
            raise InvalidInputError("iterations and splits must be >= 1")
        if self.split_dims is not None and self.split_dims < 1:
            raise InvalidInputError("split_dims must be >= 1 or 'n'")

    @classmethod
    def parse(cls, text: str) -> "ZeroParams":
        """Parse the ``iota-s-sdim`` notation, e.g. ``"1-8-n"`` or ``"2,4,2"``."""
        parts = re.split(r"[-,]", str(text).strip())
        if len(parts) != 3:
            raise InvalidInputError(f"zero-set parameters must look like '2-8-n', got {text!r}")
        try:
            it, s = int(parts[0]), int(parts[1])
            sd = None if parts[2].strip().lower() == "n" else int(parts[2])
        except ValueError:
            raise InvalidInputError(f"cannot parse zero-set parameters {text!r}") from None
        return cls(it, s, sd)

    def refined(self, extra_iterations: int) -> "ZeroParams":
        return ZeroParams(self.iterations + extra_iterations, self.splits, self.split_dims)

    def dims_for(self, n: int) -> int:
        return n if self.split_dims is None else min(self.split_dims, n)

    def __str__(self) -> str:
        sd = "n" if self.split_dims is None else str(self.split_dims)
        return f"{self.iterations}-{self.splits}-{sd}"


@dataclass(frozen=True)
class ZeroCover:
    """Union of boxes ``[lo[i], hi[i]]`` enclosing the zero-level set.

    ``parent_lo``/``parent_hi`` hold, row for row, the boxes that the final
    contraction started from.  Re-contracting those inside an autodiff graph
    reproduces ``lo``/``hi`` while staying differentiable; re-contracting the
    tight boxes themselves would sit on a kink of the clipping.
    """

    lo: np.ndarray
    hi: np.ndarray
    iterations_used: int
    discarded_count: int
    parent_lo: np.ndarray | None = field(default=None, repr=False, compare=False)
    parent_hi: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return self.lo.shape[0]

    @property
    def boxes(self) -> list[Zonotope]:
        return [zono_from_interval(IntervalVector(a, b)) for a, b in zip(self.lo, self.hi)]

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo, axis=1).sum())

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        """Whether each point in ``x`` (shape ``(m, n)``) lies in some box."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.zeros(x.shape[0], dtype=bool)
        for a, b in zip(self.lo, self.hi):
            inside |= np.all((x >= a - tol) & (x <= b + tol), axis=1)
        return inside

    @classmethod
    def empty(cls, n: int, iterations_used: int = 0, discarded: int = 0) -> "ZeroCover":
        return cls(np.zeros((0, n)), np.zeros((0, n)), iterations_used, discarded)


def preimage_constrain(net: Network, Xi: Zonotope) -> FactorConstraint:
    """Band constraint on the factors of ``Xi`` met by every zero of the network in ``Xi``.

    With output enclosure ``<c, [g, G_rest]>`` (``g`` the columns inherited from
    ``Xi``), a zero needs ``g . beta`` within ``[-c - r, -c + r]`` where
    ``r = sum |G_rest|``.
    """
    Y, _ = nn_forward_set(net, Xi)
    q0 = Xi.n_generators
    g = Y.generators[0, :q0]
    r = float(abs_row_sum(Y.generators[0, q0:]))
    c = float(Y.center[0])
    return FactorConstraint(g, -c - r, -c + r)


def _constrain_and_contract(params, lo: np.ndarray, hi: np.ndarray, tol: float):
    """Prune and tighten a batch of boxes; returns (keep mask, new lo, new hi)."""
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    n = lo.shape[1]
    with torch.no_grad():
        yc, yG, _ = forward_set(params, torch.from_numpy(c),
                                torch.diag_embed(torch.from_numpy(r)))
    yc, yG = yc.numpy(), yG.numpy()
    g = yG[:, :n]
    rest = abs_row_sum(yG[:, n:])
    reach = abs_row_sum(g)
    slack = tol * (1.0 + np.abs(yc) + rest + reach)
    band_lo = -yc - rest - slack
    band_hi = -yc + rest + slack
    keep = (band_lo <= reach) & (band_hi >= -reach)
    beta_lo, beta_hi, empty = _contract_sweeps(g, band_lo, band_hi,
                                               -np.ones_like(g), np.ones_like(g))
    keep &= ~empty
    new_lo = np.clip(c + r * beta_lo, lo, hi)
    new_hi = np.clip(c + r * beta_hi, lo, hi)
    return keep, new_lo, new_hi


def _contract_sweeps_t(g, band_lo, band_hi, sweeps: int = 2):
    """Torch twin of the factor contraction on ``[-1, 1]^q``, differentiable in ``g`` and the band."""
    q = g.shape[-1]
    lo = [torch.full_like(band_lo, -1.0) for _ in range(q)]
    hi = [torch.full_like(band_lo, 1.0) for _ in range(q)]
    empty = torch.zeros_like(band_lo, dtype=torch.bool)
    for _ in range(sweeps):
        for j in range(q):
            rest_lo = torch.zeros_like(band_lo)
            rest_hi = torch.zeros_like(band_lo)
            for k in range(q):
                if k == j:
                    continue
                a, b = g[:, k] * lo[k], g[:, k] * hi[k]
                rest_lo = rest_lo + torch.minimum(a, b)
                rest_hi = rest_hi + torch.maximum(a, b)
            gj = g[:, j]
            nz = gj != 0.0
            safe = torch.where(nz, gj, torch.ones_like(gj))
            q1 = (band_lo - rest_hi) / safe
            q2 = (band_hi - rest_lo) / safe
            lo[j] = torch.where(nz, torch.maximum(lo[j], torch.minimum(q1, q2)), lo[j])
            hi[j] = torch.where(nz, torch.minimum(hi[j], torch.maximum(q1, q2)), hi[j])
            empty = empty | (lo[j] > hi[j]).detach()
    return torch.stack(lo, dim=-1), torch.stack(hi, dim=-1), empty


def contract_boxes_t(params, lo: np.ndarray, hi: np.ndarray, tol: float = DEFAULT_TOL):
    """One prune-and-contract pass whose output boxes depend differentiably on ``params``.

    Returns a boolean keep mask and the contracted ``(lo, hi)`` tensors of the
    kept boxes.  Every zero of the network inside a kept input box lies in its
    contracted box, and dropped boxes contain no zeros.
    """
    lo_t = torch.tensor(lo, dtype=DTYPE)
    hi_t = torch.tensor(hi, dtype=DTYPE)
    c = 0.5 * (lo_t + hi_t)
    r = 0.5 * (hi_t - lo_t)
    n = lo_t.shape[1]
    yc, yG, _ = forward_set(params, c, torch.diag_embed(r))
    g = yG[:, :n]
    rest = abs_sum(yG[:, n:])
    reach = abs_sum(g)
    slack = tol * (1.0 + yc.abs() + rest + reach).detach()
    band_lo = -yc - rest - slack
    band_hi = -yc + rest + slack
    b_lo, b_hi, empty = _contract_sweeps_t(g, band_lo, band_hi)
    keep = ((band_lo <= reach) & (band_hi >= -reach)).detach() & ~empty
    new_lo = torch.minimum(torch.maximum(c + r * b_lo, lo_t), hi_t)
    new_hi = torch.maximum(torch.minimum(c + r * b_hi, hi_t), lo_t)
    return keep.numpy(), new_lo[keep], new_hi[keep]


def _split_along(lo, hi, order, dim_idx, s):
    """Split every box into ``s`` equal parts along axis ``order[:, dim_idx]``."""
    m = lo.shape[0]
    rows = np.arange(m)
    d = order[:, dim_idx]
    base = lo[rows, d]
    top = hi[rows, d]
    w = top - base
    lo_r = np.repeat(lo, s, axis=0)
    hi_r = np.repeat(hi, s, axis=0)
    order_r = np.repeat(order, s, axis=0)
    d_r = np.repeat(d, s)
    p = np.tile(np.arange(s), m)
    base_r, w_r, top_r = np.repeat(base, s), np.repeat(w, s), np.repeat(top, s)
    rr = np.arange(m * s)
    lo_r[rr, d_r] = base_r + w_r * p / s
    hi_r[rr, d_r] = np.where(p == s - 1, top_r, base_r + w_r * (p + 1) / s)
    keep = np.repeat(w > 0.0, s) | (p == 0)
    return lo_r[keep], hi_r[keep], order_r[keep]


def split_boxes(lo: np.ndarray, hi: np.ndarray, splits: int, ndims: int):
    """Split each box ``splits`` ways along each of its ``ndims`` widest axes.

    Axes of zero width are not split.  Ties in width go to the lowest index.
    """
    if splits == 1 or lo.shape[0] == 0:
        return lo.copy(), hi.copy()
    order = np.argsort(-(hi - lo), axis=1, kind="stable")
    for t in range(ndims):
        lo, hi, order = _split_along(lo, hi, order, t, splits)
    return lo, hi


def _child_count(lo, hi, splits, ndims) -> int:
    w = -np.sort(-(hi - lo), axis=1)[:, :ndims]
    return int(np.sum(float(splits) ** np.sum(w > 0.0, axis=1)))


def _canonical_index(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    centers = 0.5 * (lo + hi)
    return np.lexsort(centers[:, ::-1].T) if len(centers) else np.zeros(0, dtype=int)


def canonical_order(lo: np.ndarray, hi: np.ndarray):
    """Sort boxes lexicographically by centre (first coordinate most significant)."""
    idx = _canonical_index(lo, hi)
    return lo[idx], hi[idx]


def enclose_zero_set(net: Network, X: IntervalVector, p: ZeroParams,
                     cap: int = DEFAULT_BOX_CAP, tol: float = DEFAULT_TOL) -> ZeroCover:
    """Cover ``{x in X | B(x) = 0}`` by boxes.

    Each of ``p.iterations`` rounds prunes infeasible boxes, contracts the
    survivors to their preimage constraint and splits them.  A final pass
    prunes and contracts the last children.  Raises
    :class:`ResourceLimitError` if a round would exceed ``cap`` boxes.
    """
    if X.dim != net.input_dim:
        raise InvalidInputError(f"state space has dimension {X.dim}, network expects {net.input_dim}")
    params = net.torch_params()
    n = X.dim
    ndims = p.dims_for(n)
    lo, hi = X.lo[None].copy(), X.hi[None].copy()
    discarded = 0
    used = 0
    for _ in range(p.iterations):
        keep, lo, hi = _constrain_and_contract(params, lo, hi, tol)
        discarded += int(np.sum(~keep))
        lo, hi = lo[keep], hi[keep]
        used += 1
        if lo.shape[0] == 0:
            return ZeroCover.empty(n, used, discarded)
        count = _child_count(lo, hi, p.splits, ndims)
        if count > cap:
            raise ResourceLimitError(
                f"zero-set enclosure would create {count} boxes (cap {cap}) at iteration {used} "
                f"with iota={p.iterations}, s={p.splits}, s_dim={p.split_dims or 'n'}")
        lo, hi = split_boxes(lo, hi, p.splits, ndims)
    parent_lo, parent_hi = lo, hi
    keep, lo, hi = _constrain_and_contract(params, lo, hi, tol)
    discarded += int(np.sum(~keep))
    lo, hi = lo[keep], hi[keep]
    idx = _canonical_index(lo, hi)
    return ZeroCover(lo[idx], hi[idx], used, discarded, parent_lo[keep][idx], parent_hi[keep][idx])


def iter_zero_cover(net: Network, X: IntervalVector, p: ZeroParams,
                    chunk: int = DEFAULT_BOX_CAP, tol: float = DEFAULT_TOL):
    """Yield the cover of :func:`enclose_zero_set` in pieces of at most ``chunk`` boxes.

    Rounds run depth first over groups of parents whose children fit in
    ``chunk``, so memory stays bounded however large the full cover is.  The
    union of the pieces is the same set of boxes; only the order differs.
    Raises :class:`ResourceLimitError` only if the children of a single box
    exceed ``chunk``.
    """
    if X.dim != net.input_dim:
        raise InvalidInputError(f"state space has dimension {X.dim}, network expects {net.input_dim}")
    if chunk < 1:
        raise InvalidInputError("chunk must be positive")
    params = net.torch_params()
    ndims = p.dims_for(net.input_dim)

    def rounds(lo, hi, done):
        keep, clo, chi = _constrain_and_contract(params, lo, hi, tol)
        if done == p.iterations:
            if keep.any():
                idx = _canonical_index(clo[keep], chi[keep])
                yield ZeroCover(clo[keep][idx], chi[keep][idx], done, int(np.sum(~keep)),
                                lo[keep][idx], hi[keep][idx])
            return
        lo, hi = clo[keep], chi[keep]
        w = -np.sort(-(hi - lo), axis=1)[:, :ndims]
        counts = float(p.splits) ** np.sum(w > 0.0, axis=1)
        if counts.size and counts.max() > chunk:
            raise ResourceLimitError(
                f"one box splits into {int(counts.max())} children (chunk {chunk}) "
                f"with iota={p.iterations}, s={p.splits}, s_dim={p.split_dims or 'n'}")
        start = 0
        while start < len(lo):
            stop = start + max(1, int(np.searchsorted(np.cumsum(counts[start:]), chunk, side="right")))
            yield from rounds(*split_boxes(lo[start:stop], hi[start:stop], p.splits, ndims), done + 1)
            start = stop

    yield from rounds(X.lo[None].copy(), X.hi[None].copy(), 0)
