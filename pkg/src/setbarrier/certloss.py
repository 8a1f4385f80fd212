"""Set-based certificate losses.

Three hinge terms measure how far a network is from being a barrier
certificate: the output enclosure over each unsafe set must lie above
``eps``, the enclosure over each initial set must be non-positive, and the
Lie-derivative enclosure over each box of the zero-level cover must lie
below ``-eps``.  When all three vanish the network is a proven certificate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .dynsys.systems import SystemSpec
from .errors import DimensionError, InvalidInputError
from .neural.enclosure import abs_sum, forward_set, gradient_set, product_bounds
from .neural.network import DTYPE, Network
from .setcore import Interval, Zonotope
from .zeroset import ZeroCover, contract_boxes_t

DEFAULT_EPS = 1e-3


@dataclass(frozen=True)
class LossBreakdown:
    """Components of the certificate loss and the bounds behind them.

    ``zero_terms`` lists ``(box index, Lie upper bound, hinge value)`` per
    cover box; ``unsafe_bounds`` and ``init_bounds`` hold each set's output hull.
    """

    l_unsafe: float
    l_init: float
    l_zero: float
    epsilon: float
    zero_terms: list = field(default_factory=list, repr=False)
    unsafe_bounds: list = field(default_factory=list, repr=False)
    init_bounds: list = field(default_factory=list, repr=False)
    cover_size: int = 0

    def __post_init__(self):
        if min(self.l_unsafe, self.l_init, self.l_zero) < 0.0:
            raise InvalidInputError("loss components must be non-negative")

    @property
    def total(self) -> float:
        return self.l_unsafe + self.l_init + self.l_zero

    @property
    def verified(self) -> bool:
        return self.total == 0.0

    def summary(self) -> str:
        return (f"l_unsafe={self.l_unsafe:.6g} l_init={self.l_init:.6g} "
                f"l_zero={self.l_zero:.6g} total={self.total:.6g} "
                f"cover={self.cover_size} verified={self.verified}")

    def to_dict(self, with_terms: bool = False) -> dict:
        d = {"lU": self.l_unsafe, "lI": self.l_init, "l0": self.l_zero,
             "total": self.total, "epsilon": self.epsilon, "coverN": self.cover_size,
             "verified": self.verified,
             "unsafe_bounds": [list(b) for b in self.unsafe_bounds],
             "init_bounds": [list(b) for b in self.init_bounds]}
        if with_terms:
            d["zero_terms"] = [list(t) for t in self.zero_terms]
        return d


def _check_eps(eps: float) -> None:
    if not eps > 0.0:
        raise InvalidInputError(f"eps must be positive, got {eps}")


def stack_sets(sets: Sequence[Zonotope], n: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Centers ``(k, n)`` and zero-padded generators ``(k, n, q_max)``."""
    q = max((Z.n_generators for Z in sets), default=0)
    c = torch.zeros(len(sets), n, dtype=DTYPE)
    G = torch.zeros(len(sets), n, q, dtype=DTYPE)
    for i, Z in enumerate(sets):
        if Z.dim != n:
            raise DimensionError(f"set of dimension {Z.dim}, network expects {n}")
        c[i] = torch.tensor(Z.center, dtype=DTYPE)
        G[i, :, :Z.n_generators] = torch.tensor(Z.generators, dtype=DTYPE)
    return c, G


def output_bounds_t(params, c: torch.Tensor, G: torch.Tensor):
    """Lower and upper output hull bounds for a batch of input zonotopes."""
    yc, yG, _ = forward_set(params, c, G)
    r = abs_sum(yG)
    return yc - r, yc + r


def _flow_generators(sys: SystemSpec, c: torch.Tensor, G: torch.Tensor, subsplits: int):
    if sys.is_linear:
        A = torch.tensor(sys.A, dtype=DTYPE)
        b = torch.tensor(sys.b, dtype=DTYPE)
        return c @ A.T + b, torch.matmul(A, G)
    rad = abs_sum(G)
    flo, fhi = flow_box_t(sys, c - rad, c + rad, subsplits)
    return 0.5 * (flo + fhi), torch.diag_embed(0.5 * (fhi - flo))


def flow_box_t(sys: SystemSpec, lo: torch.Tensor, hi: torch.Tensor, subsplits: int):
    """Torch counterpart of :func:`flow_box_batch`, differentiable in the box bounds."""
    lo, hi = lo.unsqueeze(1), hi.unsqueeze(1)
    n = lo.shape[-1]
    for _ in range(subsplits):
        d = torch.argmax((hi - lo).detach(), dim=-1)  # first maximum, as in numpy
        onehot = torch.nn.functional.one_hot(d, n).bool()
        mid = 0.5 * (lo + hi)
        lo, hi = (torch.cat([lo, torch.where(onehot, mid, lo)], dim=1),
                  torch.cat([torch.where(onehot, mid, hi), hi], dim=1))
    parts = [e.range(lo, hi) for e in sys.dynamics]
    return (torch.stack([p[0].amin(dim=1) for p in parts], dim=-1),
            torch.stack([p[1].amax(dim=1) for p in parts], dim=-1))


def lie_bounds_t(params, sys: SystemSpec, c: torch.Tensor, G: torch.Tensor, subsplits: int):
    """Lower and upper bounds of the Lie derivative over each input zonotope."""
    _, _, pre = forward_set(params, c, G)
    gc, gG = gradient_set(params, pre, c.shape[0])
    fc, fG = _flow_generators(sys, c, G, subsplits)
    center, rad = product_bounds(gc, gG, fc, fG)
    return center - rad, center + rad


def cover_tensors(cover: ZeroCover) -> tuple[torch.Tensor, torch.Tensor]:
    lo = torch.tensor(cover.lo, dtype=DTYPE)
    hi = torch.tensor(cover.hi, dtype=DTYPE)
    return 0.5 * (lo + hi), torch.diag_embed(0.5 * (hi - lo))


@dataclass
class LossTensors:
    """Differentiable per-set hinge terms; reduce with :meth:`breakdown`."""

    unsafe_lo: torch.Tensor
    init_hi: torch.Tensor
    lie_hi: torch.Tensor
    eps: float

    @property
    def unsafe_terms(self):
        return torch.relu(-self.unsafe_lo + self.eps)

    @property
    def init_terms(self):
        return torch.relu(self.init_hi)

    @property
    def zero_terms(self):
        return torch.relu(self.lie_hi + self.eps)

    def total(self) -> torch.Tensor:
        return self.unsafe_terms.sum() + self.init_terms.sum() + self.zero_terms.sum()

    def breakdown(self, unsafe_hi=None, init_lo=None) -> LossBreakdown:
        with torch.no_grad():
            zt = self.zero_terms
            zero_terms = [(i, float(u), float(h)) for i, (u, h)
                          in enumerate(zip(self.lie_hi.tolist(), zt.tolist()))]
            ub = [] if unsafe_hi is None else list(zip(self.unsafe_lo.tolist(), unsafe_hi.tolist()))
            ib = [] if init_lo is None else list(zip(init_lo.tolist(), self.init_hi.tolist()))
            return LossBreakdown(float(self.unsafe_terms.sum()), float(self.init_terms.sum()),
                                 float(zt.sum()), self.eps, zero_terms, ub, ib,
                                 int(self.lie_hi.shape[0]))


def loss_tensors(params, sys: SystemSpec, cover: ZeroCover, eps: float, subsplits: int,
                 unsafe=None, init=None, contract: bool = True):
    """All hinge terms for ``params`` (which may require grad).

    ``unsafe``/``init`` take pre-stacked sets from :func:`stack_sets`.  With
    ``contract`` the cover boxes go through one more preimage contraction
    inside the autodiff graph, starting from the cover's parent boxes, so the
    zero-level boxes follow the parameters (the only route by which the output
    bias of an affine network receives a gradient from the Lie term).  The
    values match the detached cover; the gradient is one-sided, because the
    cover is tight around the current zero level by construction.  Returns the :class:`LossTensors` and the
    opposite hull bounds for reporting.
    """
    _check_eps(eps)
    n = sys.dim
    uc, uG = unsafe if unsafe is not None else stack_sets(sys.unsafe_sets, n)
    ic, iG = init if init is not None else stack_sets(sys.initial_sets, n)
    empty = torch.zeros(0, dtype=DTYPE)
    u_lo, u_hi = output_bounds_t(params, uc, uG) if uc.shape[0] else (empty, empty)
    i_lo, i_hi = output_bounds_t(params, ic, iG)
    lie_hi = empty
    if len(cover):
        if contract:
            src = (cover.lo, cover.hi) if cover.parent_lo is None else (cover.parent_lo, cover.parent_hi)
            _, lo, hi = contract_boxes_t(params, *src)
            cc, cG = 0.5 * (lo + hi), torch.diag_embed(0.5 * (hi - lo))
        else:
            cc, cG = cover_tensors(cover)
        if cc.shape[0]:
            _, lie_hi = lie_bounds_t(params, sys, cc, cG, subsplits)
    return LossTensors(u_lo, i_hi, lie_hi, eps), u_hi.detach(), i_lo.detach()


# ------------------------------------------------------------ numpy API

def _subsplits(sys: SystemSpec, subsplits: int | None) -> int:
    s = sys.default_subsplits if subsplits is None else int(subsplits)
    if s < 0:
        raise InvalidInputError("subsplits must be >= 0")
    return s


def loss_unsafe(net: Network, unsafe_sets: Sequence[Zonotope], eps: float = DEFAULT_EPS) -> float:
    """``sum max(0, -b_U + eps)`` over the lower output bounds ``b_U``."""
    _check_eps(eps)
    if not unsafe_sets:
        return 0.0
    with torch.no_grad():
        lo, _ = output_bounds_t(net.torch_params(), *stack_sets(unsafe_sets, net.input_dim))
    return float(torch.relu(-lo + eps).sum())


def loss_init(net: Network, initial_sets: Sequence[Zonotope]) -> float:
    """``sum max(0, b_I)`` over the upper output bounds ``b_I``."""
    if not initial_sets:
        return 0.0
    with torch.no_grad():
        _, hi = output_bounds_t(net.torch_params(), *stack_sets(initial_sets, net.input_dim))
    return float(torch.relu(hi).sum())


def lie_enclose(net: Network, sys: SystemSpec, Xi: Zonotope, subsplits: int | None = None) -> Interval:
    """Interval containing ``grad B(x) . f(x)`` for every ``x`` in ``Xi``."""
    if Xi.dim != sys.dim or sys.dim != net.input_dim:
        raise DimensionError(f"set dim {Xi.dim}, system dim {sys.dim}, network dim {net.input_dim}")
    with torch.no_grad():
        lo, hi = lie_bounds_t(net.torch_params(), sys, *stack_sets([Xi], sys.dim),
                              _subsplits(sys, subsplits))
    return Interval(float(lo[0]), float(hi[0]))


def loss_zero(net: Network, sys: SystemSpec, cover: ZeroCover, eps: float = DEFAULT_EPS,
              subsplits: int | None = None) -> float:
    """``sum max(0, b0_i + eps)`` over the Lie upper bounds of the cover boxes."""
    _check_eps(eps)
    if not len(cover):
        return 0.0
    with torch.no_grad():
        _, hi = lie_bounds_t(net.torch_params(), sys, *cover_tensors(cover),
                             _subsplits(sys, subsplits))
    return float(torch.relu(hi + eps).sum())


def total_loss(net: Network, sys: SystemSpec, cover: ZeroCover, eps: float = DEFAULT_EPS,
               subsplits: int | None = None, contract: bool = True) -> LossBreakdown:
    """All three terms; ``contract`` re-contracts the cover boxes first (see :func:`loss_tensors`)."""
    if net.input_dim != sys.dim:
        raise DimensionError(f"network expects {net.input_dim} inputs, system has dimension {sys.dim}")
    with torch.no_grad():
        lt, u_hi, i_lo = loss_tensors(net.torch_params(), sys, cover, eps, _subsplits(sys, subsplits),
                                      contract=contract)
        return lt.breakdown(u_hi, i_lo)
