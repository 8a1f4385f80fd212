"""Sound set propagation through tanh networks.

The kernels operate on torch tensors batched over sets so the same code
serves the differentiable training losses and the plain numpy-facing API.
Shapes: centers ``(B, n)``, generator stacks ``(B, n, q)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import ContractViolation, DimensionError
from ..setcore import Interval, IntervalVector, Zonotope
from .network import DTYPE, Network

# below this width the secant slope is replaced by the midpoint derivative
_SECANT_MIN_WIDTH = 1e-9
# keeps sqrt/atanh away from their singular points so gradients stay finite
_SQRT_FLOOR = 1e-24
_ATANH_CEIL = 1.0 - 2.0 ** -52


def act_enclose_t(l: torch.Tensor, u: torch.Tensor):
    """Secant slope ``lam`` with offset ``mu`` and radius ``delta`` so that
    ``|tanh(x) - lam*x - mu| <= delta`` on ``[l, u]`` (elementwise)."""
    w = u - l
    wide = w > _SECANT_MIN_WIDTH
    tl, tu = torch.tanh(l), torch.tanh(u)
    tm = torch.tanh(0.5 * (l + u))
    lam = torch.where(wide, (tu - tl) / torch.where(wide, w, torch.ones_like(w)), 1.0 - tm * tm)
    # tanh(x) - lam*x is stationary where tanh(x)^2 = 1 - lam
    s = torch.sqrt(torch.clamp(1.0 - lam, min=_SQRT_FLOOR)).clamp(max=_ATANH_CEIL)
    xs = torch.atanh(s)
    cand = torch.stack([l, u,
                        torch.minimum(torch.maximum(xs, l), u),
                        torch.minimum(torch.maximum(-xs, l), u)])
    h = torch.tanh(cand) - lam * cand
    hmax, hmin = h.max(dim=0).values, h.min(dim=0).values
    return lam, 0.5 * (hmax + hmin), 0.5 * (hmax - hmin)


def act_deriv_bounds_t(l: torch.Tensor, u: torch.Tensor):
    """Exact range ``[lo, hi]`` of ``1 - tanh(x)^2`` over ``[l, u]``."""
    near = torch.minimum(torch.maximum(torch.zeros_like(l), l), u)
    far = torch.maximum(l.abs(), u.abs())
    tn, tf = torch.tanh(near), torch.tanh(far)
    return 1.0 - tf * tf, 1.0 - tn * tn


def abs_sum(G: torch.Tensor) -> torch.Tensor:
    return G.abs().sum(dim=-1)


def forward_set(params, c: torch.Tensor, G: torch.Tensor, record: list | None = None):
    """Propagate a batch of zonotopes through the network.

    Linear layers are exact.  Each tanh layer maps ``H -> diag(lam) H + mu`` and
    appends ``diag(delta)``, so the leading generator columns stay aligned with
    the input generators.  Returns the output centers ``(B,)``, output
    generators ``(B, q)`` and the per-tanh-layer pre-activation bounds.
    """
    pre = []
    last = len(params) - 1
    for k, (W, b) in enumerate(params):
        c = c @ W.T + b
        G = torch.matmul(W, G)
        if record is not None:
            record.append(("linear", c, G, None))
        if k < last:
            rad = abs_sum(G)
            l, u = c - rad, c + rad
            lam, mu, delta = act_enclose_t(l, u)
            pre.append((l, u))
            c = lam * c + mu
            G = torch.cat([lam.unsqueeze(-1) * G, torch.diag_embed(delta)], dim=-1)
            if record is not None:
                record.append(("tanh", c, G, (l, u, lam, mu, delta)))
    return c[..., 0], G[..., 0, :], pre


def gradient_set(params, pre, batch: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Enclose ``{grad_x B(x)}`` by backward propagation of zonotopes.

    Linear layers apply ``W^T``.  A tanh layer multiplies coordinate i by the
    derivative range ``<m_i, r_i>``: the ``m_i`` part scales the existing
    generators, the ``r_i`` part (product with an independent factor) becomes
    one fresh generator of size ``r_i (|c_i| + sum_j |G_ij|)`` per coordinate.
    """
    if len(pre) != len(params) - 1:
        raise ContractViolation("pre-activation bounds do not match the network depth")
    W_last = params[-1][0]
    gc = W_last[0].expand(batch, -1)
    gG = torch.zeros(batch, W_last.shape[1], 0, dtype=gc.dtype)
    for k in range(len(params) - 1, 0, -1):
        l, u = pre[k - 1]
        dlo, dhi = act_deriv_bounds_t(l, u)
        m, r = 0.5 * (dhi + dlo), 0.5 * (dhi - dlo)
        extra = r * (gc.abs() + abs_sum(gG))
        gG = torch.cat([m.unsqueeze(-1) * gG, torch.diag_embed(extra)], dim=-1)
        gc = m * gc
        W = params[k - 1][0]
        gc = gc @ W
        gG = torch.matmul(W.T, gG)
    return gc, gG


def product_bounds(c1, G1, c2, G2) -> tuple[torch.Tensor, torch.Tensor]:
    """Center and radius of the inner-product enclosure, batched.

    Same set as :func:`setcore.zono_product`, reduced directly to its hull.
    """
    center = (c1 * c2).sum(dim=-1)
    rad = abs_sum(torch.einsum("bn,bnq->bq", c1, G2))
    rad = rad + abs_sum(torch.einsum("bnq,bn->bq", G1, c2))
    rad = rad + torch.matmul(G1.transpose(-1, -2), G2).abs().sum(dim=(-1, -2))
    return center, rad


# ------------------------------------------------------------ numpy API

# gradient enclosures are plain zonotopes over the input space
GradientSet = Zonotope

def _as_t(a) -> torch.Tensor:
    return torch.tensor(np.asarray(a, dtype=float), dtype=DTYPE)


def act_enclose(pre_act: Interval) -> tuple[float, float, float]:
    with torch.no_grad():
        lam, mu, delta = act_enclose_t(_as_t([pre_act.lo]), _as_t([pre_act.hi]))
    return float(lam[0]), float(mu[0]), float(delta[0])


def act_deriv_bounds(pre_act: Interval) -> Interval:
    with torch.no_grad():
        lo, hi = act_deriv_bounds_t(_as_t([pre_act.lo]), _as_t([pre_act.hi]))
    return Interval(float(lo[0]), float(hi[0]))


@dataclass(frozen=True)
class SetTrace:
    """Intermediate sets of one forward propagation.

    ``hidden[0]`` is the input set; ``hidden[k]`` follows layer k.  For every
    tanh layer ``pre_activation`` holds the interval hull that was enclosed
    and ``coefficients`` the ``(lam, mu, delta)`` arrays.
    """

    hidden: list[Zonotope]
    pre_activation: list[IntervalVector]
    coefficients: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    q0: int
    network_digest: str
    _pre_t: list = field(repr=False, default_factory=list)


def nn_forward_set(net: Network, X: Zonotope) -> tuple[Zonotope, SetTrace]:
    """Output enclosure ``Y`` (1-D, raw columns) and the propagation trace."""
    if X.dim != net.input_dim:
        raise DimensionError(f"input set has dimension {X.dim}, network expects {net.input_dim}")
    record: list = []
    with torch.no_grad():
        c, G, pre = forward_set(net.torch_params(), _as_t(X.center)[None],
                                _as_t(X.generators)[None], record)
    hidden = [Zonotope.raw(X.center, X.generators)]
    pre_iv, coeffs = [], []
    for kind, hc, hG, extra in record:
        hidden.append(Zonotope.raw(hc[0].numpy(), hG[0].numpy()))
        if kind == "tanh":
            l, u, lam, mu, delta = (t[0].numpy() for t in extra)
            pre_iv.append(IntervalVector(l, u))
            coeffs.append((lam, mu, delta))
    Y = Zonotope.raw(c.numpy(), G.numpy())
    trace = SetTrace(hidden, pre_iv, coeffs, X.n_generators, net.digest(), pre)
    return Y, trace


def nn_gradset(net: Network, trace: SetTrace) -> GradientSet:
    """Zonotope enclosing the input gradients over the traced input set."""
    if trace.network_digest != net.digest():
        raise ContractViolation("trace was computed for different network parameters")
    with torch.no_grad():
        gc, gG = gradient_set(net.torch_params(), trace._pre_t, 1)
    return Zonotope.raw(gc[0].numpy(), gG[0].numpy())
