"""Set-based training of neural barrier certificates.

``train`` runs the do-while loop: enclose the zero-level set of the current
network, evaluate the three set-based losses, stop once they are exactly
zero, otherwise take one Adam step on their sum.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from scipy.optimize import linprog
from scipy.stats import qmc

from .certloss import DEFAULT_EPS, LossBreakdown, LossTensors, loss_tensors, stack_sets
from .dynsys.benchmarks import benchmark
from .dynsys.systems import SystemSpec
from .errors import InvalidInputError, ResourceLimitError, SafetyViolation
from .neural.autodiff import param_grad
from .neural.network import DTYPE, RNG_ALGORITHM, Network, nn_init, resolve_arch
from .setcore import Zonotope, zono_interval_hull
from .zeroset import DEFAULT_BOX_CAP, ZeroCover, ZeroParams, enclose_zero_set, iter_zero_cover

# Cap for post-training checks at iota + 1: one extra round multiplies the cover
# by up to s^s_dim (4096 for the 1-8-n preset in four dimensions).
REFINE_BOX_CAP = 1 << 22
# Pieces larger than this buy little speed and cost gigabytes for deeper nets.
STREAM_CHUNK = 1 << 18

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one training run.

    ``arch`` is a preset (``"N1"``, ``"N2"``, ``"N3"``), a comma list of
    hidden widths, or a width list.  ``lie_subsplits=None`` takes the
    system's default.  ``pretrain_radius`` scales the radius of the radial
    pretraining target.  ``contract_grad`` re-contracts the cover inside
    the autodiff graph; ``None`` enables it for affine networks only.
    """

    arch: object = "N2"
    eta: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    eps: float = DEFAULT_EPS
    zero: ZeroParams = ZeroParams(2, 8, None)
    lie_subsplits: int | None = None
    pretrain_epochs: int = 10
    pretrain_samples: int = 256
    pretrain_batch: int = 16
    pretrain_radius: float = 1.0
    contract_grad: bool | None = None
    max_epochs: int = 10000
    seed: int = 0
    box_cap: int = DEFAULT_BOX_CAP

    def __post_init__(self):
        if isinstance(self.zero, str):
            object.__setattr__(self, "zero", ZeroParams.parse(self.zero))
        if isinstance(self.arch, (list, tuple)):
            object.__setattr__(self, "arch", tuple(int(w) for w in self.arch))
        if not self.eta > 0.0:
            raise InvalidInputError(f"learning rate must be positive, got {self.eta}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise InvalidInputError("Adam momenta must lie in [0, 1)")
        if not self.eps > 0.0 or not self.adam_eps > 0.0:
            raise InvalidInputError("eps and adam_eps must be positive")
        if self.max_epochs < 1:
            raise InvalidInputError("max_epochs must be >= 1")
        if self.pretrain_epochs < 0 or self.pretrain_samples < 1 or self.pretrain_batch < 1:
            raise InvalidInputError("pretraining sizes must be positive")
        if not self.pretrain_radius > 0.0:
            raise InvalidInputError("pretrain_radius must be positive")
        if self.lie_subsplits is not None and self.lie_subsplits < 0:
            raise InvalidInputError("lie_subsplits must be >= 0")

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["zero"] = str(self.zero)
        d["arch"] = self.arch if isinstance(self.arch, str) else list(self.arch)
        return d


# benchmark: (hidden widths, eta, beta1, zero-set parameters)
BENCHMARK_PRESETS = {
    "three-sets": ((), 0.1, 0.3, "1-3-n"),
    "two-barriers": ((10,), 0.1, 0.3, "2-4-n"),
    "peruffo-4d": ((), 0.1, 0.9, "1-8-n"),
    "peruffo-6d": ((), 0.1, 0.3, "2-4-2"),
    "peruffo-8d": ((), 0.1, 0.3, "2-4-2"),
    "darboux": ((8,), 0.1, 0.3, "2-9-n"),
    "polynomial": ((8,), 0.01, 0.3, "2-8-n"),
    "lyapunov": ((8,), 0.1, 0.9, "1-32-n"),
    "exponential": ((5, 5), 0.001, 0.3, "2-10-n"),
    "ratschan-3d": ((), 0.1, 0.3, "1-3-n"),
    "ratschan-5d": ((), 0.1, 0.3, "2-2-n"),
    "ratschan-7d": ((), 0.1, 0.3, "2-2-2"),
    "ratschan-9d": ((), 0.1, 0.3, "2-4-2"),
}


def preset_config(name: str, **overrides) -> TrainConfig:
    """Published per-benchmark configuration, keyed by system name.

    Unknown names fall back to the :class:`TrainConfig` defaults.
    """
    row = BENCHMARK_PRESETS.get(name.lower())
    base = TrainConfig() if row is None else TrainConfig(
        arch=row[0], eta=row[1], beta1=row[2], zero=ZeroParams.parse(row[3]))
    return base.with_(**overrides)


# ------------------------------------------------------------ optimiser

@dataclass(frozen=True)
class AdamState:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def start(cls, theta) -> "AdamState":
        theta = np.array(theta, dtype=float)
        return cls(theta, np.zeros_like(theta), np.zeros_like(theta), 0)


def adam_step(state: AdamState, grad, eta: float, beta1: float, beta2: float = 0.999,
              adam_eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update; returns the new state (``.theta`` holds the parameters)."""
    g = np.asarray(grad, dtype=float)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    theta = state.theta - eta * m_hat / (np.sqrt(v_hat) + adam_eps)
    return AdamState(theta, m, v, t)


# ------------------------------------------------------------ pretraining

def _raw_radial(sys: SystemSpec, x: np.ndarray, scale: float = 1.0) -> np.ndarray:
    out = None
    for Z in sys.initial_sets:
        hull = zono_interval_hull(Z)
        rho2 = scale ** 2 * float(np.sum(hull.radius ** 2)) or 1.0
        t = np.sum((x - hull.center) ** 2, axis=-1) / rho2 - 1.0
        out = t if out is None else np.minimum(out, t)
    return out


def radial_target(sys: SystemSpec, x, normalize: bool = True, scale: float = 1.0) -> np.ndarray:
    """``min_I ||x - c_I||^2 / rho_I^2 - 1``, negative inside every initial set's hull.

    ``rho_I`` is the Euclidean length of the hull radius.  With ``normalize``
    the target is divided by its largest value over the corners of the state
    space (at least 1), which keeps the sign pattern but bounds the
    regression targets by 1.
    """
    x = np.asarray(x, dtype=float)
    t = _raw_radial(sys, x, scale)
    if normalize:
        X = sys.state_space
        corners = np.stack(np.meshgrid(*zip(X.lo, X.hi), indexing="ij"), axis=-1).reshape(-1, sys.dim)
        t = t / max(1.0, float(_raw_radial(sys, corners, scale).max()))
    return t


def pretrain(net: Network, sys: SystemSpec, cfg: TrainConfig) -> Network:
    """Regress the network onto :func:`radial_target` with minibatch Adam."""
    if cfg.pretrain_epochs == 0:
        return net
    X = sys.state_space
    sampler = qmc.Sobol(d=sys.dim, scramble=True, seed=cfg.seed)
    state = AdamState.start(net.theta)
    for _ in range(cfg.pretrain_epochs):
        pts = X.lo + sampler.random(cfg.pretrain_samples) * (X.hi - X.lo)
        target = radial_target(sys, pts, scale=cfg.pretrain_radius)
        for i in range(0, len(pts), cfg.pretrain_batch):
            xb = torch.tensor(pts[i:i + cfg.pretrain_batch], dtype=DTYPE)
            tb = torch.tensor(target[i:i + cfg.pretrain_batch], dtype=DTYPE)

            def mse(params, xb=xb, tb=tb):
                h = xb
                for k, (W, b) in enumerate(params):
                    h = h @ W.T + b
                    if k < len(params) - 1:
                        h = torch.tanh(h)
                return ((h[:, 0] - tb) ** 2).mean()

            _, grad = param_grad(net, mse)
            state = adam_step(state, grad, cfg.eta, cfg.beta1, cfg.beta2, cfg.adam_eps)
            net = net.with_theta(state.theta)
    return net


# ------------------------------------------------------------ reports

@dataclass
class RunReport:
    benchmark: str
    config: dict
    epochs_run: int
    wall_time_s: float
    pretrain_time_s: float
    verified: bool
    loss_trace: list = field(default_factory=list)
    cover_sizes: list = field(default_factory=list)
    rng_algorithm: str = RNG_ALGORITHM
    final: dict = field(default_factory=dict)
    network_digest: str = ""

    @property
    def train_time_s(self) -> float:
        return self.wall_time_s - self.pretrain_time_s

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train_time_s"] = self.train_time_s
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


def _trace_row(epoch: int, bd: LossBreakdown) -> dict:
    return {"epoch": epoch, "lU": bd.l_unsafe, "lI": bd.l_init, "l0": bd.l_zero,
            "total": bd.total, "coverN": bd.cover_size}


def _subsplits(sys: SystemSpec, cfg: TrainConfig) -> int:
    return sys.default_subsplits if cfg.lie_subsplits is None else cfg.lie_subsplits


def _cover(net: Network, sys: SystemSpec, zero: ZeroParams, cfg: TrainConfig) -> ZeroCover:
    try:
        return enclose_zero_set(net, sys.state_space, zero, cap=cfg.box_cap)
    except ResourceLimitError as exc:
        raise ResourceLimitError(f"{sys.name} (seed {cfg.seed}): {exc}") from None


def evaluate(net: Network, sys: SystemSpec, cfg: TrainConfig, zero: ZeroParams | None = None,
             cover: ZeroCover | None = None) -> LossBreakdown:
    """Certificate loss of ``net`` with the configured (or given) zero-set parameters."""
    if cover is None:
        cover = _cover(net, sys, zero or cfg.zero, cfg)
    with torch.no_grad():
        lt, u_hi, i_lo = loss_tensors(net.torch_params(), sys, cover, cfg.eps, _subsplits(sys, cfg),
                                       contract=_contract_grad(net, cfg))
        return lt.breakdown(u_hi, i_lo)


def _contract_grad(net: Network, cfg: TrainConfig) -> bool:
    # Affine networks need it: otherwise the output bias gets no Lie-term gradient.
    # With hidden layers it mostly teaches the net to shrink the cover by going positive.
    if cfg.contract_grad is not None:
        return bool(cfg.contract_grad)
    return len(net.weights) == 1


def train(sys: SystemSpec, cfg: TrainConfig, net: Network | None = None,
          callback=None) -> tuple[Network, RunReport]:
    """Train a certificate for ``sys``; ``net`` skips initialisation and pretraining.

    ``callback(epoch, breakdown)`` is called after every loss evaluation.
    """
    t0 = time.perf_counter()
    if net is None:
        net = nn_init(resolve_arch(cfg.arch, sys.dim), cfg.seed)
        net = pretrain(net, sys, cfg)
    elif net.input_dim != sys.dim:
        raise InvalidInputError(f"network expects {net.input_dim} inputs, system has dimension {sys.dim}")
    t_pre = time.perf_counter() - t0
    subsplits = _subsplits(sys, cfg)
    contract = _contract_grad(net, cfg)
    unsafe = stack_sets(sys.unsafe_sets, sys.dim)
    init = stack_sets(sys.initial_sets, sys.dim)
    state = AdamState.start(net.theta)
    trace, sizes = [], []
    verified = False
    bd = None
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        cover = _cover(net, sys, cfg.zero, cfg)
        held: list[LossTensors] = []

        def objective(params, cover=cover):
            lt, u_hi, i_lo = loss_tensors(params, sys, cover, cfg.eps, subsplits, unsafe, init,
                                         contract=contract)
            held.append((lt, u_hi, i_lo))
            return lt.total()

        _, grad = param_grad(net, objective)
        lt, u_hi, i_lo = held[0]
        bd = lt.breakdown(u_hi, i_lo)
        trace.append(_trace_row(epoch, bd))
        sizes.append(len(cover))
        if callback is not None:
            callback(epoch, bd)
        if bd.verified:
            verified = True
            break
        state = adam_step(state, grad, cfg.eta, cfg.beta1, cfg.beta2, cfg.adam_eps)
        net = net.with_theta(state.theta)
    wall = time.perf_counter() - t0
    report = RunReport(sys.name, cfg.to_dict(), epoch, wall, t_pre, verified, trace, sizes,
                       final=bd.to_dict() if bd else {}, network_digest=net.digest())
    LOG.info("%s seed %d: verified=%s after %d epochs (%.2fs)", sys.name, cfg.seed,
             verified, epoch, wall)
    return net, report


def verify(net: Network, sys: SystemSpec, cfg: TrainConfig, refine: int = 0) -> RunReport:
    """Evaluate the certificate loss once, with ``refine`` extra zero-set iterations.

    A cover larger than ``cfg.box_cap`` is streamed in pieces instead of held
    whole; in that case ``zero_terms`` lists only the violating boxes.
    """
    if refine < 0:
        raise InvalidInputError("refine must be >= 0")
    if net.input_dim != sys.dim:
        raise InvalidInputError(f"network expects {net.input_dim} inputs, system has dimension {sys.dim}")
    t0 = time.perf_counter()
    zero = cfg.zero.refined(refine)
    try:
        bd = evaluate(net, sys, cfg, cover=_cover(net, sys, zero, cfg))
    except ResourceLimitError:
        bd = _streamed_breakdown(net, sys, zero, cfg)
    conf = cfg.to_dict()
    conf["zero"] = str(zero)
    return RunReport(sys.name, conf, 0, time.perf_counter() - t0, 0.0, bd.verified,
                     [_trace_row(0, bd)], [bd.cover_size], final=bd.to_dict(),
                     network_digest=net.digest())


def _streamed_breakdown(net: Network, sys: SystemSpec, zero: ZeroParams,
                        cfg: TrainConfig) -> LossBreakdown:
    # The zero hinge is a sum over boxes, so pieces of the cover add up.
    # Only violating boxes are kept in zero_terms, indexed in streaming order.
    pieces = iter_zero_cover(net, sys.state_space, zero, chunk=min(cfg.box_cap, STREAM_CHUNK))
    try:
        head = evaluate(net, sys, cfg, cover=ZeroCover.empty(sys.dim, zero.iterations))
        l_zero, size, terms = 0.0, 0, []
        for piece in pieces:
            bd = evaluate(net, sys, cfg, cover=piece)
            l_zero += bd.l_zero
            terms += [(size + i, u, h) for i, u, h in bd.zero_terms if h > 0.0]
            size += len(piece)
    except ResourceLimitError as exc:
        raise ResourceLimitError(f"{sys.name} (seed {cfg.seed}): {exc}") from None
    return LossBreakdown(head.l_unsafe, head.l_init, l_zero, head.epsilon, terms,
                         head.unsafe_bounds, head.init_bounds, size)


# ------------------------------------------------------------ simulation

def _in_zonotope(Z: Zonotope, x: np.ndarray) -> np.ndarray:
    """Exact membership of points ``(m, n)``; an LP decides non-box cases."""
    hull = zono_interval_hull(Z)
    inside = hull.contains(x)
    if Z.is_box() or not inside.any():
        return inside
    q = Z.n_generators
    for i in np.flatnonzero(inside):
        res = linprog(np.zeros(q), A_eq=Z.generators, b_eq=x[i] - Z.center,
                      bounds=[(-1.0, 1.0)] * q, method="highs")
        inside[i] = res.status == 0
    return inside


def _rk4(sys: SystemSpec, x: np.ndarray, h: float) -> np.ndarray:
    k1 = sys.f(x)
    k2 = sys.f(x + 0.5 * h * k1)
    k3 = sys.f(x + 0.5 * h * k2)
    k4 = sys.f(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def simulate_check(net: Network, sys: SystemSpec, horizon: float = 10.0, count: int = 100,
                   seed: int = 0, step: float = 1e-3, b_tol: float = 1e-6) -> dict:
    """Simulate trajectories from the initial sets and check the safety claim.

    Start states are drawn uniformly from the factors of the initial sets.
    A trajectory stops once it leaves the state space.  Raises
    :class:`SafetyViolation` if a state enters an unsafe set or ``B`` exceeds
    ``b_tol``.
    """
    rng = np.random.default_rng(seed)
    which = rng.integers(len(sys.initial_sets), size=count)
    x = np.empty((count, sys.dim))
    for k, Z in enumerate(sys.initial_sets):
        sel = which == k
        x[sel] = Z.sample(rng, int(sel.sum()))
    X = sys.state_space
    active = np.ones(count, dtype=bool)
    steps = int(round(horizon / step))
    max_b = -np.inf
    for k in range(steps + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        pts = x[idx]
        b = net(pts)
        max_b = max(max_b, float(b.max()))
        worst = int(np.argmax(b))
        if b[worst] > b_tol:
            raise SafetyViolation(f"trajectory {idx[worst]} reaches B={b[worst]:.3g} at t={k * step:.4f}")
        for j, U in enumerate(sys.unsafe_sets):
            hit = _in_zonotope(U, pts)
            if hit.any():
                i = idx[np.argmax(hit)]
                raise SafetyViolation(f"trajectory {i} enters unsafe set {j} at t={k * step:.4f}")
        if k == steps:
            break
        x[idx] = _rk4(sys, pts, step)
        active[idx] = X.contains(x[idx])
    return {"trajectories": count, "horizon": horizon, "step": step,
            "left_state_space": int(np.sum(~active)), "max_B": max_b}


def config_for(sys: SystemSpec, **overrides) -> TrainConfig:
    return preset_config(sys.name, **overrides)


__all__ = [
    "TrainConfig", "BENCHMARK_PRESETS", "REFINE_BOX_CAP", "STREAM_CHUNK", "preset_config", "config_for", "AdamState", "adam_step",
    "radial_target", "pretrain", "RunReport", "train", "verify", "evaluate",
    "simulate_check", "benchmark",
]
