"""Feed-forward tanh networks with a flat parameter vector."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..errors import DimensionError, InvalidInputError

DTYPE = torch.float64
RNG_ALGORITHM = "numpy.PCG64"

# hidden widths of the ablation architectures
PRESETS = {"N1": (), "N2": (8,), "N3": (5, 5)}


def resolve_arch(arch, n: int) -> list[int]:
    """Full width list ``[n, h1, ..., 1]`` from a preset name, hidden widths or full widths.

    ``"N2"`` -> ``[n, 8, 1]``; ``"10"`` or ``[10]`` -> ``[n, 10, 1]``; a list that
    already starts with ``n`` and ends with 1 (length >= 2) is taken as is.
    """
    if isinstance(arch, str):
        key = arch.strip().upper()
        if key in PRESETS:
            return [n, *PRESETS[key], 1]
        try:
            hidden = [int(t) for t in arch.split(",") if t.strip()]
        except ValueError:
            raise InvalidInputError(f"unrecognised architecture {arch!r}") from None
        return [n, *hidden, 1]
    widths = [int(w) for w in arch]
    if len(widths) >= 2 and widths[0] == n and widths[-1] == 1:
        return widths
    return [n, *widths, 1]


@dataclass(frozen=True)
class Network:
    """Alternating linear and tanh layers, starting and ending with a linear layer.

    ``weights[k]`` has shape ``(out, in)``.  The parameter vector concatenates
    each layer's weight matrix (row-major) followed by its bias.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        Ws = tuple(np.array(W, dtype=float, ndmin=2) for W in self.weights)
        bs = tuple(np.array(b, dtype=float, ndmin=1) for b in self.biases)
        if not Ws or len(Ws) != len(bs):
            raise InvalidInputError("network needs one bias per weight matrix")
        for k, (W, b) in enumerate(zip(Ws, bs)):
            if b.shape != (W.shape[0],):
                raise DimensionError(f"layer {k}: bias shape {b.shape} for W {W.shape}")
            if k and W.shape[1] != Ws[k - 1].shape[0]:
                raise DimensionError(f"layer {k}: expects {W.shape[1]} inputs, "
                                     f"previous layer gives {Ws[k - 1].shape[0]}")
        if Ws[-1].shape[0] != 1:
            raise InvalidInputError("the output layer must have width 1")
        for a in Ws + bs:
            a.setflags(write=False)
        object.__setattr__(self, "weights", Ws)
        object.__setattr__(self, "biases", bs)

    @property
    def arch(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_layers(self) -> int:
        """Total layer count, linear and nonlinear."""
        return 2 * len(self.weights) - 1

    @property
    def n_hidden_neurons(self) -> int:
        return sum(W.shape[0] for W in self.weights[:-1])

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([np.r_[W.ravel(), b] for W, b in zip(self.weights, self.biases)])

    def digest(self) -> str:
        return hashlib.blake2b(self.theta.tobytes(), digest_size=12).hexdigest()

    def with_theta(self, theta) -> "Network":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got {theta.shape}")
        Ws, bs, i = [], [], 0
        for W, b in zip(self.weights, self.biases):
            Ws.append(theta[i:i + W.size].reshape(W.shape))
            i += W.size
            bs.append(theta[i:i + b.size])
            i += b.size
        return Network(tuple(Ws), tuple(bs))

    def split_theta(self, theta: torch.Tensor) -> list[tuple[torch.Tensor, torch.Tensor]]:
        """View a flat parameter tensor as per-layer ``(W, b)`` tensors."""
        out, i = [], 0
        for W, b in zip(self.weights, self.biases):
            Wt = theta[i:i + W.size].reshape(W.shape)
            i += W.size
            out.append((Wt, theta[i:i + b.size]))
            i += b.size
        return out

    def torch_params(self) -> list[tuple[torch.Tensor, torch.Tensor]]:
        return [(torch.tensor(W, dtype=DTYPE), torch.tensor(b, dtype=DTYPE))
                for W, b in zip(self.weights, self.biases)]

    def forward(self, x) -> np.ndarray:
        """Pointwise output for states of shape ``(..., n)``."""
        h = np.asarray(x, dtype=float)
        if h.shape[-1] != self.input_dim:
            raise DimensionError(f"input has {h.shape[-1]} entries, network expects {self.input_dim}")
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W.T + b
            if k < last:
                h = np.tanh(h)
        return h[..., 0]

    __call__ = forward

    def input_gradient(self, x) -> np.ndarray:
        """Analytic ``grad_x B(x)`` for states of shape ``(..., n)``."""
        h = np.asarray(x, dtype=float)
        if h.shape[-1] != self.input_dim:
            raise DimensionError(f"input has {h.shape[-1]} entries, network expects {self.input_dim}")
        last = len(self.weights) - 1
        derivs = []
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W.T + b
            if k < last:
                t = np.tanh(h)
                derivs.append(1.0 - t * t)
                h = t
        g = np.broadcast_to(self.weights[-1][0], h.shape[:-1] + (self.weights[-1].shape[1],))
        for k in range(last - 1, -1, -1):
            g = (g * derivs[k]) @ self.weights[k]
        return np.array(g)

    def to_dict(self, meta: dict | None = None) -> dict:
        return {
            "arch": self.arch,
            "activations": ["tanh"] * (len(self.weights) - 1),
            "layers": [{"W": W.tolist(), "b": b.tolist()}
                       for W, b in zip(self.weights, self.biases)],
            "meta": meta or {},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        acts = d.get("activations", [])
        if any(a != "tanh" for a in acts):
            raise InvalidInputError(f"unsupported activations {acts}")
        layers = d["layers"]
        if acts and len(acts) != len(layers) - 1:
            raise InvalidInputError("activation count must be one less than layer count")
        net = cls(tuple(np.asarray(L["W"], dtype=float) for L in layers),
                  tuple(np.asarray(L["b"], dtype=float) for L in layers))
        if "arch" in d and list(d["arch"]) != net.arch:
            raise InvalidInputError(f"arch {d['arch']} does not match layers {net.arch}")
        return net


def nn_init(arch: Sequence[int], seed: int) -> Network:
    """Glorot-uniform weights and zero biases from a seeded PCG64 stream."""
    widths = [int(w) for w in arch]
    if len(widths) < 2 or any(w < 1 for w in widths) or widths[-1] != 1:
        raise InvalidInputError(f"malformed architecture {arch}: need [n, ..., 1] with positive widths")
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return Network(tuple(Ws), tuple(bs))


def nn_forward(net: Network, x) -> float | np.ndarray:
    out = net.forward(x)
    return float(out) if np.ndim(out) == 0 else out


def save_model(net: Network, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(net.to_dict(meta), indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> tuple[Network, dict]:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return Network.from_dict(d), d.get("meta", {})
