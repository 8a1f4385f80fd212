"""Reverse-mode parameter gradients of scalar set-based losses."""
from __future__ import annotations

from typing import Callable

import numpy as np
import torch

from ..errors import ContractViolation
from .network import DTYPE, Network

LossFn = Callable[[list], torch.Tensor]


def param_grad(net: Network, loss_fn: LossFn) -> tuple[float, np.ndarray]:
    """Value and gradient of ``loss_fn`` with respect to the flat parameters.

    ``loss_fn`` receives the per-layer ``(W, b)`` tensors (views of one flat
    leaf tensor) and must return a scalar tensor built from differentiable
    torch operations.
    """
    theta = torch.tensor(net.theta, dtype=DTYPE, requires_grad=True)
    loss = loss_fn(net.split_theta(theta))
    if not isinstance(loss, torch.Tensor) or loss.numel() != 1:
        raise ContractViolation("loss must be a scalar tensor")
    loss = loss.reshape(())
    if not loss.requires_grad:
        return float(loss), np.zeros(net.n_params)
    (grad,) = torch.autograd.grad(loss, theta, allow_unused=True)
    if grad is None:
        return float(loss), np.zeros(net.n_params)
    return float(loss.detach()), grad.numpy().copy()
