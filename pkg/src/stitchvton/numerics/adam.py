"""Bias-corrected Adam over named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, ShapeError
from .tensor import Tensor

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    """Optimizer state: step counter plus per-parameter moment tensors."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        m = {k: np.zeros_like(p.data) for k, p in params.items()}
        v = {k: np.zeros_like(p.data) for k, p in params.items()}
        return cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                   first_moment=m, second_moment=v)


def adam_step(params, grads, state):
    """One Adam update. Returns (new params dict, state).

    ``params`` maps names to Tensors; ``grads`` must carry a gradient
    for every parameter name. Parameter tensors are immutable, so the
    update produces fresh Tensors; moment buffers and the step counter
    live in ``state`` and are advanced in place.
    """
    missing = [k for k in params if k not in grads]
    if missing:
        raise ContractError("adam_step: missing gradients for %s" % missing)

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t

    new_params = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float32)
        if g.shape != p.data.shape:
            raise ShapeError("adam_step: grad shape %s != param shape %s for %r"
                             % (g.shape, p.data.shape, name))
        m = state.first_moment[name]
        v = state.second_moment[name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / c1
        v_hat = v / c2
        step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_params[name] = Tensor(p.data - step, requires_grad=True)
    return new_params, state
