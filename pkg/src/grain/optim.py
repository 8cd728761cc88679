"""Adam optimizer with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params])


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    """One Adam update in place; returns the mutated state.

    Rejects non-finite gradients before touching any parameter, so a bad step
    never half-applies.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params but {len(grads)} grads")
    for p, g in zip(params, grads):
        if g is None or not np.all(np.isfinite(g)):
            name = p.name or f"param{params.index(p)}"
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


class Adam:
    """Convenience wrapper holding parameters, state, and hyperparameters.

    ``weight_decay`` adds the classic L2 term wd*param to each gradient before
    the moment updates (coupled decay).
    """

    def __init__(self, params: list[Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamState.for_params(self.params)

    def step(self, grads: list[np.ndarray] | None = None) -> None:
        if grads is None:
            grads = [p.grad for p in self.params]
        if self.weight_decay:
            grads = [g + self.weight_decay * p.data if g is not None else None
                     for p, g in zip(self.params, grads)]
        adam_step(self.params, grads, self.state, self.lr, self.beta1,
                  self.beta2, self.eps)
