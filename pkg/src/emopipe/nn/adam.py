"""Adam with bias-corrected moment estimates."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch

DEFAULT_LR = 1e-6


class Adam:
    """Per-parameter first/second moments plus a shared step counter.

    Update rule, for step t (counted from 1)::

        m = b1*m + (1-b1)*g
        v = b2*v + (1-b2)*g^2
        p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """

    def __init__(self, params: Sequence[np.ndarray], lr: float = DEFAULT_LR,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-7):
        self.lr, self.beta1, self.beta2, self.epsilon = lr, beta1, beta2, epsilon
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """Update ``params`` in place."""
        if len(params) != len(self.m) or len(grads) != len(params):
            raise ShapeMismatch("parameter/gradient/state lists differ in length")
        for p, g, m in zip(params, grads, self.m):
            if p.shape != g.shape or p.shape != m.shape:
                raise ShapeMismatch(f"shape mismatch: param {p.shape}, grad {g.shape}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.epsilon)).astype(p.dtype)


def adam_step(params, grads, state: Adam):
    """Functional wrapper: apply one step and return (params, state)."""
    state.step(params, grads)
    return params, state
