"""AdamW with decoupled weight decay.

Decay multiplies parameter values directly (it never flows through the moment
estimates) and is skipped for parameters flagged ``decay=False`` — biases and
normalization scales/shifts. Moments live in the parameter dtype so optimizer
state round-trips checkpoints bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .tensor import Parameter

__all__ = ["AdamW"]


class AdamW:
    def __init__(self, params: list[tuple[str, Parameter]], lr: float = 5e-4,
                 weight_decay: float = 5e-2, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.value) for name, p in self.params}
        self.v = {name: np.zeros_like(p.value) for name, p in self.params}

    def step(self, lr: float | None = None) -> None:
        """One update over all parameters from their accumulated gradients."""
        lr = self.lr if lr is None else lr
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params:
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in parameter {name!r}")
            if p.decay and self.weight_decay:
                p.value *= 1.0 - lr * self.weight_decay
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= (lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
