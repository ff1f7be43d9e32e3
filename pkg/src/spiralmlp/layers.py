"""Module wrappers over the functional ops, holding parameters and caches."""

from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Module, Parameter

__all__ = ["Linear", "LayerNorm", "GeLU", "Conv2d"]


class Linear(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.weight = Parameter(ops.trunc_normal(rng, (c_in, c_out), dtype=dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype), decay=False)
        self._x = None

    def forward(self, x):
        self._x = x
        return ops.linear_forward(self.weight, self.bias, x)

    def backward(self, grad_out):
        return ops.linear_backward(self.weight, self.bias, self._x, grad_out)

    def macs(self, positions: int) -> int:
        return positions * self.weight.shape[0] * self.weight.shape[1]


class LayerNorm(Module):
    def __init__(self, c: int, eps: float = 1e-5, dtype=np.float32):
        self.gamma = Parameter(np.ones(c, dtype=dtype), decay=False)
        self.beta = Parameter(np.zeros(c, dtype=dtype), decay=False)
        self.eps = eps
        self._cache = None

    def forward(self, x):
        y, self._cache = ops.layernorm_forward(self.gamma, self.beta, x, self.eps)
        return y

    def backward(self, grad_out):
        return ops.layernorm_backward(self.gamma, self.beta, self._cache, grad_out)


class GeLU(Module):
    def __init__(self):
        self._x = None

    def forward(self, x):
        self._x = x
        return ops.gelu(x)

    def backward(self, grad_out):
        return ops.gelu_backward(self._x, grad_out)


class Conv2d(Module):
    """Zero-padded strided cross-correlation on (..., H, W, C_in) maps."""

    def __init__(self, k_h: int, k_w: int, c_in: int, c_out: int, stride: int = 1,
                 padding: int = 0, rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.weight = Parameter(ops.trunc_normal(rng, (k_h, k_w, c_in, c_out), dtype=dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype), decay=False)
        self.stride = stride
        self.padding = padding
        self._x = None

    def forward(self, x):
        self._x = x
        return ops.conv2d_forward(self.weight, self.bias, x, self.stride, self.padding)

    def backward(self, grad_out):
        return ops.conv2d_backward(self.weight, self.bias, self._x, grad_out,
                                   self.stride, self.padding)

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        k_h, k_w = self.weight.shape[:2]
        return (
            (h + 2 * self.padding - k_h) // self.stride + 1,
            (w + 2 * self.padding - k_w) // self.stride + 1,
        )

    def macs(self, h: int, w: int) -> int:
        k_h, k_w, c_in, c_out = self.weight.shape
        oh, ow = self.out_size(h, w)
        return oh * ow * k_h * k_w * c_in * c_out
