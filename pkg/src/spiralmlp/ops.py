"""Stateless forward/backward pairs for the standard layers.

Each ``*_backward`` is the exact adjoint of its forward: it returns the input
gradient and, where parameters are involved, accumulates into their ``grad``.
All functions accept any leading axes and operate on the trailing channel axis
(convolutions operate on the trailing ``(H, W, C)`` axes).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .tensor import Parameter

__all__ = [
    "linear_forward",
    "linear_backward",
    "layernorm_forward",
    "layernorm_backward",
    "gelu",
    "gelu_backward",
    "softmax",
    "softmax_backward",
    "conv2d_forward",
    "conv2d_backward",
    "cross_entropy",
    "trunc_normal",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ShapeError(ValueError):
    pass


def _check_trailing(x: np.ndarray, c: int, what: str) -> None:
    if x.shape[-1] != c:
        raise ShapeError(f"{what}: trailing axis {x.shape[-1]} of input {x.shape} != {c}")


# ---------------------------------------------------------------- linear

def linear_forward(w: Parameter, b: Parameter, x: np.ndarray) -> np.ndarray:
    """``y[..., o] = sum_c x[..., c] * w[c, o] + b[o]``."""
    _check_trailing(x, w.shape[0], f"linear weight {w.shape}")
    return x @ w.value + b.value


def linear_backward(w: Parameter, b: Parameter, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    _check_trailing(grad_out, w.shape[1], f"linear weight {w.shape}")
    xf = x.reshape(-1, w.shape[0])
    gf = grad_out.reshape(-1, w.shape[1])
    w.grad += xf.T @ gf
    b.grad += gf.sum(axis=0)
    return (grad_out @ w.value.T).reshape(x.shape)


# ---------------------------------------------------------------- layernorm

def layernorm_forward(gamma: Parameter, beta: Parameter, x: np.ndarray, eps: float = 1e-5):
    """Normalize the trailing axis to zero mean / unit variance, scale and shift.

    Returns ``(y, cache)``; pass the cache to :func:`layernorm_backward`.
    """
    _check_trailing(x, gamma.shape[0], f"layernorm gamma {gamma.shape}")
    mean = x.mean(axis=-1, keepdims=True)
    xc = x - mean
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    return xhat * gamma.value + beta.value, (xhat, inv_std)


def layernorm_backward(gamma: Parameter, beta: Parameter, cache, grad_out: np.ndarray) -> np.ndarray:
    xhat, inv_std = cache
    gamma.grad += np.sum(grad_out * xhat, axis=tuple(range(grad_out.ndim - 1)))
    beta.grad += np.sum(grad_out, axis=tuple(range(grad_out.ndim - 1)))
    g = grad_out * gamma.value
    g_mean = g.mean(axis=-1, keepdims=True)
    gx_mean = np.mean(g * xhat, axis=-1, keepdims=True)
    return inv_std * (g - g_mean - xhat * gx_mean)


# ---------------------------------------------------------------- gelu

def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GeLU ``x * Phi(x)`` with the Gaussian CDF (no tanh approximation)."""
    return 0.5 * x * (1.0 + special.erf(x * _INV_SQRT2))


def gelu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    phi = 0.5 * (1.0 + special.erf(x * _INV_SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return grad_out * (phi + x * pdf)


# ---------------------------------------------------------------- softmax

def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted exponential normalization; slices along ``axis`` sum to 1."""
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(y: np.ndarray, grad_out: np.ndarray, axis: int = -1) -> np.ndarray:
    """VJP given the forward output ``y = softmax(x, axis)``."""
    dot = np.sum(grad_out * y, axis=axis, keepdims=True)
    return y * (grad_out - dot)


# ---------------------------------------------------------------- conv2d

def _conv_out_size(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def conv2d_forward(w: Parameter, b: Parameter, x: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Zero-padded cross-correlation over the trailing (H, W, C_in) axes.

    ``w`` has shape (K_h, K_w, C_in, C_out); output spatial size is
    ``(n + 2p - k) // stride + 1`` per axis.
    """
    k_h, k_w, c_in, c_out = w.shape
    _check_trailing(x, c_in, f"conv weight {w.shape}")
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    n, h, wid, _ = x.shape
    oh = _conv_out_size(h, k_h, stride, padding)
    ow = _conv_out_size(wid, k_w, stride, padding)
    if oh < 1 or ow < 1:
        raise ValueError(
            f"conv produces empty output: input {h}x{wid}, kernel {k_h}x{k_w}, "
            f"stride {stride}, padding {padding}"
        )
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    y = np.tile(b.value, (n, oh, ow, 1)).astype(x.dtype)
    for i in range(k_h):
        for j in range(k_w):
            patch = xp[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :]
            y += patch @ w.value[i, j]
    return y[0] if squeeze else y


def conv2d_backward(w: Parameter, b: Parameter, x: np.ndarray, grad_out: np.ndarray,
                    stride: int = 1, padding: int = 0) -> np.ndarray:
    k_h, k_w, c_in, c_out = w.shape
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
        grad_out = grad_out[None]
    n, h, wid, _ = x.shape
    oh, ow = grad_out.shape[1], grad_out.shape[2]
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    gxp = np.zeros_like(xp)
    gf = grad_out.reshape(-1, c_out)
    b.grad += gf.sum(axis=0)
    for i in range(k_h):
        for j in range(k_w):
            patch = xp[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :]
            w.grad[i, j] += patch.reshape(-1, c_in).T @ gf
            gxp[:, i : i + stride * oh : stride, j : j + stride * ow : stride, :] += grad_out @ w.value[i, j].T
    gx = gxp[:, padding : padding + h, padding : padding + wid, :]
    return gx[0] if squeeze else gx


# ---------------------------------------------------------------- cross entropy

def cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-softmax of the true class.

    Returns ``(loss, grad)`` with ``grad = (softmax - onehot) / N``, same dtype
    as the logits.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} != ({n},)")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -float(np.mean(log_probs[np.arange(n), labels]))
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


# ---------------------------------------------------------------- init

def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02, dtype=np.float32) -> np.ndarray:
    """Normal(0, std) with resampling outside two standard deviations."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out.astype(dtype)
