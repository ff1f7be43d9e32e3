"""Spiral Mixing and the Spiral Block.

Spiral Mixing runs a Self-Spiral FC (zero offsets, purely local) and a
Cross-Spiral FC (spiral offsets) in parallel and fuses them with a Merge Head:
a softmax over two per-channel weights derived from the spatially averaged sum
of both branches. A Spiral Block wraps Spiral Mixing and a per-position MLP
(Channel Mixing) in pre-norm residual form:

    x' = SpiralMixing(LN(x)) + x
    y  = ChannelMixing(LN(x')) + x'
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .layers import GeLU, LayerNorm, Linear
from .offsets import SpiralConfig, spiral_offsets
from .ops import softmax, softmax_backward
from .spiral_fc import SpiralFC
from .tensor import Module, Parameter

__all__ = ["MergeHead", "SpiralMixing", "ChannelMixing", "SpiralBlock",
           "merge_head_forward", "merge_head_ops"]


class MergeHead(Module):
    """Softmax-weighted convex combination of the two branch outputs.

    The 2x1 parameter maps the spatial mean of (x_self + x_cross) to two
    logits per channel; their softmax gives per-channel weights a[0], a[1]
    summing to one, broadcast over all positions. Zero init starts at an
    unbiased 50/50 mix.
    """

    def __init__(self, dtype=np.float32):
        self.w_merge = Parameter(np.zeros((2, 1), dtype=dtype))
        self._cache = None

    def forward(self, x_self: np.ndarray, x_cross: np.ndarray) -> np.ndarray:
        """Fused map; the (..., 2, C) mix weights are kept on ``last_mix``."""
        if x_self.shape != x_cross.shape:
            raise ValueError(f"branch shapes differ: {x_self.shape} vs {x_cross.shape}")
        m = (x_self + x_cross).mean(axis=(-3, -2))            # (..., C)
        logits = m[..., None, :] * self.w_merge.value         # (..., 2, C)
        a = softmax(logits, axis=-2)
        y = a[..., 0, None, None, :] * x_self + a[..., 1, None, None, :] * x_cross
        self._cache = (x_self, x_cross, m, a)
        return y

    @property
    def last_mix(self) -> np.ndarray:
        """Mix weights from the most recent forward call."""
        return self._cache[3]

    def backward(self, grad_out: np.ndarray):
        x_self, x_cross, m, a = self._cache
        hw = x_self.shape[-3] * x_self.shape[-2]
        gs = a[..., 0, None, None, :] * grad_out
        gt = a[..., 1, None, None, :] * grad_out
        da = np.stack(
            [np.sum(grad_out * x_self, axis=(-3, -2)), np.sum(grad_out * x_cross, axis=(-3, -2))],
            axis=-2,
        )                                                     # (..., 2, C)
        dlogits = softmax_backward(a, da, axis=-2)
        self.w_merge.grad[:, 0] += np.sum(dlogits * m[..., None, :],
                                          axis=tuple(i for i in range(dlogits.ndim) if i != dlogits.ndim - 2))
        dm = np.einsum("...rc,r->...c", dlogits, self.w_merge.value[:, 0])
        spread = (dm / hw)[..., None, None, :]
        return gs + spread, gt + spread


def merge_head_forward(mh: MergeHead, x_self: np.ndarray, x_cross: np.ndarray):
    """Run one merge and return ``(mix weights, fused map)``."""
    y = mh.forward(x_self, x_cross)
    return mh.last_mix, y


def merge_head_ops(h: int, w: int, c: int) -> int:
    """Elementwise op count of one merge: branch sum and mean accumulation
    (2*h*w*c), convex combination (3*h*w*c), logits plus softmax (6*c)."""
    return 5 * h * w * c + 6 * c


class SpiralMixing(Module):
    """Parallel Self-Spiral and Cross-Spiral FC fused by a Merge Head."""

    def __init__(self, cfg: SpiralConfig, c_out: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self_cfg = dataclasses.replace(cfg, a_max=0)
        self.self_fc = SpiralFC(spiral_offsets(self_cfg), c_out, cfg.rounding, rng, dtype)
        self.cross_fc = SpiralFC(spiral_offsets(cfg), c_out, cfg.rounding, rng, dtype)
        self.merge = MergeHead(dtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.merge.forward(self.self_fc.forward(x), self.cross_fc.forward(x))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        gs, gt = self.merge.backward(grad_out)
        return self.self_fc.backward(gs) + self.cross_fc.backward(gt)

    def macs(self, h: int, w: int) -> int:
        return self.self_fc.macs(h, w) + self.cross_fc.macs(h, w)


class ChannelMixing(Module):
    """Per-position MLP with GeLU: C -> expansion*C -> C."""

    def __init__(self, c: int, expansion: int = 4,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.fc1 = Linear(c, expansion * c, rng, dtype)
        self.act = GeLU()
        self.fc2 = Linear(expansion * c, c, rng, dtype)

    def forward(self, x):
        return self.fc2.forward(self.act.forward(self.fc1.forward(x)))

    def backward(self, grad_out):
        return self.fc1.backward(self.act.backward(self.fc2.backward(grad_out)))

    def macs(self, h: int, w: int) -> int:
        return self.fc1.macs(h * w) + self.fc2.macs(h * w)


class SpiralBlock(Module):
    """Pre-norm residual block; shape-preserving for any spatial size.

    During training each residual branch is dropped per sample with probability
    ``drop_path`` and rescaled by 1/(1-p) when kept (stochastic depth);
    evaluation is deterministic.
    """

    def __init__(self, cfg: SpiralConfig, expansion: int = 4, drop_path: float = 0.0,
                 rng: np.random.Generator | None = None, dtype=np.float32, eps: float = 1e-5):
        c = cfg.c_in
        rng = rng or np.random.default_rng(0)
        self.ln1 = LayerNorm(c, eps, dtype)
        self.mixing = SpiralMixing(cfg, c, rng, dtype)
        self.ln2 = LayerNorm(c, eps, dtype)
        self.channel = ChannelMixing(c, expansion, rng, dtype)
        self.drop_path = drop_path
        self._masks = (None, None)

    def _branch_mask(self, x, training, rng):
        if not training or self.drop_path <= 0.0:
            return None
        n = x.shape[0] if x.ndim == 4 else 1
        keep = (rng.random(n) >= self.drop_path).astype(x.dtype) / (1.0 - self.drop_path)
        if x.ndim == 4:
            return keep[:, None, None, None]
        return keep[0]

    def forward(self, x, training: bool = False, rng: np.random.Generator | None = None):
        m1 = self._branch_mask(x, training, rng)
        branch = self.mixing.forward(self.ln1.forward(x))
        x1 = x + (branch if m1 is None else branch * m1)
        m2 = self._branch_mask(x1, training, rng)
        branch = self.channel.forward(self.ln2.forward(x1))
        y = x1 + (branch if m2 is None else branch * m2)
        self._masks = (m1, m2)
        return y

    def backward(self, grad_out):
        m1, m2 = self._masks
        g = grad_out if m2 is None else grad_out * m2
        gx1 = grad_out + self.ln2.backward(self.channel.backward(g))
        g = gx1 if m1 is None else gx1 * m1
        return gx1 + self.ln1.backward(self.mixing.backward(g))

    def macs(self, h: int, w: int) -> int:
        return self.mixing.macs(h, w) + self.channel.macs(h, w)
