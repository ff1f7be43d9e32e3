"""Spiral FC: offset-gathered channel-wise sparse projection.

Output position (i, j) reads channel c of the input at ``(i + phi_i(c),
j + phi_j(c))`` — zero outside the map — and projects the gathered channel
vector through a dense ``C_in x C_out`` matrix:

    y[i, j, :] = sum_c x[i + phi_i(c), j + phi_j(c), c] * W[c, :] + b

With an all-zero offset table this is exactly a per-position Channel FC. The
layer is input-size agnostic (stride-1 sliding window) and linear in x, with
forward cost ``H * W * C_in * C_out`` multiply-accumulates.
"""

from __future__ import annotations

import numpy as np

from .offsets import OffsetTable, Rounding
from .ops import conv2d_forward, trunc_normal
from .tensor import Module, Parameter

__all__ = ["SpiralFC", "masked_conv_oracle", "receptive_field", "spiral_fc_macs"]


def _nearest_plan(table: OffsetTable):
    """Group channels by rounded offset: list of ((di, dj), channel index array, None)."""
    groups = {}
    for c, (di, dj) in enumerate(table.rounded):
        groups.setdefault((int(di), int(dj)), []).append(c)
    return [(sh, np.array(idx, dtype=np.intp), None) for sh, idx in groups.items()]


def _bilinear_plan(table: OffsetTable):
    """Corner decomposition: ((di, dj), channels, per-channel blend weights)."""
    groups = {}
    for c, (fi, fj) in enumerate(table.dphi):
        i0, j0 = int(np.floor(fi)), int(np.floor(fj))
        wi1, wj1 = fi - i0, fj - j0
        for di, dj, w in (
            (i0, j0, (1 - wi1) * (1 - wj1)),
            (i0, j0 + 1, (1 - wi1) * wj1),
            (i0 + 1, j0, wi1 * (1 - wj1)),
            (i0 + 1, j0 + 1, wi1 * wj1),
        ):
            if w != 0.0:
                groups.setdefault((di, dj), []).append((c, w))
    return [
        (sh, np.array([c for c, _ in items], dtype=np.intp),
         np.array([w for _, w in items], dtype=np.float64))
        for sh, items in groups.items()
    ]


class SpiralFC(Module):
    """The offset-gathered projection layer.

    ``offsets`` fixes where each channel reads; ``mode`` selects nearest-integer
    grid reads or bilinear blending of the four surrounding cells. Out-of-bounds
    reads yield zero.
    """

    def __init__(self, offsets: OffsetTable, c_out: int, mode: Rounding = Rounding.NEAREST,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        c_in = offsets.c_in
        rng = rng or np.random.default_rng(0)
        self.weight = Parameter(trunc_normal(rng, (c_in, c_out), dtype=dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype), decay=False)
        self.offsets = offsets
        self.mode = Rounding(mode)
        plan = _nearest_plan(offsets) if self.mode == Rounding.NEAREST else _bilinear_plan(offsets)
        self._plan = plan
        self._pad = max((max(abs(sh[0]), abs(sh[1])) for sh, _, _ in plan), default=0)
        self._cache = None

    @property
    def c_in(self) -> int:
        return self.offsets.c_in

    @property
    def c_out(self) -> int:
        return self.weight.shape[1]

    def gather(self, x: np.ndarray) -> np.ndarray:
        """Offset-displaced view of x: ``out[..., i, j, c] = x[..., i+di_c, j+dj_c, c]``."""
        h, w = x.shape[-3], x.shape[-2]
        p = self._pad
        if p == 0 and self.mode == Rounding.NEAREST:
            return x.copy()
        pad = [(0, 0)] * (x.ndim - 3) + [(p, p), (p, p), (0, 0)]
        xp = np.pad(x, pad)
        out = np.zeros_like(x)
        for (di, dj), idx, weights in self._plan:
            patch = xp[..., p + di : p + di + h, p + dj : p + dj + w, idx]
            if weights is None:
                out[..., idx] = patch
            else:
                out[..., idx] += patch * weights.astype(x.dtype)
        return out

    def scatter(self, grad_gathered: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`gather`: push gradients back through the offsets."""
        h, w = grad_gathered.shape[-3], grad_gathered.shape[-2]
        p = self._pad
        if p == 0 and self.mode == Rounding.NEAREST:
            return grad_gathered.copy()
        pad_shape = grad_gathered.shape[:-3] + (h + 2 * p, w + 2 * p, grad_gathered.shape[-1])
        gxp = np.zeros(pad_shape, dtype=grad_gathered.dtype)
        for (di, dj), idx, weights in self._plan:
            patch = grad_gathered[..., idx]
            if weights is not None:
                patch = patch * weights.astype(grad_gathered.dtype)
            gxp[..., p + di : p + di + h, p + dj : p + dj + w, idx] += patch
        return gxp[..., p : p + h, p : p + w, :]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.c_in:
            raise ValueError(f"expected {self.c_in} input channels, got shape {x.shape}")
        gathered = self.gather(x)
        self._cache = gathered
        return gathered @ self.weight.value + self.bias.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        gathered = self._cache
        gf = grad_out.reshape(-1, self.c_out)
        self.weight.grad += gathered.reshape(-1, self.c_in).T @ gf
        self.bias.grad += gf.sum(axis=0)
        return self.scatter(grad_out @ self.weight.value.T)

    def macs(self, h: int, w: int) -> int:
        """Multiply-accumulates of one forward pass on an ``h x w`` map."""
        return spiral_fc_macs(self.c_in, self.c_out, h, w)


def spiral_fc_macs(c_in: int, c_out: int, h: int, w: int) -> int:
    """Projection MACs: exactly ``h * w * c_in * c_out`` (the gather moves data only)."""
    return h * w * c_in * c_out


def masked_conv_oracle(layer: SpiralFC, x: np.ndarray) -> np.ndarray:
    """Evaluate the layer as a dense convolution with a sparsity-masked kernel.

    Builds the ``(2P+1) x (2P+1) x C_in x C_out`` kernel whose only nonzero
    taps sit at each channel's rounded offset and carry that channel's weight
    row, then runs a plain zero-padded stride-1 convolution. Must agree with
    :meth:`SpiralFC.forward` exactly (up to float addition order).
    """
    if layer.mode != Rounding.NEAREST:
        raise ValueError("masked-convolution oracle requires nearest-integer mode")
    p = int(np.max(np.abs(layer.offsets.rounded), initial=0))
    k = 2 * p + 1
    kernel = np.zeros((k, k, layer.c_in, layer.c_out), dtype=layer.weight.dtype)
    for c, (di, dj) in enumerate(layer.offsets.rounded):
        kernel[p + di, p + dj, c, :] = layer.weight.value[c, :]
    return conv2d_forward(Parameter(kernel), layer.bias, x, stride=1, padding=p)


def receptive_field(layer: SpiralFC) -> set[tuple[int, int]]:
    """Distinct rounded displacements the layer reads from."""
    return {(int(di), int(dj)) for di, dj in layer.offsets.rounded}
