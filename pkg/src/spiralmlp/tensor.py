"""Dense-tensor conventions, trainable parameters, and the raw blob format.

Tensors are plain numpy arrays: row-major (C order), last axis contiguous,
float32 for training and benchmarks, float64 for verification. Feature maps
use channel-last layout ``(H, W, C)`` or batched ``(N, H, W, C)``.
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = ["Parameter", "Module", "write_blob", "read_blob", "BlobFormatError"]


class Parameter:
    """A trainable value paired with its accumulated gradient.

    ``grad`` always matches ``value`` in shape and dtype; backward passes add
    into it, and it is zeroed explicitly between optimizer steps. ``decay``
    marks whether weight decay applies (off for biases and norm parameters).
    """

    __slots__ = ("value", "grad", "decay")

    def __init__(self, value: np.ndarray, decay: bool = True):
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)
        self.decay = decay

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def __repr__(self):
        return f"Parameter(shape={self.value.shape}, dtype={self.value.dtype}, decay={self.decay})"


class Module:
    """Base for layers: explicit forward/backward with caches held on self.

    Forward passes are pure given parameter values; backward passes accumulate
    into ``Parameter.grad`` and must be serialized by the caller (the training
    loop runs them sequentially).
    """

    def params(self) -> list[tuple[str, Parameter]]:
        """All (dotted-name, Parameter) pairs in deterministic definition order."""
        out = []

        def walk(prefix, obj):
            if isinstance(obj, Parameter):
                out.append((prefix, obj))
            elif isinstance(obj, Module):
                out.extend((f"{prefix}.{sub}", p) for sub, p in obj.params())
            elif isinstance(obj, (list, tuple)):
                for i, item in enumerate(obj):
                    walk(f"{prefix}.{i}", item)

        for name, attr in vars(self).items():
            walk(name, attr)
        return out

    def zero_grad(self) -> None:
        for _, p in self.params():
            p.zero_grad()

    def param_count(self) -> int:
        return sum(p.size for _, p in self.params())


class BlobFormatError(ValueError):
    pass


_DTYPE_CODES = {0: np.float32, 1: np.float64}
_CODE_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def write_blob(fh, arr: np.ndarray) -> None:
    """Write one tensor blob: little-endian u32 ndim, u32 dims, then raw floats.

    The payload is float32 unless the array is float64 (checkpoints saved from
    a 64-bit run); the element width is recovered on read from the byte count
    recorded alongside the blob stream by the caller, or unambiguously via
    :func:`read_blob`'s dtype argument.
    """
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in _CODE_FOR:
        arr = arr.astype(np.float32)
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def read_blob(fh, dtype=np.float32) -> np.ndarray:
    """Read one tensor blob written by :func:`write_blob`."""
    header = fh.read(4)
    if len(header) != 4:
        raise BlobFormatError("truncated blob: missing ndim header")
    (ndim,) = struct.unpack("<I", header)
    if ndim > 32:
        raise BlobFormatError(f"implausible ndim {ndim}")
    raw = fh.read(4 * ndim)
    if len(raw) != 4 * ndim:
        raise BlobFormatError("truncated blob: missing shape header")
    shape = struct.unpack(f"<{ndim}I", raw)
    dtype = np.dtype(dtype).newbyteorder("<")
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    payload = fh.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise BlobFormatError(
            f"truncated blob: expected {count * dtype.itemsize} payload bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return arr.astype(dtype.newbyteorder("="))
