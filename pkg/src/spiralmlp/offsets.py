"""Per-channel spatial offset tables for Spiral FC and baseline token-mixing layers.

Every generator returns an :class:`OffsetTable`: one (row, col) displacement per
input channel, in grid-cell units. Tables are immutable and safe to share
across threads.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Rounding",
    "SpiralConfig",
    "OffsetTable",
    "amplitude",
    "amplitude_partitioned",
    "spiral_offsets",
    "cycle_offsets",
    "axial_offsets",
    "random_offsets",
    "round_half_away",
]

_U64 = (1 << 64) - 1


class Rounding(str, enum.Enum):
    """Treatment of fractional offsets when gathering from the grid."""

    NEAREST = "nearest"    # round half away from zero to one grid cell
    BILINEAR = "bilinear"  # blend the four surrounding cells


@dataclass(frozen=True)
class SpiralConfig:
    """Parameter bundle for the spiral offset generator.

    c_in:       input channel count
    a_max:      maximum amplitude in grid cells (0 degenerates to all-zero offsets)
    period:     channels per full revolution of the spiral
    partitions: number of channel partitions, each replaying the amplitude tent
    rounding:   how fractional offsets are applied by the consuming layer
    """

    c_in: int
    a_max: int = 3
    period: int = 8
    partitions: int = 1
    rounding: Rounding = Rounding.NEAREST

    def __post_init__(self):
        if self.c_in < 1:
            raise ValueError(f"c_in must be >= 1, got {self.c_in}")
        if self.a_max < 0:
            raise ValueError(f"a_max must be >= 0, got {self.a_max}")
        if self.period < 1:
            raise ValueError(f"period must be >= 1, got {self.period}")
        if not 1 <= self.partitions <= self.c_in:
            raise ValueError(
                f"partitions must be in [1, c_in={self.c_in}], got {self.partitions}"
            )
        if self.c_in % self.partitions != 0:
            raise ValueError(
                f"partitions ({self.partitions}) must divide c_in ({self.c_in})"
            )
        object.__setattr__(self, "rounding", Rounding(self.rounding))

    @property
    def partition_len(self) -> int:
        return self.c_in // self.partitions


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (np.round is half-to-even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x).astype(np.int64)


CSV_HEADER = "c,dphi_i,dphi_j,round_i,round_j"


@dataclass(frozen=True)
class OffsetTable:
    """Per-channel displacements: ``dphi[c] = (row shift, col shift)``.

    ``rounded`` is the nearest-integer view (half away from zero) used by the
    NEAREST gather mode and by the masked-convolution oracle. Both arrays are
    read-only.
    """

    dphi: np.ndarray     # float64, shape (c_in, 2)
    rounded: np.ndarray  # int64, shape (c_in, 2)

    def __post_init__(self):
        dphi = np.ascontiguousarray(np.asarray(self.dphi, dtype=np.float64))
        if dphi.ndim != 2 or dphi.shape[1] != 2 or dphi.shape[0] < 1:
            raise ValueError(f"offset table must have shape (c_in, 2), got {dphi.shape}")
        rounded = np.ascontiguousarray(np.asarray(self.rounded, dtype=np.int64))
        if rounded.shape != dphi.shape:
            raise ValueError(f"rounded shape {rounded.shape} != dphi shape {dphi.shape}")
        dphi.flags.writeable = False
        rounded.flags.writeable = False
        object.__setattr__(self, "dphi", dphi)
        object.__setattr__(self, "rounded", rounded)

    @classmethod
    def from_dphi(cls, dphi: np.ndarray) -> "OffsetTable":
        dphi = np.asarray(dphi, dtype=np.float64)
        return cls(dphi=dphi, rounded=round_half_away(dphi))

    def __len__(self) -> int:
        return self.dphi.shape[0]

    @property
    def c_in(self) -> int:
        return self.dphi.shape[0]

    def radii(self) -> np.ndarray:
        return np.hypot(self.dphi[:, 0], self.dphi[:, 1])

    def to_csv(self, file) -> None:
        """Write ``c,dphi_i,dphi_j,round_i,round_j`` rows to a path or text file."""
        if hasattr(file, "write"):
            self._write_csv(file)
        else:
            with open(file, "w", encoding="ascii", newline="\n") as fh:
                self._write_csv(fh)

    def _write_csv(self, fh) -> None:
        fh.write(CSV_HEADER + "\n")
        for c in range(self.c_in):
            fh.write(
                f"{c},{float(self.dphi[c, 0])!r},{float(self.dphi[c, 1])!r},"
                f"{int(self.rounded[c, 0])},{int(self.rounded[c, 1])}\n"
            )

    @classmethod
    def from_csv(cls, file) -> "OffsetTable":
        if hasattr(file, "read"):
            text = file.read()
        else:
            with open(file, "r", encoding="ascii") as fh:
                text = fh.read()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != CSV_HEADER:
            raise ValueError(f"expected header {CSV_HEADER!r}, got {lines[:1]!r}")
        dphi, rounded = [], []
        for ln in lines[1:]:
            c, di, dj, ri, rj = ln.split(",")
            dphi.append((float(di), float(dj)))
            rounded.append((int(ri), int(rj)))
        return cls(dphi=np.array(dphi), rounded=np.array(rounded))

    def csv_text(self) -> str:
        buf = io.StringIO()
        self._write_csv(buf)
        return buf.getvalue()


def _check_channel(cfg: SpiralConfig, c: int) -> None:
    if not 0 <= c <= cfg.c_in:
        raise ValueError(f"channel index {c} outside [0, {cfg.c_in}]")


def amplitude(cfg: SpiralConfig, c: int) -> int:
    """Tent-profile amplitude: 0 at the channel extremes, a_max at c_in/2.

    ``floor(2*a_max*c / c_in)`` on the rising half, mirrored on the falling half.
    Single-partition form; see :func:`amplitude_partitioned` for partitions > 1.
    """
    if cfg.partitions != 1:
        raise ValueError("amplitude() is the single-partition profile; use amplitude_partitioned")
    _check_channel(cfg, c)
    if c < cfg.c_in / 2:
        return int(math.floor(2 * cfg.a_max * c / cfg.c_in))
    return int(math.floor(2 * cfg.a_max - 2 * cfg.a_max * c / cfg.c_in))


def amplitude_partitioned(cfg: SpiralConfig, c: int) -> int:
    """Amplitude with the tent profile replayed over each of the k partitions.

    With partition length ``C_w = c_in / k``, channel c sits in partition
    ``i = c // C_w`` at local coordinate ``z = c - i*C_w``; the profile of
    :func:`amplitude` is evaluated over length C_w at z. Reduces exactly to
    :func:`amplitude` for k=1.
    """
    _check_channel(cfg, c)
    c_w = cfg.partition_len
    z = c - (c // c_w) * c_w
    if z < c_w / 2:
        return int(math.floor(2 * cfg.a_max * z / c_w))
    return int(math.floor(2 * cfg.a_max - 2 * cfg.a_max * z / c_w))


def spiral_offsets(cfg: SpiralConfig) -> OffsetTable:
    """Spiral trajectory: channel c maps to ``A(c) * (cos, sin)(2*pi*c / period)``.

    The amplitude A is the partitioned tent profile, so every radius is bounded
    by ``cfg.a_max``; a_max=0 yields the all-zero table (Self-Spiral / Channel FC).
    """
    dphi = np.zeros((cfg.c_in, 2), dtype=np.float64)
    for c in range(cfg.c_in):
        a = amplitude_partitioned(cfg, c)
        theta = 2.0 * math.pi * c / cfg.period
        dphi[c, 0] = a * math.cos(theta)
        dphi[c, 1] = a * math.sin(theta)
    return OffsetTable.from_dphi(dphi)


def cycle_offsets(c_in: int, s_h: int, s_w: int) -> OffsetTable:
    """Criss-cross stepping baseline: ``((c mod s_h) - 1, (floor(c/s_h) mod s_w) - 1)``."""
    if c_in < 1:
        raise ValueError(f"c_in must be >= 1, got {c_in}")
    if s_h < 1 or s_w < 1:
        raise ValueError(f"step sizes must be >= 1, got ({s_h}, {s_w})")
    c = np.arange(c_in, dtype=np.int64)
    di = c % s_h - 1
    dj = (c // s_h) % s_w - 1
    return OffsetTable.from_dphi(np.stack([di, dj], axis=1).astype(np.float64))


def axial_offsets(c_in: int, s: int, d: int, axis: str = "H") -> OffsetTable:
    """Axial shift baseline: ``floor(c / (c_in/s)) - floor(s/2)*d`` along one axis.

    ``s`` is the shift size (must divide c_in), ``d`` the dilation. The scalar
    profile lands on the H axis as (o, 0) or the W axis as (0, o).
    """
    if c_in < 1:
        raise ValueError(f"c_in must be >= 1, got {c_in}")
    if s < 1 or d < 1:
        raise ValueError(f"shift size and dilation must be >= 1, got ({s}, {d})")
    if c_in % s != 0:
        raise ValueError(f"shift size {s} must divide c_in ({c_in})")
    if axis not in ("H", "W"):
        raise ValueError(f"axis must be 'H' or 'W', got {axis!r}")
    c = np.arange(c_in, dtype=np.int64)
    o = c // (c_in // s) - (s // 2) * d
    dphi = np.zeros((c_in, 2), dtype=np.float64)
    dphi[:, 0 if axis == "H" else 1] = o
    return OffsetTable.from_dphi(dphi)


def _splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 sequence: (new state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _U64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return state, z ^ (z >> 31)


def random_offsets(c_in: int, a_max: int, seed: int) -> OffsetTable:
    """Uniform integer offsets in ``[-a_max, a_max]^2``, reproducible bit-for-bit.

    Draw algorithm (stable across platforms and implementations): run the
    splitmix64 sequence from ``seed`` (state += 0x9E3779B97F4A7C15, then the
    standard 30/27/31 xor-multiply mix). The 2*c_in scalar draws are taken
    row-major over (channel, axis); each draw takes the next 64-bit output,
    rejecting values >= floor(2^64 / n) * n for n = 2*a_max + 1, and maps the
    accepted value to ``value mod n - a_max``.
    """
    if c_in < 1:
        raise ValueError(f"c_in must be >= 1, got {c_in}")
    if a_max < 0:
        raise ValueError(f"a_max must be >= 0, got {a_max}")
    n = 2 * a_max + 1
    limit = ((1 << 64) // n) * n
    state = seed & _U64
    dphi = np.zeros((c_in, 2), dtype=np.float64)
    for c in range(c_in):
        for axis in range(2):
            while True:
                state, value = _splitmix64(state)
                if value < limit:
                    break
            dphi[c, axis] = value % n - a_max
    return OffsetTable.from_dphi(dphi)
