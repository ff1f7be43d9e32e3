"""Staged SpiralMLP backbones and the preset model zoo.

Four stages reduce spatial resolution by 4, 2, 2, 2 (x32 total) while widening
channels. PVT-style stages downsample with overlapping strided convolutions
(7/4/3 then 3/2/1, each followed by LayerNorm); Swin-style stages concatenate
n x n neighborhoods and reduce with a linear layer. The classifier head is
LayerNorm -> global average pool -> linear.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .blocks import SpiralBlock
from .layers import Conv2d, LayerNorm, Linear
from .offsets import Rounding, SpiralConfig
from .ops import cross_entropy
from .tensor import Module

__all__ = [
    "StageConfig",
    "ModelConfig",
    "SpiralMLPModel",
    "preset",
    "PRESET_NAMES",
    "build",
    "param_count",
    "model_forward",
    "config_to_dict",
    "config_from_dict",
]


@dataclass(frozen=True)
class StageConfig:
    stride: int
    channels: int
    expansion: int
    depth: int
    a_max: int = 3
    partitions: int = 2
    period: int = 8

    def __post_init__(self):
        if self.stride not in (2, 4):
            raise ValueError(f"stage stride must be 2 or 4, got {self.stride}")
        for field in ("channels", "expansion", "depth", "partitions", "period"):
            if getattr(self, field) < 1:
                raise ValueError(f"stage {field} must be >= 1, got {getattr(self, field)}")
        if self.a_max < 0:
            raise ValueError(f"stage a_max must be >= 0, got {self.a_max}")
        if self.channels % self.partitions != 0:
            raise ValueError(
                f"partitions ({self.partitions}) must divide stage channels ({self.channels})"
            )


@dataclass(frozen=True)
class ModelConfig:
    stages: tuple[StageConfig, ...]
    num_classes: int = 1000
    style: str = "pvt"          # "pvt" | "swin"
    drop_path: float = 0.1      # max of the linear per-block schedule

    def __post_init__(self):
        if len(self.stages) != 4:
            raise ValueError(f"expected exactly 4 stages, got {len(self.stages)}")
        total = 1
        for s in self.stages:
            total *= s.stride
        if total != 32:
            raise ValueError(f"cumulative downsample must be 32, got {total}")
        if self.style not in ("pvt", "swin"):
            raise ValueError(f"style must be 'pvt' or 'swin', got {self.style!r}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if not 0.0 <= self.drop_path < 1.0:
            raise ValueError(f"drop_path must lie in [0, 1), got {self.drop_path}")

    @property
    def total_stride(self) -> int:
        return 32


def _stages(channels, depths, expansion=4):
    strides = (4, 2, 2, 2)
    return tuple(
        StageConfig(stride=s, channels=c, expansion=expansion, depth=d)
        for s, c, d in zip(strides, channels, depths)
    )


_PVT_PRESETS = {
    "B1": ((64, 128, 320, 512), (2, 2, 4, 2)),
    "B2": ((64, 128, 320, 512), (2, 3, 10, 3)),
    "B3": ((64, 128, 320, 512), (3, 4, 18, 3)),
    "B4": ((64, 128, 320, 512), (3, 8, 27, 3)),
    "B5": ((96, 192, 384, 768), (3, 4, 24, 3)),
}

_SWIN_PRESETS = {
    "T": ((64, 128, 320, 512), (2, 2, 6, 2)),
    "S": ((96, 192, 384, 768), (3, 4, 18, 3)),
    "B": ((96, 192, 384, 768), (3, 4, 24, 3)),
}

PRESET_NAMES = tuple(_PVT_PRESETS) + tuple(_SWIN_PRESETS) + ("tiny-desk",)


def preset(name: str, num_classes: int | None = None) -> ModelConfig:
    """Named model configurations (B1..B5 PVT-style, T/S/B Swin-style, tiny-desk)."""
    if name in _PVT_PRESETS:
        channels, depths = _PVT_PRESETS[name]
        return ModelConfig(_stages(channels, depths), num_classes or 1000, "pvt")
    if name in _SWIN_PRESETS:
        channels, depths = _SWIN_PRESETS[name]
        return ModelConfig(_stages(channels, depths), num_classes or 1000, "swin")
    if name == "tiny-desk":
        return ModelConfig(
            _stages((16, 32, 64, 128), (1, 1, 2, 1)),
            num_classes or 10,
            "pvt",
            drop_path=0.0,
        )
    raise KeyError(f"unknown preset {name!r}; valid names: {', '.join(PRESET_NAMES)}")


class PatchEmbedConv(Module):
    """Overlapping strided-convolution downsampling followed by LayerNorm."""

    def __init__(self, c_in, c_out, stride, rng, dtype, eps=1e-5):
        k, pad = (7, 3) if stride == 4 else (3, 1)
        self.proj = Conv2d(k, k, c_in, c_out, stride, pad, rng, dtype)
        self.norm = LayerNorm(c_out, eps, dtype)
        self.stride = stride

    def forward(self, x):
        return self.norm.forward(self.proj.forward(x))

    def backward(self, grad_out):
        return self.proj.backward(self.norm.backward(grad_out))

    def macs(self, h, w):
        return self.proj.macs(h, w)


class PatchMergeConcat(Module):
    """Space-to-depth concat of n x n neighborhoods, linear reduction, LayerNorm."""

    def __init__(self, c_in, c_out, stride, rng, dtype, eps=1e-5):
        self.reduce = Linear(stride * stride * c_in, c_out, rng, dtype)
        self.norm = LayerNorm(c_out, eps, dtype)
        self.stride = stride
        self._shape = None

    def _to_depth(self, x):
        n = self.stride
        lead = x.shape[:-3]
        h, w, c = x.shape[-3:]
        if h % n or w % n:
            raise ValueError(f"spatial size {h}x{w} not divisible by merge factor {n}")
        y = x.reshape(*lead, h // n, n, w // n, n, c)
        y = np.moveaxis(y, -4, -3)
        return y.reshape(*lead, h // n, w // n, n * n * c)

    def _from_depth(self, g):
        n = self.stride
        lead = g.shape[:-3]
        ho, wo = g.shape[-3], g.shape[-2]
        c = g.shape[-1] // (n * n)
        y = g.reshape(*lead, ho, wo, n, n, c)
        y = np.moveaxis(y, -3, -4)
        return y.reshape(*lead, ho * n, wo * n, c)

    def forward(self, x):
        return self.norm.forward(self.reduce.forward(self._to_depth(x)))

    def backward(self, grad_out):
        return self._from_depth(self.reduce.backward(self.norm.backward(grad_out)))

    def macs(self, h, w):
        n = self.stride
        return self.reduce.macs((h // n) * (w // n))


class SpiralMLPModel(Module):
    """Full backbone plus classifier; built by :func:`build`."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32,
                 rounding: Rounding = Rounding.NEAREST, eps: float = 1e-5):
        rng = np.random.default_rng([seed, 0])
        self.config = cfg
        self.dtype = np.dtype(dtype)
        self.embeds: list[Module] = []
        self.stages: list[list[SpiralBlock]] = []
        total_depth = sum(s.depth for s in cfg.stages)
        rates = np.linspace(0.0, cfg.drop_path, total_depth) if total_depth > 1 else [0.0]
        block_index = 0
        c_prev = 3
        for stage in cfg.stages:
            if cfg.style == "pvt":
                embed = PatchEmbedConv(c_prev, stage.channels, stage.stride, rng, dtype, eps)
            else:
                embed = PatchMergeConcat(c_prev, stage.channels, stage.stride, rng, dtype, eps)
            blocks = []
            for _ in range(stage.depth):
                spiral_cfg = SpiralConfig(
                    c_in=stage.channels, a_max=stage.a_max, period=stage.period,
                    partitions=stage.partitions, rounding=rounding,
                )
                blocks.append(SpiralBlock(
                    spiral_cfg, stage.expansion, float(rates[block_index]), rng, dtype, eps,
                ))
                block_index += 1
            self.embeds.append(embed)
            self.stages.append(blocks)
            c_prev = stage.channels
        self.head_norm = LayerNorm(c_prev, eps, dtype)
        self.head = Linear(c_prev, cfg.num_classes, rng, dtype)
        self.droppath_rng = np.random.default_rng([seed, 1])
        self._pool_shape = None

    # -- forward / backward ------------------------------------------------

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Images (N, H, W, 3) or (H, W, 3) -> logits (N, num_classes) or (num_classes,)."""
        squeeze = x.ndim == 3
        if squeeze:
            x = x[None]
        if x.ndim != 4 or x.shape[-1] != 3:
            raise ValueError(f"expected (N, H, W, 3) input, got {x.shape}")
        h, w = x.shape[1], x.shape[2]
        if h % 32 or w % 32:
            raise ValueError(f"input spatial size {h}x{w} must be divisible by 32")
        x = x.astype(self.dtype, copy=False)
        for embed, blocks in zip(self.embeds, self.stages):
            x = embed.forward(x)
            for block in blocks:
                x = block.forward(x, training=training, rng=self.droppath_rng)
        x = self.head_norm.forward(x)
        self._pool_shape = x.shape
        pooled = x.mean(axis=(1, 2))
        logits = self.head.forward(pooled)
        return logits[0] if squeeze else logits

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        if grad_logits.ndim == 1:
            grad_logits = grad_logits[None]
        g = self.head.backward(grad_logits)
        n, h, w, c = self._pool_shape
        g = np.broadcast_to(g[:, None, None, :] / (h * w), self._pool_shape).astype(g.dtype)
        g = self.head_norm.backward(g)
        for embed, blocks in zip(reversed(self.embeds), reversed(self.stages)):
            for block in reversed(blocks):
                g = block.backward(g)
            g = embed.backward(g)
        return g

    def loss(self, x: np.ndarray, labels, training: bool = False):
        """Cross-entropy forward; returns (loss, logits, grad_logits)."""
        logits = self.forward(x, training=training)
        value, grad = cross_entropy(logits, labels)
        return value, logits, grad

    # -- bookkeeping ---------------------------------------------------------

    def stage_spatial_sizes(self, h: int, w: int) -> list[tuple[int, int]]:
        out = []
        for stage in self.config.stages:
            h, w = h // stage.stride, w // stage.stride
            out.append((h, w))
        return out

    def macs(self, h: int, w: int) -> int:
        """Projection multiply-accumulates of one single-image forward pass."""
        total = 0
        for embed, blocks, (sh, sw) in zip(
            self.embeds, self.stages, self.stage_spatial_sizes(h, w)
        ):
            total += embed.macs(h, w)
            for block in blocks:
                total += block.macs(sh, sw)
            h, w = sh, sw
        total += self.head.macs(1)
        return total

    def flops(self, h: int, w: int) -> int:
        """FLOP estimate: two per multiply-accumulate (norms and softmax excluded)."""
        return 2 * self.macs(h, w)

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.value for name, p in self.params()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        mine = {name: p for name, p in self.params()}
        diff = []
        for name, p in mine.items():
            if name not in state:
                diff.append(f"missing {name} {p.shape}")
            elif tuple(state[name].shape) != tuple(p.shape):
                diff.append(f"{name}: expected {tuple(p.shape)}, found {tuple(state[name].shape)}")
        diff.extend(f"unexpected {n} {tuple(v.shape)}" for n, v in state.items() if n not in mine)
        if diff:
            raise ValueError("state does not match architecture: " + "; ".join(diff))
        for name, p in mine.items():
            p.value[...] = state[name].astype(p.dtype)


def build(cfg: ModelConfig, seed: int = 0, dtype=np.float32,
          rounding: Rounding = Rounding.NEAREST, a_max: int | None = None,
          partitions: int | None = None, period: int | None = None) -> SpiralMLPModel:
    """Construct a model; optional arguments override every stage's spiral geometry."""
    if any(v is not None for v in (a_max, partitions, period)):
        cfg = dataclasses.replace(cfg, stages=tuple(
            dataclasses.replace(
                s,
                a_max=s.a_max if a_max is None else a_max,
                partitions=s.partitions if partitions is None else partitions,
                period=s.period if period is None else period,
            )
            for s in cfg.stages
        ))
    return SpiralMLPModel(cfg, seed=seed, dtype=dtype, rounding=rounding)


def param_count(model: SpiralMLPModel) -> int:
    return model.param_count()


def model_forward(model: SpiralMLPModel, batch: np.ndarray) -> np.ndarray:
    return model.forward(batch, training=False)


# -- config serialization ----------------------------------------------------

def config_to_dict(cfg: ModelConfig) -> dict:
    return {
        "style": cfg.style,
        "num_classes": cfg.num_classes,
        "drop_path": cfg.drop_path,
        "stages": [dataclasses.asdict(s) for s in cfg.stages],
    }


def config_from_dict(d: dict) -> ModelConfig:
    if "preset" in d:
        cfg = preset(d["preset"], d.get("num_classes"))
        if "drop_path" in d:
            cfg = dataclasses.replace(cfg, drop_path=float(d["drop_path"]))
        return cfg
    try:
        stages = tuple(StageConfig(**s) for s in d["stages"])
        return ModelConfig(
            stages=stages,
            num_classes=int(d["num_classes"]),
            style=d.get("style", "pvt"),
            drop_path=float(d.get("drop_path", 0.1)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid model config: {exc}") from exc
