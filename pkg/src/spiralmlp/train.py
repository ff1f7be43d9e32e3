"""Training loop, evaluation, and checkpointing.

Runs are a pure function of (config, dataset): shuffling is derived from
(seed, epoch), gradients reduce in ascending sample order within numpy's fixed
reduction order, and the stochastic-depth generator state is carried in the
checkpoint, so identical configs produce byte-identical metrics and resumed
runs continue step for step.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .model import ModelConfig, SpiralMLPModel, build, config_from_dict, config_to_dict
from .optim import AdamW
from .tensor import BlobFormatError, read_blob, write_blob

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "train",
    "evaluate",
    "checkpoint_save",
    "checkpoint_load",
    "restore_model",
    "metrics_to_csv",
    "METRICS_HEADER",
]

METRICS_HEADER = "step,epoch,loss,top1"
_MAGIC = b"SMLPCKPT"
_VERSION = 1
_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    lr: float = 5e-4
    weight_decay: float = 5e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 1
    batch_size: int = 32
    seed: int = 0
    schedule: str = "constant"      # "constant" | "cosine"
    warmup_epochs: int = 0          # linear warmup, applies to the cosine schedule
    precision: str = "f32"          # "f32" | "f64"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"schedule must be 'constant' or 'cosine', got {self.schedule!r}")
        if self.precision not in ("f32", "f64"):
            raise ValueError(f"precision must be 'f32' or 'f64', got {self.precision!r}")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["model"] = config_to_dict(self.model)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["model"] = config_from_dict(d["model"])
        return cls(**d)


@dataclass
class Checkpoint:
    """Complete training state: weights, optimizer moments, step, RNG state."""

    model_config: dict
    train_config: dict
    step: int
    params: dict[str, np.ndarray]
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    rng_state: dict
    dtype: str = "float32"


class CheckpointFormatError(ValueError):
    pass


def checkpoint_save(ckpt: Checkpoint, path: str) -> None:
    """Binary layout: magic, u32 version, u64 JSON length, JSON metadata
    (canonical: sorted keys, compact separators), then one tensor blob per
    entry of the JSON ``tensors`` list (``param:``/``m:``/``v:`` prefixes)."""
    names = sorted(ckpt.params)
    meta = {
        "version": _VERSION,
        "model": ckpt.model_config,
        "train": ckpt.train_config,
        "step": ckpt.step,
        "rng": ckpt.rng_state,
        "dtype": ckpt.dtype,
        "tensors": [f"{kind}:{n}" for kind in ("param", "m", "v") for n in names],
    }
    payload = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("ascii")
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<I", _VERSION))
    buf.write(struct.pack("<Q", len(payload)))
    buf.write(payload)
    dtype = _DTYPES[ckpt.dtype]
    for kind, store in (("param", ckpt.params), ("m", ckpt.m), ("v", ckpt.v)):
        for n in names:
            write_blob(buf, store[n].astype(dtype, copy=False))
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def checkpoint_load(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    fh = io.BytesIO(blob)
    if fh.read(8) != _MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic, not a checkpoint")
    raw = fh.read(12)
    if len(raw) != 12:
        raise CheckpointFormatError(f"{path}: truncated header")
    version, json_len = struct.unpack("<IQ", raw)
    if version != _VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    payload = fh.read(json_len)
    if len(payload) != json_len:
        raise CheckpointFormatError(f"{path}: truncated metadata")
    meta = json.loads(payload)
    dtype = _DTYPES.get(meta.get("dtype", "float32"))
    if dtype is None:
        raise CheckpointFormatError(f"{path}: unknown dtype {meta.get('dtype')!r}")
    stores = {"param": {}, "m": {}, "v": {}}
    try:
        for entry in meta["tensors"]:
            kind, name = entry.split(":", 1)
            stores[kind][name] = read_blob(fh, dtype)
    except BlobFormatError as exc:
        raise CheckpointFormatError(f"{path}: {exc}") from exc
    if fh.read(1):
        raise CheckpointFormatError(f"{path}: trailing bytes after tensor data")
    return Checkpoint(
        model_config=meta["model"],
        train_config=meta["train"],
        step=meta["step"],
        params=stores["param"],
        m=stores["m"],
        v=stores["v"],
        rng_state=meta["rng"],
        dtype=meta["dtype"],
    )


def restore_model(ckpt: Checkpoint) -> SpiralMLPModel:
    """Rebuild the architecture from the snapshot and load its weights."""
    cfg = config_from_dict(ckpt.model_config)
    seed = ckpt.train_config.get("seed", 0)
    model = build(cfg, seed=seed, dtype=_DTYPES[ckpt.dtype])
    model.load_state(ckpt.params)
    model.droppath_rng.bit_generator.state = ckpt.rng_state
    return model


@dataclass
class MetricsRow:
    step: int
    epoch: int
    loss: float
    top1: float | None = None

    def csv(self) -> str:
        top1 = "" if self.top1 is None else repr(float(self.top1))
        return f"{self.step},{self.epoch},{float(self.loss)!r},{top1}"


def metrics_to_csv(rows: list[MetricsRow]) -> str:
    return "\n".join([METRICS_HEADER] + [r.csv() for r in rows]) + "\n"


def _lr_at(cfg: TrainConfig, step: int, total_steps: int, warmup_steps: int) -> float:
    if cfg.schedule == "constant":
        return cfg.lr
    if step < warmup_steps:
        return cfg.lr * (step + 1) / warmup_steps
    span = max(1, total_steps - warmup_steps)
    return 0.5 * cfg.lr * (1.0 + math.cos(math.pi * (step - warmup_steps) / span))


def _snapshot(model: SpiralMLPModel, opt: AdamW, cfg: TrainConfig, step: int) -> Checkpoint:
    return Checkpoint(
        model_config=config_to_dict(cfg.model),
        train_config=cfg.to_dict(),
        step=step,
        params={n: p.value.copy() for n, p in model.params()},
        m={n: a.copy() for n, a in opt.m.items()},
        v={n: a.copy() for n, a in opt.v.items()},
        rng_state=model.droppath_rng.bit_generator.state,
        dtype=str(np.dtype(cfg.dtype)),
    )


def train(cfg: TrainConfig, dataset: Dataset, out_dir: str | None = None,
          resume: Checkpoint | None = None,
          log=None) -> tuple[list[MetricsRow], Checkpoint]:
    """Run the epoch loop; returns (metrics rows, final checkpoint).

    With ``out_dir`` set, writes ``metrics.csv`` and ``checkpoint.ckpt`` there.
    ``resume`` continues a run (normally from an epoch boundary so epoch
    aggregates match an uninterrupted run).
    """
    n = len(dataset)
    steps_per_epoch = n // cfg.batch_size
    if steps_per_epoch == 0:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds dataset size {n}")
    total_steps = cfg.epochs * steps_per_epoch
    warmup_steps = cfg.warmup_epochs * steps_per_epoch

    model = build(cfg.model, seed=cfg.seed, dtype=cfg.dtype)
    opt = AdamW(model.params(), cfg.lr, cfg.weight_decay, cfg.beta1, cfg.beta2)
    start_step = 0
    if resume is not None:
        model.load_state(resume.params)
        model.droppath_rng.bit_generator.state = resume.rng_state
        for name in opt.m:
            opt.m[name][...] = resume.m[name]
            opt.v[name][...] = resume.v[name]
        start_step = resume.step
        opt.step_count = resume.step
    else:
        model.droppath_rng = np.random.default_rng([cfg.seed, 2])

    images = dataset.images.astype(cfg.dtype, copy=False)
    labels = dataset.labels
    rows: list[MetricsRow] = []
    perm = None
    epoch_loss = epoch_correct = epoch_seen = 0.0
    for step in range(start_step, total_steps):
        epoch = step // steps_per_epoch
        pos = step % steps_per_epoch
        if pos == 0 or perm is None:
            perm = np.random.default_rng([cfg.seed, 1, epoch]).permutation(n)
            epoch_loss = epoch_correct = epoch_seen = 0.0
        idx = perm[pos * cfg.batch_size : (pos + 1) * cfg.batch_size]
        loss, logits, grad = model.loss(images[idx], labels[idx], training=True)
        model.zero_grad()
        model.backward(grad)
        opt.step(_lr_at(cfg, step, total_steps, warmup_steps))
        epoch_loss += loss * len(idx)
        epoch_correct += float(np.sum(np.argmax(logits, axis=1) == labels[idx]))
        epoch_seen += len(idx)
        rows.append(MetricsRow(step, epoch, loss))
        if pos == steps_per_epoch - 1:
            rows.append(MetricsRow(step, epoch, epoch_loss / epoch_seen,
                                   epoch_correct / epoch_seen))
            if log:
                log(f"epoch {epoch}: loss {epoch_loss / epoch_seen:.4f} "
                    f"top1 {epoch_correct / epoch_seen:.4f}")

    ckpt = _snapshot(model, opt, cfg, total_steps)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="ascii", newline="\n") as fh:
            fh.write(metrics_to_csv(rows))
        checkpoint_save(ckpt, os.path.join(out_dir, "checkpoint.ckpt"))
    return rows, ckpt


def evaluate(model_or_ckpt, dataset: Dataset, batch_size: int = 64) -> float:
    """Top-1 accuracy of argmax predictions; errors on an empty dataset."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    model = restore_model(model_or_ckpt) if isinstance(model_or_ckpt, Checkpoint) else model_or_ckpt
    correct = 0
    for lo in range(0, len(dataset), batch_size):
        batch = dataset.images[lo : lo + batch_size]
        logits = model.forward(batch.astype(model.dtype, copy=False), training=False)
        correct += int(np.sum(np.argmax(logits, axis=1) == dataset.labels[lo : lo + batch_size]))
    return correct / len(dataset)
