"""Dataset ingestion: CIFAR-10 binary batches and a synthetic desk-scale task.

CIFAR-10 binary record layout (3073 bytes): one label byte, then 3072 pixel
bytes as three channel planes (1024 red, 1024 green, 1024 blue), each plane a
row-major 32x32 grid. Pixels are scaled to [0, 1] and normalized per channel
with mean (0.4914, 0.4822, 0.4465) and std (0.2470, 0.2435, 0.2616).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = ["Dataset", "load_cifar10", "synth_dataset",
           "CIFAR10_MEAN", "CIFAR10_STD", "CIFAR10_RECORD_BYTES"]

CIFAR10_MEAN = np.array([0.4914, 0.4822, 0.4465], dtype=np.float32)
CIFAR10_STD = np.array([0.2470, 0.2435, 0.2616], dtype=np.float32)
CIFAR10_RECORD_BYTES = 3073
_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
_TEST_FILES = ["test_batch.bin"]


@dataclass
class Dataset:
    """Images (N, H, W, 3) float32 with integer labels (N,)."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"images {self.images.shape} and labels {self.labels.shape} disagree"
            )

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, i):
        return self.images[i], self.labels[i]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0


class CifarFormatError(ValueError):
    pass


def _parse_cifar_file(path: str) -> tuple[np.ndarray, np.ndarray]:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % CIFAR10_RECORD_BYTES != 0:
        raise CifarFormatError(
            f"{path}: size {raw.size} is not a multiple of the "
            f"{CIFAR10_RECORD_BYTES}-byte record (1 label + 3072 pixel bytes)"
        )
    records = raw.reshape(-1, CIFAR10_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    planes = records[:, 1:].reshape(-1, 3, 32, 32)          # channel-planar
    images = planes.transpose(0, 2, 3, 1).astype(np.float32) / 255.0
    images = (images - CIFAR10_MEAN) / CIFAR10_STD
    return images, labels


def load_cifar10(directory: str, split: str = "train") -> Dataset:
    """Load the standard binary batches from ``directory`` for one split."""
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    names = _TRAIN_FILES if split == "train" else _TEST_FILES
    paths = [os.path.join(directory, n) for n in names]
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        raise FileNotFoundError(
            f"missing CIFAR-10 files in {directory}: expected "
            f"{', '.join(names)}; not found: {', '.join(os.path.basename(m) for m in missing)}"
        )
    parts = [_parse_cifar_file(p) for p in paths]
    return Dataset(
        images=np.concatenate([im for im, _ in parts]),
        labels=np.concatenate([lb for _, lb in parts]),
    )


def synth_dataset(seed: int, n: int, classes: int = 2, size: int = 64) -> Dataset:
    """Class-conditional Gaussian-blob images with class-specific gratings.

    Class k modulates a Gaussian envelope with a sinusoidal grating of
    frequency 1.5 + 1.5*k cycles per image, oriented at angle pi*k/classes;
    per-sample phase, blob center jitter, and pixel noise come from a generator
    seeded with (seed, sample index), so the dataset is a pure function of the
    arguments. Labels are assigned round-robin.
    """
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if n < 1 or size < 1:
        raise ValueError(f"n and size must be positive, got n={n}, size={size}")
    coords = (np.arange(size) + 0.5) / size
    ii, jj = np.meshgrid(coords, coords, indexing="ij")
    images = np.zeros((n, size, size, 3), dtype=np.float32)
    labels = np.arange(n, dtype=np.int64) % classes
    for idx in range(n):
        k = int(labels[idx])
        rng = np.random.default_rng([seed, idx])
        theta = np.pi * k / classes
        freq = 1.5 + 1.5 * k
        phase = rng.uniform(0, 2 * np.pi)
        u = np.cos(theta) * ii + np.sin(theta) * jj
        grating = np.sin(2 * np.pi * freq * u + phase)
        center = 0.5 + rng.uniform(-0.125, 0.125, size=2)
        envelope = np.exp(-(((ii - center[0]) ** 2 + (jj - center[1]) ** 2) / (2 * 0.25**2)))
        base = grating * envelope
        for ch in range(3):
            gain = 1.0 + 0.1 * rng.standard_normal()
            images[idx, :, :, ch] = gain * base + 0.05 * rng.standard_normal((size, size))
    return Dataset(images=images, labels=labels)
