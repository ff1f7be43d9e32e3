"""Measurement harnesses: latency, throughput, complexity scaling, resolution
compatibility, and spiral-trajectory emission.

Timing reports use median and MAD (median absolute deviation) over repeated
runs — robust to scheduler noise — and carry an environment stamp (thread
count, precision, library versions). Absolute numbers are machine-specific;
only scaling behaviour is asserted anywhere.
"""

from __future__ import annotations

import functools
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .offsets import SpiralConfig, spiral_offsets
from .spiral_fc import SpiralFC
from .train import Checkpoint, evaluate, restore_model

__all__ = [
    "env_stamp",
    "LatencyRow",
    "BenchReport",
    "latency_bench",
    "throughput_bench",
    "complexity_scan",
    "ComplexityReport",
    "resolution_compat",
    "trajectory_emit",
]


@functools.lru_cache(maxsize=1)
def env_stamp() -> tuple[tuple[str, str], ...]:
    """Per-session environment identification attached to every report."""
    threads = os.environ.get("SPIRALMLP_THREADS") or str(os.cpu_count())
    return (
        ("threads", threads),
        ("precision", "float32"),
        ("python", platform.python_version()),
        ("numpy", np.__version__),
        ("platform", sys.platform),
    )


def _stamp_lines() -> list[str]:
    return ["# " + " ".join(f"{k}={v}" for k, v in env_stamp())]


def _median_mad(samples: list[float]) -> tuple[float, float]:
    arr = np.asarray(samples)
    med = float(np.median(arr))
    return med, float(np.median(np.abs(arr - med)))


@dataclass
class BenchReport:
    header: str
    rows: list[tuple] = field(default_factory=list)
    stamp: tuple = field(default_factory=env_stamp)

    def to_csv(self) -> str:
        lines = _stamp_lines() + [self.header]
        lines += [",".join(str(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path: str) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.to_csv())


@dataclass(frozen=True)
class LatencyRow:
    model: str
    resolution: int
    median_ms: float
    mad_ms: float
    params: int
    flops: int


def latency_bench(model, name: str, resolutions, iters: int = 30, warmup: int = 5,
                  seed: int = 0) -> BenchReport:
    """Single-image forward latency per resolution (median/MAD over ``iters``)."""
    if iters < 1 or warmup < 0:
        raise ValueError(f"need iters >= 1 and warmup >= 0, got {iters}, {warmup}")
    report = BenchReport("model,resolution,median_ms,mad_ms,params,flops")
    rng = np.random.default_rng(seed)
    for res in resolutions:
        if res % 32:
            raise ValueError(f"resolution {res} not divisible by 32")
        x = rng.standard_normal((res, res, 3)).astype(np.float32)
        for _ in range(warmup):
            model.forward(x)
        samples = []
        for _ in range(iters):
            t0 = time.perf_counter()
            model.forward(x)
            samples.append((time.perf_counter() - t0) * 1e3)
        med, mad = _median_mad(samples)
        report.rows.append(LatencyRow(name, res, round(med, 4), round(mad, 4),
                                      model.param_count(), model.flops(res, res)))
    report.rows = [tuple(vars(r).values()) for r in report.rows]
    return report


def throughput_bench(model, name: str, batch_size: int = 32, resolution: int = 224,
                     duration: float | None = None, iters: int | None = 10,
                     seed: int = 0) -> BenchReport:
    """Sustained images/second over a fixed wall time or a fixed iteration count."""
    if (duration is None) == (iters is None):
        raise ValueError("exactly one of duration / iters must be set")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch_size, resolution, resolution, 3)).astype(np.float32)
    model.forward(x)  # warm caches
    images = 0
    t0 = time.perf_counter()
    if iters is not None:
        for _ in range(iters):
            model.forward(x)
            images += batch_size
    else:
        while time.perf_counter() - t0 < duration:
            model.forward(x)
            images += batch_size
    elapsed = time.perf_counter() - t0
    report = BenchReport("model,batch,resolution,images_per_sec,wall_s,images")
    report.rows.append((name, batch_size, resolution,
                        round(images / elapsed, 4), round(elapsed, 4), images))
    return report


@dataclass
class ComplexityReport:
    sizes: list[tuple[int, int]]
    macs: list[int]
    median_s: list[float]
    mac_exponent: float
    time_exponent: float

    def to_csv(self) -> str:
        lines = _stamp_lines() + ["h,w,macs,median_s"]
        lines += [f"{h},{w},{m},{t!r}" for (h, w), m, t in zip(self.sizes, self.macs, self.median_s)]
        lines.append(f"# mac_exponent={self.mac_exponent!r} time_exponent={self.time_exponent!r}")
        return "\n".join(lines) + "\n"


def complexity_scan(layer: SpiralFC, sizes, iters: int = 10, warmup: int = 3,
                    seed: int = 0) -> ComplexityReport:
    """Fit log(time) and log(MACs) against log(H*W) across spatial sizes.

    The analytic multiply-accumulate count is exactly linear in H*W (exponent
    1.0); the wall-clock exponent is an empirical estimate.
    """
    sizes = [(s, s) if isinstance(s, int) else tuple(s) for s in sizes]
    if len(sizes) < 4:
        raise ValueError(f"need at least 4 sizes, got {len(sizes)}")
    areas = [h * w for h, w in sizes]
    if max(areas) < 16 * min(areas):
        raise ValueError(f"sizes must span >= 16x in H*W, got {min(areas)}..{max(areas)}")
    rng = np.random.default_rng(seed)
    macs, med = [], []
    for h, w in sizes:
        x = rng.standard_normal((h, w, layer.c_in)).astype(np.float32)
        for _ in range(warmup):
            layer.forward(x)
        samples = []
        for _ in range(iters):
            t0 = time.perf_counter()
            layer.forward(x)
            samples.append(time.perf_counter() - t0)
        macs.append(layer.macs(h, w))
        med.append(float(np.median(samples)))
    log_area = np.log(np.asarray(areas, dtype=np.float64))
    mac_exp = float(np.polyfit(log_area, np.log(np.asarray(macs, dtype=np.float64)), 1)[0])
    time_exp = float(np.polyfit(log_area, np.log(np.asarray(med)), 1)[0])
    return ComplexityReport(sizes, macs, med, mac_exp, time_exp)


def resolution_compat(model_or_ckpt, resolutions, dataset_for=None,
                      batch_size: int = 64) -> BenchReport:
    """Evaluate one unmodified model at several input resolutions.

    ``dataset_for(resolution)`` supplies labeled data per resolution; without
    it the pass checks shapes and determinism only. Indivisible resolutions
    produce an error row and the scan continues.
    """
    model = restore_model(model_or_ckpt) if isinstance(model_or_ckpt, Checkpoint) else model_or_ckpt
    report = BenchReport("resolution,status,top1,deterministic")
    for res in resolutions:
        if res % 32:
            report.rows.append((res, f"error: resolution {res} not divisible by 32", "", ""))
            continue
        if dataset_for is not None:
            ds = dataset_for(res)
            top1 = evaluate(model, ds, batch_size)
            probe = ds.images[: min(4, len(ds))]
        else:
            top1 = ""
            probe = np.zeros((1, res, res, 3), dtype=np.float32)
        first = model.forward(probe.astype(model.dtype, copy=False))
        second = model.forward(probe.astype(model.dtype, copy=False))
        deterministic = bool(np.array_equal(first, second))
        top1_text = repr(float(top1)) if top1 != "" else ""
        report.rows.append((res, "ok", top1_text, deterministic))
    return report


# -- trajectory emission -------------------------------------------------------

def trajectory_emit(cfg: SpiralConfig, fmt: str, path: str) -> str:
    """Write the spiral offset trajectory as CSV rows or an SVG figure."""
    table = spiral_offsets(cfg)
    if fmt == "csv":
        table.to_csv(path)
    elif fmt == "svg":
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(_trajectory_svg(cfg, table))
    else:
        raise ValueError(f"format must be 'csv' or 'svg', got {fmt!r}")
    return path


def _trajectory_svg(cfg: SpiralConfig, table, cell: int = 40) -> str:
    extent = max(cfg.a_max, 1) + 1
    span = 2 * extent * cell
    mid = extent * cell

    def sx(dj):
        return mid + dj * cell

    def sy(di):
        return mid + di * cell

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{span}" height="{span}" '
        f'viewBox="0 0 {span} {span}">',
        f'<rect width="{span}" height="{span}" fill="white"/>',
    ]
    for k in range(-extent, extent + 1):
        color = "#888888" if k == 0 else "#dddddd"
        parts.append(f'<line x1="{sx(k)}" y1="0" x2="{sx(k)}" y2="{span}" stroke="{color}"/>')
        parts.append(f'<line x1="0" y1="{sy(k)}" x2="{span}" y2="{sy(k)}" stroke="{color}"/>')
    points = " ".join(f"{sx(dj):.2f},{sy(di):.2f}" for di, dj in table.dphi)
    parts.append(f'<polyline points="{points}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    for di, dj in table.rounded:
        parts.append(f'<circle cx="{sx(int(dj))}" cy="{sy(int(di))}" r="4" fill="#d62728"/>')
    parts.append(
        f'<text x="4" y="14" font-size="12" fill="#444444">'
        f"c_in={cfg.c_in} a_max={cfg.a_max} T={cfg.period} k={cfg.partitions}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
