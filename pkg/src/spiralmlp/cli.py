"""Command-line entry points: training, evaluation, and benchmarks.

Config files are JSON with three sections (see README for the full schema):

    {"model": {"preset": "tiny-desk", "num_classes": 2},
     "train": {"lr": 1e-3, "epochs": 2, "batch_size": 32, "seed": 0},
     "data":  {"kind": "synth", "n": 512, "classes": 2, "size": 64, "seed": 0}}

``model`` either names a preset or spells out the four stages; ``data`` is
either a synthetic-task spec or ``{"kind": "cifar10", "dir": ...}``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _load_config(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if "model" not in raw:
        raise ValueError(f"{path}: config must contain a 'model' section")
    from .model import config_from_dict
    from .train import TrainConfig

    model_cfg = config_from_dict(raw["model"])
    train_kwargs = dict(raw.get("train", {}))
    unknown = set(train_kwargs) - {
        "lr", "weight_decay", "beta1", "beta2", "epochs", "batch_size",
        "seed", "schedule", "warmup_epochs", "precision",
    }
    if unknown:
        raise ValueError(f"{path}: unknown train keys {sorted(unknown)}")
    return TrainConfig(model=model_cfg, **train_kwargs), raw.get("data", {})


def _make_dataset(data_arg: str | None, data_spec: dict, num_classes: int, split: str):
    from .data import load_cifar10, synth_dataset

    spec = dict(data_spec)
    if data_arg and data_arg != "synth":
        spec = {"kind": "cifar10", "dir": data_arg}
    kind = spec.get("kind", "synth")
    if kind == "synth":
        seed = int(spec.get("seed", 0))
        if split == "test":
            seed += 1_000_000  # disjoint draw for held-out data
        return synth_dataset(
            seed=seed,
            n=int(spec.get("n", 512)),
            classes=int(spec.get("classes", num_classes)),
            size=int(spec.get("size", 64)),
        )
    if kind == "cifar10":
        return load_cifar10(spec["dir"], split=split)
    raise ValueError(f"unknown data kind {kind!r}")


def _cmd_train(args) -> int:
    from .train import train

    cfg, data_spec = _load_config(args.config)
    dataset = _make_dataset(args.data, data_spec, cfg.model.num_classes, "train")
    rows, _ = train(cfg, dataset, out_dir=args.out, log=print)
    summaries = [r for r in rows if r.top1 is not None]
    if summaries:
        last = summaries[-1]
        print(f"done: {len(rows)} logged steps, final train top1 {last.top1:.4f}")
    print(f"wrote {os.path.join(args.out, 'metrics.csv')} and checkpoint.ckpt")
    return 0


def _cmd_eval(args) -> int:
    from .model import config_from_dict
    from .train import checkpoint_load, evaluate

    ckpt = checkpoint_load(args.ckpt)
    num_classes = config_from_dict(ckpt.model_config).num_classes
    spec = {"kind": "synth", "n": args.synth_n, "size": args.synth_size,
            "seed": args.synth_seed, "classes": num_classes}
    dataset = _make_dataset(args.data, spec, num_classes, args.split)
    top1 = evaluate(ckpt, dataset, batch_size=args.batch_size)
    print(f"top1 {top1:.4f} over {len(dataset)} samples")
    return 0


def _emit(report, out: str | None) -> None:
    if out:
        report.write(out)
        print(f"wrote {out}")
    else:
        sys.stdout.write(report.to_csv())


def _bench_model(args):
    from .model import build, preset

    return build(preset(args.preset, args.num_classes), seed=args.seed), args.preset


def _cmd_bench(args) -> int:
    import numpy as np

    from . import bench
    from .offsets import SpiralConfig

    if args.bench_cmd == "latency":
        model, name = _bench_model(args)
        report = bench.latency_bench(model, name, args.resolutions,
                                     iters=args.iters, warmup=args.warmup, seed=args.seed)
        _emit(report, args.out)
    elif args.bench_cmd == "throughput":
        model, name = _bench_model(args)
        duration = args.duration if args.iters is None else None
        report = bench.throughput_bench(model, name, batch_size=args.batch,
                                        resolution=args.resolution,
                                        duration=duration, iters=args.iters, seed=args.seed)
        _emit(report, args.out)
    elif args.bench_cmd == "complexity":
        from .offsets import spiral_offsets
        from .spiral_fc import SpiralFC

        cfg = SpiralConfig(c_in=args.c_in, a_max=args.a_max,
                           period=args.period, partitions=args.partitions)
        layer = SpiralFC(spiral_offsets(cfg), args.c_out,
                         rng=np.random.default_rng(args.seed))
        report = bench.complexity_scan(layer, args.sizes, iters=args.iters, seed=args.seed)
        print(f"mac exponent {report.mac_exponent:.6f}, "
              f"wall-clock exponent {report.time_exponent:.3f}")
        if args.out:
            with open(args.out, "w", encoding="ascii", newline="\n") as fh:
                fh.write(report.to_csv())
            print(f"wrote {args.out}")
    elif args.bench_cmd == "resolution":
        from .data import synth_dataset
        from .model import config_from_dict
        from .train import checkpoint_load

        ckpt = checkpoint_load(args.ckpt)
        dataset_for = None
        if args.data == "synth":
            classes = config_from_dict(ckpt.model_config).num_classes

            def dataset_for(res):
                return synth_dataset(seed=args.synth_seed, n=args.synth_n,
                                     classes=classes, size=res)

        report = bench.resolution_compat(ckpt, args.resolutions, dataset_for)
        _emit(report, args.out)
    elif args.bench_cmd == "trace":
        cfg = SpiralConfig(c_in=args.c_in, a_max=args.a_max,
                           period=args.period, partitions=args.partitions)
        bench.trajectory_emit(cfg, args.format, args.out)
        print(f"wrote {args.out}")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _add_bench_model_args(p) -> None:
    p.add_argument("--preset", default="tiny-desk")
    p.add_argument("--num-classes", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spiralmlp",
        description="SpiralMLP training, evaluation, and benchmark harness",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--data", default=None, help="'synth' or a CIFAR-10 binary directory")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", default="synth")
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--synth-n", type=int, default=512)
    p.add_argument("--synth-size", type=int, default=64)
    p.add_argument("--synth-seed", type=int, default=0)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("bench", help="measurement harnesses")
    bsub = p.add_subparsers(dest="bench_cmd", required=True)

    b = bsub.add_parser("latency")
    _add_bench_model_args(b)
    b.add_argument("--resolutions", type=_int_list, default=[224])
    b.add_argument("--iters", type=int, default=30)
    b.add_argument("--warmup", type=int, default=5)
    b.add_argument("--out", default=None)
    b.set_defaults(fn=_cmd_bench)

    b = bsub.add_parser("throughput")
    _add_bench_model_args(b)
    b.add_argument("--batch", type=int, default=32)
    b.add_argument("--resolution", type=int, default=224)
    b.add_argument("--iters", type=int, default=10)
    b.add_argument("--duration", type=float, default=None)
    b.add_argument("--out", default=None)
    b.set_defaults(fn=_cmd_bench)

    b = bsub.add_parser("complexity")
    b.add_argument("--sizes", type=_int_list, default=[32, 64, 128, 256, 512])
    b.add_argument("--c-in", type=int, default=16)
    b.add_argument("--c-out", type=int, default=16)
    b.add_argument("--a-max", type=int, default=3)
    b.add_argument("--period", type=int, default=8)
    b.add_argument("--partitions", type=int, default=1)
    b.add_argument("--iters", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None)
    b.set_defaults(fn=_cmd_bench)

    b = bsub.add_parser("resolution")
    b.add_argument("--ckpt", required=True)
    b.add_argument("--resolutions", type=_int_list, default=[64, 96, 128])
    b.add_argument("--data", default="synth", choices=("synth", "none"))
    b.add_argument("--synth-n", type=int, default=256)
    b.add_argument("--synth-seed", type=int, default=1)
    b.add_argument("--out", default=None)
    b.set_defaults(fn=_cmd_bench)

    b = bsub.add_parser("trace")
    b.add_argument("--c-in", type=int, default=20)
    b.add_argument("--a-max", type=int, default=3)
    b.add_argument("--period", type=int, default=8)
    b.add_argument("--partitions", type=int, default=1)
    b.add_argument("--format", default="svg", choices=("csv", "svg"))
    b.add_argument("--out", required=True)
    b.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
