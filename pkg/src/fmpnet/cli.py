"""Command-line front end.

Subcommands: sizes (layer-size table for a network string), train, eval
(error rate with repeated-pass voting), distort (iterated average pooling
over random regions, the elastic-distortion demo), and regions (render one
sampled region grid as a PPM image).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .data import load_idx
from .layers import avg_pool_regions
from .netspec import (
    ConvSpec,
    FmpSpec,
    Mp2Spec,
    OutputSpec,
    _parse_alpha,
    compute_sizes,
    nearest_int,
    parse_spec,
)
from .ppm import read_ppm, write_ppm
from .regions import (
    Mode,
    Pseudorandom,
    Random,
    build_regions,
    pseudorandom_sequence,
    random_sequence,
    region_image,
    sample_region_grid,
)
from .train import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train


def _layer_text(layer) -> str:
    if isinstance(layer, ConvSpec):
        return f"{layer.filters}C{layer.filter_size}"
    if isinstance(layer, FmpSpec):
        return f"FMP({layer.alpha})"
    if isinstance(layer, Mp2Spec):
        return "MP2"
    return "output"


def cmd_sizes(args) -> int:
    spec = compute_sizes(parse_spec(args.spec))
    print(f"{'layer':>16} {'size':>6} {'filters':>8}")
    for layer, size in zip(reversed(spec.layers), reversed(spec.spatial_sizes)):
        filters = str(layer.filters) if isinstance(layer, ConvSpec) else "-"
        print(f"{_layer_text(layer):>16} {size:>6} {filters:>8}")
    print(f"input layer size: {spec.input_size}x{spec.input_size}")
    return 0


def _load_pair(data_dir: Path, prefix: str):
    return load_idx(data_dir / f"{prefix}-images-idx3-ubyte",
                    data_dir / f"{prefix}-labels-idx1-ubyte")


def cmd_train(args) -> int:
    config = TrainConfig(
        spec_text=args.spec, epochs=args.epochs, batch_size=args.batch,
        learning_rate=args.lr, lr_decay=args.lr_decay, momentum=args.momentum,
        seed=args.seed)
    data_dir = Path(args.data)
    dataset = _load_pair(data_dir, "train")
    if args.train_limit:
        dataset = dataset.subset(slice(args.train_limit))
    test_dataset = None
    if (data_dir / "t10k-images-idx3-ubyte").exists():
        test_dataset = _load_pair(data_dir, "t10k")
        if args.test_limit:
            test_dataset = test_dataset.subset(slice(args.test_limit))
    ckpt, metrics = train(config, dataset, test_dataset, metrics_path=args.metrics)
    for line in metrics:
        print(line)
    save_checkpoint(ckpt, args.out)
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    data_dir = Path(args.data)
    prefix = "t10k" if (data_dir / "t10k-images-idx3-ubyte").exists() else "train"
    dataset = _load_pair(data_dir, prefix)
    if args.test_limit:
        dataset = dataset.subset(slice(args.test_limit))
    err1 = evaluate(ckpt, dataset, repeats=1, seed=args.seed)
    print(f"error rate, 1 test:  {err1:.4f}")
    if args.repeats > 1:
        err_n = evaluate(ckpt, dataset, repeats=args.repeats, seed=args.seed)
        print(f"error rate, {args.repeats} tests: {err_n:.4f}")
    return 0


def cmd_distort(args) -> int:
    alpha = _parse_alpha(args.alpha, "--alpha").value
    if alpha > 2:
        raise ValueError(f"--alpha must lie in (1,2], got {alpha:g}")
    if args.layers < 1:
        raise ValueError("--layers must be >= 1")
    rng = np.random.default_rng(args.seed)
    image = read_ppm(getattr(args, "in")).astype(np.float64) / 255.0
    h, w = image.shape[:2]
    for _ in range(args.layers):
        nh, nw = nearest_int(h / alpha), nearest_int(w / alpha)
        if nh < 1 or nw < 1:
            raise ValueError(f"image side would drop below 1 (from {h}x{w})")
        if args.kind == "random":
            rows = random_sequence(h, nh, rng)
            cols = random_sequence(w, nw, rng)
        else:
            rows = pseudorandom_sequence(h, nh, rng.uniform())
            cols = pseudorandom_sequence(w, nw, rng.uniform())
        image = avg_pool_regions(image, build_regions(rows, cols, Mode.DISJOINT))
        h, w = nh, nw
    write_ppm(args.out, image * 255.0)
    print(f"wrote {w}x{h} image to {args.out}")
    return 0


def cmd_regions(args) -> int:
    kind = Random() if args.kind == "random" else Pseudorandom()
    grid = sample_region_grid(args.nin, args.nout, kind, Mode(args.mode),
                              np.random.default_rng(args.seed))
    write_ppm(args.out, region_image(grid))
    print(f"wrote region grid image to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmpnet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sizes", help="print the layer-size table for a network string")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_sizes)

    p = sub.add_parser("train", help="train a network on an IDX dataset directory")
    p.add_argument("--spec", required=True)
    p.add_argument("--data", required=True, help="directory with train-*/t10k-* IDX files")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lr-decay", type=float, default=0.9)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-limit", type=int, default=0)
    p.add_argument("--test-limit", type=int, default=0)
    p.add_argument("--metrics", default=None, help="write per-epoch metrics CSV here")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint with repeated-pass voting")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--repeats", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-limit", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("distort", help="iterated random average pooling of a P6 image")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", default="2^1/2", help="per-layer shrink ratio, e.g. 2^1/2 or 1.5")
    p.add_argument("--layers", type=int, default=6)
    p.add_argument("--kind", choices=("random", "pseudo"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("regions", help="render one sampled pooling-region grid")
    p.add_argument("--nin", type=int, required=True)
    p.add_argument("--nout", type=int, required=True)
    p.add_argument("--kind", choices=("random", "pseudo"), default="pseudo")
    p.add_argument("--mode", choices=("disjoint", "overlap"), default="disjoint")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regions)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
