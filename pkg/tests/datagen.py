"""Synthetic 28x28 digit dataset for the desk-scale training tests.

Real MNIST files cannot be fetched in this environment, so we render digits
0-9 with a handful of system fonts under random shift/rotation/scale jitter
plus pixel noise, and write them through the same IDX container format the
trainer consumes.  White glyph on black background, like the classic set.
"""

from __future__ import annotations

import glob
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from fmpnet.data import Dataset, load_idx, save_idx

_FONT_DIRS = [
    "/usr/local/lib/python3.10/dist-packages/matplotlib/mpl-data/fonts/ttf",
    "/usr/share/fonts/truetype/dejavu",
]
_FONT_NAMES = ["DejaVuSans.ttf", "DejaVuSans-Bold.ttf", "DejaVuSerif.ttf",
               "DejaVuSansMono.ttf", "DejaVuSerif-Bold.ttf"]


@lru_cache(maxsize=None)
def _font_paths() -> list[str]:
    paths = []
    for d in _FONT_DIRS:
        for name in _FONT_NAMES:
            paths.extend(glob.glob(f"{d}/{name}"))
    if not paths:
        raise RuntimeError("no usable .ttf fonts found for the synthetic dataset")
    return paths


def render_digit(digit: int, rng: np.random.Generator, size: int = 28) -> np.ndarray:
    """One uint8 (size, size) image of a jittered digit glyph."""
    font_path = _font_paths()[rng.integers(len(_font_paths()))]
    font = ImageFont.truetype(font_path, int(rng.integers(17, 25)))
    canvas = Image.new("L", (size * 2, size * 2), 0)
    draw = ImageDraw.Draw(canvas)
    draw.text((size, size), str(digit), fill=255, font=font, anchor="mm")
    canvas = canvas.rotate(float(rng.uniform(-14, 14)), resample=Image.BILINEAR)
    dx, dy = rng.integers(-3, 4, size=2)
    left = size // 2 + int(dx)
    top = size // 2 + int(dy)
    img = np.asarray(canvas)[top : top + size, left : left + size].astype(np.float64)
    img += rng.normal(0, 12, img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def make_digits(n: int, seed: int, size: int = 28) -> tuple[np.ndarray, np.ndarray]:
    """n images with balanced, shuffled labels."""
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % 10).astype(np.uint8)
    images = np.stack([render_digit(int(d), rng, size) for d in labels])
    return images, labels


def digit_dataset_dir(root: Path, n_train: int = 2000, n_test: int = 1000,
                      seed: int = 20240901) -> Path:
    """Write (or reuse) an IDX dataset directory under `root`."""
    out = Path(root) / f"digits_{n_train}_{n_test}_{seed}"
    if not (out / "t10k-labels-idx1-ubyte").exists():
        out.mkdir(parents=True, exist_ok=True)
        tr_x, tr_y = make_digits(n_train, seed)
        te_x, te_y = make_digits(n_test, seed + 1)
        save_idx(tr_x, tr_y, out / "train-images-idx3-ubyte", out / "train-labels-idx1-ubyte")
        save_idx(te_x, te_y, out / "t10k-images-idx3-ubyte", out / "t10k-labels-idx1-ubyte")
    return out


def load_digit_datasets(root: Path, n_train: int = 2000, n_test: int = 1000,
                        seed: int = 20240901) -> tuple[Dataset, Dataset]:
    d = digit_dataset_dir(root, n_train, n_test, seed)
    train = load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    test = load_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")
    return train, test
