"""Dataset loading (IDX container format) and input-size fitting.

IDX is the big-endian binary format used by the classic digit datasets:
magic 0x00000803 for uint8 image stacks, 0x00000801 for uint8 label vectors.
Pixels are rescaled to [0,1] on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .layers import avg_pool_regions
from .regions import Mode, build_regions, pseudorandom_sequence

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """The file is not a well-formed IDX container."""


@dataclass
class Dataset:
    """Images as float64 (N, H, W, C) in [0,1] plus integer labels."""

    images: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(
                f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and self.labels.max() >= self.class_count:
            raise ValueError("label outside class range")

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.images[indices], self.labels[indices], self.class_count)


def _read_exact(f, n: int, path) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise IdxFormatError(f"{path}: truncated file (wanted {n} bytes, got {len(data)})")
    return data


def load_idx(images_path, labels_path, class_count: int = 10) -> Dataset:
    """Load an image/label IDX pair into a Dataset."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    with open(images_path, "rb") as f:
        magic, count, h, w = struct.unpack(">IIII", _read_exact(f, 16, images_path))
        if magic != IMAGES_MAGIC:
            raise IdxFormatError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")
        raw = _read_exact(f, count * h * w, images_path)
    images = np.frombuffer(raw, dtype=np.uint8).reshape(count, h, w, 1).astype(np.float64) / 255.0
    with open(labels_path, "rb") as f:
        magic, lcount = struct.unpack(">II", _read_exact(f, 8, labels_path))
        if magic != LABELS_MAGIC:
            raise IdxFormatError(f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")
        lraw = _read_exact(f, lcount, labels_path)
    labels = np.frombuffer(lraw, dtype=np.uint8).astype(np.int64)
    if count != lcount:
        raise IdxFormatError(f"image count {count} != label count {lcount}")
    return Dataset(images, labels, class_count)


def save_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write uint8 images (N,H,W) or (N,H,W,1) plus labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim == 4:
        images = images[..., 0]
    n, h, w = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, n, h, w))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def pad_to_input(image: np.ndarray, input_size: int) -> np.ndarray:
    """Center an image in an input_size square of zeros.

    When the leftover border is odd, the extra zero row/column goes to the
    bottom/right.  Accepts (H,W,C) or batched (B,H,W,C).
    """
    h, w = image.shape[-3], image.shape[-2]
    if h > input_size or w > input_size:
        raise ValueError(f"image {h}x{w} larger than input size {input_size}")
    top = (input_size - h) // 2
    left = (input_size - w) // 2
    pad = [(0, 0)] * (image.ndim - 3) + [
        (top, input_size - h - top),
        (left, input_size - w - left),
        (0, 0),
    ]
    return np.pad(image, pad)


def _shrink_axis(n_in: int, target: int) -> int:
    # one average-pooling step may shrink by at most 3x
    return max(target, -(-n_in // 3))


def fit_to_input(images: np.ndarray, input_size: int) -> np.ndarray:
    """Make images match the network input size.

    Oversized images are first reduced by deterministic average pooling over
    pseudorandom disjoint regions (u = 1/2, a faithful rescale), then padded
    with zeros.  Undersized images are only padded.
    """
    h, w = images.shape[-3], images.shape[-2]
    while h > input_size or w > input_size:
        nh = _shrink_axis(h, input_size) if h > input_size else h
        nw = _shrink_axis(w, input_size) if w > input_size else w
        rows = pseudorandom_sequence(h, nh, Fraction(1, 2))  # nh == h gives the identity
        cols = pseudorandom_sequence(w, nw, Fraction(1, 2))
        grid = build_regions(rows, cols, Mode.DISJOINT)
        images = avg_pool_regions(images, grid)
        h, w = nh, nw
    return pad_to_input(images, input_size)
