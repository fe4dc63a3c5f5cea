"""Minimal binary PPM (P6) reader/writer.

Handles '#' comments and arbitrary whitespace in the header; only 8-bit
(maxval <= 255) images are supported.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class PpmFormatError(ValueError):
    """The file is not a well-formed binary PPM."""


def _header_tokens(data: bytes, path):
    """Yield header tokens, skipping comments; returns (tokens, body offset)."""
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise PpmFormatError(f"{path}: truncated header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            start = i
            while i < len(data) and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
                i += 1
            tokens.append(data[start:i])
    # exactly one whitespace byte separates the header from the pixel data
    return tokens, i + 1


def read_ppm(path) -> np.ndarray:
    """Read a P6 file into a uint8 (H, W, 3) array."""
    data = Path(path).read_bytes()
    tokens, offset = _header_tokens(data, path)
    if tokens[0] != b"P6":
        raise PpmFormatError(f"{path}: expected P6 magic, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise PpmFormatError(f"{path}: non-numeric header field") from e
    if maxval <= 0 or maxval > 255:
        raise PpmFormatError(f"{path}: unsupported maxval {maxval}")
    n = width * height * 3
    body = data[offset : offset + n]
    if len(body) != n:
        raise PpmFormatError(f"{path}: truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3).copy()


def write_ppm(path, image: np.ndarray):
    """Write a uint8 (H, W, 3) array as a P6 file."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {image.shape}")
    image = np.clip(np.round(image), 0, 255).astype(np.uint8)
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(image.tobytes())
