"""Generation of pooling regions for fractional max-pooling.

A pooling layer that shrinks an n_in x n_in grid to n_out x n_out is defined
by two increasing integer boundary sequences, one per axis.  Sequences can be
drawn randomly (a shuffled multiset of increments) or pseudorandomly (a
ceiling formula driven by a single offset u).  A pair of sequences is then
materialized into a grid of rectangles, either disjoint (a partition of the
input) or overlapping (neighbours share a boundary row/column).

Boundary convention: bounds[0] = 1 and bounds[n_out] = n_in + 1, so that the
increments sum to n_in and the disjoint rectangles tile {1..n_in} exactly.
All rectangle coordinates are 1-based and inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np


class InvalidRatioError(ValueError):
    """n_in/n_out is outside the supported (1,3] pooling ratio ranges."""


class InvalidParameterError(ValueError):
    """A generator parameter (e.g. the pseudorandom offset u) is out of range."""


class Mode(Enum):
    DISJOINT = "disjoint"
    OVERLAPPING = "overlap"


@dataclass(frozen=True)
class Random:
    """Increments drawn as a uniformly random permutation of the forced multiset."""


@dataclass(frozen=True)
class Pseudorandom:
    """Increments from the ceiling formula; u is fixed if given, else drawn per use."""

    u: float | Fraction | None = None

    def __post_init__(self):
        if self.u is not None and not (0 < self.u < 1):
            raise InvalidParameterError(f"offset u must lie strictly in (0,1), got {self.u}")


GeneratorKind = Random | Pseudorandom


def increment_profile(n_in: int, n_out: int) -> tuple[int, int, int]:
    """Return (small, large, count_of_large) for the admissible increment multiset.

    Ratios in [1,2] use increments {1,2} with exactly n_in - n_out twos;
    ratios in (2,3] use increments {2,3} with exactly n_in - 2*n_out threes.
    """
    if n_out < 1:
        raise InvalidRatioError(f"n_out must be >= 1, got {n_out}")
    if n_out <= n_in <= 2 * n_out:
        return 1, 2, n_in - n_out
    if 2 * n_out < n_in <= 3 * n_out:
        return 2, 3, n_in - 2 * n_out
    raise InvalidRatioError(
        f"n_in={n_in}, n_out={n_out}: ratio {n_in}/{n_out} outside [1,2] and (2,3]"
    )


@dataclass(frozen=True)
class PoolingSequence:
    """Increasing boundary sequence for one axis of a pooling-region grid."""

    bounds: tuple[int, ...]
    n_in: int
    n_out: int

    def __post_init__(self):
        small, large, n_large = increment_profile(self.n_in, self.n_out)
        if len(self.bounds) != self.n_out + 1:
            raise ValueError(f"expected {self.n_out + 1} bounds, got {len(self.bounds)}")
        if self.bounds[0] != 1:
            raise ValueError(f"bounds must start at 1, got {self.bounds[0]}")
        if self.bounds[-1] != self.n_in + 1:
            raise ValueError(f"bounds must end at n_in+1={self.n_in + 1}, got {self.bounds[-1]}")
        incs = self.increments
        if any(d not in (small, large) for d in incs):
            raise ValueError(f"increments must lie in {{{small},{large}}}, got {incs}")
        if incs.count(large) != n_large:
            raise ValueError(f"expected exactly {n_large} increments of {large}, got {incs.count(large)}")

    @property
    def increments(self) -> list[int]:
        return [b - a for a, b in zip(self.bounds, self.bounds[1:])]


def random_sequence(n_in: int, n_out: int, rng: np.random.Generator) -> PoolingSequence:
    """Boundary sequence with the forced increments in uniformly random order."""
    small, large, n_large = increment_profile(n_in, n_out)
    incs = np.array([large] * n_large + [small] * (n_out - n_large), dtype=np.int64)
    incs = rng.permutation(incs)
    bounds = np.concatenate(([1], 1 + np.cumsum(incs)))
    return PoolingSequence(tuple(int(b) for b in bounds), n_in, n_out)


def pseudorandom_sequence(n_in: int, n_out: int, u: float | Fraction) -> PoolingSequence:
    """Deterministic boundary sequence c_i = ceiling((n_in/n_out) * (i + u)).

    Evaluated in exact rational arithmetic, so the increments telescope to
    exactly n_in for every u in (0,1).  Bounds are shifted so bounds[0] = 1.
    """
    increment_profile(n_in, n_out)  # validates the ratio
    if not (0 < u < 1):
        raise InvalidParameterError(f"offset u must lie strictly in (0,1), got {u}")
    uf = Fraction(u)
    p, q = uf.numerator, uf.denominator
    den = n_out * q

    def ceil_c(i: int) -> int:
        num = n_in * (i * q + p)
        return -(-num // den)

    c0 = ceil_c(0)
    bounds = tuple(ceil_c(i) - c0 + 1 for i in range(n_out + 1))
    return PoolingSequence(bounds, n_in, n_out)


def uniform_sequence(n_in: int, step: int) -> PoolingSequence:
    """The unique all-`step` sequence; step=2 gives the standard MP2 tiling."""
    if n_in % step != 0:
        raise ValueError(f"n_in={n_in} not divisible by step={step}")
    n_out = n_in // step
    return PoolingSequence(tuple(range(1, n_in + 2, step)), n_in, n_out)


@dataclass(frozen=True)
class RegionGrid:
    """A family of pooling rectangles built from a row and a column sequence.

    regions has shape (rows.n_out, cols.n_out, 4), each entry the inclusive
    1-based rectangle (row_lo, row_hi, col_lo, col_hi).
    """

    rows: PoolingSequence
    cols: PoolingSequence
    mode: Mode
    regions: np.ndarray

    @property
    def n_out_rows(self) -> int:
        return self.rows.n_out

    @property
    def n_out_cols(self) -> int:
        return self.cols.n_out


def build_regions(rows: PoolingSequence, cols: PoolingSequence, mode: Mode) -> RegionGrid:
    """Materialize boundary sequences into rectangles.

    Disjoint: rectangle (i,j) spans [a_{i-1}, a_i - 1] x [b_{j-1}, b_j - 1].
    Overlapping: spans [a_{i-1}, a_i] x [b_{j-1}, b_j], with the final
    boundary clamped to n_in so every rectangle stays in range.
    """
    ra = rows.bounds
    ca = cols.bounds
    regions = np.empty((rows.n_out, cols.n_out, 4), dtype=np.int64)
    for i in range(rows.n_out):
        if mode is Mode.DISJOINT:
            r_lo, r_hi = ra[i], ra[i + 1] - 1
        else:
            r_lo, r_hi = ra[i], min(ra[i + 1], rows.n_in)
        for j in range(cols.n_out):
            if mode is Mode.DISJOINT:
                c_lo, c_hi = ca[j], ca[j + 1] - 1
            else:
                c_lo, c_hi = ca[j], min(ca[j + 1], cols.n_in)
            regions[i, j] = (r_lo, r_hi, c_lo, c_hi)
    return RegionGrid(rows, cols, mode, regions)


def sample_region_grid(
    n_in: int,
    n_out: int,
    kind: GeneratorKind,
    mode: Mode,
    rng: np.random.Generator,
    n_in_cols: int | None = None,
    n_out_cols: int | None = None,
) -> RegionGrid:
    """Draw a fresh region grid; row and column sequences are independent.

    For the pseudorandom kind with u unset, independent offsets are drawn for
    the two axes.  Rectangular grids are allowed via the *_cols overrides.
    """
    n_in_c = n_in if n_in_cols is None else n_in_cols
    n_out_c = n_out if n_out_cols is None else n_out_cols
    if isinstance(kind, Random):
        rows = random_sequence(n_in, n_out, rng)
        cols = random_sequence(n_in_c, n_out_c, rng)
    elif isinstance(kind, Pseudorandom):
        u_r = kind.u if kind.u is not None else rng.uniform()
        u_c = kind.u if kind.u is not None else rng.uniform()
        rows = pseudorandom_sequence(n_in, n_out, u_r)
        cols = pseudorandom_sequence(n_in_c, n_out_c, u_c)
    else:
        raise TypeError(f"unknown generator kind: {kind!r}")
    return build_regions(rows, cols, mode)


def occupancy(grid: RegionGrid) -> np.ndarray:
    """Count how many regions cover each input cell (brute force)."""
    counts = np.zeros((grid.rows.n_in, grid.cols.n_in), dtype=np.int64)
    for i in range(grid.n_out_rows):
        for j in range(grid.n_out_cols):
            r_lo, r_hi, c_lo, c_hi = grid.regions[i, j]
            counts[r_lo - 1 : r_hi, c_lo - 1 : c_hi] += 1
    return counts


def region_image(grid: RegionGrid, scale: int = 8) -> np.ndarray:
    """Render a grid as an RGB image for visual inspection.

    Disjoint grids get one flat color per region; overlapping grids get
    black rectangle outlines on white.  Returns uint8 (H*scale, W*scale, 3).
    """
    h, w = grid.rows.n_in * scale, grid.cols.n_in * scale
    img = np.full((h, w, 3), 255, dtype=np.uint8)
    palette_rng = np.random.default_rng(12345)
    for i in range(grid.n_out_rows):
        for j in range(grid.n_out_cols):
            r_lo, r_hi, c_lo, c_hi = (int(v) for v in grid.regions[i, j])
            top, bot = (r_lo - 1) * scale, r_hi * scale
            left, right = (c_lo - 1) * scale, c_hi * scale
            if grid.mode is Mode.DISJOINT:
                img[top:bot, left:right] = palette_rng.integers(48, 232, size=3)
            else:
                img[top:bot, left : left + 1] = 0
                img[top:bot, right - 1 : right] = 0
                img[top : top + 1, left:right] = 0
                img[bot - 1 : bot, left:right] = 0
    return img
