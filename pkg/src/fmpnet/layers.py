"""Dense tensor layers: valid convolution, region max/average pooling,
leaky rectifier, dropout and a softmax classifier head.

Feature maps are float64 numpy arrays in (height, width, channels) layout;
every operation also accepts an extra leading batch dimension
(batch, height, width, channels) and treats it elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regions import Mode, RegionGrid


class ShapeError(ValueError):
    """Tensor dimensions do not match what the layer expects."""


def _check_hwc(x: np.ndarray) -> tuple[int, int, int]:
    if x.ndim not in (3, 4):
        raise ShapeError(f"expected (H,W,C) or (B,H,W,C) tensor, got shape {x.shape}")
    return x.shape[-3], x.shape[-2], x.shape[-1]


@dataclass
class ConvLayer:
    """A bank of filter_size x filter_size filters applied as a valid convolution.

    weights has shape (filter_size, filter_size, in_channels, out_channels).
    """

    filter_size: int
    in_channels: int
    out_channels: int
    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def initialize(cls, filter_size: int, in_channels: int, out_channels: int,
                   rng: np.random.Generator, leaky_slope: float = 1.0 / 3.0) -> "ConvLayer":
        # zero-mean uniform, variance 2/((1+slope^2)*fan_in) so the signal
        # scale survives deep stacks of leaky-rectified layers; zero bias
        fan_in = filter_size * filter_size * in_channels
        gain = 2.0 / (1.0 + leaky_slope**2)
        bound = np.sqrt(3.0 * gain / fan_in)
        w = rng.uniform(-bound, bound, size=(filter_size, filter_size, in_channels, out_channels))
        return cls(filter_size, in_channels, out_channels, w, np.zeros(out_channels))


def conv_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Valid convolution: output side = input side - filter_size + 1."""
    h, w, c = _check_hwc(x)
    f = layer.filter_size
    if c != layer.in_channels:
        raise ShapeError(f"input has {c} channels, layer expects {layer.in_channels}")
    if h < f or w < f:
        raise ShapeError(f"input {h}x{w} smaller than filter size {f}")
    ho, wo = h - f + 1, w - f + 1
    out = np.zeros(x.shape[:-3] + (ho, wo, layer.out_channels))
    for di in range(f):
        for dj in range(f):
            out += x[..., di : di + ho, dj : dj + wo, :] @ layer.weights[di, dj]
    out += layer.bias
    return out


def conv_backward(x: np.ndarray, layer: ConvLayer, grad_out: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. the input, weights and bias."""
    h, w, c = _check_hwc(x)
    f = layer.filter_size
    ho, wo = h - f + 1, w - f + 1
    if grad_out.shape != x.shape[:-3] + (ho, wo, layer.out_channels):
        raise ShapeError(f"grad_out shape {grad_out.shape} does not match conv output")
    grad_x = np.zeros_like(x)
    grad_w = np.zeros_like(layer.weights)
    go_flat = grad_out.reshape(-1, layer.out_channels)
    for di in range(f):
        for dj in range(f):
            patch = x[..., di : di + ho, dj : dj + wo, :]
            grad_w[di, dj] = patch.reshape(-1, c).T @ go_flat
            grad_x[..., di : di + ho, dj : dj + wo, :] += grad_out @ layer.weights[di, dj].T
    grad_b = go_flat.sum(axis=0)
    return grad_x, grad_w, grad_b


@dataclass
class PoolArtifacts:
    """Bookkeeping for the max-pool backward pass.

    argmax stores, for every output cell, the flat index of the selected
    input cell within its (H*W*C) feature map; shape matches the pooled
    output.  Ties go to the first cell in row-major region order.
    """

    grid: RegionGrid
    argmax: np.ndarray
    input_shape: tuple[int, ...]


def fmp_forward(x: np.ndarray, grid: RegionGrid) -> tuple[np.ndarray, PoolArtifacts]:
    """Max over each pooling region, per channel, with argmax recorded."""
    h, w, c = _check_hwc(x)
    if grid.rows.n_in != h or grid.cols.n_in != w:
        raise ShapeError(
            f"grid is for {grid.rows.n_in}x{grid.cols.n_in}, input is {h}x{w}")
    nr, nc = grid.n_out_rows, grid.n_out_cols
    lead = x.shape[:-3]
    out = np.empty(lead + (nr, nc, c))
    argmax = np.empty(lead + (nr, nc, c), dtype=np.int64)
    chan = np.arange(c)
    for i in range(nr):
        for j in range(nc):
            r_lo, r_hi, c_lo, c_hi = (int(v) for v in grid.regions[i, j])
            patch = x[..., r_lo - 1 : r_hi, c_lo - 1 : c_hi, :]
            rw = c_hi - c_lo + 1
            flat = patch.reshape(lead + (-1, c))
            am = flat.argmax(axis=-2)
            out[..., i, j, :] = np.take_along_axis(flat, am[..., None, :], axis=-2)[..., 0, :]
            row = r_lo - 1 + am // rw
            col = c_lo - 1 + am % rw
            argmax[..., i, j, :] = (row * w + col) * c + chan
    return out, PoolArtifacts(grid, argmax, (h, w, c))


def fmp_backward(artifacts: PoolArtifacts, grad_out: np.ndarray) -> np.ndarray:
    """Route each output gradient to its recorded argmax cell (accumulating)."""
    if grad_out.shape != artifacts.argmax.shape:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match pooled shape {artifacts.argmax.shape}")
    h, w, c = artifacts.input_shape
    lead = grad_out.shape[:-3]
    flat = np.zeros((int(np.prod(lead, dtype=np.int64)) if lead else 1, h * w * c))
    idx = artifacts.argmax.reshape(flat.shape[0], -1)
    vals = grad_out.reshape(flat.shape[0], -1)
    np.add.at(flat, (np.arange(flat.shape[0])[:, None], idx), vals)
    return flat.reshape(lead + (h, w, c))


def avg_pool_regions(x: np.ndarray, grid: RegionGrid) -> np.ndarray:
    """Arithmetic mean over each region of a disjoint grid, per channel."""
    h, w, c = _check_hwc(x)
    if grid.mode is not Mode.DISJOINT:
        raise ValueError("average pooling requires a disjoint region grid")
    if grid.rows.n_in != h or grid.cols.n_in != w:
        raise ShapeError(
            f"grid is for {grid.rows.n_in}x{grid.cols.n_in}, input is {h}x{w}")
    nr, nc = grid.n_out_rows, grid.n_out_cols
    out = np.empty(x.shape[:-3] + (nr, nc, c))
    for i in range(nr):
        for j in range(nc):
            r_lo, r_hi, c_lo, c_hi = (int(v) for v in grid.regions[i, j])
            out[..., i, j, :] = x[..., r_lo - 1 : r_hi, c_lo - 1 : c_hi, :].mean(axis=(-3, -2))
    return out


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    if not (0 <= slope < 1):
        raise ValueError(f"slope must lie in [0,1), got {slope}")
    return np.where(x >= 0, x, slope * x)


def leaky_relu_backward(x: np.ndarray, slope: float, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * np.where(x >= 0, 1.0, slope)


def dropout_schedule(n_hidden_layers: int, max_rate: float = 0.5) -> list[float]:
    """Linearly increasing per-layer dropout: 0 in the first hidden layer up
    to max_rate in the last.  A single hidden layer gets rate 0."""
    if n_hidden_layers < 1:
        raise ValueError("need at least one hidden layer")
    if n_hidden_layers == 1:
        return [0.0]
    return [max_rate * l / (n_hidden_layers - 1) for l in range(n_hidden_layers)]


def dropout_mask(shape: tuple[int, ...], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: zeros with probability rate, else 1/(1-rate)."""
    if not (0 <= rate < 1):
        raise ValueError(f"dropout rate must lie in [0,1), got {rate}")
    if rate == 0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def softmax_xent(logits: np.ndarray, labels: np.ndarray | int
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Numerically stabilized softmax cross-entropy.

    Returns per-example loss and grad w.r.t. logits (softmax - onehot).
    logits has shape (..., K); labels are integer class indices of shape (...).
    """
    labels = np.asarray(labels)
    k = logits.shape[-1]
    if np.any(labels < 0) or np.any(labels >= k):
        raise ValueError(f"label out of range for {k} classes")
    z = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    log_probs = z - log_norm
    picked = np.take_along_axis(log_probs, labels[..., None], axis=-1)[..., 0]
    loss = -picked
    grad = np.exp(log_probs)
    onehot_idx = labels[..., None] == np.arange(k)
    grad = grad - onehot_idx
    return loss, grad
