"""A trainable network assembled from a parsed, sized NetworkSpec.

Every convolution is followed by a leaky rectifier and (at train time) an
inverted-dropout mask whose rate follows the linear schedule over hidden
layers.  FMP and MP2 layers carry no parameters; FMP layers resample their
region grid on every forward pass unless explicitly frozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regions
from .layers import (
    ConvLayer,
    ShapeError,
    conv_backward,
    conv_forward,
    dropout_mask,
    dropout_schedule,
    fmp_backward,
    fmp_forward,
    leaky_relu,
    leaky_relu_backward,
    softmax_xent,
)
from .netspec import ConvSpec, FmpSpec, Mp2Spec, NetworkSpec, OutputSpec
from .regions import Mode, Pseudorandom, Random, RegionGrid


@dataclass
class _ConvStep:
    layer: ConvLayer
    activation: bool
    dropout_rate: float


@dataclass
class _PoolStep:
    n_in: int
    n_out: int
    mode: Mode
    kind: regions.GeneratorKind | None  # None = fixed MP2 tiling


class Network:
    """Forward/backward evaluation and parameter access for one architecture."""

    def __init__(self, spec: NetworkSpec, in_channels: int, class_count: int,
                 leaky_slope: float = 1.0 / 3.0, dropout_max: float = 0.5,
                 rng: np.random.Generator | None = None):
        if spec.spatial_sizes is None:
            raise ValueError("spec must be sized (run compute_sizes)")
        if spec.spatial_sizes[-1] != 1:
            raise ValueError("spatial size entering the output layer must be 1")
        if rng is None:
            rng = np.random.default_rng()
        self.spec = spec
        self.in_channels = in_channels
        self.class_count = class_count
        self.leaky_slope = leaky_slope
        self.dropout_max = dropout_max

        rates = dropout_schedule(spec.n_hidden, dropout_max) if spec.n_hidden else []
        self.steps: list[_ConvStep | _PoolStep] = []
        channels = in_channels
        hidden_idx = 0
        for i, layer in enumerate(spec.layers):
            size = spec.spatial_sizes[i]
            if isinstance(layer, ConvSpec):
                conv = ConvLayer.initialize(layer.filter_size, channels, layer.filters, rng,
                                            leaky_slope=leaky_slope)
                self.steps.append(_ConvStep(conv, True, rates[hidden_idx]))
                channels = layer.filters
                hidden_idx += 1
            elif isinstance(layer, FmpSpec):
                n_out = spec.spatial_sizes[i + 1]
                kind = Random() if layer.kind == "random" else Pseudorandom()
                self.steps.append(_PoolStep(size, n_out, layer.mode, kind))
            elif isinstance(layer, Mp2Spec):
                self.steps.append(_PoolStep(size, size // 2, Mode.DISJOINT, None))
            elif isinstance(layer, OutputSpec):
                conv = ConvLayer.initialize(1, channels, class_count, rng, leaky_slope=leaky_slope)
                self.steps.append(_ConvStep(conv, False, 0.0))
                channels = class_count

    @property
    def conv_steps(self) -> list[_ConvStep]:
        return [s for s in self.steps if isinstance(s, _ConvStep)]

    @property
    def pool_steps(self) -> list[_PoolStep]:
        return [s for s in self.steps if isinstance(s, _PoolStep)]

    def parameters(self) -> list[np.ndarray]:
        params = []
        for s in self.conv_steps:
            params.extend((s.layer.weights, s.layer.bias))
        return params

    def set_parameters(self, values: list[np.ndarray]):
        steps = self.conv_steps
        if len(values) != 2 * len(steps):
            raise ValueError(f"expected {2 * len(steps)} parameter arrays, got {len(values)}")
        for s, w, b in zip(steps, values[0::2], values[1::2]):
            if w.shape != s.layer.weights.shape or b.shape != s.layer.bias.shape:
                raise ShapeError("parameter array shapes do not match the architecture")
            s.layer.weights = w.copy()
            s.layer.bias = b.copy()

    def sample_grids(self, rng: np.random.Generator) -> list[RegionGrid]:
        """Fresh region grids for every pooling step, in network order."""
        grids = []
        for s in self.pool_steps:
            if s.kind is None:
                seq = regions.uniform_sequence(s.n_in, 2)
                grids.append(regions.build_regions(seq, seq, Mode.DISJOINT))
            else:
                grids.append(regions.sample_region_grid(s.n_in, s.n_out, s.kind, s.mode, rng))
        return grids

    def forward(self, x: np.ndarray, train: bool, rng: np.random.Generator | None = None,
                grids: list[RegionGrid] | None = None):
        """Run the network; returns (logits, cache) with cache feeding backward().

        Pooling regions come from `grids` when given, else are sampled fresh
        from rng (shared across the whole batch).  Dropout is applied only
        when train=True, drawing per-sample masks from rng.
        """
        if x.shape[-3] != self.spec.input_size or x.shape[-2] != self.spec.input_size:
            raise ShapeError(
                f"input spatial size {x.shape[-3]}x{x.shape[-2]} != "
                f"required {self.spec.input_size}")
        if grids is None:
            if rng is None:
                raise ValueError("forward needs either grids or an rng to sample them")
            grids = self.sample_grids(rng)
        cache = []
        pool_idx = 0
        for step in self.steps:
            if isinstance(step, _ConvStep):
                pre = conv_forward(x, step.layer)
                mask = None
                if step.activation:
                    post = leaky_relu(pre, self.leaky_slope)
                    if train and step.dropout_rate > 0:
                        mask = dropout_mask(post.shape, step.dropout_rate, rng)
                        post = post * mask
                else:
                    post = pre
                cache.append(("conv", x, pre, mask))
                x = post
            else:
                x, artifacts = fmp_forward(x, grids[pool_idx])
                pool_idx += 1
                cache.append(("pool", artifacts))
        logits = x.reshape(x.shape[:-3] + (self.class_count,))
        return logits, cache

    def backward(self, cache, grad_logits: np.ndarray) -> list[np.ndarray]:
        """Gradients in parameters() order given d(loss)/d(logits)."""
        grad = grad_logits.reshape(grad_logits.shape[:-1] + (1, 1, self.class_count))
        grads: list[np.ndarray] = []
        conv_steps = self.conv_steps
        conv_idx = len(conv_steps)
        for entry, step in zip(reversed(cache), reversed(self.steps)):
            if entry[0] == "conv":
                _, x_in, pre, mask = entry
                conv_idx -= 1
                cstep = conv_steps[conv_idx]
                if cstep.activation:
                    if mask is not None:
                        grad = grad * mask
                    grad = leaky_relu_backward(pre, self.leaky_slope, grad)
                grad, gw, gb = conv_backward(x_in, cstep.layer, grad)
                grads.append(gb)
                grads.append(gw)
            else:
                grad = fmp_backward(entry[1], grad)
        grads.reverse()
        return grads

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray,
                       rng: np.random.Generator,
                       grids: list[RegionGrid] | None = None):
        """Mean cross-entropy over the batch, parameter gradients, error count."""
        logits, cache = self.forward(x, train=True, rng=rng, grids=grids)
        losses, grad_logits = softmax_xent(logits, labels)
        n = losses.size
        grads = self.backward(cache, grad_logits / n)
        errors = int(np.sum(logits.argmax(axis=-1) != labels))
        return float(losses.mean()), grads, errors

    def predict_scores(self, x: np.ndarray, rng: np.random.Generator | None = None,
                       grids: list[RegionGrid] | None = None) -> np.ndarray:
        """One stochastic inference pass; dropout off, activations unscaled."""
        logits, _ = self.forward(x, train=False, rng=rng, grids=grids)
        return logits
