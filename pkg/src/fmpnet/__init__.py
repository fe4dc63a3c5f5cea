"""Fractional max-pooling: stochastic pooling regions, a small trainable
convolutional network, a layer-shorthand parser, and vote-based inference."""

from .layers import (
    ConvLayer,
    PoolArtifacts,
    ShapeError,
    avg_pool_regions,
    conv_backward,
    conv_forward,
    dropout_schedule,
    fmp_backward,
    fmp_forward,
    leaky_relu,
    leaky_relu_backward,
    softmax_xent,
)
from .netspec import NetworkSpec, compute_sizes, format_spec, parse_spec
from .network import Network
from .regions import (
    GeneratorKind,
    InvalidParameterError,
    InvalidRatioError,
    Mode,
    PoolingSequence,
    Pseudorandom,
    Random,
    RegionGrid,
    build_regions,
    pseudorandom_sequence,
    random_sequence,
    sample_region_grid,
)
from .train import (
    Checkpoint,
    TrainConfig,
    evaluate,
    load_checkpoint,
    predict_once,
    predict_vote,
    save_checkpoint,
    train,
)

__all__ = [
    "ConvLayer", "PoolArtifacts", "ShapeError", "avg_pool_regions",
    "conv_backward", "conv_forward", "dropout_schedule", "fmp_backward",
    "fmp_forward", "leaky_relu", "leaky_relu_backward", "softmax_xent",
    "NetworkSpec", "compute_sizes", "format_spec", "parse_spec", "Network",
    "GeneratorKind", "InvalidParameterError", "InvalidRatioError", "Mode",
    "PoolingSequence", "Pseudorandom", "Random", "RegionGrid",
    "build_regions", "pseudorandom_sequence", "random_sequence",
    "sample_region_grid", "Checkpoint", "TrainConfig", "evaluate",
    "load_checkpoint", "predict_once", "predict_vote", "save_checkpoint",
    "train",
]
