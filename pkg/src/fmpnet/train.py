"""Training loop (SGD with momentum), checkpointing, and vote-based
repeated stochastic evaluation.

Checkpoint container layout (documented so other implementations can read it):

    8 bytes   magic "FMPCKPT1"
    u32 LE    length of canonical spec text, then that many UTF-8 bytes
    u32 LE    in_channels
    u32 LE    class_count
    u32 LE    epochs completed
    f64 LE    leaky_slope
    f64 LE    dropout_max
    u32 LE    number of parameter blocks, then per block:
                  u64 LE element count, then that many f64 LE values
              (blocks are weights, bias for each conv layer in network
              order, the output layer last; weight elements in
              (row, col, in_channel, out_channel) order)
    u32 LE    number of optimizer-state blocks (momentum velocities),
              same per-block layout as the parameters
    u32 LE    length of the RNG state, then that many bytes of UTF-8 JSON
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, fit_to_input
from .netspec import compute_sizes, format_spec, parse_spec
from .network import Network

MAGIC = b"FMPCKPT1"


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""


class CheckpointFormatError(ValueError):
    """The file is not a well-formed checkpoint container."""


@dataclass
class TrainConfig:
    spec_text: str
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.025
    lr_decay: float = 0.9  # multiplicative, per epoch
    momentum: float = 0.9
    dropout_max: float = 0.5
    leaky_slope: float = 1.0 / 3.0
    seed: int = 0
    class_count: int = 10

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not (0 <= self.momentum < 1):
            raise ValueError("momentum must lie in [0,1)")
        if not (0 < self.lr_decay <= 1):
            raise ValueError("lr_decay must lie in (0,1]")


@dataclass
class Checkpoint:
    spec_text: str
    in_channels: int
    class_count: int
    epoch: int
    leaky_slope: float
    dropout_max: float
    params: list[np.ndarray]
    velocities: list[np.ndarray]
    rng_state: dict


def build_network(ckpt: Checkpoint) -> Network:
    """Reconstruct the network a checkpoint describes, with its weights."""
    spec = compute_sizes(parse_spec(ckpt.spec_text))
    net = Network(spec, ckpt.in_channels, ckpt.class_count,
                  leaky_slope=ckpt.leaky_slope, dropout_max=ckpt.dropout_max,
                  rng=np.random.default_rng(0))
    net.set_parameters(ckpt.params)
    return net


def _write_blocks(f, blocks: list[np.ndarray]):
    f.write(struct.pack("<I", len(blocks)))
    for b in blocks:
        flat = np.ascontiguousarray(b, dtype="<f8").reshape(-1)
        f.write(struct.pack("<Q", flat.size))
        f.write(flat.tobytes())


def _read_blocks(f, path) -> list[np.ndarray]:
    (count,) = struct.unpack("<I", _read(f, 4, path))
    blocks = []
    for _ in range(count):
        (n,) = struct.unpack("<Q", _read(f, 8, path))
        blocks.append(np.frombuffer(_read(f, 8 * n, path), dtype="<f8").copy())
    return blocks


def _read(f, n: int, path) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointFormatError(f"{path}: truncated checkpoint")
    return data


def save_checkpoint(ckpt: Checkpoint, path):
    buf = io.BytesIO()
    buf.write(MAGIC)
    spec_bytes = ckpt.spec_text.encode()
    buf.write(struct.pack("<I", len(spec_bytes)))
    buf.write(spec_bytes)
    buf.write(struct.pack("<III", ckpt.in_channels, ckpt.class_count, ckpt.epoch))
    buf.write(struct.pack("<dd", ckpt.leaky_slope, ckpt.dropout_max))
    _write_blocks(buf, ckpt.params)
    _write_blocks(buf, ckpt.velocities)
    rng_bytes = json.dumps(ckpt.rng_state).encode()
    buf.write(struct.pack("<I", len(rng_bytes)))
    buf.write(rng_bytes)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointFormatError(f"{path}: bad magic, not a checkpoint file")
        (spec_len,) = struct.unpack("<I", _read(f, 4, path))
        spec_text = _read(f, spec_len, path).decode()
        in_channels, class_count, epoch = struct.unpack("<III", _read(f, 12, path))
        leaky_slope, dropout_max = struct.unpack("<dd", _read(f, 16, path))
        flat_params = _read_blocks(f, path)
        flat_vel = _read_blocks(f, path)
        (rng_len,) = struct.unpack("<I", _read(f, 4, path))
        rng_state = json.loads(_read(f, rng_len, path).decode())
    # recover array shapes from a freshly built network of the same spec
    spec = compute_sizes(parse_spec(spec_text))
    template = Network(spec, in_channels, class_count, rng=np.random.default_rng(0))
    shapes = [p.shape for p in template.parameters()]
    if len(shapes) != len(flat_params) or len(shapes) != len(flat_vel):
        raise CheckpointFormatError(f"{path}: parameter block count does not match spec")
    params = [p.reshape(s) for p, s in zip(flat_params, shapes)]
    velocities = [v.reshape(s) for v, s in zip(flat_vel, shapes)]
    return Checkpoint(spec_text, in_channels, class_count, epoch,
                      leaky_slope, dropout_max, params, velocities, rng_state)


def train(config: TrainConfig, dataset: Dataset, test_dataset: Dataset | None = None,
          init: Checkpoint | None = None, metrics_path=None
          ) -> tuple[Checkpoint, list[str]]:
    """Run SGD with momentum; returns the final checkpoint and metrics lines.

    Pooling regions are sampled freshly for every forward application and
    shared across the minibatch.  Fully deterministic for a fixed config,
    dataset and seed.  Passing a checkpoint as `init` resumes training from
    its epoch counter with identical results to an uninterrupted run.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    spec = compute_sizes(parse_spec(config.spec_text))
    in_channels = dataset.images.shape[-1]

    if init is not None:
        rng = np.random.default_rng()
        rng.bit_generator.state = init.rng_state
        net = build_network(init)
        velocities = [v.copy() for v in init.velocities]
        start_epoch = init.epoch
    else:
        rng = np.random.default_rng(config.seed)
        net = Network(spec, in_channels, config.class_count,
                      leaky_slope=config.leaky_slope,
                      dropout_max=config.dropout_max, rng=rng)
        velocities = [np.zeros_like(p) for p in net.parameters()]
        start_epoch = 0

    x_all = fit_to_input(dataset.images, spec.input_size)
    y_all = dataset.labels
    x_test = y_test = None
    if test_dataset is not None:
        x_test = fit_to_input(test_dataset.images, spec.input_size)
        y_test = test_dataset.labels

    params = net.parameters()
    metrics: list[str] = []
    n = len(dataset)
    for epoch in range(start_epoch, config.epochs):
        lr = config.learning_rate * config.lr_decay ** epoch
        perm = rng.permutation(n)
        loss_sum = 0.0
        err_sum = 0
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            # a diverging run overflows before the loss check catches it;
            # silence the float warnings and rely on the finiteness test
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads, errs = net.loss_and_grads(x_all[idx], y_all[idx], rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {lo}")
            loss_sum += loss * len(idx)
            err_sum += errs
            for p, v, g in zip(params, velocities, grads):
                v *= config.momentum
                v -= lr * g
                p += v
        line = f"{epoch},{loss_sum / n:.6f},{err_sum / n:.6f}"
        if x_test is not None:
            eval_rng = np.random.default_rng(int(rng.integers(2**63)))
            test_err = _error_rate(net, x_test, y_test, 1, eval_rng, config.batch_size)
            line += f",{test_err:.6f}"
        else:
            line += ","
        metrics.append(line)

    ckpt = Checkpoint(format_spec(spec), in_channels, config.class_count,
                      config.epochs, config.leaky_slope, config.dropout_max,
                      [p.copy() for p in params], [v.copy() for v in velocities],
                      rng.bit_generator.state)
    if metrics_path is not None:
        Path(metrics_path).write_text("".join(m + "\n" for m in metrics))
    return ckpt, metrics


def _as_network(model: Network | Checkpoint) -> Network:
    return model if isinstance(model, Network) else build_network(model)


def predict_once(model: Network | Checkpoint, image: np.ndarray,
                 rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """One stochastic forward pass: fresh pooling regions, dropout off."""
    net = _as_network(model)
    x = fit_to_input(image, net.spec.input_size)
    scores = net.predict_scores(x, rng=rng)
    return int(scores.argmax()), scores


def predict_vote(model: Network | Checkpoint, image: np.ndarray, repeats: int,
                 rng: np.random.Generator) -> int:
    """Majority vote over `repeats` stochastic passes.

    Vote ties are broken by the highest score summed across passes, then by
    the lowest class index.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    net = _as_network(model)
    votes = np.zeros(net.class_count, dtype=np.int64)
    score_sum = np.zeros(net.class_count)
    for _ in range(repeats):
        cls, scores = predict_once(net, image, rng)
        votes[cls] += 1
        score_sum += scores
    winners = votes == votes.max()
    return int(np.where(winners, score_sum, -np.inf).argmax())


def evaluate(model: Network | Checkpoint, dataset: Dataset, repeats: int = 1,
             rng: np.random.Generator | None = None, seed: int = 0,
             batch_size: int = 256) -> float:
    """Fraction of the dataset misclassified under repeated-pass voting.

    Each pass over a batch samples fresh pooling regions (shared within the
    batch); the model parameters are never mutated.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    net = _as_network(model)
    if rng is None:
        rng = np.random.default_rng(seed)
    x_all = fit_to_input(dataset.images, net.spec.input_size)
    n = len(dataset)
    votes = np.zeros((n, net.class_count), dtype=np.int64)
    score_sum = np.zeros((n, net.class_count))
    for _ in range(repeats):
        for lo in range(0, n, batch_size):
            scores = net.predict_scores(x_all[lo : lo + batch_size], rng=rng)
            preds = scores.argmax(axis=-1)
            votes[np.arange(lo, lo + len(scores)), preds] += 1
            score_sum[lo : lo + batch_size] += scores
    winners = votes == votes.max(axis=1, keepdims=True)
    preds = np.where(winners, score_sum, -np.inf).argmax(axis=1)
    return float(np.mean(preds != dataset.labels))


def _error_rate(net: Network, x: np.ndarray, y: np.ndarray, repeats: int,
                rng: np.random.Generator, batch_size: int) -> float:
    errs = 0
    for lo in range(0, len(x), batch_size):
        scores = net.predict_scores(x[lo : lo + batch_size], rng=rng)
        errs += int(np.sum(scores.argmax(axis=-1) != y[lo : lo + batch_size]))
    return errs / len(x)
