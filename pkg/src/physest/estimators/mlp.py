"""A small fully connected regressor in plain numpy (float64).

Hidden layers use ReLU, the output layer is linear.  Training minimises the
mean squared error over all output elements with Adam.  Inputs are
standardised during training and the affine standardisation is folded into
the first layer afterwards, so a saved model maps raw features to outputs.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .. import seeding

MLP_MAGIC = b"MLP1"
HIDDEN = (128, 128)
# reference rate of the original large-scale run; far too slow at this scale
REFERENCE_LEARNING_RATE = 5e-6


@dataclass(frozen=True)
class MlpModel:
    weights: Tuple[np.ndarray, ...]  # each (fan_in, fan_out)
    biases: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input size does not match previous output")

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]


def init_mlp(sizes: Sequence[int], seed: int) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError("sizes must list at least input and output, all positive")
    rng = seeding.make_rng(seed, seeding.TRAINING, 0)
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MlpModel(tuple(ws), tuple(bs))


def _as_batch(model: MlpModel, x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.n_in:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {model.n_in}")
    return x, single


def mlp_forward(model: MlpModel, x) -> np.ndarray:
    h, single = _as_batch(model, x)
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def mse_loss(model: MlpModel, x, y) -> float:
    pred = mlp_forward(model, x)
    return float(np.mean((pred - np.asarray(y, dtype=np.float64).reshape(pred.shape)) ** 2))


def loss_and_grads(model: MlpModel, x, y) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """MSE over all output elements and its gradients, by backpropagation."""
    x, _ = _as_batch(model, x)
    y = np.asarray(y, dtype=np.float64).reshape(x.shape[0], model.n_out)
    acts = [x]
    pre = []
    last = len(model.weights) - 1
    h = x
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    diff = h - y
    loss = float(np.mean(diff * diff))
    g = 2.0 * diff / diff.size
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(last, -1, -1):
        if i < last:
            g = g * (pre[i] > 0)
        gw[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        if i:
            g = g @ model.weights[i].T
    return loss, gw, gb


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 20
    epochs: int = 100
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: Tuple[int, ...] = HIDDEN
    standardize: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass(frozen=True)
class TrainResult:
    model: MlpModel
    losses: Tuple[float, ...] = field(default=())  # full-data loss before training, then per epoch


def _fold_standardization(model: MlpModel, mean: np.ndarray, scale: np.ndarray) -> MlpModel:
    w0 = model.weights[0] / scale[:, None]
    b0 = model.biases[0] - mean @ w0
    return MlpModel((w0,) + model.weights[1:], (b0,) + model.biases[1:])


def mlp_train(features, targets, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("empty dataset")
    y = np.asarray(targets, dtype=np.float64).reshape(x.shape[0], -1)
    if cfg.standardize:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 1e-12, scale, 1.0)
    else:
        mean = np.zeros(x.shape[1])
        scale = np.ones(x.shape[1])
    xs = (x - mean) / scale
    model = init_mlp((x.shape[1], *cfg.hidden, y.shape[1]), cfg.seed)
    params = list(model.weights) + list(model.biases)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    n_layers = len(model.weights)
    losses = [mse_loss(model, xs, y)]
    step = 0
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = seeding.make_rng(cfg.seed, seeding.TRAINING, 1, epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, gw, gb = loss_and_grads(model, xs[idx], y[idx])
            step += 1
            c1 = 1.0 - cfg.beta1 ** step
            c2 = 1.0 - cfg.beta2 ** step
            for j, g in enumerate(gw + gb):
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g
                params[j] = params[j] - cfg.learning_rate * (m[j] / c1) / (np.sqrt(v[j] / c2) + cfg.eps)
            model = MlpModel(tuple(params[:n_layers]), tuple(params[n_layers:]))
        losses.append(mse_loss(model, xs, y))
    return TrainResult(_fold_standardization(model, mean, scale), tuple(losses))


# ---------------------------------------------------------------------------
# MLP1 files

def save_mlp(path, model: MlpModel) -> None:
    """``MLP1``, u32 layer count, u32 sizes, then all weights and all biases (f8, LE)."""
    sizes = model.sizes
    with open(path, "wb") as fh:
        fh.write(MLP_MAGIC)
        fh.write(struct.pack("<I", len(model.weights)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for w in model.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        for b in model.biases:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp(path) -> MlpModel:
    raw = Path(path).read_bytes()
    if raw[:4] != MLP_MAGIC:
        raise ValueError(f"{path}: not an MLP1 file")
    (n_layers,) = struct.unpack_from("<I", raw, 4)
    if n_layers < 1:
        raise ValueError(f"{path}: no layers")
    sizes = struct.unpack_from(f"<{n_layers + 1}I", raw, 8)
    off = 8 + 4 * (n_layers + 1)
    n_w = sum(a * b for a, b in zip(sizes[:-1], sizes[1:]))
    n_b = sum(sizes[1:])
    flat = np.frombuffer(raw, dtype="<f8", offset=off)
    if flat.size != n_w + n_b:
        raise ValueError(f"{path}: expected {n_w + n_b} values, found {flat.size}")
    flat = flat.astype(np.float64)
    ws, bs = [], []
    pos = 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        ws.append(flat[pos:pos + a * b].reshape(a, b))
        pos += a * b
    for b in sizes[1:]:
        bs.append(flat[pos:pos + b].copy())
        pos += b
    return MlpModel(tuple(ws), tuple(bs))
