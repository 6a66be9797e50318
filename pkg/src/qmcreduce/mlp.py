"""Scalar-output multilayer perceptron trained on full, clustered or
weighted (QMC-averaged) data.

The network maps an image vector to a real number; a digit is predicted
by rounding half up and clamping to 0..9.  Three training losses are
supported:

``full``       mean squared error on the data,
``clustered``  mean squared error on cluster centers and responses,
``weighted``   ``sum f^2 wx - 2 sum f wxy + y_energy`` over net points.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import atomic_write_text
from .errors import FormatError, ParameterError, ShapeError
from .weights import WeightSet

FORMAT_TAG = "qmcreduce-mlp"
FORMAT_VERSION = 1
MODES = ("full", "clustered", "weighted")


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class MlpModel:
    """Fully connected network with logistic hidden layers and affine output.

    ``weights[i]`` has shape ``(sizes[i+1], sizes[i])``.
    """

    sizes: list
    weights: list
    biases: list

    @classmethod
    def init(cls, sizes, seed=None) -> "MlpModel":
        sizes = [int(v) for v in sizes]
        if len(sizes) < 2 or sizes[-1] != 1 or min(sizes) < 1:
            raise ParameterError("sizes must be positive and end with a single output")
        rng = np.random.default_rng(seed)
        Ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = math.sqrt(6.0 / (fan_in + fan_out))  # Glorot uniform
            Ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
            bs.append(np.zeros(fan_out))
        return cls(sizes, Ws, bs)

    def copy(self) -> "MlpModel":
        return MlpModel(list(self.sizes), [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        pos = 0
        for p in self.params():
            n = p.size
            p[...] = theta[pos : pos + n].reshape(p.shape)
            pos += n
        if pos != theta.size:
            raise ShapeError(f"expected {pos} parameters, got {theta.size}")

    def check_finite(self) -> None:
        if not all(np.all(np.isfinite(p)) for p in self.params()):
            raise FloatingPointError("non-finite network parameters")


def _forward_cache(model: MlpModel, X):
    acts = [np.atleast_2d(np.asarray(X, dtype=np.float64))]
    if acts[0].shape[1] != model.sizes[0]:
        raise ShapeError(f"inputs have {acts[0].shape[1]} features, model expects {model.sizes[0]}")
    n_layers = len(model.weights)
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ W.T + b
        acts.append(z if i == n_layers - 1 else sigmoid(z))
    return acts


def forward(model: MlpModel, X) -> np.ndarray:
    """Network output for each row of ``X``."""
    return _forward_cache(model, X)[-1][:, 0]


def _backward(model: MlpModel, acts, g):
    """Gradients of ``sum_n g_n f(x_n)`` with respect to every parameter."""
    grads_W = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    delta = np.asarray(g, dtype=np.float64)[:, None]
    for i in range(len(model.weights) - 1, -1, -1):
        grads_W[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i:
            a = acts[i]
            delta = (delta @ model.weights[i]) * a * (1.0 - a)
    return [p for pair in zip(grads_W, grads_b) for p in pair]


def loss_full(model: MlpModel, X, Y) -> float:
    f = forward(model, X)
    return float(np.mean((f - np.asarray(Y, dtype=np.float64)) ** 2))


def loss_weighted(model: MlpModel, Z, W: WeightSet) -> float:
    f = forward(model, Z)
    return math.fsum(np.concatenate([f * f * W.wx, -2.0 * f * W.wxy, [W.y_energy]]))


def grad_full(model: MlpModel, X, Y) -> list:
    """Gradient of ``(1/B) sum (f(x) - y)^2`` over the batch."""
    acts = _forward_cache(model, X)
    f = acts[-1][:, 0]
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != f.shape:
        raise ShapeError(f"{f.shape[0]} inputs but {Y.shape} targets")
    return _backward(model, acts, 2.0 * (f - Y) / f.shape[0])


def grad_clustered(model: MlpModel, Z, w) -> list:
    """Gradient of the clustered loss ``(1/K) sum (f(z_k) - w_k)^2``."""
    return grad_full(model, Z, w)


def grad_weighted(model: MlpModel, Z, W: WeightSet) -> list:
    """Gradient of ``sum f(z)^2 wx - 2 sum f(z) wxy + y_energy``."""
    acts = _forward_cache(model, Z)
    f = acts[-1][:, 0]
    if f.shape != W.wx.shape:
        raise ShapeError(f"{f.shape[0]} net points but {W.L} weights")
    return _backward(model, acts, 2.0 * f * W.wx - 2.0 * W.wxy)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    mode: str = "full"

    def validate(self):
        if self.epochs < 1:
            raise ParameterError("epochs must be at least 1")
        if self.lr < 0 or not math.isfinite(self.lr):
            raise ParameterError("learning rate must be a finite non-negative number")
        if self.batch_size < 1:
            raise ParameterError("batch size must be positive")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")


class Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        c = self.cfg
        if c.lr == 0:
            return
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


@dataclass
class TrainResult:
    model: MlpModel
    losses: list = field(default_factory=list)
    seconds: float = 0.0


def train(model: MlpModel, data, config: TrainConfig) -> TrainResult:
    """Train a copy of ``model`` with Adam.

    ``data`` is ``(X, Y)`` for the ``full`` and ``clustered`` modes and
    ``(Z, WeightSet)`` for ``weighted``.  Mini-batches are drawn from a
    per-epoch permutation seeded by ``config.seed``.  Weighted mode uses
    full-batch steps, as many per epoch as a mini-batch pass would take.
    The returned trace holds the training loss after each epoch.
    """
    config.validate()
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.params(), config)
    t0 = time.perf_counter()
    trace = []
    if config.mode == "weighted":
        Z, W = data
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if Z.shape[0] == 0:
            raise ParameterError("empty training set")
        steps = max(1, math.ceil(Z.shape[0] / config.batch_size))
        for _ in range(config.epochs):
            for _ in range(steps):
                opt.step(grad_weighted(model, Z, W))
            trace.append(loss_weighted(model, Z, W))
    else:
        X, Y = data
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.asarray(Y, dtype=np.float64).reshape(-1)
        n = X.shape[0]
        if n == 0:
            raise ParameterError("empty training set")
        if Y.shape[0] != n:
            raise ShapeError(f"{n} inputs but {Y.shape[0]} targets")
        for _ in range(config.epochs):
            order = rng.permutation(n)
            for lo in range(0, n, config.batch_size):
                idx = order[lo : lo + config.batch_size]
                opt.step(grad_full(model, X[idx], Y[idx]))
            trace.append(loss_full(model, X, Y))
    model.check_finite()
    return TrainResult(model, trace, time.perf_counter() - t0)


def predict_digits(model: MlpModel, X) -> np.ndarray:
    """Round half up and clamp to 0..9."""
    f = forward(model, X)
    return np.clip(np.floor(f + 0.5), 0, 9).astype(np.int64)


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    loss: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {"accuracy": self.accuracy, "loss": self.loss, "confusion": self.confusion.tolist()},
            indent=2,
        )

    def confusion_csv(self) -> str:
        head = "true\\pred," + ",".join(str(d) for d in range(10))
        rows = [f"{i}," + ",".join(str(int(v)) for v in row) for i, row in enumerate(self.confusion)]
        return "\n".join([head, *rows]) + "\n"


def evaluate(model: MlpModel, X, labels, loss: float | None = None) -> EvalReport:
    """Accuracy and 10x10 confusion matrix (rows true, columns predicted)."""
    labels = np.asarray(labels, dtype=np.int64)
    pred = predict_digits(model, X)
    conf = np.zeros((10, 10), dtype=np.int64)
    np.add.at(conf, (labels, pred), 1)
    acc = float(np.trace(conf) / conf.sum()) if conf.sum() else 0.0
    return EvalReport(acc, conf, loss)


def save_model(path, model: MlpModel) -> None:
    """Text dump with a format/version header; floats round-trip exactly."""
    doc = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "sizes": model.sizes,
        "activation": "sigmoid",
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    atomic_write_text(path, json.dumps(doc))


def load_model(path) -> MlpModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise FormatError(f"{path}: not a model file")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported model version {doc.get('version')}")
    model = MlpModel(
        list(doc["sizes"]),
        [np.asarray(w, dtype=np.float64) for w in doc["weights"]],
        [np.asarray(b, dtype=np.float64) for b in doc["biases"]],
    )
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        if W.shape != (model.sizes[i + 1], model.sizes[i]) or b.shape != (model.sizes[i + 1],):
            raise FormatError(f"{path}: layer {i} has inconsistent shapes")
    return model
