"""MNIST pipeline: load, pool, compress, train and evaluate."""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import clustering, mlp, nets, weights
from .dataset import (
    pool_average_array,
    read_idx_image_array,
    read_idx_labels,
    to_dataset,
)
from .errors import ParameterError

BUNDLED_DIR = Path(__file__).resolve().parents[2] / "data" / "mnist5k"
FILES = {
    "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}
METHODS = ("full", "supercompress", "robust", "kmeans", "qmc-avg", "voronoi")


def default_dir() -> Path:
    """``$QMCREDUCE_MNIST_DIR`` if set, else the bundled 5000-image subset."""
    env = os.environ.get("QMCREDUCE_MNIST_DIR")
    return Path(env) if env else BUNDLED_DIR


def _find(directory: Path, key: str) -> Path:
    for stem in FILES[key]:
        for suffix in ("", ".gz"):
            p = directory / (stem + suffix)
            if p.exists():
                return p
    raise FileNotFoundError(f"no {key.replace('_', ' ')} file in {directory}")


@dataclass
class MnistData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


def load(directory=None, n_train: int | None = 10_000, block: int = 2) -> MnistData:
    """Load, average-pool and flatten; training points are capped at ``n_train``."""
    directory = Path(directory) if directory is not None else default_dir()
    tr = read_idx_image_array(_find(directory, "train_images"))
    te = read_idx_image_array(_find(directory, "test_images"))
    ytr = read_idx_labels(_find(directory, "train_labels"))
    yte = read_idx_labels(_find(directory, "test_labels"))
    n = len(ytr) if n_train is None else min(int(n_train), len(ytr))
    ds = to_dataset(pool_average_array(tr[:n], block), ytr, n)
    te_ds = to_dataset(pool_average_array(te, block), yte)
    return MnistData(ds.points, ds.responses, te_ds.points, np.asarray(yte, dtype=np.int64))


@dataclass
class MnistRun:
    method: str
    K: int
    accuracy: float
    loss: float | None
    compress_seconds: float
    train_seconds: float
    confusion: np.ndarray
    extra: dict

    def row(self) -> dict:
        return {
            "method": self.method,
            "K": self.K,
            "accuracy": self.accuracy,
            "loss": self.loss,
            "compress_seconds": self.compress_seconds,
            "train_seconds": self.train_seconds,
            "total_seconds": self.compress_seconds + self.train_seconds,
        }


def compress(data: MnistData, method: str, K: int | None = None, m: int | None = None,
             nu: int = 2, seed: int = 0, round_responses: bool = True):
    """Compress the training set; returns ``(train_data, mode, extra)``.

    Cluster responses are rounded half up to whole labels when
    ``round_responses`` is set, as for averaged digit labels.
    """
    X, Y = data.X_train, data.y_train
    extra: dict = {}
    if method == "full":
        return (X, Y), "full", extra
    if method in ("qmc-avg", "voronoi"):
        if m is None:
            raise ParameterError(f"{method} needs the net size exponent m")
        net = nets.generate_points(nets.sobol_matrices(m, X.shape[1]))
        if method == "qmc-avg":
            W = weights.compute_weights(X, Y, net, nu)
            extra["weight_concentration"] = weights.weight_concentration(W)
            extra["top_weight_index"] = [int(i) for i in np.argsort(-np.abs(W.wx), kind="stable")[:2]]
            return (net.points, W), "weighted", extra
        model = clustering.qmc_voronoi(X, Y, net)
        extra["retained"] = model.net_index.tolist()
    else:
        if K is None:
            raise ParameterError(f"{method} needs K")
        if method == "supercompress":
            model = clustering.supercompress(X, Y, K, seed)
        elif method == "robust":
            model = clustering.robust_supercompress(X, Y, K, None, seed)
        elif method == "kmeans":
            model = clustering.kmeans(X, K, seed, Y)
        else:
            raise ParameterError(f"unknown method {method!r}")
    w = model.responses
    if round_responses:
        w = clustering.round_half_up(w)
    extra["clusters"] = model.K
    return (model.centers, w), "clustered", extra


def run(data: MnistData, method: str, K: int | None = None, m: int | None = None, nu: int = 2,
        epochs: int = 100, hidden: int = 64, seed: int = 0, lr: float = 1e-3,
        batch_size: int = 32) -> MnistRun:
    """Compress, train a fresh network and evaluate it on the test split."""
    t0 = time.perf_counter()
    train_data, mode, extra = compress(data, method, K, m, nu, seed)
    t_compress = time.perf_counter() - t0
    model = mlp.MlpModel.init([data.X_train.shape[1], hidden, 1], seed)
    cfg = mlp.TrainConfig(epochs=epochs, lr=lr, batch_size=batch_size, seed=seed, mode=mode)
    res = mlp.train(model, train_data, cfg)
    loss = None if mode == "weighted" else res.losses[-1]
    rep = mlp.evaluate(res.model, data.X_test, data.y_test, loss)
    size = K if K is not None else (2**m if m is not None else len(data.y_train))
    extra["model"] = res.model
    return MnistRun(method, int(size), rep.accuracy, loss, t_compress, res.seconds, rep.confusion, extra)


def rate_to_K(N: int, rate: float) -> int:
    return max(2, int(math.floor(rate * N + 0.5)))
