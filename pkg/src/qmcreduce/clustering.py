"""Clustering-based compression: supercompress, its robust variant,
QMC-Voronoi and plain K-means.

Every method returns a :class:`ClusterModel` whose responses are cluster
means of the original responses, so the clustered loss approximation is
``app_clst(f(centers), model.responses)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSplitError, ParameterError, ShapeError
from .nets import DigitalNet

MAX_ITER = 100
REL_TOL = 1e-9


@dataclass
class ClusterModel:
    """K centers with approximate responses and the data partition.

    Attributes
    ----------
    centers : ndarray (K, s)
    responses : ndarray (K,)
        Mean of the original responses over each cluster.
    partition : list of ndarray
        Sorted data indices of each cluster; together a partition of 0..N-1.
    losses : ndarray (K,)
        Per-cluster objective (response loss, or the blended loss in robust mode).
    method : str
    net_index : ndarray or None
        Original net index of each retained center (QMC-Voronoi only).
    exhausted : bool
        True when fewer than the requested number of clusters could be formed.
    history : list of float
        Total objective after each split (supercompress variants).
    response_scale : float
        Factor turning ``responses`` into means of the rescaled responses
        the robust variant clusters on; 1 elsewhere.
    """

    centers: np.ndarray
    responses: np.ndarray
    partition: list
    losses: np.ndarray
    method: str
    net_index: np.ndarray | None = None
    exhausted: bool = False
    history: list = field(default_factory=list)
    response_scale: float = 1.0

    @property
    def K(self) -> int:
        return int(self.centers.shape[0])

    def labels(self, N: int | None = None) -> np.ndarray:
        N = sum(len(p) for p in self.partition) if N is None else N
        lab = np.full(N, -1, dtype=np.int64)
        for k, idx in enumerate(self.partition):
            lab[idx] = k
        return lab

    @property
    def scaled_responses(self) -> np.ndarray:
        """Cluster means of the rescaled responses (robust mode)."""
        return self.responses * self.response_scale


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        tot = d2.sum()
        if tot <= 0:
            centers[c] = X[rng.integers(n)]
        else:
            centers[c] = X[rng.choice(n, p=d2 / tot)]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _cluster_means(X, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts[:, None]
    return means, counts


def lloyd(X, centers, max_iter: int = MAX_ITER, tol: float = REL_TOL):
    """Lloyd iterations from the given centers.

    Empty clusters are reseeded at the point farthest from its current
    center.  Returns ``(centers, labels, n_iter)``; the returned centers
    are the means of their final clusters.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    centers = np.array(centers, dtype=np.float64)
    k = centers.shape[0]
    labels, d2 = kernels.assign_nearest(X, centers)
    it = 0
    for it in range(1, max_iter + 1):
        means, counts = _cluster_means(X, labels, k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            d2 = d2.copy()
            for c in empty:
                far = int(np.argmax(d2))
                means[c] = X[far]
                d2[far] = -1.0
        shift = np.sqrt(np.sum((means - centers) ** 2))
        scale = max(np.sqrt(np.sum(centers**2)), np.finfo(float).tiny)
        centers = means
        new_labels, d2 = kernels.assign_nearest(X, centers)
        stable = np.array_equal(new_labels, labels)
        labels = new_labels
        if (stable and not empty.size) or shift / scale < tol:
            break
    means, counts = _cluster_means(X, labels, k)
    keep = counts > 0
    centers = np.where(keep[:, None], means, centers)
    return centers, labels, it


def two_means(X, seed=None, max_iter: int = MAX_ITER, tol: float = REL_TOL):
    """Split a point set into two K-means clusters.

    Returns ``(centers, (idx0, idx1))`` with local indices into ``X``.

    Raises
    ------
    DegenerateSplitError
        If ``X`` has fewer than two distinct points.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    if X.shape[0] < 2 or np.all(X == X[0]):
        raise DegenerateSplitError("need at least two distinct points to split")
    rng = _as_rng(seed)
    centers = _kmeanspp(X, 2, rng)
    centers, labels, _ = lloyd(X, centers, max_iter, tol)
    idx0 = np.flatnonzero(labels == 0)
    idx1 = np.flatnonzero(labels == 1)
    if idx0.size == 0 or idx1.size == 0:
        # identical seeds can collapse; split off the farthest point instead
        c = X.mean(axis=0)
        far = int(np.argmax(np.sum((X - c) ** 2, axis=1)))
        centers, labels, _ = lloyd(X, np.stack([c, X[far]]), max_iter, tol)
        idx0 = np.flatnonzero(labels == 0)
        idx1 = np.flatnonzero(labels == 1)
        if idx0.size == 0 or idx1.size == 0:
            raise DegenerateSplitError("2-means collapsed to a single cluster")
    return centers, (idx0, idx1)


def _sse(v):
    return float(np.sum((v - v.mean(axis=0)) ** 2))


def _split_loop(F, K, loss_fn, seed):
    """Algorithm core: repeatedly 2-means split the highest-loss cluster.

    ``F`` are the features clustered on, ``loss_fn(indices)`` the loss of a
    cluster.  Ties in the loss go to the larger cluster, then the lower index.
    """
    rng = _as_rng(seed)
    N = F.shape[0]
    parts = [np.arange(N)]
    losses = [loss_fn(parts[0])]
    blocked = [False]
    history = []
    exhausted = False
    while len(parts) < K:
        order = sorted(
            (j for j in range(len(parts)) if not blocked[j] and len(parts[j]) >= 2),
            key=lambda j: (-losses[j], -len(parts[j]), j),
        )
        done = False
        for j in order:
            idx = parts[j]
            try:
                _, (a, b) = two_means(F[idx], rng)
            except DegenerateSplitError:
                blocked[j] = True
                continue
            ia, ib = idx[a], idx[b]
            la, lb = loss_fn(ia), loss_fn(ib)
            parts[j], losses[j] = ia, la
            parts.append(ib)
            losses.append(lb)
            blocked.append(False)
            history.append(math.fsum(losses))
            done = True
            break
        if not done:
            exhausted = True
            warnings.warn(
                f"only {len(parts)} of {K} clusters could be formed", RuntimeWarning, stacklevel=3
            )
            break
    return parts, np.array(losses), history, exhausted


def _finish(X, Y, parts, losses, method, history=(), exhausted=False, net_index=None):
    centers = np.stack([X[p].mean(axis=0) for p in parts])
    responses = np.array([math.fsum(Y[p]) / len(p) for p in parts])
    parts = [np.sort(p) for p in parts]
    return ClusterModel(
        centers, responses, parts, np.asarray(losses, dtype=np.float64), method,
        net_index, exhausted, list(history),
    )


def _check_xy(X, Y):
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    Y = np.asarray(Y, dtype=np.float64).reshape(-1)
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"{X.shape[0]} points but {Y.shape[0]} responses")
    return X, Y


def supercompress(X, Y, K: int, seed=None) -> ClusterModel:
    """Supervised compression by iterative 2-means splitting.

    Clusters are split on the inputs; the cluster chosen for splitting is
    the one with the largest response loss ``sum (y_i - w_j)^2``.
    """
    X, Y = _check_xy(X, Y)
    N = X.shape[0]
    if not 2 <= K <= N:
        raise ParameterError(f"K must satisfy 2 <= K <= N={N}, got {K}")

    def loss(idx):
        return _sse(Y[idx])

    parts, losses, hist, exh = _split_loop(X, K, loss, seed)
    return _finish(X, Y, parts, losses, "supercompress", hist, exh)


def default_lambda(s: int) -> float:
    return 1.0 / (s + 1)


def robust_supercompress(X, Y, K: int, lam: float | None = None, seed=None, joint: bool = True) -> ClusterModel:
    """Robust supercompress with blend parameter ``lam``.

    Responses are rescaled to ``y * sqrt((1 - lam) / lam)`` and the
    per-cluster loss becomes ``sum ||z_j - x_i||^2 + (y~_i - w~_j)^2``.
    With ``joint=True`` the 2-means splits run on ``(x, y~)``; otherwise
    on ``x`` alone.  Stored responses are means of the original ``y``.
    """
    X, Y = _check_xy(X, Y)
    N, s = X.shape
    if lam is None:
        lam = default_lambda(s)
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 0.0:
        return supercompress(X, Y, K, seed)
    if not 2 <= K <= N:
        raise ParameterError(f"K must satisfy 2 <= K <= N={N}, got {K}")
    yt = Y * math.sqrt((1.0 - lam) / lam)
    Z = np.column_stack([X, yt])

    def loss(idx):
        return _sse(Z[idx])

    parts, losses, hist, exh = _split_loop(Z if joint else X, K, loss, seed)
    model = _finish(X, Y, parts, losses, "robust", hist, exh)
    model.response_scale = math.sqrt((1.0 - lam) / lam)
    return model


def qmc_voronoi(X, Y, net) -> ClusterModel:
    """Assign every data point to its nearest net point; drop empty regions.

    ``net`` may be a :class:`DigitalNet` or an array of points.  Ties go to
    the lowest net index.
    """
    X, Y = _check_xy(X, Y)
    P = net.points if isinstance(net, DigitalNet) else np.asarray(net, dtype=np.float64)
    P = np.ascontiguousarray(P)
    if P.shape[0] == 0:
        raise ParameterError("empty net")
    if P.shape[1] != X.shape[1]:
        raise ShapeError(f"data has dimension {X.shape[1]}, net has {P.shape[1]}")
    labels, _ = kernels.assign_nearest(X, P)
    counts = np.bincount(labels, minlength=P.shape[0])
    kept = np.flatnonzero(counts)
    order = np.argsort(labels, kind="stable")
    bounds = np.cumsum(counts)[kept]
    starts = bounds - counts[kept]
    parts = [order[a:b] for a, b in zip(starts, bounds)]
    responses = np.array([math.fsum(Y[p]) / len(p) for p in parts])
    losses = np.array([_sse(Y[p]) for p in parts])
    return ClusterModel(P[kept].copy(), responses, parts, losses, "voronoi", kept)


def kmeans(X, K: int, seed=None, Y=None) -> ClusterModel:
    """Classical K-means on the inputs with k-means++ seeding."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    N = X.shape[0]
    if not 1 <= K <= N:
        raise ParameterError(f"K must satisfy 1 <= K <= N={N}, got {K}")
    Y = np.zeros(N) if Y is None else np.asarray(Y, dtype=np.float64).reshape(-1)
    rng = _as_rng(seed)
    centers = _kmeanspp(X, K, rng)
    centers, labels, _ = lloyd(X, centers)
    counts = np.bincount(labels, minlength=K)
    kept = np.flatnonzero(counts)
    parts = [np.flatnonzero(labels == k) for k in kept]
    losses = [_sse(X[p]) for p in parts]
    model = _finish(X, Y, parts, losses, "kmeans")
    model.exhausted = len(parts) < K
    return model


def app_clst(f_values, responses) -> float:
    """Clustered loss approximation ``(1/K) sum (f(z_k) - w_k)^2``."""
    f = np.asarray(f_values, dtype=np.float64)
    w = np.asarray(responses, dtype=np.float64)
    if f.shape != w.shape:
        raise ShapeError(f"{f.shape} predictions for {w.shape} responses")
    if f.size == 0:
        raise ShapeError("no clusters")
    return math.fsum((f - w) ** 2) / f.size


def round_half_up(v):
    """Round to the nearest integer with halves going up."""
    return np.floor(np.asarray(v, dtype=np.float64) + 0.5)
