"""QMC-averaging weights over a digital net.

For a net point ``z_l`` and refinement level ``nu`` the weights are

    wx_l  = b^(nu-m)/N * sum_q (-1)^q C(s-1, q) b^(-q) S_{nu-q}(z_l)
    wxy_l = the same with T in place of S

where ``S_r(z)`` sums, over data points x, the number of refinement
vectors d with ``|d| = r`` whose elementary interval holds both z and x,
and ``T_r`` is the y-weighted version.  Both come from the per-coordinate
digit-match depths of x against z.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ParameterError, RangeError, ShapeError
from .nets import DigitalNet, verify_net


@dataclass
class WeightSet:
    nu: int
    wx: np.ndarray
    wxy: np.ndarray
    y_energy: float
    net_ref: dict

    @property
    def L(self) -> int:
        return int(self.wx.shape[0])


def digit_match_depth(z_digits, x: float, b: int, r: int) -> int:
    """Number of leading base-b digits of ``x`` that agree with ``z_digits``.

    Digits of x come from repeated multiply-and-floor; the result is capped
    at ``r`` and at the length of ``z_digits``.
    """
    depth = min(int(r), len(z_digits))
    v = float(x)
    for k in range(depth):
        v *= b
        dig = min(math.floor(v), b - 1)
        if dig != int(z_digits[k]):
            return k
        v -= dig
    return depth


@lru_cache(maxsize=1 << 16)
def _count_cached(r: int, caps: tuple) -> int:
    ways = [1] + [0] * r
    for c in caps:
        c = min(c, r)
        if c == 0:
            continue
        prefix = list(itertools.accumulate(ways))
        ways = [prefix[t] - (prefix[t - c - 1] if t - c - 1 >= 0 else 0) for t in range(r + 1)]
    return ways[r]


def count_bounded_compositions(r: int, caps) -> int:
    """Number of non-negative integer vectors d with ``|d| = r`` and ``d <= caps``."""
    if r < 0:
        return 0
    return _count_cached(int(r), tuple(int(c) for c in caps))


def accumulate_S_T(z_digits, X, Y, b: int, r: int) -> tuple[int, float]:
    """Reference (unvectorised) evaluation of ``S_r(z)`` and ``T_r(z)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64)
    z_digits = np.asarray(z_digits)
    S = 0
    terms = []
    for x, y in zip(X, Y):
        caps = [digit_match_depth(z_digits[j], x[j], b, r) for j in range(X.shape[1])]
        cnt = count_bounded_compositions(r, caps)
        S += cnt
        terms.append(y * cnt)
    return S, math.fsum(terms)


def is_balanced(net: DigitalNet, nu: int) -> bool:
    """True when every elementary interval with ``|d| = nu`` holds ``b^(m-nu)`` points."""
    return verify_net(net, net.m - nu)


def compute_weights(X, Y, net: DigitalNet, nu: int) -> WeightSet:
    """QMC-averaging weights of ``net`` for data ``(X, Y)``.

    Raises
    ------
    ParameterError
        If ``nu`` is negative or the net is not balanced at level ``nu``
        (``nu > m - t``).
    RangeError
        If the dataset is empty.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    Y = np.ascontiguousarray(np.asarray(Y, dtype=np.float64).reshape(-1))
    N = X.shape[0]
    if N == 0 or Y.shape[0] == 0:
        raise RangeError("cannot compute weights for an empty dataset")
    if Y.shape[0] != N:
        raise ShapeError(f"{N} points but {Y.shape[0]} responses")
    if X.shape[1] != net.s:
        raise ShapeError(f"data has dimension {X.shape[1]}, net has {net.s}")
    nu = int(nu)
    if nu < 0:
        raise ParameterError("nu must be non-negative")
    if nu > net.m:
        raise ParameterError(f"nu={nu} exceeds m={net.m}")
    if net.t is not None:
        if nu > net.m - net.t:
            raise ParameterError(f"nu={nu} exceeds m - t = {net.m - net.t}")
    elif not is_balanced(net, nu):
        raise ParameterError(f"net is not balanced at level nu={nu}")

    b, m, s = net.b, net.m, net.s
    q_max = min(s - 1, nu)
    if nu == 0:
        xd = np.zeros((N, s, 1), dtype=np.uint8)  # depth is irrelevant at r = 0
    else:
        xd = kernels.data_digits(X, b, nu)
    S, T = kernels.st_sums(np.ascontiguousarray(net.digits), xd, Y, nu, q_max)

    coef = [
        (-1) ** q * comb_float(s - 1, q) * float(b) ** (nu - m - q) / N for q in range(q_max + 1)
    ]
    L = net.L
    wx = np.empty(L)
    wxy = np.empty(L)
    for l in range(L):
        wx[l] = math.fsum(coef[q] * float(S[l, q]) for q in range(q_max + 1))
        wxy[l] = math.fsum(coef[q] * T[l, q] for q in range(q_max + 1))
    y_energy = math.fsum(Y * Y) / N
    return WeightSet(nu, wx, wxy, y_energy, net.ref())


def comb_float(n: int, k: int) -> float:
    return float(math.comb(n, k))


def default_nu(m: int, t: int = 0, alpha: int = 1) -> int:
    """``m/2`` for alpha = 1, ``alpha m / (alpha + 1)`` otherwise.

    Halves round up; the result is clamped to ``[0, m - t]``.
    """
    num, den = (m, 2) if alpha <= 1 else (alpha * m, alpha + 1)
    nu = (2 * num + den) // (2 * den)
    return max(0, min(nu, m - t))


def app_avg(f_values, f_sq_values, W: WeightSet) -> float:
    """Weighted approximation ``sum f^2 wx - 2 sum f wxy + y_energy``."""
    f = np.asarray(f_values, dtype=np.float64)
    f2 = np.asarray(f_sq_values, dtype=np.float64)
    if f.shape != W.wx.shape or f2.shape != W.wx.shape:
        raise ShapeError(f"expected {W.L} values, got {f.shape} and {f2.shape}")
    return math.fsum(np.concatenate([f2 * W.wx, -2.0 * f * W.wxy, [W.y_energy]]))


def weight_concentration(W: WeightSet) -> float:
    """Share of ``sum |wx|`` carried by the two largest ``|wx|``."""
    a = np.abs(W.wx)
    tot = math.fsum(a)
    if tot == 0:
        return 0.0
    top = np.sort(a)[-2:]
    return float(math.fsum(top) / tot)
