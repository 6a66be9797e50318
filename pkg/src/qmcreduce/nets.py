"""Digital nets in prime base b.

Points are produced from generating matrices over Z_b and always carry
their exact digit vectors; every interval-membership decision in the
package is made on those digits rather than on floating-point values.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError


def is_prime(b: int) -> bool:
    if b < 2:
        return False
    return all(b % p for p in range(2, int(b**0.5) + 1))


@dataclass
class GeneratingMatrixSet:
    """Generating matrices of a digital net.

    Attributes
    ----------
    b : int
        Prime base.
    m : int
        Number of columns; the net has ``b**m`` points.
    matrices : ndarray of shape (n, alpha * m, m)
        Entries in ``0..b-1``.
    alpha : int
        Interlacing order.
    """

    b: int
    m: int
    matrices: np.ndarray
    alpha: int = 1

    def __post_init__(self):
        if not is_prime(self.b):
            raise ParameterError(f"base {self.b} is not prime")
        if self.m < 1 or self.alpha < 1:
            raise ParameterError("m and alpha must be positive")
        mats = np.asarray(self.matrices, dtype=np.int64)
        if mats.ndim != 3 or mats.shape[1:] != (self.alpha * self.m, self.m):
            raise ParameterError(
                f"expected matrices of shape (n, {self.alpha * self.m}, {self.m}), got {mats.shape}"
            )
        if mats.size and (mats.min() < 0 or mats.max() >= self.b):
            raise ParameterError(f"matrix entries must lie in 0..{self.b - 1}")
        self.matrices = mats

    @property
    def count(self) -> int:
        return int(self.matrices.shape[0])


@dataclass
class DigitalNet:
    """A digital net with exact digits.

    ``digits[l, j, i]`` is the (i+1)-th base-b digit of coordinate j of
    point l.  ``t`` is the quality parameter when known, else ``None``.
    """

    b: int
    m: int
    s: int
    alpha: int
    points: np.ndarray
    digits: np.ndarray
    t: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return int(self.points.shape[0])

    def ref(self) -> dict:
        return {"b": self.b, "m": self.m, "s": self.s, "t": self.t, "alpha": self.alpha}


def faure_matrices(b: int, m: int, s: int) -> GeneratingMatrixSet:
    """Faure generating matrices ``C_j[k, n] = binom(n, k) (j-1)^(n-k) mod b``.

    Indices are 0-based and ``j = 1..s``, so ``C_1`` is the identity and
    ``C_2`` is Pascal's matrix mod b.  For ``s > b`` the generators
    ``j - 1`` repeat modulo b and the net degrades; a warning is issued.
    """
    if not is_prime(b):
        raise ParameterError(f"base {b} is not prime")
    if m < 1 or s < 1:
        raise ParameterError("m and s must be positive")
    if s > b:
        warnings.warn(
            f"Faure matrices in base {b} repeat beyond s={b}; s={s} gives a poor net",
            stacklevel=2,
        )
    mats = np.zeros((s, m, m), dtype=np.int64)
    for j in range(s):
        g = j % b
        for n in range(m):
            for k in range(n + 1):
                mats[j, k, n] = comb(n, k) * pow(g, n - k, b) % b
    return GeneratingMatrixSet(b, m, mats, 1)


def sobol_matrices(m: int, s: int) -> GeneratingMatrixSet:
    """Base-2 Sobol generating matrices taken from scipy's direction numbers.

    Column i of ``C_j`` holds the leading bits of direction number i.
    scipy emits points in Gray-code order, so point ``2**(i+1) - 1`` of the
    unscrambled sequence equals direction number i.
    """
    from scipy.stats import qmc

    if not 1 <= m <= 30:
        raise ParameterError("Sobol matrices support 1 <= m <= 30")
    eng = qmc.Sobol(d=s, scramble=False, bits=30)
    pts = eng.random(2**m)  # prefix of the sequence; columns read at 2**(i+1)-1
    mats = np.zeros((s, m, m), dtype=np.int64)
    for i in range(m):
        row = pts[2 ** (i + 1) - 1] if 2 ** (i + 1) - 1 < len(pts) else None
        if row is None:
            sub = qmc.Sobol(d=s, scramble=False, bits=30)
            sub.fast_forward(2 ** (i + 1) - 1)
            row = sub.random(1)[0]
        ints = np.rint(np.asarray(row) * 2.0**30).astype(np.int64)
        for k in range(m):
            mats[:, k, i] = (ints >> (29 - k)) & 1
    return GeneratingMatrixSet(2, m, mats, 1)


def load_matrices(path) -> GeneratingMatrixSet:
    """Parse the plain-text matrix format.

    The first line holds ``b m s alpha``; then ``s`` blocks of ``alpha*m``
    rows with ``m`` integers each.  Blank lines and ``/`` separators are
    ignored, so ``"2 2 1 1 / 1 0 / 0 1"`` is also accepted on one line.
    """
    text = Path(path).read_text()
    tokens = text.replace("/", " ").split()
    try:
        vals = [int(tok) for tok in tokens]
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer token ({exc})") from None
    if len(vals) < 4:
        raise FormatError(f"{path}: missing 'b m s alpha' header")
    b, m, s, alpha = vals[:4]
    body = vals[4:]
    if b < 2 or m < 1 or s < 1 or alpha < 1:
        raise FormatError(f"{path}: invalid header {vals[:4]}")
    need = s * alpha * m * m
    if len(body) != need:
        raise FormatError(f"{path}: expected {need} matrix entries, found {len(body)}")
    mats = np.asarray(body, dtype=np.int64).reshape(s, alpha * m, m)
    if mats.min() < 0 or mats.max() >= b:
        raise FormatError(f"{path}: entries must lie in 0..{b - 1}")
    try:
        return GeneratingMatrixSet(b, m, mats, alpha)
    except ParameterError as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_matrices(path, G: GeneratingMatrixSet) -> None:
    lines = [f"{G.b} {G.m} {G.count} {G.alpha}"]
    for mat in G.matrices:
        lines.extend(" ".join(str(int(v)) for v in row) for row in mat)
        lines.append("")
    Path(path).write_text("\n".join(lines))


def interlace(G: GeneratingMatrixSet, alpha: int) -> GeneratingMatrixSet:
    """Interleave the rows of groups of ``alpha`` consecutive matrices.

    Row ``v * alpha + i`` of ``D_j`` is row ``v`` of ``C_{j*alpha + i}``.
    """
    if alpha < 1:
        raise ParameterError("alpha must be positive")
    if G.alpha != 1:
        raise ParameterError("input matrices are already interlaced")
    n = G.count
    if n % alpha:
        raise ParameterError(f"{n} matrices cannot be grouped by alpha={alpha}")
    if alpha == 1:
        return GeneratingMatrixSet(G.b, G.m, G.matrices.copy(), 1)
    m = G.m
    grouped = G.matrices.reshape(n // alpha, alpha, m, m)
    # (s, alpha, m_rows, m) -> (s, m_rows, alpha, m) -> rows v*alpha + i
    D = grouped.transpose(0, 2, 1, 3).reshape(n // alpha, alpha * m, m)
    return GeneratingMatrixSet(G.b, m, D, alpha)


def _digits_to_float(digits: np.ndarray, b: int) -> np.ndarray:
    depth = digits.shape[-1]
    # Horner from the least significant digit keeps every step exact in base 2
    val = np.zeros(digits.shape[:-1], dtype=np.float64)
    for i in range(depth - 1, -1, -1):
        val = (val + digits[..., i]) / b
    return val


def generate_points(G: GeneratingMatrixSet, s: int | None = None, t: int | None = None) -> DigitalNet:
    """Apply the first ``s`` generating matrices to every digit vector of l-1."""
    s = G.count if s is None else int(s)
    if s < 1 or s > G.count:
        raise ParameterError(f"need {s} matrices, only {G.count} available")
    b, m = G.b, G.m
    L = b**m
    lam = np.zeros((L, m), dtype=np.int64)
    rem = np.arange(L, dtype=np.int64)
    for i in range(m):
        lam[:, i] = rem % b
        rem //= b
    # digits[l, j, r] = sum_n C_j[r, n] * lam[l, n]  (mod b)
    digits = np.einsum("jrn,ln->ljr", G.matrices[:s], lam) % b
    digits = digits.astype(np.uint8)
    points = _digits_to_float(digits, b)
    return DigitalNet(b, m, s, G.alpha, points, digits, t)


def _interval_keys(digits: np.ndarray, support, b: int) -> np.ndarray:
    """Integer label of each point's elementary interval; ``support`` lists (j, d_j > 0)."""
    key = np.zeros(digits.shape[0], dtype=np.int64)
    for j, dj in support:
        for i in range(dj):
            key = key * b + digits[:, j, i]
    return key


def compositions(total: int, parts: int):
    """All vectors of ``parts`` non-negative integers summing to ``total``."""
    for bars in itertools.combinations_with_replacement(range(parts), total):
        d = [0] * parts
        for j in bars:
            d[j] += 1
        yield d


def verify_net(net: DigitalNet, t_candidate: int) -> bool:
    """Exhaustively check the (t, m, s)-net property on exact digits."""
    m, b = net.m, net.b
    if not 0 <= t_candidate <= m:
        return False
    k = m - t_candidate
    if k == 0:
        return True
    target = b**t_candidate
    n_cells = b**k
    for d in compositions(k, net.s):
        keys = _interval_keys(net.digits, [(j, dj) for j, dj in enumerate(d) if dj], b)
        counts = np.bincount(keys, minlength=n_cells)
        if counts.shape[0] != n_cells or np.any(counts != target):
            return False
    return True


def min_t(net: DigitalNet) -> int:
    """Smallest t for which :func:`verify_net` passes."""
    for t in range(net.m + 1):
        if verify_net(net, t):
            return t
    return net.m  # unreachable: t = m always holds


def faure_net(b: int, m: int, s: int) -> DigitalNet:
    """Faure net with its exact t value attached."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        G = faure_matrices(b, m, s)
    net = generate_points(G, s)
    net.t = min_t(net)
    return net
