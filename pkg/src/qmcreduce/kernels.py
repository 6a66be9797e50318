"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The public names at the bottom of this module dispatch on
:data:`qmcreduce._accel.BACKEND`.  Both variants are importable under
their suffixed names (``*_nb`` / ``*_np``) so tests and the benchmark
can compare them directly.
"""

from __future__ import annotations

import numpy as np

from ._accel import BACKEND, njit, prange

# ---------------------------------------------------------------------------
# b-adic digits of data coordinates
# ---------------------------------------------------------------------------


@njit(cache=True)
def data_digits_nb(x, b, depth):
    n, s = x.shape
    out = np.zeros((n, s, depth), dtype=np.uint8)
    for i in range(n):
        for j in range(s):
            v = x[i, j]
            for k in range(depth):
                v = v * b
                dig = np.floor(v)
                if dig > b - 1:  # guards x rounding up to 1.0 after scaling
                    dig = b - 1
                out[i, j, k] = np.uint8(dig)
                v = v - dig
    return out


def data_digits_np(x, b, depth):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.shape + (depth,), dtype=np.uint8)
    v = x.copy()
    for k in range(depth):
        v = v * b
        dig = np.minimum(np.floor(v), b - 1)
        out[..., k] = dig.astype(np.uint8)
        v = v - dig
    return out


# ---------------------------------------------------------------------------
# S_r and T_r sums for every net point
# ---------------------------------------------------------------------------


@njit(cache=True)
def _bounded_count_nb(caps, r, buf, nxt):
    # number of d >= 0 with |d| = r and d <= caps, by DP over coordinates
    for t in range(r + 1):
        buf[t] = 0
    buf[0] = 1
    top = 0
    for j in range(caps.shape[0]):
        c = caps[j]
        if c > r:
            c = r
        if c == 0:
            continue
        new_top = top + c
        if new_top > r:
            new_top = r
        run = 0
        for t in range(new_top + 1):
            if t <= top:
                run += buf[t]
            if t - c - 1 >= 0 and t - c - 1 <= top:
                run -= buf[t - c - 1]
            nxt[t] = run
        for t in range(new_top + 1):
            buf[t] = nxt[t]
        top = new_top
    if r > top:
        return 0
    return buf[r]


@njit(cache=True, parallel=True)
def st_sums_nb(net_digits, x_digits, y, nu, q_max):
    n_pts, s, _ = net_digits.shape
    n_data = x_digits.shape[0]
    depth = x_digits.shape[2]
    n_r = q_max + 1
    S = np.zeros((n_pts, n_r), dtype=np.int64)
    T = np.zeros((n_pts, n_r), dtype=np.float64)
    for l in prange(n_pts):
        caps = np.zeros(s, dtype=np.int64)
        buf = np.zeros(nu + 1, dtype=np.int64)
        nxt = np.zeros(nu + 1, dtype=np.int64)
        t_sum = np.zeros(n_r, dtype=np.float64)
        t_cmp = np.zeros(n_r, dtype=np.float64)
        for n in range(n_data):
            for j in range(s):
                k = 0
                while k < depth and x_digits[n, j, k] == net_digits[l, j, k]:
                    k += 1
                caps[j] = k
            yn = y[n]
            for q in range(n_r):
                cnt = _bounded_count_nb(caps, nu - q, buf, nxt)
                if cnt == 0:
                    continue
                S[l, q] += cnt
                # Neumaier-compensated accumulation of y_n * N_{r,i}
                term = yn * cnt
                tot = t_sum[q] + term
                if abs(t_sum[q]) >= abs(term):
                    t_cmp[q] += (t_sum[q] - tot) + term
                else:
                    t_cmp[q] += (term - tot) + t_sum[q]
                t_sum[q] = tot
        for q in range(n_r):
            T[l, q] = t_sum[q] + t_cmp[q]
    return S, T


def _bounded_counts_np(caps, r):
    """Vectorised N_{r,i} for a batch of cap vectors ``caps`` of shape (n, s)."""
    n = caps.shape[0]
    counts = np.zeros((n, r + 1), dtype=np.int64)
    counts[:, 0] = 1
    caps = np.minimum(caps, r)
    for j in range(caps.shape[1]):
        c = caps[:, j]
        csum = np.cumsum(counts, axis=1)
        new = csum.copy()
        # subtract the prefix that lies more than c_j steps behind
        t = np.arange(r + 1)
        lag = t[None, :] - c[:, None] - 1
        mask = lag >= 0
        rows, cols = np.nonzero(mask)
        new[rows, cols] -= csum[rows, lag[rows, cols]]
        counts = new
    return counts[:, r]


def st_sums_np(net_digits, x_digits, y, nu, q_max):
    n_pts, s, _ = net_digits.shape
    depth = x_digits.shape[2]
    n_r = q_max + 1
    S = np.zeros((n_pts, n_r), dtype=np.int64)
    T = np.zeros((n_pts, n_r), dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    for l in range(n_pts):
        eq = x_digits == net_digits[l, :, :depth][None, :, :]
        caps = np.cumprod(eq, axis=2).sum(axis=2)
        for q in range(n_r):
            cnt = _bounded_counts_np(caps, nu - q)
            S[l, q] = int(cnt.sum())
            T[l, q] = float(np.dot(y, cnt.astype(np.float64)))
    return S, T


# ---------------------------------------------------------------------------
# Nearest-center assignment (Voronoi / Lloyd)
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True)
def assign_nearest_nb(x, centers):
    n, s = x.shape
    k = centers.shape[0]
    idx = np.empty(n, dtype=np.int64)
    best_d = np.empty(n, dtype=np.float64)
    for i in prange(n):
        best = np.inf
        arg = 0
        for c in range(k):
            acc = 0.0
            for j in range(s):
                diff = x[i, j] - centers[c, j]
                acc += diff * diff
                if acc >= best:
                    break
            if acc < best:  # strict: ties keep the lower center index
                best = acc
                arg = c
        idx[i] = arg
        best_d[i] = best
    return idx, best_d


def assign_nearest_np(x, centers, chunk=2048):
    x = np.asarray(x, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    n = x.shape[0]
    idx = np.empty(n, dtype=np.int64)
    best_d = np.empty(n, dtype=np.float64)
    # bound the (chunk, k, s) temporary to ~64 MB
    per_row = max(1, centers.shape[0] * max(1, x.shape[1]))
    step = max(1, min(chunk, (8 << 20) // per_row))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        diff = x[lo:hi, None, :] - centers[None, :, :]
        d2 = np.einsum("ikj,ikj->ik", diff, diff)
        a = np.argmin(d2, axis=1)  # first minimum: lowest index on ties
        idx[lo:hi] = a
        best_d[lo:hi] = d2[np.arange(hi - lo), a]
    return idx, best_d


if BACKEND == "numba":
    data_digits = data_digits_nb
    st_sums = st_sums_nb
    assign_nearest = assign_nearest_nb
else:
    data_digits = data_digits_np
    st_sums = st_sums_np
    assign_nearest = assign_nearest_np

__all__ = [
    "data_digits",
    "st_sums",
    "assign_nearest",
    "data_digits_nb",
    "data_digits_np",
    "st_sums_nb",
    "st_sums_np",
    "assign_nearest_nb",
    "assign_nearest_np",
]
