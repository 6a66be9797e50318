"""Compare the numba and numpy kernels on workloads of typical size.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv] [--quick]

Each kernel is first run once per backend (JIT warm-up, discarded) and its
outputs compared; then the best of ``--repeat`` wall-clock runs is reported.
"""

from __future__ import annotations

import argparse
import csv
import sys
import timeit

import numpy as np

from qmcreduce import kernels, nets
from qmcreduce._accel import HAVE_NUMBA, get_threads


def _workloads(quick: bool):
    rng = np.random.default_rng(0)
    sizes = [(3000, 2, 8), (10_000, 2, 10)] if quick else [(3000, 2, 8), (10_000, 2, 10), (10_000, 3, 12)]
    for N, s, m in sizes:
        X = rng.random((N, s))
        Y = rng.random(N)
        net = nets.generate_points(nets.sobol_matrices(m, s), s)
        nu = m // 2
        xd = kernels.data_digits_np(X, 2, m)
        yield f"data_digits N={N} s={s} depth={m}", "data_digits", (X, 2, m)
        yield f"st_sums N={N} s={s} L=2^{m} nu={nu}", "st_sums", (net.digits, xd, Y, nu, min(s - 1, nu))
        yield f"assign_nearest N={N} s={s} K=2^{m}", "assign_nearest", (X, net.points)
    N, s = 4000, 196
    X = rng.random((N, s))
    C = X[rng.choice(N, 1600, replace=False)]
    yield f"assign_nearest N={N} s={s} K=1600", "assign_nearest", (X, C)


def _same(a, b) -> bool:
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(u, v, rtol=1e-12, atol=1e-9) for u, v in zip(a, b))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", help="also write results to this CSV file")
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not importable; nothing to compare", file=sys.stderr)
        return 1
    rows = []
    print(f"threads: {get_threads()}")
    print(f"{'workload':<44} {'numba [s]':>11} {'numpy [s]':>11} {'speedup':>8}  match")
    for label, name, argt in _workloads(args.quick):
        fn_nb = getattr(kernels, name + "_nb")
        fn_np = getattr(kernels, name + "_np")
        same = _same(fn_nb(*argt), fn_np(*argt))
        t_nb = min(timeit.repeat(lambda: fn_nb(*argt), number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(lambda: fn_np(*argt), number=1, repeat=args.repeat))
        rows.append((label, t_nb, t_np, t_np / t_nb, same))
        print(f"{label:<44} {t_nb:11.4g} {t_np:11.4g} {t_np / t_nb:8.1f}  {'yes' if same else 'NO'}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["workload", "numba_seconds", "numpy_seconds", "speedup", "outputs_match"])
            w.writerows(rows)
    return 0 if all(r[4] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
