"""Backend switch for the hot kernels.

Every kernel in :mod:`qmcreduce.kernels` exists twice: a numba ``@njit``
version and a pure-numpy version.  The backend is picked once at import
time from the ``QMCREDUCE_BACKEND`` environment variable (``numba`` or
``numpy``).  ``numba`` is the default whenever numba imports cleanly.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the system TBB is too old for numba; skip probing it
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn

    prange = range

_requested = os.environ.get("QMCREDUCE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"QMCREDUCE_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and not HAVE_NUMBA:
    logger.warning("numba is not importable; falling back to the numpy kernels")
    _requested = "numpy"

BACKEND: str = _requested


def max_threads() -> int:
    """Upper bound on worker threads for the parallel kernels."""
    if HAVE_NUMBA:
        return int(numba.config.NUMBA_NUM_THREADS)
    return 1


def set_threads(n: int) -> int:
    """Cap kernel parallelism at ``n`` threads; returns the value applied.

    Results never depend on the thread count: parallel loops write to
    disjoint output slots and all reductions run in a fixed order.
    """
    if n < 1:
        raise ValueError("thread count must be >= 1")
    applied = min(int(n), max_threads())
    if HAVE_NUMBA:
        numba.set_num_threads(applied)
    return applied


def get_threads() -> int:
    if HAVE_NUMBA:
        return int(numba.get_num_threads())
    return 1
