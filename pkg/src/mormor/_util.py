"""Small shared helpers: deterministic parallel sweeps, formatting, rate fits."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def resolve_threads(value=None):
    """CLI --threads flag, MORMOR_THREADS env, machine parallelism, in that order."""
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("MORMOR_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, threads=1):
    """Map preserving input order; results are independent of scheduling."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fmt17(x):
    """Round-trip-safe CSV cell."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def fit_loglog_slope(n, err, window=None):
    """Least-squares slope of log(err) against log(n).

    window = (lo, hi) restricts to lo <= n <= hi; nonpositive errors are
    dropped.  Returns nan when fewer than two usable points remain.
    """
    n = np.asarray(n, dtype=float)
    err = np.asarray(err, dtype=float)
    mask = err > 0
    if window is not None:
        lo, hi = window
        mask &= (n >= lo) & (n <= hi)
    if mask.sum() < 2:
        return float("nan")
    A = np.column_stack([np.log(n[mask]), np.ones(int(mask.sum()))])
    slope = np.linalg.lstsq(A, np.log(err[mask]), rcond=None)[0][0]
    return float(slope)
