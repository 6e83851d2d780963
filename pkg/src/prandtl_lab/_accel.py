"""Hot kernels with a numba path and a pure-numpy fallback.

Set ``PLAB_NO_NUMBA=1`` in the environment before import to force the
numpy implementations (useful for debugging and for the benchmark).
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("PLAB_NO_NUMBA", "0") not in ("1", "true", "yes")


def _njit(func):
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


def thomas_batch_numpy(lower, diag, upper, rhs):
    """Solve many tridiagonal systems at once, vectorised over the batch axis.

    All arrays have shape ``(m, n)``; ``lower[:, 0]`` and ``upper[:, -1]``
    are ignored. Returns the solution with the dtype of ``rhs``
    promoted against the coefficients.
    """
    lower = np.asarray(lower)
    diag = np.asarray(diag)
    upper = np.asarray(upper)
    rhs = np.asarray(rhs)
    dtype = np.result_type(lower, diag, upper, rhs, np.float64)
    m, n = rhs.shape
    cp = np.empty((m, n), dtype=dtype)
    dp = np.empty((m, n), dtype=dtype)
    cp[:, 0] = upper[:, 0] / diag[:, 0]
    dp[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, n):
        denom = diag[:, i] - lower[:, i] * cp[:, i - 1]
        cp[:, i] = upper[:, i] / denom
        dp[:, i] = (rhs[:, i] - lower[:, i] * dp[:, i - 1]) / denom
    out = np.empty((m, n), dtype=dtype)
    out[:, -1] = dp[:, -1]
    for i in range(n - 2, -1, -1):
        out[:, i] = dp[:, i] - cp[:, i] * out[:, i + 1]
    return out


@_njit
def _thomas_batch_jit(lower, diag, upper, rhs, out):
    m, n = rhs.shape
    cp = np.empty(n, dtype=out.dtype)
    dp = np.empty(n, dtype=out.dtype)
    for j in range(m):
        cp[0] = upper[j, 0] / diag[j, 0]
        dp[0] = rhs[j, 0] / diag[j, 0]
        for i in range(1, n):
            denom = diag[j, i] - lower[j, i] * cp[i - 1]
            cp[i] = upper[j, i] / denom
            dp[i] = (rhs[j, i] - lower[j, i] * dp[i - 1]) / denom
        out[j, n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            out[j, i] = dp[i] - cp[i] * out[j, i + 1]
    return out


def thomas_batch_numba(lower, diag, upper, rhs):
    dtype = np.result_type(lower, diag, upper, rhs, np.float64)
    lower = np.ascontiguousarray(lower, dtype=dtype)
    diag = np.ascontiguousarray(diag, dtype=dtype)
    upper = np.ascontiguousarray(upper, dtype=dtype)
    rhs = np.ascontiguousarray(rhs, dtype=dtype)
    out = np.empty(rhs.shape, dtype=dtype)
    return _thomas_batch_jit(lower, diag, upper, rhs, out)


def log_mean_inverse_numpy(wa, wb):
    """Exact integral of 1/w over a unit cell where w is linear from wa to wb."""
    wa = np.asarray(wa, dtype=float)
    wb = np.asarray(wb, dtype=float)
    diff = wa - wb
    close = np.abs(diff) <= 1e-6 * np.abs(wa)
    safe = np.where(close, 1.0, diff)
    exact = np.log1p(diff / wb) / safe
    # series in d = diff/wa for nearly constant cells
    d = diff / wa
    series = (1.0 + d / 2.0 + d * d / 3.0) / wa
    return np.where(close, series, exact)


@_njit
def _log_mean_inverse_jit(wa, wb, out):
    flat_a = wa.ravel()
    flat_b = wb.ravel()
    flat_o = out.ravel()
    for i in range(flat_a.size):
        a = flat_a[i]
        b = flat_b[i]
        diff = a - b
        if abs(diff) <= 1e-6 * abs(a):
            d = diff / a
            flat_o[i] = (1.0 + d / 2.0 + d * d / 3.0) / a
        else:
            flat_o[i] = np.log1p(diff / b) / diff
    return out


def log_mean_inverse_numba(wa, wb):
    wa = np.ascontiguousarray(wa, dtype=np.float64)
    wb = np.ascontiguousarray(np.broadcast_to(wb, wa.shape), dtype=np.float64)
    out = np.empty(wa.shape, dtype=np.float64)
    return _log_mean_inverse_jit(wa, wb, out)


if USE_NUMBA:
    thomas_batch = thomas_batch_numba
    log_mean_inverse = log_mean_inverse_numba
else:
    thomas_batch = thomas_batch_numpy
    log_mean_inverse = log_mean_inverse_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
