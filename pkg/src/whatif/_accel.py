"""Numeric kernels with a numba path and a pure-numpy fallback.

Set ``WHATIF_NO_NUMBA=1`` to force the numpy path (useful for debugging and
for the parity tests). Both paths are always importable so they can be
compared against each other.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("WHATIF_NO_NUMBA", "") not in ("1", "true", "yes")

# relative pivot size below which a parent covariance block counts as singular
SINGULAR_TOL = 1e-12
RIDGE = 1e-8
# residual variance floor; keeps ln() finite for exact collinearity
VAR_FLOOR = 1e-300


def _residual_variance_np(cov, y, parents):
    syy = cov[y, y]
    if parents.size == 0:
        return max(syy, VAR_FLOOR), False
    spp = cov[np.ix_(parents, parents)]
    spy = cov[parents, y]
    scale = max(np.max(np.abs(np.diag(spp))), 1.0)
    degenerate = False
    try:
        chol = np.linalg.cholesky(spp)
        if np.min(np.diag(chol)) ** 2 <= SINGULAR_TOL * scale:
            degenerate = True
    except np.linalg.LinAlgError:
        degenerate = True
    if degenerate:
        chol = np.linalg.cholesky(spp + RIDGE * scale * np.eye(parents.size))
    z = np.linalg.solve(chol, spy)
    rss = syy - z @ z
    if rss <= VAR_FLOOR:
        return VAR_FLOOR, True
    return rss, degenerate


@njit(cache=True)
def _cholesky_inplace(a, tol):
    # lower-triangular factor written into ``a``; returns False on a tiny pivot
    k = a.shape[0]
    ok = True
    for j in range(k):
        s = a[j, j]
        for m in range(j):
            s -= a[j, m] * a[j, m]
        if s <= tol:
            ok = False
            if s <= 0.0:
                return False
        d = np.sqrt(s)
        a[j, j] = d
        for i in range(j + 1, k):
            t = a[i, j]
            for m in range(j):
                t -= a[i, m] * a[j, m]
            a[i, j] = t / d
    return ok


@njit(cache=True)
def _residual_variance_nb(cov, y, parents):
    syy = cov[y, y]
    k = parents.size
    if k == 0:
        return max(syy, VAR_FLOOR), False
    spp = np.empty((k, k))
    spy = np.empty(k)
    scale = 1.0
    for i in range(k):
        spy[i] = cov[parents[i], y]
        for j in range(k):
            spp[i, j] = cov[parents[i], parents[j]]
        if abs(spp[i, i]) > scale:
            scale = abs(spp[i, i])
    work = spp.copy()
    degenerate = not _cholesky_inplace(work, SINGULAR_TOL * scale)
    if degenerate:
        work = spp.copy()
        for i in range(k):
            work[i, i] += RIDGE * scale
        _cholesky_inplace(work, 0.0)
    # forward substitution: L z = spy
    z = np.empty(k)
    for i in range(k):
        t = spy[i]
        for m in range(i):
            t -= work[i, m] * z[m]
        z[i] = t / work[i, i]
    rss = syy
    for i in range(k):
        rss -= z[i] * z[i]
    if rss <= VAR_FLOOR:
        return VAR_FLOOR, True
    return rss, degenerate


def residual_variance(cov: np.ndarray, y: int, parents: np.ndarray) -> tuple[float, bool]:
    """ML residual variance of ``y`` regressed on ``parents`` from a covariance matrix.

    Returns ``(variance, degenerate)``; ``degenerate`` is set when the parent
    block was singular and a ridge of ``1e-8`` (scaled to the block) was added.
    """
    parents = np.ascontiguousarray(parents, dtype=np.int64)
    if USE_NUMBA:
        var, flag = _residual_variance_nb(cov, np.int64(y), parents)
    else:
        var, flag = _residual_variance_np(cov, y, parents)
    return float(var), bool(flag)


def _resample_diffs_np(hi_vals, lo_vals, idx_hi, idx_lo):
    out = np.empty((idx_hi.shape[0], hi_vals.shape[1]))
    for r in range(idx_hi.shape[0]):
        out[r] = hi_vals[idx_hi[r]].mean(axis=0) - lo_vals[idx_lo[r]].mean(axis=0)
    return out


@njit(cache=True)
def _resample_diffs_nb(hi_vals, lo_vals, idx_hi, idx_lo):
    n_res, m_hi = idx_hi.shape
    m_lo = idx_lo.shape[1]
    p = hi_vals.shape[1]
    out = np.empty((n_res, p))
    acc_hi = np.empty(p)
    acc_lo = np.empty(p)
    for r in range(n_res):
        acc_hi[:] = 0.0
        acc_lo[:] = 0.0
        for i in range(m_hi):
            row = idx_hi[r, i]
            for j in range(p):
                acc_hi[j] += hi_vals[row, j]
        for i in range(m_lo):
            row = idx_lo[r, i]
            for j in range(p):
                acc_lo[j] += lo_vals[row, j]
        for j in range(p):
            out[r, j] = acc_hi[j] / m_hi - acc_lo[j] / m_lo
    return out


def resample_mean_diffs(
    hi_vals: np.ndarray, lo_vals: np.ndarray, idx_hi: np.ndarray, idx_lo: np.ndarray
) -> np.ndarray:
    """Per-resample column mean of ``hi_vals[idx_hi[r]]`` minus that of ``lo_vals[idx_lo[r]]``."""
    hi_vals = np.ascontiguousarray(hi_vals, dtype=np.float64)
    lo_vals = np.ascontiguousarray(lo_vals, dtype=np.float64)
    idx_hi = np.ascontiguousarray(idx_hi, dtype=np.int64)
    idx_lo = np.ascontiguousarray(idx_lo, dtype=np.int64)
    if USE_NUMBA:
        return _resample_diffs_nb(hi_vals, lo_vals, idx_hi, idx_lo)
    return _resample_diffs_np(hi_vals, lo_vals, idx_hi, idx_lo)
