"""Compiled inner loops for the multi-radius ball and sphere sweeps.

All kernels work on a 2D array view; 1D data is passed as a single row with
``is2d=False`` so that only the centre row contributes. Radii are integers
``k`` in index units (physical radius ``k*h``).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


def halfwidth_table(kmax: int) -> np.ndarray:
    """``hw[k, a]``: largest ``w`` with ``w*w + a*a < k*k`` (``-1`` if none)."""
    hw = np.full((kmax + 1, kmax + 1), -1, dtype=np.int64)
    for k in range(1, kmax + 1):
        for a in range(k):
            hw[k, a] = math.isqrt(k * k - a * a - 1)
    return hw


def lattice_count(k: int, hw: np.ndarray, is2d: bool) -> int:
    """Number of lattice points strictly inside the radius-``k`` ball."""
    if not is2d:
        return 2 * k - 1
    return int(sum(2 * hw[k, abs(a)] + 1 for a in range(-(k - 1), k)))


@njit(cache=True)
def _compensated_cumsum(vals, out):
    # running sum kept as an unevaluated pair (hi, lo), updated by TwoSum
    rows, cols = vals.shape
    for i in range(rows):
        hi = 0.0
        lo = 0.0
        for j in range(cols):
            x = vals[i, j]
            t = hi + x
            z = t - hi
            lo += (hi - (t - z)) + (x - z)
            hi = t
            out[0, i, j + 1] = hi
            out[1, i, j + 1] = lo


def row_prefix(values2d: np.ndarray, scale: float) -> np.ndarray:
    """Compensated row prefix sums, shape ``(2, rows, cols + 1)``.

    Plane 0 holds the rounded running sums and plane 1 their accumulated
    rounding errors, so a segment difference loses accuracy only relative to
    the segment, not to the whole row.
    """
    rows, cols = values2d.shape
    p = np.zeros((2, rows, cols + 1))
    _compensated_cumsum(np.ascontiguousarray(values2d * scale, dtype=np.float64), p)
    return p


@njit(cache=True)
def segment_sum(prefix, i, a, b):
    """Sum of row ``i`` over columns ``a..b-1``."""
    return (prefix[0, i, b] - prefix[0, i, a]) + (prefix[1, i, b] - prefix[1, i, a])


@njit(cache=True)
def _ball_sum(prefix, i, j, k, hw, is2d):
    s = 0.0
    if is2d:
        for a in range(-(k - 1), k):
            w = hw[k, abs(a)]
            s += segment_sum(prefix, i + a, j - w, j + w + 1)
    else:
        w = k - 1
        s = segment_sum(prefix, i, j - w, j + w + 1)
    return s


@njit(cache=True)
def ball_sums_fixed_k(prefix, k, hw, is2d, valid):
    """Ball sums at radius ``k`` for every point flagged in ``valid``."""
    rows = valid.shape[0]
    cols = valid.shape[1]
    out = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            if valid[i, j]:
                out[i, j] = _ball_sum(prefix, i, j, k, hw, is2d)
    return out


@njit(cache=True)
def ball_sums_at(prefix, kpt, hw, is2d):
    """Ball sums with a per-point radius ``kpt`` (``0`` marks a skipped point)."""
    rows = kpt.shape[0]
    cols = kpt.shape[1]
    out = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            k = kpt[i, j]
            if k > 0:
                out[i, j] = _ball_sum(prefix, i, j, k, hw, is2d)
    return out


@njit(cache=True)
def _pick(buf, lo, hi, rtol):
    """Exact maximum of ``buf[lo..hi]`` and the smallest index within ``rtol``
    (relative) of it, so rounding noise between equal averages cannot move
    the argmax."""
    best = buf[lo]
    for k in range(lo + 1, hi + 1):
        if buf[k] > best:
            best = buf[k]
    floor = best - rtol * abs(best)
    for k in range(lo, hi + 1):
        if buf[k] >= floor:
            return best, k
    return best, lo


@njit(cache=True)
def ball_sweep_max(prefix, kmax, k_lo, k_hi, weights, hw, is2d, rtol):
    """Max over ``k_lo <= k <= min(kmax, k_hi)`` of ``weights[k] * ballsum_k``.

    Returns the maximal values and the maximizing ``k`` (``0`` where the
    window is empty); see :func:`_pick` for ties.
    """
    rows = kmax.shape[0]
    cols = kmax.shape[1]
    val = np.zeros((rows, cols))
    arg = np.zeros((rows, cols), dtype=np.int64)
    buf = np.zeros(weights.shape[0])
    for i in range(rows):
        for j in range(cols):
            top = min(kmax[i, j], k_hi)
            if top < k_lo:
                continue
            for k in range(k_lo, top + 1):
                buf[k] = weights[k] * _ball_sum(prefix, i, j, k, hw, is2d)
            val[i, j], arg[i, j] = _pick(buf, k_lo, top, rtol)
    return val, arg


@njit(cache=True)
def _sphere_prep(values, di0, fi, dj0, fj):
    """Zero-padded flat copy of ``values`` plus flat node offsets and bilinear
    weights, so the inner loop needs no bounds clamping (a node on the last
    row or column has zero weight on the padding)."""
    rows = values.shape[0]
    cols = values.shape[1]
    stride = cols + 1
    padded = np.zeros((rows + 1) * stride)
    for i in range(rows):
        for j in range(cols):
            padded[i * stride + j] = values[i, j]
    m = di0.shape[0]
    off = np.empty(m, dtype=np.int64)
    w = np.empty((m, 4))
    for t in range(m):
        off[t] = di0[t] * stride + dj0[t]
        x = fi[t]
        y = fj[t]
        w[t, 0] = (1.0 - x) * (1.0 - y)
        w[t, 1] = x * (1.0 - y)
        w[t, 2] = (1.0 - x) * y
        w[t, 3] = x * y
    return padded, off, w, stride


@njit(cache=True)
def _sphere_sum(values, padded, i, j, k, start, off, w, stride, is2d):
    if not is2d:
        return values[i, j - k] + values[i, j + k]
    base = i * stride + j
    s = 0.0
    for t in range(start[k], start[k + 1]):
        q = base + off[t]
        s += (w[t, 0] * padded[q] + w[t, 1] * padded[q + stride]
              + w[t, 2] * padded[q + 1] + w[t, 3] * padded[q + stride + 1])
    return s


@njit(cache=True)
def sphere_sweep_max(values, kmax, k_lo, k_hi, factors, start, di0, fi, dj0, fj, is2d, rtol):
    """Max over admissible ``k`` of ``factors[k] * spheresum_k``."""
    rows = kmax.shape[0]
    cols = kmax.shape[1]
    val = np.zeros((rows, cols))
    arg = np.zeros((rows, cols), dtype=np.int64)
    buf = np.zeros(factors.shape[0])
    padded, off, w, stride = _sphere_prep(values, di0, fi, dj0, fj)
    for i in range(rows):
        for j in range(cols):
            top = min(kmax[i, j], k_hi)
            if top < k_lo:
                continue
            for k in range(k_lo, top + 1):
                buf[k] = factors[k] * _sphere_sum(values, padded, i, j, k, start, off, w, stride, is2d)
            val[i, j], arg[i, j] = _pick(buf, k_lo, top, rtol)
    return val, arg


@njit(cache=True)
def sphere_sums_at(values, kpt, start, di0, fi, dj0, fj, is2d):
    rows = kpt.shape[0]
    cols = kpt.shape[1]
    out = np.zeros((rows, cols))
    padded, off, w, stride = _sphere_prep(values, di0, fi, dj0, fj)
    for i in range(rows):
        for j in range(cols):
            k = kpt[i, j]
            if k > 0:
                out[i, j] = _sphere_sum(values, padded, i, j, k, start, off, w, stride, is2d)
    return out
