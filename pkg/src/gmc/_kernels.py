"""Compiled pair loops for the weighted correlation at many query points.

Each query visits the ``i < j`` half of the pair set in row-blocks. One
compiled pass writes the granularity exponent of every pair into a buffer,
numpy exponentiates it in place (vectorized), and a second compiled pass
accumulates the three weighted sums. Row partial sums are combined with
Kahan summation so results do not depend on block layout beyond rounding.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BLOCK_PAIRS = 1 << 20
# exponents are clamped here so numpy's exp stays on its vector path;
# the resulting ~1e-304 weights sit below WEIGHT_FLOOR and are dropped
LOG_FLOOR = -700.0
WEIGHT_FLOOR = 1e-300


def row_blocks(n: int, max_pairs: int = BLOCK_PAIRS) -> list[tuple[int, int, int]]:
    """Partition rows into ``(start, stop, n_pairs)`` blocks of upper-triangle pairs."""
    blocks = []
    start, count = 0, 0
    for i in range(n - 1):
        row = n - 1 - i
        if count and count + row > max_pairs:
            blocks.append((start, i, count))
            start, count = i, 0
        count += row
    if count:
        blocks.append((start, n - 1, count))
    return blocks


@njit(cache=True, nogil=True)
def _kahan_add(acc, comp, m, v):
    yk = v - comp[m]
    tk = acc[m] + yk
    comp[m] = (tk - acc[m]) - yk
    acc[m] = tk


@njit(cache=True, nogil=True, error_model="numpy", fastmath={"contract"})
def _fill_exponents(q, sig2, half_s, qd, pd_scale, i0, i1, out):
    n = q.size
    pos = 0
    for i in range(i0, i1):
        m = n - i - 1
        row = out[pos : pos + m]
        qj = q[i + 1 :]
        sj = sig2[i + 1 :]
        hj = half_s[i + 1 :]
        qi = q[i]
        si = sig2[i]
        hi = half_s[i]
        for j in range(m):
            e = qd - abs(qi - qj[j])
            row[j] = max(hi + hj[j] - e * e / (pd_scale * (si + sj[j])), LOG_FLOOR)
        pos += m


@njit(cache=True, nogil=True, error_model="numpy", fastmath={"reassoc", "contract"})
def _row_sums(x, y, t, g, sign_mode, cutoff, i0, i1, acc, comp):
    n = x.size
    pos = 0
    for i in range(i0, i1):
        m = n - i - 1
        gj = g[pos : pos + m]
        xj = x[i + 1 :]
        yj = y[i + 1 :]
        tj = t[i + 1 :]
        xi = x[i]
        yi = y[i]
        sab = 0.0
        saa = 0.0
        sbb = 0.0
        if sign_mode:
            for j in range(m):
                w = gj[j]
                w = w * tj[j] if w >= cutoff else 0.0
                a = (xi > xj[j]) * 1.0 - (xi < xj[j]) * 1.0
                b = (yi > yj[j]) * 1.0 - (yi < yj[j]) * 1.0
                sab += w * a * b
                saa += w * a * a
                sbb += w * b * b
        else:
            for j in range(m):
                w = gj[j]
                w = w * tj[j] if w >= cutoff else 0.0
                a = xi - xj[j]
                b = yi - yj[j]
                sab += w * a * b
                saa += w * a * a
                sbb += w * b * b
        pos += m
        ti = t[i]
        _kahan_add(acc, comp, 0, sab * ti)
        _kahan_add(acc, comp, 1, saa * ti)
        _kahan_add(acc, comp, 2, sbb * ti)


def weighted_pair_sums(x, y, sign_mode, q, sig2, half_s_rows, qd, pd_scale, t, cutoff=0.0):
    """Ordered-pair sums ``(sum w a b, sum w a^2, sum w b^2)`` for each query.

    ``half_s_rows[k]`` holds the per-sample absolute-quality exponent
    ``-(qs_k - q_i)^2 / (2 sigma_i^2)`` for query ``k``; ``qd[k]`` is the
    query's target difference. ``t`` is the per-sample regulator factor
    ``1 / D(q_i)``. Pairs whose granularity weight is below ``cutoff`` (and
    always below ``WEIGHT_FLOOR``) are dropped.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    sig2 = np.ascontiguousarray(sig2, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    half_s_rows = np.ascontiguousarray(half_s_rows, dtype=np.float64)
    qd = np.asarray(qd, dtype=np.float64)
    n = q.size
    blocks = row_blocks(n)
    buf = np.empty(max((b[2] for b in blocks), default=0), dtype=np.float64)
    out = np.zeros((qd.size, 3))
    for k in range(qd.size):
        acc = np.zeros(3)
        comp = np.zeros(3)
        hs = half_s_rows[k]
        for i0, i1, npairs in blocks:
            g = buf[:npairs]
            _fill_exponents(q, sig2, hs, float(qd[k]), float(pd_scale), i0, i1, g)
            np.exp(g, out=g)
            _row_sums(x, y, t, g, bool(sign_mode), max(float(cutoff), WEIGHT_FLOOR), i0, i1, acc, comp)
        # each unordered pair appears twice in the ordered double sum
        out[k] = 2.0 * acc
    return out
