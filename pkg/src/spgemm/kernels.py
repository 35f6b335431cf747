"""Compiled row kernel shared by the symbolic and numeric phases.

The kernel cannot reach the (Python-side) memory pool, so when the L1
accumulator reports FULL and no L2 is attached it returns ``NEED_L2`` with
the position of the failed insertion. The worker then claims a pool chunk and
re-enters the kernel for that single row with L2 attached; L1 still holds the
partial row, and processing resumes at the failed insertion.
"""

from __future__ import annotations

import numba
import numpy as np

from .accumulators import (
    FULL, M_USED, insert, key_at, popcount_all, primitive, reset, scale, value_at,
)

DONE = 0
NEED_L2 = 1
L2_OVERFLOW = 2
STRUCTURE_MISMATCH = 3

# per-worker counters
C_L1_FULL = 0
C_L2_INSERTS = 1
C_ROWS = 2
C_MULTS = 3
N_COUNTERS = 4


@primitive
def _push(m1, x1, y1, i1, v1, m2, x2, y2, i2, v2, has_l2, key, val, counters):
    """Insert into L1, spilling to L2. Returns DONE, NEED_L2 or L2_OVERFLOW."""
    if insert(m1, x1, y1, i1, v1, key, val) != FULL:
        return DONE
    if not has_l2:
        counters[C_L1_FULL] += 1
        return NEED_L2
    counters[C_L2_INSERTS] += 1
    if insert(m2, x2, y2, i2, v2, key, val) == FULL:
        return L2_OVERFLOW
    return DONE


@primitive
def _locate(prefix, n, t):
    """Largest q in [0, n) with prefix[q] <= t (prefix is non-decreasing)."""
    lo = 0
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if prefix[mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


@numba.njit(cache=True, nogil=True)
def core_rows(a_ptr, a_idx, a_val, b_ptr, b_key, b_pay,
              row_lo, row_hi, flat, res1, res2,
              l1, l2, has_l2,
              symbolic, popcnt, row_sizes,
              c_ptr, c_idx, c_val,
              prefix, counters):
    """Process rows ``[row_lo, row_hi)``.

    ``res1``/``res2`` >= 0 resume the first row mid-way: (A position, B
    position) for the sequential scheme, or the flattened multiplication
    index in ``res1`` for the flat scheme. Returns ``(code, row, p1, p2)``.
    """
    m1, x1, y1, i1, v1 = l1
    m2, x2, y2, i2, v2 = l2
    for i in range(row_lo, row_hi):
        resuming = i == row_lo and res1 >= 0
        a_lo = a_ptr[i]
        a_hi = a_ptr[i + 1]
        if not flat:
            j_start = res1 if resuming else a_lo
            for jp in range(j_start, a_hi):
                j = a_idx[jp]
                av = a_val[jp]
                b_lo = b_ptr[j]
                if resuming and jp == j_start:
                    b_lo = res2
                for bp in range(b_lo, b_ptr[j + 1]):
                    code = _push(m1, x1, y1, i1, v1, m2, x2, y2, i2, v2, has_l2,
                                 b_key[bp], scale(b_pay[bp], av), counters)
                    if code != DONE:
                        counters[C_MULTS] += bp - b_lo
                        return code, i, jp, bp
                counters[C_MULTS] += b_ptr[j + 1] - b_lo
        else:
            n = a_hi - a_lo
            prefix[0] = 0
            for q in range(n):
                j = a_idx[a_lo + q]
                prefix[q + 1] = prefix[q] + b_ptr[j + 1] - b_ptr[j]
            total = prefix[n]
            t_start = res1 if resuming else 0
            for t in range(t_start, total):
                q = _locate(prefix, n, t)
                jp = a_lo + q
                j = a_idx[jp]
                bp = b_ptr[j] + t - prefix[q]
                code = _push(m1, x1, y1, i1, v1, m2, x2, y2, i2, v2, has_l2,
                             b_key[bp], scale(b_pay[bp], a_val[jp]), counters)
                if code != DONE:
                    counters[C_MULTS] += t - t_start
                    return code, i, t, -1
            counters[C_MULTS] += total - t_start

        # row complete: report and reset
        n1 = m1[M_USED]
        n2 = m2[M_USED] if has_l2 else 0
        if symbolic:
            if popcnt:
                size = popcount_all(m1, x1, i1, v1)
                if has_l2:
                    size += popcount_all(m2, x2, i2, v2)
            else:
                size = n1 + n2
            row_sizes[i] = size
        else:
            base = c_ptr[i]
            if n1 + n2 != c_ptr[i + 1] - base:
                reset(m1, x1, i1, v1)
                if has_l2:
                    reset(m2, x2, i2, v2)
                return STRUCTURE_MISMATCH, i, n1 + n2, c_ptr[i + 1] - base
            for q in range(n1):
                c_idx[base + q] = key_at(m1, x1, i1, q)
                c_val[base + q] = value_at(m1, x1, i1, v1, q)
            for q in range(n2):
                c_idx[base + n1 + q] = key_at(m2, x2, i2, q)
                c_val[base + n1 + q] = value_at(m2, x2, i2, v2, q)
        reset(m1, x1, i1, v1)
        if has_l2:
            reset(m2, x2, i2, v2)
        counters[C_ROWS] += 1
    return DONE, row_hi, -1, -1


@numba.njit(cache=True, nogil=True)
def sort_rows(c_ptr, c_idx, c_val, row_lo, row_hi):
    for i in range(row_lo, row_hi):
        lo = c_ptr[i]
        hi = c_ptr[i + 1]
        if hi - lo < 2:
            continue
        order = np.argsort(c_idx[lo:hi], kind="mergesort")
        keys = c_idx[lo:hi][order]
        vals = c_val[lo:hi][order]
        c_idx[lo:hi] = keys
        c_val[lo:hi] = vals
