"""Reference multiplies for verification; deliberately simple and slow."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix import CsrMatrix, MatrixError, check_compatible

DENSE_GUARD = 2000


@dataclass(frozen=True, eq=False)
class CanonicalC:
    """Row-sorted product with, per entry, the magnitude sum(|a| * |b|)."""

    num_rows: int
    num_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    magnitudes: np.ndarray
    multiplications: int = 0

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.row_offsets)


def gustavson_serial(A: CsrMatrix, B: CsrMatrix) -> CanonicalC:
    """Row-by-row dense-scratch accumulation.

    Partial products are summed in A's stored order, then B's, one at a
    time (``np.add.at`` is unbuffered and ordered).
    """
    check_compatible(A, B)
    k = B.num_cols
    scratch = np.zeros(k)
    magnitude = np.zeros(k)
    b_len = B.row_lengths()
    ptr = np.zeros(A.num_rows + 1, np.int64)
    cols_out, vals_out, mags_out = [], [], []
    mults = 0
    for i in range(A.num_rows):
        a_cols, a_vals = A.row(i)
        lens = b_len[a_cols]
        n = int(lens.sum())
        mults += n
        if n == 0:
            continue
        # positions of every B entry touched by this row, in visiting order
        starts = np.repeat(B.row_offsets[a_cols] - np.cumsum(lens) + lens, lens)
        pos = starts + np.arange(n)
        cols = B.col_indices[pos]
        prods = B.values[pos] * np.repeat(a_vals, lens)
        np.add.at(scratch, cols, prods)
        np.add.at(magnitude, cols, np.abs(prods))
        touched = np.unique(cols)
        cols_out.append(touched)
        vals_out.append(scratch[touched])
        mags_out.append(magnitude[touched])
        scratch[touched] = 0.0
        magnitude[touched] = 0.0
        ptr[i + 1] = touched.size
    np.cumsum(ptr, out=ptr)
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.empty(0, dt))
    return CanonicalC(A.num_rows, k, ptr, cat(cols_out, np.int64), cat(vals_out, np.float64),
                      cat(mags_out, np.float64), mults)


def dense_triple_loop(A: CsrMatrix, B: CsrMatrix) -> CanonicalC:
    """Dense materialized product; structure from the 0/1 pattern product so
    that cancelled-but-structural entries survive."""
    check_compatible(A, B)
    if max(A.num_rows, A.num_cols, B.num_cols) > DENSE_GUARD:
        raise MatrixError(f"dense oracle limited to {DENSE_GUARD} per dimension")
    Ad, Bd = A.to_dense(), B.to_dense()
    pattern_a = np.zeros(A.shape)
    pattern_b = np.zeros(B.shape)
    ra, ca, _ = A.triplets()
    rb, cb, _ = B.triplets()
    pattern_a[ra, ca] = 1.0
    pattern_b[rb, cb] = 1.0
    counts = pattern_a @ pattern_b
    product = Ad @ Bd
    magnitude = np.abs(Ad) @ np.abs(Bd)
    rows, cols = np.nonzero(counts)
    ptr = np.zeros(A.num_rows + 1, np.int64)
    np.cumsum(np.bincount(rows, minlength=A.num_rows), out=ptr[1:])
    return CanonicalC(A.num_rows, B.num_cols, ptr, cols.astype(np.int64), product[rows, cols],
                      magnitude[rows, cols], int(counts.sum()))


@dataclass(frozen=True)
class Comparison:
    structure_equal: bool
    max_rel_error: float
    first_mismatch: tuple[int, int] | None
    detail: str = ""

    def passed(self, tol: float) -> bool:
        return self.structure_equal and self.max_rel_error <= tol


def _canonical_rows(C):
    if isinstance(C, CsrMatrix):
        C = C.sorted()
    rows = np.repeat(np.arange(C.num_rows, dtype=np.int64), np.diff(C.row_offsets))
    return rows, np.asarray(C.col_indices, np.int64), np.asarray(C.values)


def compare(C, ref: CanonicalC) -> Comparison:
    """Structure must match exactly; values are compared relative to
    ``max(|ref|, magnitude)`` so that cancellation does not blow up the ratio."""
    if (C.num_rows, C.num_cols) != (ref.num_rows, ref.num_cols):
        return Comparison(False, np.inf, None, "shape differs")
    r1, c1, v1 = _canonical_rows(C)
    r2, c2, v2 = _canonical_rows(ref)
    if r1.size != r2.size or not (np.array_equal(r1, r2) and np.array_equal(c1, c2)):
        n = min(r1.size, r2.size)
        diff = np.flatnonzero((r1[:n] != r2[:n]) | (c1[:n] != c2[:n]))
        at = int(diff[0]) if diff.size else n
        where = (int(r2[at]), int(c2[at])) if at < r2.size else (int(r1[at]), int(c1[at]))
        return Comparison(False, np.inf, where, f"structure differs at (row, col) = {where}")
    scale = np.maximum(np.abs(v2), ref.magnitudes)
    err = np.abs(v1 - v2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(err == 0, 0.0, err / np.where(scale > 0, scale, 1.0))
    if not rel.size:
        return Comparison(True, 0.0, None)
    worst = int(np.argmax(rel))
    bad = np.flatnonzero(rel > 0)
    first = (int(r2[bad[0]]), int(c2[bad[0]])) if bad.size else None
    return Comparison(True, float(rel[worst]), first)
