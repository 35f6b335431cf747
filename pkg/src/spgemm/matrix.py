"""CSR matrix model, construction helpers, transpose and flop statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

INDEX_DTYPE = np.int32
OFFSET_DTYPE = np.int64
VALUE_DTYPE = np.float64
INDEX_MAX = np.iinfo(INDEX_DTYPE).max


class MatrixError(ValueError):
    """Raised for invalid matrix construction or incompatible operands."""


@numba.njit(cache=True)
def _rows_sorted(row_offsets, col_indices):
    for i in range(row_offsets.shape[0] - 1):
        for p in range(row_offsets[i] + 1, row_offsets[i + 1]):
            if col_indices[p - 1] >= col_indices[p]:
                return False
    return True


@numba.njit(cache=True)
def _rows_have_duplicates(row_offsets, col_indices, num_cols):
    seen = np.full(num_cols, -1, np.int64)
    for i in range(row_offsets.shape[0] - 1):
        for p in range(row_offsets[i], row_offsets[i + 1]):
            c = col_indices[p]
            if seen[c] == i:
                return True
            seen[c] = i
    return False


def _frozen(src, dtype, owned: bool = False) -> np.ndarray:
    a = np.ascontiguousarray(src, dtype=dtype)
    if a.flags.writeable:
        if not owned and np.shares_memory(a, np.asarray(src)):
            a = a.copy()
        a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Immutable compressed-row sparse matrix.

    Rows are not required to be sorted; ``sorted_rows`` records whether they
    happen to be. Column indices within a row are unique.
    """

    num_rows: int
    num_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    sorted_rows: bool = field(default=False)

    @classmethod
    def from_arrays(
        cls,
        num_rows: int,
        num_cols: int,
        row_offsets,
        col_indices,
        values,
        *,
        check: bool = True,
        owned: bool = False,
    ) -> "CsrMatrix":
        """Wrap existing CSR arrays. ``owned=True`` hands the arrays over without a copy."""
        num_rows, num_cols = int(num_rows), int(num_cols)
        if num_rows < 0 or num_cols < 0:
            raise MatrixError("matrix dimensions must be non-negative")
        if num_cols > INDEX_MAX + 1:
            raise MatrixError(f"{num_cols} columns exceed the 32-bit index range")
        ptr = _frozen(row_offsets, OFFSET_DTYPE, owned)
        idx = _frozen(col_indices, INDEX_DTYPE, owned)
        val = _frozen(values, VALUE_DTYPE, owned)
        if check:
            if ptr.shape != (num_rows + 1,):
                raise MatrixError(f"row_offsets must have length {num_rows + 1}")
            if ptr[0] != 0 or np.any(np.diff(ptr) < 0):
                raise MatrixError("row_offsets must start at 0 and be non-decreasing")
            nnz = int(ptr[-1])
            if idx.shape != (nnz,) or val.shape != (nnz,):
                raise MatrixError("col_indices/values length must equal row_offsets[-1]")
            if nnz and (idx.min() < 0 or idx.max() >= num_cols):
                raise MatrixError("column index out of range")
            if nnz and _rows_have_duplicates(ptr, idx, num_cols):
                raise MatrixError("duplicate column index within a row")
        return cls(num_rows, num_cols, ptr, idx, val, bool(_rows_sorted(ptr, idx)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_rows, self.num_cols

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = np.repeat(np.arange(self.num_rows, dtype=np.int64), self.row_lengths())
        return rows, self.col_indices.astype(np.int64), self.values.copy()

    def with_values(self, values) -> "CsrMatrix":
        """Same structure, new values (the reuse use case)."""
        values = np.asarray(values, dtype=VALUE_DTYPE)
        if values.shape != self.values.shape:
            raise MatrixError("values length must match nnz")
        return CsrMatrix(
            self.num_rows, self.num_cols, self.row_offsets, self.col_indices,
            _frozen(values, VALUE_DTYPE), self.sorted_rows,
        )

    def sorted(self) -> "CsrMatrix":
        """Canonical form: rows sorted by column."""
        if self.sorted_rows:
            return self
        rows, cols, vals = self.triplets()
        order = np.lexsort((cols, rows))
        return CsrMatrix(
            self.num_rows, self.num_cols, self.row_offsets,
            _frozen(cols[order], INDEX_DTYPE, True), _frozen(vals[order], VALUE_DTYPE, True), True,
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        rows, cols, vals = self.triplets()
        out[rows, cols] = vals
        return out

    def equals(self, other: "CsrMatrix") -> bool:
        """Exact equality of the canonical (row-sorted) forms."""
        if self.shape != other.shape or self.nnz != other.nnz:
            return False
        a, b = self.sorted(), other.sorted()
        return (
            np.array_equal(a.row_offsets, b.row_offsets)
            and np.array_equal(a.col_indices, b.col_indices)
            and np.array_equal(a.values, b.values)
        )

    def __repr__(self) -> str:
        return f"CsrMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz}, sorted={self.sorted_rows})"


def build_csr(num_rows: int, num_cols: int, triplets: Iterable[Sequence] | tuple) -> CsrMatrix:
    """Build a CSR matrix from ``(row, col, value)`` triplets.

    ``triplets`` may be an iterable of 3-tuples or a tuple of three arrays
    ``(rows, cols, values)``. Duplicates are summed; explicit zeros are kept.
    """
    if isinstance(triplets, tuple) and len(triplets) == 3 and all(
        isinstance(t, np.ndarray) for t in triplets
    ):
        rows, cols, vals = triplets
    else:
        items = list(triplets)
        if items:
            rows, cols, vals = (np.asarray(x) for x in zip(*items))
        else:
            rows = cols = np.empty(0, np.int64)
            vals = np.empty(0)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=VALUE_DTYPE)
    if not (rows.shape == cols.shape == vals.shape):
        raise MatrixError("triplet arrays must have equal length")
    if num_rows < 0 or num_cols < 0:
        raise MatrixError("matrix dimensions must be non-negative")
    if rows.size:
        if rows.min() < 0 or rows.max() >= num_rows:
            raise MatrixError(f"row index out of range for {num_rows} rows")
        if cols.min() < 0 or cols.max() >= num_cols:
            raise MatrixError(f"column index out of range for {num_cols} columns")

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        first = np.ones(rows.size, dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(first)
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    ptr = np.zeros(num_rows + 1, dtype=OFFSET_DTYPE)
    np.cumsum(np.bincount(rows, minlength=num_rows), out=ptr[1:])
    return CsrMatrix.from_arrays(num_rows, num_cols, ptr, cols, vals, check=False, owned=True)


def identity(n: int) -> CsrMatrix:
    return CsrMatrix.from_arrays(n, n, np.arange(n + 1), np.arange(n), np.ones(n), check=False)


def from_dense(dense) -> CsrMatrix:
    dense = np.asarray(dense, dtype=VALUE_DTYPE)
    rows, cols = np.nonzero(dense)
    return build_csr(dense.shape[0], dense.shape[1], (rows, cols, dense[rows, cols]))


def transpose(M: CsrMatrix) -> CsrMatrix:
    """Exact transpose; rows of the result come out sorted."""
    rows, cols, vals = M.triplets()
    # triplet rows are non-decreasing, so a stable sort by column leaves each
    # result row sorted
    order = np.argsort(cols, kind="stable")
    ptr = np.zeros(M.num_cols + 1, dtype=OFFSET_DTYPE)
    np.cumsum(np.bincount(cols, minlength=M.num_cols), out=ptr[1:])
    return CsrMatrix.from_arrays(
        M.num_cols, M.num_rows, ptr, rows[order], vals[order], check=False, owned=True
    )


# ---------------------------------------------------------------------------
# flop statistics


@dataclass(frozen=True)
class FlopsStats:
    per_row_flops: np.ndarray
    total_flops: int
    max_row_flops: int
    avg_degree_a: float
    avg_row_flops: float


@numba.njit(cache=True, nogil=True)
def row_flops_kernel(a_ptr, a_idx, b_row_sizes):
    m = a_ptr.shape[0] - 1
    out = np.zeros(m, np.int64)
    for i in range(m):
        s = 0
        for p in range(a_ptr[i], a_ptr[i + 1]):
            s += b_row_sizes[a_idx[p]]
        out[i] = s
    return out


def check_compatible(A: CsrMatrix, B: CsrMatrix) -> None:
    if A.num_cols != B.num_rows:
        raise MatrixError(f"dimension mismatch: A is {A.shape}, B is {B.shape}")


def flops_from_row_sizes(A: CsrMatrix, b_row_sizes: np.ndarray) -> FlopsStats:
    per_row = row_flops_kernel(A.row_offsets, A.col_indices, np.asarray(b_row_sizes, np.int64))
    m = A.num_rows
    total = int(per_row.sum())
    return FlopsStats(
        per_row_flops=per_row,
        total_flops=total,
        max_row_flops=int(per_row.max()) if m else 0,
        avg_degree_a=A.nnz / A.num_cols if A.num_cols else 0.0,
        avg_row_flops=total / m if m else 0.0,
    )


def flops_stats(A: CsrMatrix, B: CsrMatrix) -> FlopsStats:
    """Per-row multiplication counts of ``A @ B``: sum of the B-row sizes each A row touches."""
    check_compatible(A, B)
    return flops_from_row_sizes(A, B.row_lengths())


# ---------------------------------------------------------------------------
# synthetic generators

SYNTHETIC_KINDS = ("uniform-random", "banded", "skewed")


def _coalesce_rows(num_rows: int, num_cols: int, rows, cols, rng) -> CsrMatrix:
    vals = rng.uniform(-1.0, 1.0, size=rows.size)
    key = np.unique(rows.astype(np.int64) * num_cols + cols)
    rows, cols = key // num_cols, key % num_cols
    vals = vals[: key.size]
    ptr = np.zeros(num_rows + 1, dtype=OFFSET_DTYPE)
    np.cumsum(np.bincount(rows, minlength=num_rows), out=ptr[1:])
    return CsrMatrix.from_arrays(num_rows, num_cols, ptr, cols, vals, check=False, owned=True)


def generate_synthetic(
    kind: str,
    rows: int,
    cols: int,
    target_nnz_per_row: int,
    seed: int,
    *,
    bandwidth: int | None = None,
) -> CsrMatrix:
    """Deterministic synthetic test matrices.

    ``uniform-random`` draws columns uniformly (duplicates merged, so rows may
    come out slightly short). ``banded`` keeps row ``i`` inside
    ``[c_i - w, c_i + w]`` with ``c_i`` the diagonal position and ``w`` the
    half-bandwidth (default ``target_nnz_per_row // 2``). ``skewed`` draws row
    lengths from a Pareto tail to mimic power-law graphs.
    """
    if kind not in SYNTHETIC_KINDS:
        raise MatrixError(f"unknown synthetic kind {kind!r}")
    if rows < 1 or cols < 1:
        raise MatrixError("rows and cols must be >= 1")
    if target_nnz_per_row < 0 or target_nnz_per_row > cols:
        raise MatrixError("target_nnz_per_row must lie in [0, cols]")
    rng = np.random.default_rng(seed)
    t = int(target_nnz_per_row)

    if kind == "uniform-random":
        counts = np.full(rows, t, dtype=np.int64)
        r = np.repeat(np.arange(rows, dtype=np.int64), counts)
        c = rng.integers(0, cols, size=r.size)
        return _coalesce_rows(rows, cols, r, c, rng)

    if kind == "banded":
        w = t // 2 if bandwidth is None else int(bandwidth)
        if w < 0:
            raise MatrixError("bandwidth must be non-negative")
        span = 2 * w + 1
        take = min(t, span)
        centers = (np.arange(rows, dtype=np.int64) * cols) // rows
        # random subset of `take` offsets out of the band, per row
        picks = np.argsort(rng.random((rows, span)), axis=1)[:, :take] - w
        c = (centers[:, None] + picks).ravel()
        r = np.repeat(np.arange(rows, dtype=np.int64), take)
        keep = (c >= 0) & (c < cols)
        return _coalesce_rows(rows, cols, r[keep], c[keep], rng)

    alpha = 1.2
    raw = rng.pareto(alpha, size=rows) + 1.0
    counts = np.rint(raw * t * (alpha - 1.0) / alpha).astype(np.int64)
    counts = np.clip(counts, 1 if t else 0, cols)
    r = np.repeat(np.arange(rows, dtype=np.int64), counts)
    c = rng.integers(0, cols, size=r.size)
    return _coalesce_rows(rows, cols, r, c, rng)
