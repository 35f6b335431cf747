"""Bit compression of B's structure for the symbolic phase.

Columns are grouped into sets of ``W = 32``. A row is stored as pairs of
column-set index ``csi = col // 32`` and bitword ``cs`` whose bit ``b`` marks
column ``32 * csi + b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .accumulators import BITWORD, M_USED, insert, key_at, new_ll, reset, value_at
from .matrix import CsrMatrix, FlopsStats, check_compatible, flops_from_row_sizes, flops_stats

W = 32
LOG_W = 5
DEFAULT_GATE = 0.15


@dataclass(frozen=True, eq=False)
class CompressedGraph:
    num_rows: int
    num_cols: int
    row_offsets: np.ndarray
    csi: np.ndarray
    cs: np.ndarray

    @property
    def num_sets(self) -> int:
        return -(-self.num_cols // W)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def decompress(self) -> CsrMatrix:
        """Structure of the original matrix (values 1.0), rows sorted."""
        bits = (self.cs[:, None] >> np.arange(W, dtype=BITWORD)) & BITWORD(1)
        pair, bit = np.nonzero(bits)
        cols = self.csi[pair].astype(np.int64) * W + bit
        rows = np.repeat(np.arange(self.num_rows, dtype=np.int64), self.row_lengths())[pair]
        order = np.lexsort((cols, rows))
        ptr = np.zeros(self.num_rows + 1, np.int64)
        np.cumsum(np.bincount(rows, minlength=self.num_rows), out=ptr[1:])
        return CsrMatrix.from_arrays(self.num_rows, self.num_cols, ptr, cols[order],
                                     np.ones(cols.size), check=False, owned=True)


@dataclass(frozen=True)
class CompressionReport:
    cf: float
    cmrf: float
    original_flops: int
    compressed_flops: int
    original_max_row_flops: int
    compressed_max_row_flops: int
    applied: bool


@numba.njit(cache=True, nogil=True)
def _pack_rows(ptr, idx, acc, out_ptr, out_csi, out_cs, fill):
    """Union each row's columns into (csi, cs) pairs; count only unless ``fill``."""
    meta, aux0, aux1, ids, vals = acc
    m = ptr.shape[0] - 1
    for i in range(m):
        for p in range(ptr[i], ptr[i + 1]):
            c = idx[p]
            insert(meta, aux0, aux1, ids, vals, np.int32(c >> 5), np.uint32(1) << np.uint32(c & 31))
        n = meta[M_USED]
        if fill:
            base = out_ptr[i]
            for q in range(n):
                out_csi[base + q] = key_at(meta, aux0, ids, q)
                out_cs[base + q] = value_at(meta, aux0, ids, vals, q)
        else:
            out_ptr[i + 1] = n
        reset(meta, aux0, ids, vals)


def _row_accumulator(B: CsrMatrix):
    widest = int(B.row_lengths().max()) if B.num_rows else 1
    return new_ll(max(widest, 1), BITWORD)


def compressed_row_sizes(B: CsrMatrix) -> np.ndarray:
    """Stage one: number of column sets in each row of B."""
    sizes = np.zeros(B.num_rows + 1, np.int64)
    dummy_i = np.empty(0, np.int32)
    dummy_c = np.empty(0, BITWORD)
    _pack_rows(B.row_offsets, B.col_indices, _row_accumulator(B), sizes, dummy_i, dummy_c, False)
    return sizes[1:]


def compress_rows(B: CsrMatrix, row_sizes: np.ndarray | None = None) -> CompressedGraph:
    """Pack B's structure into (csi, cs) pairs; linear in nnz(B)."""
    if row_sizes is None:
        row_sizes = compressed_row_sizes(B)
    ptr = np.zeros(B.num_rows + 1, np.int64)
    np.cumsum(row_sizes, out=ptr[1:])
    csi = np.empty(ptr[-1], np.int32)
    cs = np.empty(ptr[-1], BITWORD)
    _pack_rows(B.row_offsets, B.col_indices, _row_accumulator(B), ptr, csi, cs, True)
    return CompressedGraph(B.num_rows, B.num_cols, ptr, csi, cs)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 1.0


def decide_compression(
    A: CsrMatrix,
    B: CsrMatrix,
    stats: FlopsStats | None = None,
    gate: float = DEFAULT_GATE,
    force: bool | None = None,
) -> tuple[CompressionReport, CompressedGraph | None]:
    """Compress B only if it cuts the symbolic flops by more than ``gate``.

    ``force=True``/``False`` overrides the gate (used to cross-check the
    symbolic phase with and without compression).
    """
    check_compatible(A, B)
    if stats is None:
        stats = flops_stats(A, B)
    sizes = compressed_row_sizes(B)
    cstats = flops_from_row_sizes(A, sizes)
    cf = _ratio(cstats.total_flops, stats.total_flops)
    cmrf = _ratio(cstats.max_row_flops, stats.max_row_flops)
    applied = cstats.total_flops < (1.0 - gate) * stats.total_flops
    if force is not None:
        applied = force
    report = CompressionReport(
        cf=cf,
        cmrf=cmrf,
        original_flops=stats.total_flops,
        compressed_flops=cstats.total_flops,
        original_max_row_flops=stats.max_row_flops,
        compressed_max_row_flops=cstats.max_row_flops,
        applied=bool(applied),
    )
    return report, (compress_rows(B, sizes) if applied else None)
