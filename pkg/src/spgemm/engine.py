"""Two-phase SpGEMM driver: symbolic row sizes, numeric fill, reuse handle."""

from __future__ import annotations

import dataclasses
import enum
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .accumulators import (
    BITWORD, KIND_DENSE, KIND_LL, KIND_LP, REAL, lp_table_for, new_dense, new_ll, new_lp,
)
from .compression import W, CompressionReport, decide_compression
from .matrix import CsrMatrix, FlopsStats, check_compatible, flops_stats
from .mempool import PoolMode, l2_view, size_pool


class Scheme(enum.Enum):
    THREAD_SEQUENTIAL = "seq"
    THREAD_FLAT_PARALLEL = "flat"


class Accumulator(enum.Enum):
    AUTO = "auto"
    LL = "ll"
    LP = "lp"
    DENSE = "dense"


class Phase(enum.Enum):
    SYMBOLIC = "symbolic"
    NUMERIC = "numeric"


_KIND = {Accumulator.LL: KIND_LL, Accumulator.LP: KIND_LP, Accumulator.DENSE: KIND_DENSE}


class ReuseError(ValueError):
    """A handle was applied to inputs it was not computed for."""


class KernelError(RuntimeError):
    pass


def _default_workers() -> int:
    env = os.environ.get("SPGEMM_THREADS")
    return int(env) if env else 1


@dataclass(frozen=True)
class SpgemmConfig:
    scheme: Scheme = Scheme.THREAD_SEQUENTIAL
    accumulator: Accumulator = Accumulator.AUTO
    l1_capacity: int | None = None
    dense_cutoff_k: int = 250_000
    avg_flops_cutoff: float = 256.0
    lp_max_occupancy: float = 0.5
    compression_gate: float = 0.15
    compression: str = "auto"
    collapse_divisor: int = 8
    worker_count: int = field(default_factory=_default_workers)
    sort_output: bool = False
    pool_mode: PoolMode = PoolMode.ONE2ONE
    row_block: int = 512
    pool_memory_budget: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "accumulator", Accumulator(self.accumulator))
        object.__setattr__(self, "pool_mode", PoolMode(self.pool_mode))
        if self.l1_capacity is not None and self.l1_capacity < 1:
            raise ValueError("l1_capacity must be >= 1")
        if min(self.dense_cutoff_k, self.avg_flops_cutoff, self.collapse_divisor,
               self.compression_gate) <= 0:
            raise ValueError("cutoffs must be positive")
        if not 0.0 < self.lp_max_occupancy <= 1.0:
            raise ValueError("lp_max_occupancy must lie in (0, 1]")
        if self.compression not in ("auto", "always", "never"):
            raise ValueError("compression must be 'auto', 'always' or 'never'")
        if self.worker_count < 1 or self.row_block < 1:
            raise ValueError("worker_count and row_block must be >= 1")

    def replace(self, **changes) -> "SpgemmConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class PhaseCounters:
    rows: int = 0
    multiplications: int = 0
    l1_full: int = 0
    l2_insertions: int = 0
    pool_allocations: int = 0
    pool_chunks: int = 0
    pool_chunk_size: int = 0
    wall_ms: float = 0.0


@dataclass
class SpgemmHandle:
    """Result of the symbolic phase; feeds any number of numeric calls."""

    c_row_offsets: np.ndarray
    flops: FlopsStats
    compression: CompressionReport
    max_row_size: int
    avg_row_size: float
    estimated_avg_row_size: float
    symbolic_config: SpgemmConfig
    chosen: SpgemmConfig
    dims: tuple[int, int, int]
    nnz_a: int
    nnz_b: int
    symbolic_counters: PhaseCounters
    timings_ms: dict = field(default_factory=dict)
    numeric_counters: PhaseCounters | None = None

    @property
    def nnz_c(self) -> int:
        return int(self.c_row_offsets[-1])

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.c_row_offsets)

    def check_inputs(self, A: CsrMatrix, B: CsrMatrix) -> None:
        dims = (A.num_rows, A.num_cols, B.num_cols)
        if dims != self.dims or B.num_rows != A.num_cols:
            raise ReuseError(f"handle computed for dims {self.dims}, got {dims}")
        if (A.nnz, B.nnz) != (self.nnz_a, self.nnz_b):
            raise ReuseError(
                f"handle computed for nnz(A)={self.nnz_a}, nnz(B)={self.nnz_b}; "
                f"got {A.nnz}, {B.nnz}")


# ---------------------------------------------------------------------------
# algorithm selection


def estimate_avg_row_size(stats: FlopsStats, collapse_divisor: int = 8) -> float:
    """Output row size guess before the symbolic phase: one in every
    ``collapse_divisor`` multiplications is assumed to land on a new column."""
    return stats.avg_row_flops / collapse_divisor


def resolve_config(
    A: CsrMatrix,
    B: CsrMatrix,
    stats: FlopsStats,
    report: CompressionReport | None,
    cfg: SpgemmConfig,
    phase: Phase,
    *,
    max_row_size: int | None = None,
) -> SpgemmConfig:
    """Pick accumulator, scheme and L1 size for one phase.

    Auto resolves to Dense when the (effective) column count is below
    ``dense_cutoff_k``. The symbolic phase of a compressed run sees
    ``ceil(k / 32)`` column sets. Above the cutoff, LL is chosen for rows
    averaging fewer than ``avg_flops_cutoff`` multiplications, otherwise LP
    with the flat-parallel scheme.
    """
    phase = Phase(phase)
    compressed = phase is Phase.SYMBOLIC and report is not None and report.applied
    k = B.num_cols
    effective_k = -(-k // W) if compressed else k

    acc, scheme = cfg.accumulator, cfg.scheme
    if acc is Accumulator.AUTO:
        if effective_k < cfg.dense_cutoff_k:
            acc = Accumulator.DENSE
        elif stats.avg_row_flops < cfg.avg_flops_cutoff:
            acc = Accumulator.LL
        else:
            acc, scheme = Accumulator.LP, Scheme.THREAD_FLAT_PARALLEL

    l1 = cfg.l1_capacity
    if l1 is None:
        if phase is Phase.SYMBOLIC:
            l1 = report.compressed_max_row_flops if compressed else stats.max_row_flops
        else:
            l1 = max_row_size if max_row_size is not None else stats.max_row_flops
        l1 = max(int(l1), 1)
    return cfg.replace(accumulator=acc, scheme=scheme, l1_capacity=l1)


# ---------------------------------------------------------------------------
# parallel driver


class _RowBlocks:
    """Shared counter handing out contiguous row blocks."""

    def __init__(self, num_rows: int, block: int):
        self._next = 0
        self._end = num_rows
        self._block = block
        self._lock = threading.Lock()

    def grab(self):
        with self._lock:
            lo = self._next
            if lo >= self._end:
                return None
            self._next = hi = min(lo + self._block, self._end)
        return lo, hi


def _new_l1(cfg: SpgemmConfig, key_space: int, payload) -> tuple:
    if cfg.accumulator is Accumulator.DENSE:
        return new_dense(key_space, payload)
    if cfg.accumulator is Accumulator.LP:
        return new_lp(lp_table_for(cfg.l1_capacity), cfg.lp_max_occupancy, payload)
    return new_ll(cfg.l1_capacity, payload)


def _run_phase(A: CsrMatrix, b_ptr, b_key, b_pay, key_space: int, cfg: SpgemmConfig,
               row_bound: int, *, symbolic: bool, popcnt: bool, row_sizes, c_ptr, c_idx,
               c_val) -> PhaseCounters:
    if cfg.accumulator is Accumulator.AUTO:
        raise ValueError("configuration must be resolved before running a phase")
    payload = BITWORD if symbolic else REAL
    kind = _KIND[cfg.accumulator]
    flat = cfg.scheme is Scheme.THREAD_FLAT_PARALLEL
    workers = cfg.worker_count
    l2_capacity = max(int(row_bound), 1)
    pool = None
    if cfg.accumulator is not Accumulator.DENSE:
        pool = size_pool(workers, l2_capacity, cfg.pool_mode, memory_budget=cfg.pool_memory_budget)
    max_a_row = int(A.row_lengths().max()) if A.num_rows else 0
    blocks = _RowBlocks(A.num_rows, cfg.row_block)
    a_ptr, a_idx, a_val = A.row_offsets, A.col_indices, A.values

    def work(w: int):
        l1 = _new_l1(cfg, key_space, payload)
        counters = np.zeros(kernels.N_COUNTERS, np.int64)
        prefix = np.empty(max_a_row + 1, np.int64)
        allocs = 0
        while (blk := blocks.grab()) is not None:
            lo, hi = blk
            while lo < hi:
                code, row, p1, p2 = kernels.core_rows(
                    a_ptr, a_idx, a_val, b_ptr, b_key, b_pay, lo, hi, flat, -1, -1,
                    l1, l1, False, symbolic, popcnt, row_sizes, c_ptr, c_idx, c_val,
                    prefix, counters)
                if code == kernels.DONE:
                    break
                if code != kernels.NEED_L2:
                    raise _kernel_error(code, row, p1, p2)
                chunk = pool.allocate(w)
                try:
                    l2 = l2_view(chunk, kind, l2_capacity, payload)
                    code, row, p1, p2 = kernels.core_rows(
                        a_ptr, a_idx, a_val, b_ptr, b_key, b_pay, row, row + 1, flat, p1, p2,
                        l1, l2, True, symbolic, popcnt, row_sizes, c_ptr, c_idx, c_val,
                        prefix, counters)
                finally:
                    pool.release(chunk)
                allocs += 1
                if code != kernels.DONE:
                    raise _kernel_error(code, row, p1, p2)
                lo = row
        return counters, allocs

    t0 = time.perf_counter()
    if workers == 1:
        results = [work(0)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(work, range(workers)))
    wall = (time.perf_counter() - t0) * 1e3
    total = sum(r[0] for r in results)
    return PhaseCounters(
        rows=int(total[kernels.C_ROWS]),
        multiplications=int(total[kernels.C_MULTS]),
        l1_full=int(total[kernels.C_L1_FULL]),
        l2_insertions=int(total[kernels.C_L2_INSERTS]),
        pool_allocations=sum(r[1] for r in results),
        pool_chunks=pool.num_chunks if pool else 0,
        pool_chunk_size=pool.chunk_size if pool else 0,
        wall_ms=wall,
    )


def _kernel_error(code, row, p1, p2) -> Exception:
    if code == kernels.STRUCTURE_MISMATCH:
        return ReuseError(f"row {row}: accumulated {p1} entries but the handle reserves {p2}")
    if code == kernels.L2_OVERFLOW:
        return KernelError(f"row {row}: L2 accumulator overflowed its pool chunk")
    return KernelError(f"row {row}: unexpected kernel status {code}")


# ---------------------------------------------------------------------------
# public phases


def symbolic(A: CsrMatrix, B: CsrMatrix, cfg: SpgemmConfig | None = None) -> SpgemmHandle:
    """Compute the row offsets of ``C = A @ B`` without touching values."""
    cfg = cfg or SpgemmConfig()
    check_compatible(A, B)
    timings = {}
    t0 = time.perf_counter()
    stats = flops_stats(A, B)
    t1 = time.perf_counter()
    force = {"auto": None, "always": True, "never": False}[cfg.compression]
    report, Bc = decide_compression(A, B, stats, cfg.compression_gate, force)
    t2 = time.perf_counter()
    timings["flops_ms"] = (t1 - t0) * 1e3
    timings["compress_ms"] = (t2 - t1) * 1e3

    sym_cfg = resolve_config(A, B, stats, report, cfg, Phase.SYMBOLIC)
    if Bc is not None:
        b_ptr, b_key, b_pay = Bc.row_offsets, Bc.csi, Bc.cs
        key_space, bound, popcnt = Bc.num_sets, report.compressed_max_row_flops, True
    else:
        b_ptr, b_key = B.row_offsets, B.col_indices
        b_pay = np.zeros(B.nnz, BITWORD)
        key_space, bound, popcnt = B.num_cols, stats.max_row_flops, False

    m = A.num_rows
    row_sizes = np.zeros(m, np.int64)
    no_idx, no_val = np.empty(0, np.int32), np.empty(0, REAL)
    counters = _run_phase(A, b_ptr, b_key, b_pay, key_space, sym_cfg, bound,
                          symbolic=True, popcnt=popcnt, row_sizes=row_sizes,
                          c_ptr=row_sizes, c_idx=no_idx, c_val=no_val)
    c_ptr = np.zeros(m + 1, np.int64)
    np.cumsum(row_sizes, out=c_ptr[1:])
    # frozen now so every numeric call sees one array type (one compiled kernel)
    c_ptr.flags.writeable = False
    timings["symbolic_ms"] = (time.perf_counter() - t2) * 1e3

    max_row_size = int(row_sizes.max()) if m else 0
    num_cfg = resolve_config(A, B, stats, report, cfg, Phase.NUMERIC, max_row_size=max_row_size)
    return SpgemmHandle(
        c_row_offsets=c_ptr,
        flops=stats,
        compression=report,
        max_row_size=max_row_size,
        avg_row_size=float(c_ptr[-1]) / m if m else 0.0,
        estimated_avg_row_size=estimate_avg_row_size(stats, cfg.collapse_divisor),
        symbolic_config=sym_cfg,
        chosen=num_cfg,
        dims=(A.num_rows, A.num_cols, B.num_cols),
        nnz_a=A.nnz,
        nnz_b=B.nnz,
        symbolic_counters=counters,
        timings_ms=timings,
    )


def numeric(A: CsrMatrix, B: CsrMatrix, handle: SpgemmHandle,
            cfg: SpgemmConfig | None = None) -> CsrMatrix:
    """Fill the values of ``C`` into the structure recorded by ``handle``.

    ``cfg`` overrides the handle's numeric configuration (it is resolved
    against the handle's statistics first).
    """
    handle.check_inputs(A, B)
    run_cfg = handle.chosen
    if cfg is not None:
        run_cfg = resolve_config(A, B, handle.flops, handle.compression, cfg, Phase.NUMERIC,
                                 max_row_size=handle.max_row_size)
    c_ptr = handle.c_row_offsets
    nnz_c = handle.nnz_c
    c_idx = np.empty(nnz_c, np.int32)
    c_val = np.empty(nnz_c, REAL)
    no_sizes = np.empty(0, np.int64)
    handle.numeric_counters = _run_phase(
        A, B.row_offsets, B.col_indices, B.values, B.num_cols, run_cfg, handle.max_row_size,
        symbolic=False, popcnt=False, row_sizes=no_sizes, c_ptr=c_ptr, c_idx=c_idx, c_val=c_val)
    if run_cfg.sort_output:
        kernels.sort_rows(c_ptr, c_idx, c_val, 0, A.num_rows)
    return CsrMatrix.from_arrays(A.num_rows, B.num_cols, c_ptr, c_idx, c_val,
                                 check=False, owned=True)


def multiply(A: CsrMatrix, B: CsrMatrix, cfg: SpgemmConfig | None = None
             ) -> tuple[CsrMatrix, SpgemmHandle]:
    """Symbolic then numeric; returns ``C`` and the reusable handle."""
    handle = symbolic(A, B, cfg)
    return numeric(A, B, handle), handle


def triple_product(R: CsrMatrix, A: CsrMatrix, P: CsrMatrix, cfg: SpgemmConfig | None = None
                   ) -> tuple[CsrMatrix, tuple[SpgemmHandle, SpgemmHandle]]:
    """Galerkin product ``R @ (A @ P)`` as two chained multiplies."""
    AP, h_ap = multiply(A, P, cfg)
    RAP, h_rap = multiply(R, AP, cfg)
    return RAP, (h_ap, h_rap)


def locate_flat(b_row_sizes, t: int) -> tuple[int, int]:
    """Map flattened multiplication index ``t`` of one A row to
    (position within the row, offset within that B row)."""
    sizes = np.asarray(b_row_sizes, np.int64)
    prefix = np.zeros(sizes.size + 1, np.int64)
    np.cumsum(sizes, out=prefix[1:])
    if not 0 <= t < prefix[-1]:
        raise IndexError(f"index {t} outside [0, {prefix[-1]})")
    q = int(kernels._locate(prefix, sizes.size, t))
    return q, int(t - prefix[q])
