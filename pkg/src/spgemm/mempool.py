"""Fixed-chunk memory pool for second-level (L2) accumulators.

Each chunk guards itself with a ``threading.Lock``; a non-blocking acquire is
the atomic claim, so allocation never serializes on a pool-wide lock.
"""

from __future__ import annotations

import enum
import logging
import threading
import time
from dataclasses import dataclass

import numpy as np

from .accumulators import (
    EMPTY, KIND_LL, KIND_LP, META_LEN, M_CAP, M_KIND, M_MASK, M_MAXUSED, next_pow2,
)

log = logging.getLogger(__name__)

# Bytes of backing storage per accumulator entry. The widest L2 layout (LP:
# a power-of-two table of up to 2x entries, each key + 8-byte value, plus the
# used-slot list) needs 28 bytes per entry; LL needs at most 24.
ENTRY_BYTES = 32
CACHE_LINE = 64
ENTRIES_PER_LINE = CACHE_LINE // ENTRY_BYTES
DEFAULT_OVERESTIMATE = 2


class PoolMode(enum.Enum):
    ONE2ONE = "one2one"
    MANY2MANY = "many2many"


class ChunkState(enum.Enum):
    FREE = "free"
    HELD = "held"


class PoolContractError(RuntimeError):
    """Misuse of the pool: double allocation, double release, bad hint."""


class PoolSizingError(MemoryError):
    """Not even one chunk fits in the memory budget."""


@dataclass(eq=False)
class ChunkHandle:
    index: int
    storage: np.ndarray
    _released: bool = False


class MemoryPool:
    """``num_chunks`` chunks of ``chunk_size`` entry slots each."""

    def __init__(self, num_chunks: int, chunk_size: int, mode: PoolMode = PoolMode.ONE2ONE,
                 spin_limit: int = 64):
        if num_chunks < 1 or chunk_size < 1:
            raise ValueError("num_chunks and chunk_size must be >= 1")
        self.num_chunks = int(num_chunks)
        self.chunk_size = int(chunk_size)
        self.mode = PoolMode(mode)
        self.spin_limit = spin_limit
        words = self.chunk_size * ENTRY_BYTES // 8
        # np.zeros maps lazily, so untouched chunks cost no resident memory
        self.storage = np.zeros((self.num_chunks, words), np.int64)
        self._locks = [threading.Lock() for _ in range(self.num_chunks)]
        self._stats_lock = threading.Lock()
        self.allocations = 0
        self.failed_scans = 0

    @property
    def nbytes(self) -> int:
        return self.storage.nbytes

    def state(self, index: int) -> ChunkState:
        return ChunkState.HELD if self._locks[index].locked() else ChunkState.FREE

    def chunk_states(self) -> list[ChunkState]:
        return [self.state(i) for i in range(self.num_chunks)]

    def held_count(self) -> int:
        return sum(lock.locked() for lock in self._locks)

    def allocate(self, hint: int, timeout: float | None = None) -> ChunkHandle:
        """Claim a chunk.

        ONE2ONE returns chunk ``hint`` directly. MANY2MANY scans cyclically
        from ``hint`` and spins (yielding after ``spin_limit`` failed scans)
        until a chunk frees up or ``timeout`` elapses.
        """
        hint = int(hint)
        if self.mode is PoolMode.ONE2ONE:
            if not 0 <= hint < self.num_chunks:
                raise PoolContractError(f"one2one hint {hint} outside [0, {self.num_chunks})")
            if not self._locks[hint].acquire(blocking=False):
                raise PoolContractError(f"chunk {hint} is already held")
            self._count(0)
            return ChunkHandle(hint, self.storage[hint])

        n = self.num_chunks
        start = hint % n
        deadline = None if timeout is None else time.monotonic() + timeout
        misses = 0
        while True:
            for off in range(n):
                idx = (start + off) % n
                if self._locks[idx].acquire(blocking=False):
                    self._count(misses)
                    return ChunkHandle(idx, self.storage[idx])
            misses += 1
            if deadline is not None and time.monotonic() > deadline:
                raise TimeoutError("no chunk became free before the timeout")
            if misses % self.spin_limit == 0:
                time.sleep(0)

    def release(self, handle: ChunkHandle) -> None:
        if handle._released or not self._locks[handle.index].locked():
            raise PoolContractError(f"chunk {handle.index} released twice or never allocated")
        handle._released = True
        self._locks[handle.index].release()

    def release_index(self, index: int) -> None:
        if not self._locks[index].locked():
            raise PoolContractError(f"chunk {index} is not held")
        self._locks[index].release()

    def _count(self, misses: int) -> None:
        with self._stats_lock:
            self.allocations += 1
            self.failed_scans += misses

    def __repr__(self) -> str:
        return (f"MemoryPool({self.mode.value}, chunks={self.num_chunks}, "
                f"chunk_size={self.chunk_size}, held={self.held_count()})")


def chunk_size_for(upper_bound_row: int) -> int:
    """Entry slots for a row bound, rounded up to whole cache lines."""
    n = max(int(upper_bound_row), 1)
    return -(-n // ENTRIES_PER_LINE) * ENTRIES_PER_LINE


def size_pool(concurrency: int, upper_bound_row: int, mode: PoolMode = PoolMode.ONE2ONE, *,
              overestimate: int = DEFAULT_OVERESTIMATE,
              memory_budget: int | None = None) -> MemoryPool:
    """Size a pool for ``concurrency`` workers and rows of at most ``upper_bound_row`` entries.

    ONE2ONE gets exactly one chunk per worker; MANY2MANY over-provisions by
    ``overestimate``. If the pool would exceed ``memory_budget`` bytes the
    chunk count is cut down to what fits, and the pool falls back to
    MANY2MANY sharing.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    mode = PoolMode(mode)
    chunk_size = chunk_size_for(upper_bound_row)
    num_chunks = concurrency if mode is PoolMode.ONE2ONE else overestimate * concurrency
    chunk_bytes = chunk_size * ENTRY_BYTES
    if memory_budget is not None and num_chunks * chunk_bytes > memory_budget:
        fit = memory_budget // chunk_bytes
        if fit < 1:
            raise PoolSizingError(
                f"a single {chunk_bytes}-byte chunk exceeds the {memory_budget}-byte budget")
        log.warning("memory pool trimmed from %d to %d chunks to fit %d bytes",
                    num_chunks, fit, memory_budget)
        num_chunks, mode = int(fit), PoolMode.MANY2MANY
    return MemoryPool(num_chunks, chunk_size, mode)


# ---------------------------------------------------------------------------
# L2 accumulator views over a chunk


def l2_view(handle: ChunkHandle, kind: int, capacity: int, payload) -> tuple:
    """Lay out an empty L2 accumulator of ``capacity`` entries inside a chunk."""
    raw = handle.storage
    if capacity * ENTRY_BYTES > raw.nbytes:
        raise PoolContractError(f"chunk too small for {capacity} entries")
    meta = np.zeros(META_LEN, np.int64)
    meta[M_KIND] = kind
    nbytes = np.dtype(payload).itemsize
    if kind == KIND_LL:
        nb = next_pow2(capacity)
        vals = raw.view(np.uint8)[: capacity * nbytes].view(payload)
        ints = raw.view(np.uint8)[-(-capacity * nbytes // 8) * 8:].view(np.int32)
        begins = ints[:nb]
        nexts = ints[nb:nb + capacity]
        ids = ints[nb + capacity:nb + 2 * capacity]
        begins.fill(EMPTY)
        meta[M_CAP] = capacity
        meta[M_MASK] = nb - 1
        meta[M_MAXUSED] = capacity
        return meta, begins, nexts, ids, vals
    if kind == KIND_LP:
        size = next_pow2(capacity + 1)
        vals = raw.view(np.uint8)[: size * nbytes].view(payload)
        ints = raw.view(np.uint8)[-(-size * nbytes // 8) * 8:].view(np.int32)
        ids = ints[:size]
        used = ints[size:size + capacity]
        ids.fill(EMPTY)
        meta[M_CAP] = size
        meta[M_MASK] = size - 1
        meta[M_MAXUSED] = capacity
        return meta, used, ints[:0], ids, vals
    raise ValueError("dense accumulators are single-level")
