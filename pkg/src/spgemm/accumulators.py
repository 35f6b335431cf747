"""Row accumulators: linked-list hashmap (LL), linear probing (LP), dense.

Every accumulator is a tuple of five arrays ``(meta, aux0, aux1, ids, values)``
so that a single compiled kernel can drive any of the three kinds:

========  =====================  ===================  ================  ==========
kind      aux0                   aux1                 ids               values
========  =====================  ===================  ================  ==========
LL        begins (pow2 buckets)  nexts (capacity)     keys (capacity)   payloads
LP        used slot positions    unused               slot keys / -1    payloads
Dense     markers (k)            unused               touched columns   dense row
========  =====================  ===================  ================  ==========

``meta`` holds ``[kind, used, capacity, mask, max_used, probes]``. Payloads are
``float64`` (summed, numeric phase) or ``uint32`` column-set bitwords (OR-ed,
symbolic phase); the combine rule follows the payload dtype.
"""

from __future__ import annotations

import enum
import math

import numba
import numpy as np
from numba import types
from numba.extending import overload

KIND_LL = 0
KIND_LP = 1
KIND_DENSE = 2

M_KIND, M_USED, M_CAP, M_MASK, M_MAXUSED, M_PROBES = range(6)
META_LEN = 6

OK = 0
FULL = 1

EMPTY = -1

REAL = np.float64
BITWORD = np.uint32


class InsertStatus(enum.IntEnum):
    OK = OK
    FULL = FULL


def combine(a, b):
    """Merge two payloads: sum for reals, bitwise-or for bitwords."""
    if isinstance(a, (np.integer, int)) and not isinstance(a, bool):
        return a | b
    return a + b


@overload(combine)
def _combine_impl(a, b):
    if isinstance(a, types.Integer):
        return lambda a, b: a | b
    if isinstance(a, types.Float):
        return lambda a, b: a + b


def scale(payload, factor):
    """Multiply a B entry by its A coefficient; bitwords pass through."""
    if isinstance(payload, (np.integer, int)):
        return payload
    return payload * factor


@overload(scale)
def _scale_impl(payload, factor):
    if isinstance(payload, types.Integer):
        return lambda payload, factor: payload
    if isinstance(payload, types.Float):
        return lambda payload, factor: payload * factor


@numba.njit(cache=True, inline="always")
def popcount32(x):
    x = np.uint32(x)
    x = x - ((x >> np.uint32(1)) & np.uint32(0x55555555))
    x = (x & np.uint32(0x33333333)) + ((x >> np.uint32(2)) & np.uint32(0x33333333))
    x = (x + (x >> np.uint32(4))) & np.uint32(0x0F0F0F0F)
    # the multiply may widen to 64 bits in compiled code, so mask the top byte
    return np.int64(((x * np.uint32(0x01010101)) >> np.uint32(24)) & np.uint32(0xFF))


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


# ---------------------------------------------------------------------------
# jitted primitives shared by the kernels and the Python wrappers
#
# None of these allocate, so they are compiled without the runtime's reference
# counting (``_nrt=False``). With it, every call from the kernel's inner loop
# paid atomic increments and decrements on each array argument, which cost
# about 20x the insertion itself. Hot loops unpack the tuple once and call
# the array-argument forms (``insert``, ``key_at``, ...).

primitive = numba.njit(cache=True, nogil=True, _nrt=False)


@primitive
def insert(meta, aux0, aux1, ids, vals, key, val):
    kind = meta[M_KIND]
    if kind == KIND_LL:
        h = key & meta[M_MASK]
        p = aux0[h]
        while p != EMPTY:
            meta[M_PROBES] += 1
            if ids[p] == key:
                vals[p] = combine(vals[p], val)
                return OK
            p = aux1[p]
        used = meta[M_USED]
        if used >= meta[M_CAP]:
            return FULL
        ids[used] = key
        vals[used] = val
        aux1[used] = aux0[h]
        aux0[h] = used
        meta[M_USED] = used + 1
        return OK
    elif kind == KIND_LP:
        mask = meta[M_MASK]
        h = key & mask
        for _ in range(meta[M_CAP]):
            meta[M_PROBES] += 1
            k = ids[h]
            if k == key:
                vals[h] = combine(vals[h], val)
                return OK
            if k == EMPTY:
                used = meta[M_USED]
                if used >= meta[M_MAXUSED]:
                    return FULL
                ids[h] = key
                vals[h] = val
                aux0[used] = h
                meta[M_USED] = used + 1
                return OK
            h = (h + 1) & mask
        return FULL
    else:
        if aux0[key] == 0:
            aux0[key] = 1
            ids[meta[M_USED]] = key
            meta[M_USED] += 1
        vals[key] = combine(vals[key], val)
        return OK


@primitive
def key_at(meta, aux0, ids, q):
    if meta[M_KIND] == KIND_LP:
        return ids[aux0[q]]
    return ids[q]


@primitive
def value_at(meta, aux0, ids, vals, q):
    kind = meta[M_KIND]
    if kind == KIND_LL:
        return vals[q]
    if kind == KIND_LP:
        return vals[aux0[q]]
    return vals[ids[q]]


@primitive
def popcount_all(meta, aux0, ids, vals):
    total = 0
    for q in range(meta[M_USED]):
        total += popcount32(value_at(meta, aux0, ids, vals, q))
    return total


@primitive
def reset(meta, aux0, ids, vals):
    kind = meta[M_KIND]
    used = meta[M_USED]
    if kind == KIND_LL:
        mask = meta[M_MASK]
        for q in range(used):
            aux0[ids[q] & mask] = EMPTY
    elif kind == KIND_LP:
        for q in range(used):
            ids[aux0[q]] = EMPTY
    else:
        for q in range(used):
            c = ids[q]
            aux0[c] = 0
            vals[c] = 0
    meta[M_USED] = 0


@primitive
def acc_insert(acc, key, val):
    return insert(acc[0], acc[1], acc[2], acc[3], acc[4], key, val)


@primitive
def acc_size(acc):
    return acc[0][M_USED]


@primitive
def acc_key(acc, q):
    return key_at(acc[0], acc[1], acc[3], q)


@primitive
def acc_value(acc, q):
    return value_at(acc[0], acc[1], acc[3], acc[4], q)


@primitive
def acc_lookup(acc, key):
    """Slot holding ``key`` in extraction order, or -1."""
    meta, aux0, aux1, ids, vals = acc
    kind = meta[M_KIND]
    if kind == KIND_LL:
        p = aux0[key & meta[M_MASK]]
        while p != EMPTY:
            if ids[p] == key:
                return p
            p = aux1[p]
        return -1
    if kind == KIND_LP:
        mask = meta[M_MASK]
        h = key & mask
        for _ in range(meta[M_CAP]):
            k = ids[h]
            if k == key:
                for q in range(meta[M_USED]):
                    if aux0[q] == h:
                        return q
            if k == EMPTY:
                return -1
            h = (h + 1) & mask
        return -1
    if key < 0 or key >= meta[M_CAP] or aux0[key] == 0:
        return -1
    for q in range(meta[M_USED]):
        if ids[q] == key:
            return q
    return -1


@primitive
def acc_popcount(acc):
    return popcount_all(acc[0], acc[1], acc[3], acc[4])


@primitive
def acc_reset(acc):
    reset(acc[0], acc[1], acc[3], acc[4])


@primitive
def acc_extract(acc, out_keys, out_vals):
    meta, aux0, aux1, ids, vals = acc
    n = meta[M_USED]
    for q in range(n):
        out_keys[q] = key_at(meta, aux0, ids, q)
        out_vals[q] = value_at(meta, aux0, ids, vals, q)
    return n


# ---------------------------------------------------------------------------
# array allocation


def _meta(kind, cap, mask, max_used):
    meta = np.zeros(META_LEN, np.int64)
    meta[M_KIND] = kind
    meta[M_CAP] = cap
    meta[M_MASK] = mask
    meta[M_MAXUSED] = max_used
    return meta


_NO_AUX = np.empty(0, np.int32)


def new_ll(capacity: int, payload=REAL) -> tuple:
    capacity = max(int(capacity), 1)
    nb = next_pow2(capacity)
    return (
        _meta(KIND_LL, capacity, nb - 1, capacity),
        np.full(nb, EMPTY, np.int32),
        np.full(capacity, EMPTY, np.int32),
        np.full(capacity, EMPTY, np.int32),
        np.zeros(capacity, payload),
    )


def lp_max_used(table_size: int, max_occupancy: float) -> int:
    # keep one slot empty so probing always terminates
    return max(1, min(math.ceil(max_occupancy * table_size), table_size - 1 if table_size > 1 else 1))


def new_lp(table_size: int, max_occupancy: float = 0.5, payload=REAL) -> tuple:
    size = next_pow2(max(int(table_size), 2))
    max_used = lp_max_used(size, max_occupancy)
    return (
        _meta(KIND_LP, size, size - 1, max_used),
        np.full(max_used, EMPTY, np.int32),
        _NO_AUX,
        np.full(size, EMPTY, np.int32),
        np.zeros(size, payload),
    )


def lp_table_for(row_capacity: int) -> int:
    """Smallest power of two >= 2 x the expected row size."""
    return next_pow2(2 * max(int(row_capacity), 1))


def new_dense(k: int, payload=REAL) -> tuple:
    k = max(int(k), 1)
    return (
        _meta(KIND_DENSE, k, 0, k),
        np.zeros(k, np.int32),
        _NO_AUX,
        np.full(k, EMPTY, np.int32),
        np.zeros(k, payload),
    )


# ---------------------------------------------------------------------------
# Python-facing wrappers


def _payload_dtype(payload: str):
    if payload in ("real", "sum"):
        return REAL
    if payload in ("bitword", "or", "bitwise-or"):
        return BITWORD
    raise ValueError(f"unknown payload kind {payload!r}")


class _Accumulator:
    """Shared surface of the three accumulator kinds."""

    _acc: tuple

    @property
    def combine_rule(self) -> str:
        return "bitwise-or" if self._acc[4].dtype == BITWORD else "sum"

    @property
    def used_count(self) -> int:
        return int(self._acc[0][M_USED])

    @property
    def probes(self) -> int:
        """Entries inspected by inserts so far (instrumentation)."""
        return int(self._acc[0][M_PROBES])

    def insert(self, key: int, payload) -> InsertStatus:
        key = int(key)
        if key < 0:
            raise ValueError("keys must be non-negative")
        vals = self._acc[4]
        return InsertStatus(acc_insert(self._acc, np.int32(key), vals.dtype.type(payload)))

    def lookup(self, key: int):
        q = acc_lookup(self._acc, np.int32(key))
        return None if q < 0 else self._acc[4].dtype.type(acc_value(self._acc, q)).item()

    def extract(self) -> list[tuple[int, object]]:
        n = self.used_count
        keys = np.empty(n, np.int32)
        vals = np.empty(n, self._acc[4].dtype)
        acc_extract(self._acc, keys, vals)
        return list(zip(keys.tolist(), vals.tolist()))

    def popcount(self) -> int:
        return int(acc_popcount(self._acc))

    def reset(self) -> None:
        acc_reset(self._acc)

    def __len__(self) -> int:
        return self.used_count


class LlHashmap(_Accumulator):
    """Linked-list hashmap: ``begins`` buckets chained through ``nexts``."""

    def __init__(self, capacity: int, payload: str = "real"):
        self._acc = new_ll(capacity, _payload_dtype(payload))

    @property
    def capacity(self) -> int:
        return int(self._acc[0][M_CAP])

    @property
    def begins(self) -> np.ndarray:
        return self._acc[1]

    @property
    def nexts(self) -> np.ndarray:
        return self._acc[2]

    @property
    def ids(self) -> np.ndarray:
        return self._acc[3]

    @property
    def values(self) -> np.ndarray:
        return self._acc[4]

    def chain_lengths(self) -> np.ndarray:
        lengths = np.zeros(self.begins.size, np.int64)
        for key in self.ids[: self.used_count]:
            lengths[key & (self.begins.size - 1)] += 1
        return lengths


class LpHashmap(_Accumulator):
    """Open addressing with linear probing and a maximum occupancy."""

    def __init__(self, capacity: int, max_occupancy: float = 0.5, payload: str = "real"):
        if not 0.0 < max_occupancy <= 1.0:
            raise ValueError("max_occupancy must lie in (0, 1]")
        self.max_occupancy = max_occupancy
        self._acc = new_lp(capacity, max_occupancy, _payload_dtype(payload))

    @classmethod
    def for_row_size(cls, expected: int, max_occupancy: float = 0.5, payload: str = "real"):
        return cls(lp_table_for(expected), max_occupancy, payload)

    @property
    def capacity(self) -> int:
        return int(self._acc[0][M_CAP])

    @property
    def max_used(self) -> int:
        return int(self._acc[0][M_MAXUSED])

    @property
    def ids(self) -> np.ndarray:
        return self._acc[3]

    @property
    def values(self) -> np.ndarray:
        return self._acc[4]

    def slot_of(self, key: int) -> int:
        hits = np.flatnonzero(self.ids == key)
        return int(hits[0]) if hits.size else -1


class DenseAccumulator(_Accumulator):
    """Dense row of length ``k`` with marker array and touched list."""

    def __init__(self, k: int, payload: str = "real"):
        self.k = int(k)
        self._acc = new_dense(k, _payload_dtype(payload))

    def insert(self, key: int, payload) -> InsertStatus:
        if not 0 <= int(key) < self.k:
            raise ValueError(f"column {key} outside [0, {self.k})")
        return super().insert(key, payload)

    @property
    def dense_values(self) -> np.ndarray:
        return self._acc[4][: self.k]

    @property
    def markers(self) -> np.ndarray:
        return self._acc[1][: self.k].astype(bool)

    @property
    def touched_indices(self) -> list[int]:
        return self._acc[3][: self.used_count].tolist()
