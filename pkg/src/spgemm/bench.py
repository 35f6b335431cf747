"""Benchmark records (NoReuse / Reuse timing) and performance profiles."""

from __future__ import annotations

import contextlib
import csv
import math
import time
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .engine import Accumulator, SpgemmConfig, numeric, symbolic

# CLI mode names -> accumulator choice ("mem" is the memory-lean LL hashmap)
MODES = {"auto": Accumulator.AUTO, "mem": Accumulator.LL, "dense": Accumulator.DENSE,
         "lp": Accumulator.LP}
GFLOPS_CONVENTION = "2*flops/t_total"


@dataclass
class BenchRecord:
    problem: str
    m: int
    n: int
    k: int
    nnz_a: int
    nnz_b: int
    total_flops: int
    max_row_flops: int
    nnz_c: int
    max_row_size: int
    cf: float
    cmrf: float
    algorithm: str
    scheme: str
    worker_count: int
    t_compress_ms: float
    t_symbolic_ms: float
    t_numeric_ms: float
    t_total_ms: float
    gflops: float
    reuse: bool
    repetitions: int


FIELDNAMES = [f.name for f in fields(BenchRecord)]


def gflops(total_flops: int, t_ms: float) -> float:
    return 2.0 * total_flops / (t_ms * 1e6) if t_ms > 0 else math.inf


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return f"{v:.6f}" if math.isfinite(v) else str(v)
    return v


@contextlib.contextmanager
def _sink(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_records(target, records: Iterable[BenchRecord]) -> None:
    """Write records as CSV to a path or an open text stream."""
    with _sink(target) as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDNAMES, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: _fmt(v) for k, v in asdict(r).items()})


@dataclass
class _Timing:
    compress: float = 0.0
    symbolic: float = 0.0
    numeric: float = 0.0
    total: float = 0.0

    def __iadd__(self, o):
        self.compress += o.compress
        self.symbolic += o.symbolic
        self.numeric += o.numeric
        self.total += o.total
        return self


def _chain(pairs, cfg):
    """Run each (left, right) multiply in turn; a ``None`` operand means the
    previous product. Returns the last C, the handles and the timing."""
    t = _Timing()
    handles, prev = [], None
    t0 = time.perf_counter()
    for left, right in pairs:
        left = prev if left is None else left
        right = prev if right is None else right
        h = symbolic(left, right, cfg)
        t1 = time.perf_counter()
        prev = numeric(left, right, h)
        t2 = time.perf_counter()
        t.compress += h.timings_ms["compress_ms"]
        t.symbolic += h.timings_ms["symbolic_ms"]
        t.numeric += (t2 - t1) * 1e3
        handles.append((left, right, h))
    t.total = (time.perf_counter() - t0) * 1e3
    return prev, handles, t


def run_bench(problem: str, pairs: Sequence[tuple], mode: str, cfg: SpgemmConfig, *,
              reps: int = 5, reuse: int = 0, warmup: int = 1) -> list[BenchRecord]:
    """Time one product (or chain of products) under one configuration.

    ``pairs`` is a list of ``(left, right)`` operands; ``None`` stands for
    the preceding product, so ``[(A, P), (R, None)]`` is the Galerkin
    triple product. Returns the NoReuse row, plus a Reuse row if
    ``reuse > 0`` (symbolic once, numeric ``reuse`` times).
    """
    cfg = cfg.replace(accumulator=MODES[mode])
    for _ in range(warmup):
        _chain(pairs, cfg)
    acc = _Timing()
    for _ in range(reps):
        C, handles, t = _chain(pairs, cfg)
        acc += t
    n = max(reps, 1)
    hs = [h for _, _, h in handles]
    first_left, first_right = handles[0][0], handles[0][1]
    total_flops = sum(h.flops.total_flops for h in hs)
    comp_flops = sum(h.compression.compressed_flops for h in hs)
    orig_max = max(h.flops.max_row_flops for h in hs)
    comp_max = max(h.compression.compressed_max_row_flops for h in hs)
    chosen = hs[-1].chosen
    base = dict(
        problem=problem,
        m=C.num_rows,
        n=first_left.num_cols,
        k=C.num_cols,
        nnz_a=first_left.nnz,
        nnz_b=first_right.nnz,
        total_flops=total_flops,
        max_row_flops=orig_max,
        nnz_c=C.nnz,
        max_row_size=max(h.max_row_size for h in hs),
        cf=comp_flops / total_flops if total_flops else 1.0,
        cmrf=comp_max / orig_max if orig_max else 1.0,
        algorithm=f"{mode}:{chosen.accumulator.value}",
        scheme=chosen.scheme.value,
        worker_count=cfg.worker_count,
    )
    t_total = acc.total / n
    records = [BenchRecord(**base, t_compress_ms=acc.compress / n,
                           t_symbolic_ms=acc.symbolic / n, t_numeric_ms=acc.numeric / n,
                           t_total_ms=t_total, gflops=gflops(total_flops, t_total),
                           reuse=False, repetitions=reps)]
    if reuse > 0:
        t_num = 0.0
        for _ in range(reuse):
            t0 = time.perf_counter()
            for left, right, h in handles:
                numeric(left, right, h)
            t_num += (time.perf_counter() - t0) * 1e3
        t_num /= reuse
        records.append(BenchRecord(**base, t_compress_ms=0.0, t_symbolic_ms=0.0,
                                   t_numeric_ms=t_num, t_total_ms=t_num,
                                   gflops=gflops(total_flops, t_num), reuse=True,
                                   repetitions=reuse))
    return records


# ---------------------------------------------------------------------------
# performance profiles


class ProfileError(ValueError):
    pass


DEFAULT_METHOD_COLUMNS = ("algorithm", "scheme", "worker_count", "reuse")


def read_times(path, method_columns: Sequence[str] = DEFAULT_METHOD_COLUMNS,
               time_column: str = "t_total_ms") -> dict[str, dict[str, float]]:
    """``{method: {problem: time}}`` from a results CSV. Empty or non-finite
    times mark a failed run."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except csv.Error as exc:
        raise ProfileError(str(exc)) from exc
    if not rows:
        raise ProfileError("results file has no data rows")
    needed = {"problem", time_column, *method_columns}
    missing = needed - set(rows[0])
    if missing:
        raise ProfileError(f"missing columns: {', '.join(sorted(missing))}")
    out: dict[str, dict[str, float]] = {}
    for lineno, row in enumerate(rows, start=2):
        method = "/".join(str(row[c]) for c in method_columns)
        raw = (row[time_column] or "").strip()
        try:
            value = float(raw) if raw else math.nan
        except ValueError as exc:
            raise ProfileError(f"line {lineno}: bad time {raw!r}") from exc
        if value < 0:
            raise ProfileError(f"line {lineno}: negative time")
        out.setdefault(method, {})[row["problem"]] = value
    return out


@dataclass(frozen=True)
class ProfilePoint:
    x: float
    counts: dict[str, int]


def performance_profile(times: dict[str, dict[str, float]], grid_points: int = 32
                        ) -> list[ProfilePoint]:
    """Count, per method, the problems it solved within ``x`` times the best.

    The grid is log-spaced over ``[1, max ratio]`` and also contains every
    observed ratio, so each step of the profile lands on a grid point.
    """
    if len(times) < 2:
        raise ProfileError("need at least two methods")
    problems = sorted({p for per in times.values() for p in per})
    ratios: dict[str, list[float]] = {m: [] for m in times}
    for p in problems:
        ok = {m: per[p] for m, per in times.items() if math.isfinite(per.get(p, math.nan))}
        if not ok:
            continue
        best = min(ok.values())
        for m, t in ok.items():
            ratios[m].append(t / best if best > 0 else (1.0 if t == 0 else math.inf))
    observed = [r for rs in ratios.values() for r in rs if math.isfinite(r)]
    top = max(observed, default=1.0)
    grid = set(np.geomspace(1.0, top, grid_points).tolist()) if top > 1 else {1.0}
    grid.update(observed)
    grid.add(1.0)
    return [ProfilePoint(x, {m: sum(r <= x for r in ratios[m]) for m in times})
            for x in sorted(grid)]


def write_profile(target, points: list[ProfilePoint]) -> None:
    methods = list(points[0].counts) if points else []
    with _sink(target) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", *methods])
        for pt in points:
            w.writerow([repr(pt.x), *(pt.counts[m] for m in methods)])
