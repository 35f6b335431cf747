"""Random problem instances shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from spgemm import CsrMatrix, generate_synthetic
from spgemm.matrix import SYNTHETIC_KINDS


def random_operand(rng: np.random.Generator, kind: str, rows: int, cols: int,
                   density: float) -> CsrMatrix:
    t = int(min(cols, max(1, round(density * cols))))
    return generate_synthetic(kind, rows, cols, t, int(rng.integers(2**31)))


def random_instance(rng: np.random.Generator, max_dim: int = 1000,
                    density=(0.005, 0.2), kinds=SYNTHETIC_KINDS):
    """A compatible pair (A, B) with dims uniform in [1, max_dim] and a
    log-uniform density. Returns ``(A, B, label)``."""
    m, n, k = (int(x) for x in rng.integers(1, max_dim + 1, size=3))
    lo, hi = density
    d = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    kind = kinds[int(rng.integers(len(kinds)))]
    A = random_operand(rng, kind, m, n, d)
    B = random_operand(rng, kind, n, k, d)
    return A, B, f"{kind} m={m} n={n} k={k} d={d:.4f}"
