import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spgemm import CsrMatrix, MatrixError, build_csr, compress_rows, decide_compression, identity
from spgemm.compression import compressed_row_sizes
from spgemm.matrix import flops_stats, generate_synthetic


def _pairs(G, i):
    lo, hi = G.row_offsets[i], G.row_offsets[i + 1]
    return sorted(zip(G.csi[lo:hi].tolist(), G.cs[lo:hi].tolist()))


def test_hand_packed_rows():
    B = build_csr(3, 40, [(0, c, 1.0) for c in range(10)] + [(1, 1, 1), (1, 3, 1), (1, 33, 1)])
    G = compress_rows(B)
    assert _pairs(G, 0) == [(0, 0x3FF)]
    assert _pairs(G, 1) == [(0, 0b1010), (1, 0b10)]
    assert _pairs(G, 2) == []
    assert G.num_sets == 2


def test_high_bit_column():
    B = build_csr(1, 64, [(0, 31, 1.0), (0, 63, 1.0)])
    G = compress_rows(B)
    assert _pairs(G, 0) == [(0, 1 << 31), (1, 1 << 31)]
    assert G.decompress().col_indices.tolist() == [31, 63]


structures = st.integers(1, 15).flatmap(lambda m: st.integers(1, 200).flatmap(
    lambda n: st.tuples(st.just(m), st.just(n), st.lists(
        st.tuples(st.integers(0, m - 1), st.integers(0, n - 1)), max_size=120))))


@settings(max_examples=100, deadline=None)
@given(structures)
def test_round_trip_unsorted_rows(data):
    m, n, cells = data
    M = build_csr(m, n, [(r, c, 1.0) for r, c in cells])
    # scramble within-row order to exercise unsorted input
    rng = np.random.default_rng(len(cells))
    idx = M.col_indices.copy()
    for i in range(m):
        lo, hi = M.row_offsets[i], M.row_offsets[i + 1]
        rng.shuffle(idx[lo:hi])
    U = CsrMatrix.from_arrays(m, n, M.row_offsets, idx, M.values)
    G = compress_rows(U)
    assert np.all(G.row_lengths() <= U.row_lengths())
    D = G.decompress()
    assert np.array_equal(D.row_offsets, M.row_offsets)
    assert np.array_equal(D.col_indices, M.sorted().col_indices)


def test_banded_compresses_permutation_does_not():
    B = generate_synthetic("banded", 2000, 2000, 17, seed=0, bandwidth=8)
    report, G = decide_compression(B, B)
    assert report.applied and G is not None
    assert report.cf < 0.85 and report.cmrf <= 1.0

    perm = np.random.default_rng(0).permutation(500)
    P = build_csr(500, 500, (np.arange(500), perm, np.ones(500)))
    report, G = decide_compression(P, P)
    assert report.cf == 1.0 and not report.applied and G is None


def test_gate_is_strict():
    # 20 columns in 17 column sets (4 share set 0): cf = 17/20 = 0.85 exactly
    # sits on the gate, and the gate is strict, so compression is skipped
    cols = [0, 1, 2, 3] + [32 * s for s in range(1, 17)]
    B = build_csr(1, 32 * 17, [(0, c, 1.0) for c in cols])
    A = identity(1)
    report, G = decide_compression(A, B)
    assert (report.compressed_flops, report.original_flops) == (17, 20)
    assert not report.applied and G is None
    # one more column in set 0 tips it over
    B = build_csr(1, 32 * 17, [(0, c, 1.0) for c in cols + [4]])
    report, _ = decide_compression(A, B)
    assert report.cf == 17 / 21 and report.applied


def test_force_overrides_gate():
    P = identity(10)
    report, G = decide_compression(P, P, force=True)
    assert report.applied and G is not None
    B = generate_synthetic("banded", 200, 200, 17, seed=0)
    report, G = decide_compression(B, B, force=False)
    assert not report.applied and G is None


def test_report_ratios_on_empty():
    E = build_csr(3, 3, [])
    report, _ = decide_compression(E, E)
    assert report.cf == 1.0 and report.cmrf == 1.0 and not report.applied


def test_compressed_flops_match_definition():
    A = generate_synthetic("skewed", 80, 120, 8, seed=2)
    B = generate_synthetic("uniform-random", 120, 300, 20, seed=3)
    report, _ = decide_compression(A, B)
    sizes = compressed_row_sizes(B)
    expect = sum(int(sizes[A.row(i)[0]].sum()) for i in range(A.num_rows))
    assert report.compressed_flops == expect
    assert report.original_flops == flops_stats(A, B).total_flops
    assert 0 < report.cf <= 1 and report.cmrf <= 1


def test_dimension_mismatch():
    with pytest.raises(MatrixError):
        decide_compression(identity(2), identity(3))
