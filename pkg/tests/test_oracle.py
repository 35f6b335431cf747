import numpy as np
import pytest

from spgemm import (
    MatrixError, build_csr, compare, dense_triple_loop, flops_stats, from_dense,
    generate_synthetic, gustavson_serial, identity,
)
from instances import random_instance

A3 = from_dense([[1, 0, 2], [0, 3, 0], [4, 0, 5]])
B3 = from_dense([[1, 1, 0], [0, 2, 0], [0, 0, 3]])
C3 = np.array([[1, 1, 6], [0, 6, 0], [4, 4, 15]], float)


def _dense(C):
    out = np.zeros((C.num_rows, C.num_cols))
    rows = np.repeat(np.arange(C.num_rows), np.diff(C.row_offsets))
    out[rows, C.col_indices] = C.values
    return out


def test_identity_times_m():
    M = generate_synthetic("skewed", 40, 30, 5, seed=1)
    ref = gustavson_serial(identity(40), M)
    assert compare(M, ref).passed(0.0)


def test_three_by_three():
    for oracle in (gustavson_serial, dense_triple_loop):
        C = oracle(A3, B3)
        assert C.nnz == 7
        np.testing.assert_array_equal(_dense(C), C3)


def test_scalar():
    a = build_csr(1, 1, [(0, 0, 3.0)])
    b = build_csr(1, 1, [(0, 0, -2.0)])
    assert dense_triple_loop(a, b).values.tolist() == [-6.0]


def test_zero_valued_structure_is_kept():
    A = build_csr(3, 3, [(i, j, 0.0) for i in range(3) for j in range(3)])
    B = build_csr(3, 2, [(0, 0, 1.0), (2, 1, 1.0)])
    for oracle in (gustavson_serial, dense_triple_loop):
        C = oracle(A, B)
        assert C.nnz == 6
        assert not C.values.any()


def test_cancellation_keeps_entry():
    A = build_csr(1, 2, [(0, 0, 1.0), (0, 1, -1.0)])
    B = build_csr(2, 1, [(0, 0, 2.0), (1, 0, 2.0)])
    ref = gustavson_serial(A, B)
    assert ref.nnz == 1 and ref.values[0] == 0.0 and ref.magnitudes[0] == 4.0
    assert dense_triple_loop(A, B).nnz == 1


def test_guard_and_mismatch():
    with pytest.raises(MatrixError):
        dense_triple_loop(identity(2001), identity(2001))
    with pytest.raises(MatrixError):
        gustavson_serial(identity(2), identity(3))


def test_oracles_agree_on_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(500):
        A, B, label = random_instance(rng, max_dim=120)
        g = gustavson_serial(A, B)
        d = dense_triple_loop(A, B)
        res = compare(d, g)
        assert res.passed(1e-13), (label, res)
        assert g.multiplications == flops_stats(A, B).total_flops


def test_compare_reports_location():
    ref = gustavson_serial(A3, B3)
    bad = from_dense(C3 + np.array([[0, 0, 0], [0, 0, 0], [0, 1e-3, 0]]))
    res = compare(bad, ref)
    assert res.structure_equal and not res.passed(1e-12)
    assert res.first_mismatch == (2, 1)
    missing = from_dense(C3 * np.array([[1, 1, 1], [1, 1, 1], [1, 0, 1]]))
    res = compare(missing, ref)
    assert not res.structure_equal and res.first_mismatch == (2, 1)
