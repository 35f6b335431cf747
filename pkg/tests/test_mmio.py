import numpy as np
import pytest

from spgemm import (
    MatrixMarketError, build_csr, generate_synthetic, read_matrix_market, write_matrix_market,
)


def _write(tmp_path, text, name="m.mtx"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_identity(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n"
                         "% comment\n2 2 2\n1 1 1.0\n2 2 1.0\n")
    M = read_matrix_market(p)
    assert M.nnz == 2
    assert M.values.tolist() == [1.0, 1.0]
    assert M.col_indices.tolist() == [0, 1]


def test_symmetric_expansion(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n"
                         "3 3 4\n1 1 1\n2 1 2\n3 2 3\n3 3 4\n")
    M = read_matrix_market(p)
    dense = M.to_dense()
    assert np.count_nonzero(dense - np.diag(np.diag(dense))) == 4
    np.testing.assert_array_equal(dense, dense.T)


def test_pattern_field(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate pattern general\n"
                         "3 3 5\n1 1\n1 2\n2 3\n3 1\n3 3\n")
    M = read_matrix_market(p)
    assert M.nnz == 5
    assert set(M.values.tolist()) == {1.0}


def test_integer_field_and_duplicates(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate integer general\n"
                         "2 2 3\n1 1 2\n1 1 3\n2 2 1\n")
    M = read_matrix_market(p)
    assert M.nnz == 2
    assert M.values.tolist() == [5.0, 1.0]


@pytest.mark.parametrize("text, line", [
    ("%%MatrixMarket matrix array real general\n2 2\n1\n", 1),
    ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 1.0\n", 4),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 x 1.0\n", 4),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 two 2\n", 2),
])
def test_errors_name_the_line(tmp_path, text, line):
    p = _write(tmp_path, text)
    with pytest.raises(MatrixMarketError) as info:
        read_matrix_market(p)
    assert info.value.lineno == line
    assert str(info.value).startswith(f"line {line}:")


def test_round_trip_full_precision(tmp_path):
    M = generate_synthetic("skewed", 60, 45, 6, seed=4)
    M = M.with_values(M.values * np.pi * 1e-7)
    p = tmp_path / "r.mtx"
    write_matrix_market(p, M, comment="round trip")
    back = read_matrix_market(p)
    assert back.equals(M)


def test_round_trip_empty(tmp_path):
    M = build_csr(3, 4, [])
    p = tmp_path / "e.mtx"
    write_matrix_market(p, M)
    back = read_matrix_market(p)
    assert back.shape == (3, 4) and back.nnz == 0
