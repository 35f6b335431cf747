import csv

import numpy as np
import pytest

from spgemm import cli, read_matrix_market


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _gen(tmp_path, name, *extra):
    path = tmp_path / name
    assert cli.main(["gen", "--out", str(path), *extra]) == cli.EXIT_OK
    return path


def _rows(text):
    return list(csv.DictReader(text.splitlines()))


def test_gen_is_deterministic(tmp_path):
    args = ("--kind", "uniform-random", "--rows", "200", "--nnz", "6", "--seed", "9")
    a = _gen(tmp_path, "a.mtx", *args)
    b = _gen(tmp_path, "b.mtx", *args)
    assert a.read_bytes() == b.read_bytes()
    c = _gen(tmp_path, "c.mtx", *args[:-1], "10")
    assert a.read_bytes() != c.read_bytes()


def test_gen_skewed_is_skewed(tmp_path):
    path = _gen(tmp_path, "s.mtx", "--kind", "skewed", "--rows", "2000", "--nnz", "8")
    lengths = read_matrix_market(path).row_lengths()
    assert lengths.max() > 4 * lengths.mean()


def test_gen_banded_shape(tmp_path):
    path = _gen(tmp_path, "b.mtx", "--kind", "banded", "--rows", "100", "--cols", "120",
                "--nnz", "5", "--bandwidth", "3")
    M = read_matrix_market(path)
    assert M.shape == (100, 120)
    centers = np.repeat(np.arange(100) * 120 // 100, M.row_lengths())
    assert np.all(np.abs(M.col_indices - centers) <= 3)


def test_gen_rejects_zero_rows(tmp_path, capsys):
    code, _, err = _run(capsys, "gen", "--kind", "banded", "--rows", "0", "--nnz", "3",
                        "--out", str(tmp_path / "x.mtx"))
    assert code == cli.EXIT_USAGE and "error" in err
    assert not (tmp_path / "x.mtx").exists()


def test_unknown_subcommand_is_usage_error(capsys):
    assert _run(capsys, "frobnicate")[0] == cli.EXIT_USAGE
    assert _run(capsys)[0] == cli.EXIT_USAGE


def test_bench_single_row(tmp_path, capsys):
    a = _gen(tmp_path, "a.mtx", "--kind", "banded", "--rows", "300", "--nnz", "7")
    code, out, _ = _run(capsys, "bench", "--a", str(a), "--reps", "5", "--threads", "2")
    assert code == cli.EXIT_OK
    rows = _rows(out)
    assert len(rows) == 1
    r = rows[0]
    assert r["problem"] == "a" and r["reuse"] == "0" and r["repetitions"] == "5"
    assert int(r["nnz_c"]) > 0 and int(r["worker_count"]) == 2
    assert float(r["t_total_ms"]) > 0
    assert float(r["gflops"]) == pytest.approx(
        2 * int(r["total_flops"]) / (float(r["t_total_ms"]) * 1e6), rel=1e-3)


def test_bench_modes_reuse_and_file_output(tmp_path, capsys):
    a = _gen(tmp_path, "a.mtx", "--kind", "uniform-random", "--rows", "200", "--nnz", "5")
    out = tmp_path / "res.csv"
    code, stdout, _ = _run(capsys, "bench", "--a", str(a), "--mode", "mem,dense,lp",
                           "--reps", "2", "--reuse", "3", "--out", str(out))
    assert code == cli.EXIT_OK and stdout == ""
    rows = _rows(out.read_text())
    assert [r["algorithm"] for r in rows] == ["mem:ll", "mem:ll", "dense:dense", "dense:dense",
                                              "lp:lp", "lp:lp"]
    for plain, reused in zip(rows[::2], rows[1::2]):
        assert (plain["reuse"], reused["reuse"]) == ("0", "1")
        assert float(reused["t_symbolic_ms"]) == 0.0
        assert float(reused["t_total_ms"]) == float(reused["t_numeric_ms"])
        assert reused["nnz_c"] == plain["nnz_c"]


def test_bench_triple_product(tmp_path, capsys):
    r = _gen(tmp_path, "r.mtx", "--kind", "uniform-random", "--rows", "40", "--cols", "120",
             "--nnz", "4")
    a = _gen(tmp_path, "a.mtx", "--kind", "banded", "--rows", "120", "--nnz", "5")
    p = _gen(tmp_path, "p.mtx", "--kind", "uniform-random", "--rows", "120", "--cols", "40",
             "--nnz", "3")
    code, out, _ = _run(capsys, "bench", "--triple", "--r", str(r), "--a", str(a),
                        "--p", str(p), "--reps", "1")
    assert code == cli.EXIT_OK
    row = _rows(out)[0]
    assert row["problem"] == "r*a*p"
    assert (int(row["m"]), int(row["k"])) == (40, 40)
    R, A, P = (read_matrix_market(x).to_dense() for x in (r, a, p))
    assert int(row["nnz_c"]) == np.count_nonzero((R != 0) @ (A != 0) @ (P != 0))
    assert _run(capsys, "bench", "--triple", "--a", str(a))[0] == cli.EXIT_USAGE


def test_bench_dimension_mismatch_and_missing_file(tmp_path, capsys):
    a = _gen(tmp_path, "a.mtx", "--kind", "banded", "--rows", "10", "--cols", "12", "--nnz", "3")
    assert _run(capsys, "bench", "--a", str(a), "--reps", "1")[0] == cli.EXIT_IO
    code, _, err = _run(capsys, "bench", "--a", str(tmp_path / "missing.mtx"))
    assert code == cli.EXIT_IO and "missing.mtx" in err
    bad = tmp_path / "bad.mtx"
    bad.write_text("not a matrix\n")
    assert _run(capsys, "verify", "--a", str(bad))[0] == cli.EXIT_IO


def test_verify_passes(tmp_path, capsys):
    a = _gen(tmp_path, "a.mtx", "--kind", "skewed", "--rows", "150", "--nnz", "6")
    code, out, _ = _run(capsys, "verify", "--a", str(a), "--threads", "1,3")
    assert code == cli.EXIT_OK
    lines = out.splitlines()
    assert len(lines) == 3 * 2 * 2 and all(line.startswith("PASS") for line in lines)


def test_verify_reports_corruption(tmp_path, capsys, monkeypatch):
    a = _gen(tmp_path, "a.mtx", "--kind", "banded", "--rows", "50", "--nnz", "5")

    def corrupt(C):
        values = C.values.copy()
        rows = np.repeat(np.arange(C.num_rows), C.row_lengths())
        q = int(np.flatnonzero(rows == 7)[0])
        values[q] += 1.0
        corrupt.where = (7, int(C.col_indices[q]))
        return C.with_values(values)

    monkeypatch.setattr(cli, "_RESULT_HOOK", corrupt)
    code, out, _ = _run(capsys, "verify", "--a", str(a), "--threads", "1")
    assert code == cli.EXIT_VERIFY
    fails = [line for line in out.splitlines() if line.startswith("FAIL")]
    assert len(fails) == 6
    assert f"first mismatch at (row, col) = {corrupt.where}" in fails[0]


def test_stats(tmp_path, capsys):
    a = _gen(tmp_path, "a.mtx", "--kind", "banded", "--rows", "500", "--nnz", "17",
             "--bandwidth", "8")
    code, out, _ = _run(capsys, "stats", "--a", str(a))
    assert code == cli.EXIT_OK
    kv = dict(line.split("=", 1) for line in out.splitlines())
    assert kv["m"] == "500" and kv["compression_applied"] == "True"
    assert float(kv["cf"]) < 0.85


FIXTURE = """problem,algorithm,scheme,worker_count,reuse,t_total_ms
p1,x,seq,1,False,1.0
p1,y,seq,1,False,2.0
p2,x,seq,1,False,4.0
p2,y,seq,1,False,1.0
p3,x,seq,1,False,3.0
p3,y,seq,1,False,
"""


def test_profile_fixture(tmp_path, capsys):
    src = tmp_path / "res.csv"
    src.write_text(FIXTURE)
    code, out, _ = _run(capsys, "profile", str(src), "--points", "2")
    assert code == cli.EXIT_OK
    rows = _rows(out)
    got = [(float(r["x"]), int(r["x/seq/1/False"]), int(r["y/seq/1/False"])) for r in rows]
    # ratios: x -> 1, 4, 1 ; y -> 2, 1, failed
    assert got == [(1.0, 2, 1), (2.0, 2, 2), (4.0, 3, 2)]


def test_profile_composes_with_bench(tmp_path, capsys):
    a = _gen(tmp_path, "a.mtx", "--kind", "uniform-random", "--rows", "100", "--nnz", "4")
    b = _gen(tmp_path, "b.mtx", "--kind", "banded", "--rows", "100", "--nnz", "4")
    res = tmp_path / "res.csv"
    for name in (a, b):
        assert cli.main(["bench", "--a", str(name), "--mode", "mem,lp", "--reps", "1",
                         "--out", str(tmp_path / f"{name.stem}.csv")]) == 0
    lines = (tmp_path / "a.csv").read_text().splitlines()
    lines += (tmp_path / "b.csv").read_text().splitlines()[1:]
    res.write_text("\n".join(lines) + "\n")
    out = tmp_path / "profile.csv"
    assert _run(capsys, "profile", str(res), "--out", str(out))[0] == cli.EXIT_OK
    rows = _rows(out.read_text())
    assert float(rows[0]["x"]) == 1.0
    last = rows[-1]
    assert all(int(v) == 2 for k, v in last.items() if k != "x")


def test_profile_errors(tmp_path, capsys):
    src = tmp_path / "one.csv"
    src.write_text("problem,algorithm,scheme,worker_count,reuse,t_total_ms\np,x,seq,1,False,1\n")
    assert _run(capsys, "profile", str(src))[0] == cli.EXIT_IO
    assert _run(capsys, "profile", str(tmp_path / "nope.csv"))[0] == cli.EXIT_IO
