"""MatrixMarket coordinate-format reader and writer."""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np

from .matrix import CsrMatrix, build_csr

FIELDS = ("real", "integer", "pattern")
SYMMETRIES = ("general", "symmetric")


class MatrixMarketError(ValueError):
    """Malformed MatrixMarket input; message carries the 1-based line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _parse_header(line: str) -> tuple[str, str]:
    tokens = line.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise MatrixMarketError(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'")
    if tokens[2] != "coordinate":
        raise MatrixMarketError(1, f"unsupported format {tokens[2]!r} (only coordinate)")
    if tokens[3] not in FIELDS:
        raise MatrixMarketError(1, f"unsupported field {tokens[3]!r}")
    if tokens[4] not in SYMMETRIES:
        raise MatrixMarketError(1, f"unsupported symmetry {tokens[4]!r}")
    return tokens[3], tokens[4]


def _parse_entries_slow(lines, first_lineno, ncols_expected, nrows, ncols):
    rows, cols, vals = [], [], []
    for off, line in enumerate(lines):
        lineno = first_lineno + off
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != ncols_expected:
            raise MatrixMarketError(lineno, f"expected {ncols_expected} fields, got {len(parts)}")
        try:
            r, c = int(parts[0]), int(parts[1])
            v = float(parts[2]) if ncols_expected == 3 else 1.0
        except ValueError as exc:
            raise MatrixMarketError(lineno, f"cannot parse entry: {exc}") from None
        if not (1 <= r <= nrows and 1 <= c <= ncols):
            raise MatrixMarketError(lineno, f"index ({r}, {c}) outside {nrows}x{ncols}")
        rows.append(r)
        cols.append(c)
        vals.append(v)
    return np.array(rows, np.int64), np.array(cols, np.int64), np.array(vals, np.float64)


def read_matrix_market(path: str | os.PathLike) -> CsrMatrix:
    """Read a coordinate MatrixMarket file into CSR (0-based, symmetric expanded)."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError(1, "empty file")
    field, symmetry = _parse_header(lines[0])

    i = 1
    while i < len(lines) and (not lines[i].strip() or lines[i].lstrip().startswith("%")):
        i += 1
    if i == len(lines):
        raise MatrixMarketError(i + 1, "missing size line")
    size = lines[i].split()
    try:
        nrows, ncols, nnz = (int(x) for x in size)
    except ValueError:
        raise MatrixMarketError(i + 1, "size line must be '<rows> <cols> <entries>'") from None
    if min(nrows, ncols, nnz) < 0:
        raise MatrixMarketError(i + 1, "negative size")

    body = lines[i + 1:]
    nfields = 2 if field == "pattern" else 3
    try:
        data = np.loadtxt(io.StringIO("\n".join(body)), comments="%", ndmin=2,
                          dtype=np.float64) if nnz else np.empty((0, nfields))
        if data.shape[0] and data.shape[1] != nfields:
            raise ValueError
        r = data[:, 0].astype(np.int64)
        c = data[:, 1].astype(np.int64)
        if not (np.array_equal(r, data[:, 0]) and np.array_equal(c, data[:, 1])):
            raise ValueError
        v = data[:, 2].copy() if nfields == 3 else np.ones(r.size)
        if r.size and (r.min() < 1 or r.max() > nrows or c.min() < 1 or c.max() > ncols):
            raise ValueError
    except ValueError:
        # re-parse line by line to report where it went wrong
        r, c, v = _parse_entries_slow(body, i + 2, nfields, nrows, ncols)
    if r.size != nnz:
        raise MatrixMarketError(len(lines), f"header announced {nnz} entries, found {r.size}")

    r -= 1
    c -= 1
    if symmetry == "symmetric":
        if nrows != ncols:
            raise MatrixMarketError(i + 1, "symmetric matrix must be square")
        off = r != c
        r, c, v = (np.concatenate([r, c[off]]), np.concatenate([c, r[off]]),
                   np.concatenate([v, v[off]]))
    return build_csr(nrows, ncols, (r, c, v))


def write_matrix_market(path: str | os.PathLike, M: CsrMatrix, comment: str | None = None) -> None:
    """Write ``M`` as ``coordinate real general`` with 17 significant digits."""
    rows, cols, vals = M.triplets()
    with open(path, "w", newline="\n") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{M.num_rows} {M.num_cols} {M.nnz}\n")
        fh.writelines(
            f"{a} {b} {x:.17g}\n"
            for a, b, x in zip((rows + 1).tolist(), (cols + 1).tolist(), vals.tolist())
        )
