"""``spgemm`` command line: bench, verify, profile, gen, stats.

Exit codes: 0 success, 1 usage, 2 I/O or input error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys

from . import bench
from .engine import Accumulator, Scheme, SpgemmConfig, multiply, symbolic
from .matrix import SYNTHETIC_KINDS, CsrMatrix, MatrixError, generate_synthetic
from .mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from .oracle import compare, gustavson_serial

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3
VERIFY_TOL = 1e-12

# test hook: if set, verify passes each engine result through it before comparing
_RESULT_HOOK = None


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _non_negative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [_positive(t) for t in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _mode_list(text: str) -> list[str]:
    modes = text.split(",")
    bad = [m for m in modes if m not in bench.MODES]
    if bad:
        raise argparse.ArgumentTypeError(
            f"unknown mode {bad[0]!r}; choose from {', '.join(bench.MODES)}")
    return modes


def _default_threads() -> list[int]:
    env = os.environ.get("SPGEMM_THREADS")
    if not env:
        return [1]
    try:
        return _int_list(env)
    except argparse.ArgumentTypeError:
        raise UsageError(f"SPGEMM_THREADS must be a positive integer, got {env!r}") from None


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="seq")
    p.add_argument("--threads", type=_int_list, default=None,
                   help="worker count, or a comma list (default: $SPGEMM_THREADS or 1)")
    p.add_argument("--sort-output", action="store_true")
    p.add_argument("--l1-capacity", type=_positive)
    p.add_argument("--dense-cutoff", type=_positive, default=250_000)
    p.add_argument("--avg-flops-cutoff", type=float, default=256.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spgemm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench", help="time NoReuse/Reuse runs and write a CSV")
    b.add_argument("--a", required=True)
    b.add_argument("--b", help="right operand (default: A)")
    b.add_argument("--r", help="restriction for --triple")
    b.add_argument("--p", help="prolongation for --triple")
    b.add_argument("--triple", action="store_true", help="time R x (A x P)")
    b.add_argument("--mode", type=_mode_list, default=["auto"],
                   help="auto|mem|dense|lp, or a comma list")
    b.add_argument("--reps", type=_positive, default=5)
    b.add_argument("--reuse", type=_non_negative, default=0)
    b.add_argument("--problem", help="problem label (default: derived from file names)")
    b.add_argument("--out", help="CSV path (default: stdout)")
    _engine_flags(b)

    v = sub.add_parser("verify", help="check every accumulator x scheme against the oracle")
    v.add_argument("--a", required=True)
    v.add_argument("--b")
    v.add_argument("--tol", type=float, default=VERIFY_TOL)
    _engine_flags(v)

    pr = sub.add_parser("profile", help="performance profile of a bench CSV")
    pr.add_argument("results")
    pr.add_argument("--out", help="CSV path (default: stdout)")
    pr.add_argument("--points", type=_positive, default=32)
    pr.add_argument("--method-columns", default=",".join(bench.DEFAULT_METHOD_COLUMNS))

    g = sub.add_parser("gen", help="write a synthetic matrix")
    g.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    g.add_argument("--rows", type=_positive, required=True)
    g.add_argument("--cols", type=_positive)
    g.add_argument("--nnz", type=_positive, required=True, help="target nonzeros per row")
    g.add_argument("--bandwidth", type=_positive)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("stats", help="print structural statistics of A x B")
    s.add_argument("--a", required=True)
    s.add_argument("--b")
    _engine_flags(s)
    return parser


def _load(path: str) -> CsrMatrix:
    try:
        return read_matrix_market(path)
    except (OSError, MatrixMarketError, MatrixError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _config(args, workers: int) -> SpgemmConfig:
    return SpgemmConfig(scheme=args.scheme, l1_capacity=args.l1_capacity,
                        dense_cutoff_k=args.dense_cutoff, avg_flops_cutoff=args.avg_flops_cutoff,
                        worker_count=workers, sort_output=args.sort_output)


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _open_out(path):
    return sys.stdout if path in (None, "-") else path


def cmd_bench(args) -> int:
    threads = args.threads or _default_threads()
    if args.triple:
        if not (args.r and args.p):
            raise UsageError("--triple needs --r, --a and --p")
        R, A, P = _load(args.r), _load(args.a), _load(args.p)
        pairs = [(A, P), (R, None)]
        problem = args.problem or f"{_stem(args.r)}*{_stem(args.a)}*{_stem(args.p)}"
    else:
        A = _load(args.a)
        B = _load(args.b) if args.b else A
        pairs = [(A, B)]
        problem = args.problem or (f"{_stem(args.a)}*{_stem(args.b)}" if args.b
                                   else _stem(args.a))
    records = []
    for mode, workers in itertools.product(args.mode, threads):
        try:
            records += bench.run_bench(problem, pairs, mode, _config(args, workers),
                                       reps=args.reps, reuse=args.reuse)
        except MatrixError as exc:
            raise InputError(str(exc)) from exc
    try:
        bench.write_records(_open_out(args.out), records)
    except OSError as exc:
        raise InputError(f"{args.out}: {exc}") from exc
    return EXIT_OK


def cmd_verify(args) -> int:
    A = _load(args.a)
    B = _load(args.b) if args.b else A
    try:
        ref = gustavson_serial(A, B)
    except MatrixError as exc:
        raise InputError(str(exc)) from exc
    threads = args.threads or _default_threads()
    failed = False
    for acc, scheme, workers in itertools.product(
            [Accumulator.LL, Accumulator.LP, Accumulator.DENSE], list(Scheme), threads):
        cfg = _config(args, workers).replace(accumulator=acc, scheme=scheme)
        C, _ = multiply(A, B, cfg)
        if _RESULT_HOOK is not None:
            C = _RESULT_HOOK(C)
        res = compare(C, ref)
        label = f"{acc.value:>5} {scheme.value:>4} workers={workers}"
        if res.passed(args.tol):
            print(f"PASS {label} max_rel_error={res.max_rel_error:.3e}")
            continue
        failed = True
        where = res.first_mismatch
        what = res.detail or f"max_rel_error={res.max_rel_error:.3e}"
        print(f"FAIL {label} {what} first mismatch at (row, col) = {where}")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_profile(args) -> int:
    cols = [c for c in args.method_columns.split(",") if c]
    try:
        times = bench.read_times(args.results, cols)
        points = bench.performance_profile(times, args.points)
    except (OSError, bench.ProfileError) as exc:
        raise InputError(f"{args.results}: {exc}") from exc
    try:
        bench.write_profile(_open_out(args.out), points)
    except OSError as exc:
        raise InputError(f"{args.out}: {exc}") from exc
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        M = generate_synthetic(args.kind, args.rows, args.cols or args.rows, args.nnz,
                               args.seed, bandwidth=args.bandwidth)
    except MatrixError as exc:
        raise UsageError(str(exc)) from exc
    try:
        write_matrix_market(args.out, M, comment=(
            f"generated: kind={args.kind} rows={args.rows} cols={args.cols or args.rows} "
            f"nnz_per_row={args.nnz} seed={args.seed}"))
    except OSError as exc:
        raise InputError(f"{args.out}: {exc}") from exc
    return EXIT_OK


def cmd_stats(args) -> int:
    A = _load(args.a)
    B = _load(args.b) if args.b else A
    threads = args.threads or _default_threads()
    try:
        h = symbolic(A, B, _config(args, threads[0]))
    except MatrixError as exc:
        raise InputError(str(exc)) from exc
    report = h.compression
    for key, value in [
        ("m", A.num_rows), ("n", A.num_cols), ("k", B.num_cols),
        ("nnz_a", A.nnz), ("nnz_b", B.nnz),
        ("flops", h.flops.total_flops), ("max_row_flops", h.flops.max_row_flops),
        ("nnz_c", h.nnz_c), ("max_row_size", h.max_row_size),
        ("cf", f"{report.cf:.4f}"), ("cmrf", f"{report.cmrf:.4f}"),
        ("compression_applied", report.applied),
        ("accumulator", h.chosen.accumulator.value), ("scheme", h.chosen.scheme.value),
    ]:
        print(f"{key}={value}")
    return EXIT_OK


COMMANDS = {"bench": cmd_bench, "verify": cmd_verify, "profile": cmd_profile,
            "gen": cmd_gen, "stats": cmd_stats}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"spgemm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"spgemm: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
