"""Multi-threaded two-phase sparse matrix-matrix multiplication."""

from .accumulators import DenseAccumulator, InsertStatus, LlHashmap, LpHashmap
from .compression import CompressedGraph, CompressionReport, compress_rows, decide_compression
from .engine import (
    Accumulator, KernelError, Phase, ReuseError, Scheme, SpgemmConfig, SpgemmHandle, multiply,
    numeric, resolve_config, symbolic, triple_product,
)
from .matrix import (
    CsrMatrix, FlopsStats, MatrixError, build_csr, flops_stats, from_dense, generate_synthetic,
    identity, transpose,
)
from .mempool import MemoryPool, PoolMode, size_pool
from .mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from .oracle import compare, dense_triple_loop, gustavson_serial

__all__ = [
    "Accumulator", "CompressedGraph", "CompressionReport", "CsrMatrix", "DenseAccumulator",
    "FlopsStats", "InsertStatus", "KernelError", "LlHashmap", "LpHashmap", "MatrixError",
    "MatrixMarketError", "MemoryPool", "Phase", "PoolMode", "ReuseError", "Scheme",
    "SpgemmConfig", "SpgemmHandle", "build_csr", "compare", "compress_rows",
    "decide_compression", "dense_triple_loop", "flops_stats", "from_dense",
    "generate_synthetic", "gustavson_serial", "identity", "multiply", "numeric",
    "read_matrix_market", "resolve_config", "size_pool", "symbolic", "transpose",
    "triple_product", "write_matrix_market",
]
