"""BM25 score-accumulation kernels.

The compiled Cython kernel is used when available; setting RA_NER_PURE_PYTHON=1
(or a missing build) selects the pure-Python fallback. Both produce identical
float64 results; benchmarks/bench_bm25.py compares their throughput.
"""

import os

from ._bm25_py import accumulate_bm25 as _accumulate_py

if os.environ.get("RA_NER_PURE_PYTHON"):
    accumulate_bm25 = _accumulate_py
    KERNEL_BACKEND = "python"
else:
    try:
        from ._bm25_c import accumulate_bm25  # type: ignore[no-redef]

        KERNEL_BACKEND = "cython"
    except ImportError:
        accumulate_bm25 = _accumulate_py
        KERNEL_BACKEND = "python"

accumulate_bm25_python = _accumulate_py

__all__ = ["accumulate_bm25", "accumulate_bm25_python", "KERNEL_BACKEND"]
