# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled BM25 accumulation kernel. Must stay bit-identical to _bm25_py."""

import numpy as np

cimport numpy as cnp


def accumulate_bm25(
    cnp.float64_t[::1] scores,
    const cnp.int32_t[::1] unit_ids,
    const cnp.float64_t[::1] tfs,
    const cnp.float64_t[::1] lengths,
    double idf,
    double k1,
    double b,
    double avgdl,
):
    cdef Py_ssize_t i, n = unit_ids.shape[0]
    cdef cnp.int32_t u
    cdef double tf, denom
    for i in range(n):
        u = unit_ids[i]
        tf = tfs[i]
        denom = tf + k1 * (1.0 - b + b * lengths[u] / avgdl)
        scores[u] += idf * ((tf * (k1 + 1.0)) / denom)
