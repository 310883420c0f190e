# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the scoring loops in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def bm25_accumulate(const cnp.int64_t[:] term_ids, const double[:] weights,
                    const cnp.int64_t[:] indptr, const cnp.int64_t[:] post_doc,
                    const double[:] post_tf, const double[:] idf,
                    const double[:] doc_norm, double k1, Py_ssize_t n_docs):
    cdef cnp.ndarray[double, ndim=1] out_arr = np.zeros(n_docs, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef double k1p1 = k1 + 1.0
    cdef double scale, tf
    cdef Py_ssize_t i, j, t, d
    with nogil:
        for i in range(term_ids.shape[0]):
            t = term_ids[i]
            scale = weights[i] * idf[t]
            for j in range(indptr[t], indptr[t + 1]):
                d = post_doc[j]
                tf = post_tf[j]
                out[d] += scale * (tf * k1p1) / (tf + doc_norm[d])
    return out_arr


def set_affinity(const cnp.int64_t[:] cands, const cnp.int64_t[:] indptr,
                 const cnp.int64_t[:] nbr, const double[:] weight,
                 const double[:] s_score):
    cdef Py_ssize_t n = cands.shape[0]
    d2set_arr = np.zeros(n, dtype=np.float64)
    x7_arr = np.zeros(n, dtype=np.float64)
    count_arr = np.zeros(n, dtype=np.int64)
    cdef double[:] d2set = d2set_arr
    cdef double[:] x7 = x7_arr
    cdef cnp.int64_t[:] count = count_arr
    cdef Py_ssize_t i, j, d, m
    cdef double sw, ss, s
    with nogil:
        for i in range(n):
            d = cands[i]
            sw = 0.0
            ss = 0.0
            m = 0
            for j in range(indptr[d], indptr[d + 1]):
                s = s_score[nbr[j]]
                if s == s:
                    sw += weight[j]
                    ss += s
                    m += 1
            if m:
                d2set[i] = sw / m
                x7[i] = ss / m
                count[i] = m
    return d2set_arr, x7_arr, count_arr
