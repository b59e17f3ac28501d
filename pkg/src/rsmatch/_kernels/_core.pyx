# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_fallback.py`` for the reference semantics.

Built with ``-ffp-contract=off`` so no multiply-add gets fused and results
match the numpy fallback bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

# must equal _fallback.EDGE_SNAP
cdef double EDGE_SNAP = 1e-9


cdef extern from *:
    """
    #if defined(_MSC_VER)
    #include <intrin.h>
    static inline int rsm_popcount64(unsigned long long x) { return (int)__popcnt64(x); }
    #else
    static inline int rsm_popcount64(unsigned long long x) { return __builtin_popcountll(x); }
    #endif
    """
    int rsm_popcount64(unsigned long long x) nogil


cdef inline double _clamp(double x) noexcept nogil:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


def cosine_matrix(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t p, r, k, d = av.shape[1]
    out = np.empty((av.shape[0], bv.shape[0]))
    cdef double[:, ::1] ov = out
    cdef double acc, diff
    with nogil:
        for p in range(av.shape[0]):
            for r in range(bv.shape[0]):
                acc = 0.0
                for k in range(d):
                    diff = av[p, k] - bv[r, k]
                    acc = acc + diff * diff
                ov[p, r] = _clamp(acc * 0.25)
    return out


def euclidean_matrix(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t p, r, k, d = av.shape[1]
    out = np.empty((av.shape[0], bv.shape[0]))
    cdef double[:, ::1] ov = out
    cdef double acc, diff
    with nogil:
        for p in range(av.shape[0]):
            for r in range(bv.shape[0]):
                acc = 0.0
                for k in range(d):
                    diff = av[p, k] - bv[r, k]
                    acc = acc + diff * diff
                ov[p, r] = _clamp(sqrt(acc) * 0.5)
    return out


def hamming_matrix(a, b, nbits):
    cdef const uint64_t[:, ::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef const uint64_t[:, ::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t p, r, w, nw = av.shape[1]
    cdef double denom = <double>nbits
    cdef int64_t count
    out = np.empty((av.shape[0], bv.shape[0]))
    cdef double[:, ::1] ov = out
    with nogil:
        for p in range(av.shape[0]):
            for r in range(bv.shape[0]):
                count = 0
                for w in range(nw):
                    count += rsm_popcount64(av[p, w] ^ bv[r, w])
                ov[p, r] = _clamp(<double>count / denom)
    return out


def cosine_pairs(x, left, right):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const int64_t[::1] lv = np.ascontiguousarray(left, dtype=np.int64)
    cdef const int64_t[::1] rv = np.ascontiguousarray(right, dtype=np.int64)
    cdef Py_ssize_t n = lv.shape[0], t, k, d = xv.shape[1]
    cdef int64_t i, j
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double acc, diff
    with nogil:
        for t in range(n):
            i = lv[t]
            j = rv[t]
            acc = 0.0
            for k in range(d):
                diff = xv[i, k] - xv[j, k]
                acc = acc + diff * diff
            ov[t] = _clamp(acc * 0.25)
    return out


def euclidean_pairs(x, left, right):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const int64_t[::1] lv = np.ascontiguousarray(left, dtype=np.int64)
    cdef const int64_t[::1] rv = np.ascontiguousarray(right, dtype=np.int64)
    cdef Py_ssize_t n = lv.shape[0], t, k, d = xv.shape[1]
    cdef int64_t i, j
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double acc, diff
    with nogil:
        for t in range(n):
            i = lv[t]
            j = rv[t]
            acc = 0.0
            for k in range(d):
                diff = xv[i, k] - xv[j, k]
                acc = acc + diff * diff
            ov[t] = _clamp(sqrt(acc) * 0.5)
    return out


def hamming_pairs(words, left, right, nbits):
    cdef const uint64_t[:, ::1] wv = np.ascontiguousarray(words, dtype=np.uint64)
    cdef const int64_t[::1] lv = np.ascontiguousarray(left, dtype=np.int64)
    cdef const int64_t[::1] rv = np.ascontiguousarray(right, dtype=np.int64)
    cdef Py_ssize_t n = lv.shape[0], t, w, nw = wv.shape[1]
    cdef int64_t i, j, count
    cdef double denom = <double>nbits
    out = np.empty(n)
    cdef double[::1] ov = out
    with nogil:
        for t in range(n):
            i = lv[t]
            j = rv[t]
            count = 0
            for w in range(nw):
                count += rsm_popcount64(wv[i, w] ^ wv[j, w])
            ov[t] = _clamp(<double>count / denom)
    return out


def rsm_pairs(table, ref_idx, direct, left, right, double alpha):
    cdef const double[:, ::1] tv = np.ascontiguousarray(table, dtype=np.float64)
    cdef const int64_t[::1] kv = np.ascontiguousarray(ref_idx, dtype=np.int64)
    cdef const double[::1] dv = np.ascontiguousarray(direct, dtype=np.float64)
    cdef const int64_t[::1] lv = np.ascontiguousarray(left, dtype=np.int64)
    cdef const int64_t[::1] rv = np.ascontiguousarray(right, dtype=np.int64)
    cdef Py_ssize_t n = lv.shape[0], t, k, m = kv.shape[0]
    cdef int64_t i, j, used
    cdef double acc, rel, diff
    value = np.empty(n)
    relative = np.empty(n)
    m_used = np.empty(n, dtype=np.int64)
    cdef double[::1] vv = value
    cdef double[::1] relv = relative
    cdef int64_t[::1] uv = m_used
    cdef double nan = float("nan")
    with nogil:
        for t in range(n):
            i = lv[t]
            j = rv[t]
            acc = 0.0
            used = 0
            for k in range(m):
                if kv[k] == i or kv[k] == j:
                    continue
                diff = tv[i, k] - tv[j, k]
                if diff < 0.0:
                    diff = -diff
                acc = acc + diff
                used += 1
            uv[t] = used
            if used == 0:
                relv[t] = nan
                vv[t] = nan
            else:
                rel = acc / <double>used
                relv[t] = rel
                vv[t] = rel + alpha * dv[t]
    return value, relative, m_used


def hist_add(scores, double lo, double width, cnp.ndarray counts):
    cdef const double[::1] sv = np.ascontiguousarray(scores, dtype=np.float64)
    cdef int64_t[::1] cv = counts
    cdef Py_ssize_t n = sv.shape[0], t
    cdef int64_t nbins = cv.shape[0], k
    cdef double q
    with nogil:
        for t in range(n):
            q = floor((sv[t] - lo) / width + EDGE_SNAP)
            if q < 0:
                k = 0
            elif q > nbins - 1:
                k = nbins - 1
            else:
                k = <int64_t>q
            cv[k] += 1
    return counts
