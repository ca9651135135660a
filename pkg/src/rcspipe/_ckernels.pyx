# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled gate and sampling kernels. Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def apply_1q(double complex[::1] amps, int qubit, m):
    cdef double complex m00 = m[0, 0], m01 = m[0, 1], m10 = m[1, 0], m11 = m[1, 1]
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << qubit
    cdef Py_ssize_t size = amps.shape[0]
    cdef Py_ssize_t base, j, i0, i1
    cdef double complex a0, a1
    with nogil:
        base = 0
        while base < size:
            for j in range(stride):
                i0 = base + j
                i1 = i0 + stride
                a0 = amps[i0]
                a1 = amps[i1]
                amps[i0] = m00 * a0 + m01 * a1
                amps[i1] = m10 * a0 + m11 * a1
            base += 2 * stride


def apply_2q(double complex[::1] amps, int q0, int q1, m):
    cdef double complex[4][4] u
    cdef int r, c
    for r in range(4):
        for c in range(4):
            u[r][c] = m[r, c]
    cdef int lo = q0 if q0 < q1 else q1
    cdef int hi = q1 if q0 < q1 else q0
    cdef Py_ssize_t s0 = (<Py_ssize_t>1) << q0
    cdef Py_ssize_t s1 = (<Py_ssize_t>1) << q1
    cdef Py_ssize_t lo_mask = ((<Py_ssize_t>1) << lo) - 1
    cdef Py_ssize_t hi_mask = ((<Py_ssize_t>1) << hi) - 1
    cdef Py_ssize_t quarter = amps.shape[0] >> 2
    cdef Py_ssize_t g, base, idx[4]
    cdef double complex a[4]
    with nogil:
        for g in range(quarter):
            # insert zero bits at positions lo, then hi
            base = ((g & ~lo_mask) << 1) | (g & lo_mask)
            base = ((base & ~hi_mask) << 1) | (base & hi_mask)
            idx[0] = base
            idx[1] = base + s0
            idx[2] = base + s1
            idx[3] = base + s0 + s1
            for c in range(4):
                a[c] = amps[idx[c]]
            for r in range(4):
                amps[idx[r]] = u[r][0] * a[0] + u[r][1] * a[1] + u[r][2] * a[2] + u[r][3] * a[3]


def cumulative(probs):
    cdef const double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    out = np.empty(p.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(p.shape[0]):
            acc = acc + p[i]
            o[i] = acc
    return out


def search_cdf(const double[::1] cdf, const double[::1] uniforms):
    cdef Py_ssize_t n = cdf.shape[0]
    cdef Py_ssize_t shots = uniforms.shape[0]
    out = np.empty(shots, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef double total = cdf[n - 1]
    cdef double t
    cdef Py_ssize_t k, lo, hi, mid, last
    with nogil:
        # first index with cdf == total, i.e. the last outcome with mass
        lo = 0
        hi = n
        while lo < hi:
            mid = (lo + hi) >> 1
            if cdf[mid] < total:
                lo = mid + 1
            else:
                hi = mid
        last = lo
        for k in range(shots):
            t = uniforms[k] * total
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) >> 1
                if cdf[mid] <= t:
                    lo = mid + 1
                else:
                    hi = mid
            o[k] = lo if lo < last else last
    return out
