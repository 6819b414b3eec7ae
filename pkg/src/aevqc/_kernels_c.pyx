# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled state-vector kernels.

Every routine works in place on a C-contiguous complex128 array of shape
(rows, 2**n). Qubit 0 is the most significant bit of the basis index.
Rows are independent and may be spread over OpenMP threads; per-row
arithmetic is identical for any thread count.
"""

import numpy as np

from cython.parallel cimport prange

cdef int _threads = 1


def set_num_threads(int n):
    global _threads
    _threads = max(1, n)


def get_num_threads():
    return _threads


def apply_1q(double complex[:, ::1] psi, int n, int q,
             double complex m00, double complex m01,
             double complex m10, double complex m11):
    cdef Py_ssize_t rows = psi.shape[0]
    cdef Py_ssize_t dim = psi.shape[1]
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (n - 1 - q)
    cdef Py_ssize_t nblocks = dim // (2 * stride)
    cdef Py_ssize_t r, blk, j, i0, i1
    # complex products spelled out in reals: avoids the C99 __muldc3 slow path
    cdef double ar, ai, br, bi
    cdef double r00 = m00.real, j00 = m00.imag, r01 = m01.real, j01 = m01.imag
    cdef double r10 = m10.real, j10 = m10.imag, r11 = m11.real, j11 = m11.imag
    cdef double *row
    for r in prange(rows, nogil=True, num_threads=_threads, schedule="static"):
        row = <double *> &psi[r, 0]
        for blk in range(nblocks):
            for j in range(stride):
                i0 = 2 * (blk * 2 * stride + j)
                i1 = i0 + 2 * stride
                ar = row[i0]
                ai = row[i0 + 1]
                br = row[i1]
                bi = row[i1 + 1]
                row[i0] = r00 * ar - j00 * ai + r01 * br - j01 * bi
                row[i0 + 1] = r00 * ai + j00 * ar + r01 * bi + j01 * br
                row[i1] = r10 * ar - j10 * ai + r11 * br - j11 * bi
                row[i1 + 1] = r10 * ai + j10 * ar + r11 * bi + j11 * br


def apply_cnot(double complex[:, ::1] psi, int n, int control, int target):
    cdef Py_ssize_t rows = psi.shape[0]
    cdef Py_ssize_t dim = psi.shape[1]
    cdef Py_ssize_t cmask = (<Py_ssize_t>1) << (n - 1 - control)
    cdef Py_ssize_t tmask = (<Py_ssize_t>1) << (n - 1 - target)
    cdef Py_ssize_t r, i, k
    cdef double complex tmp
    for r in prange(rows, nogil=True, num_threads=_threads, schedule="static"):
        for i in range(dim):
            if (i & cmask) != 0 and (i & tmask) == 0:
                k = i | tmask
                tmp = psi[r, i]
                psi[r, i] = psi[r, k]
                psi[r, k] = tmp


def z_expectations(double complex[:, ::1] psi, int n):
    cdef Py_ssize_t rows = psi.shape[0]
    cdef Py_ssize_t dim = psi.shape[1]
    out = np.zeros((rows, n), dtype=np.float64)
    cdef double[:, ::1] z = out
    cdef Py_ssize_t r, i
    cdef int q
    cdef double p, re, im
    for r in prange(rows, nogil=True, num_threads=_threads, schedule="static"):
        for i in range(dim):
            re = psi[r, i].real
            im = psi[r, i].imag
            p = re * re + im * im
            for q in range(n):
                if (i >> (n - 1 - q)) & 1:
                    z[r, q] = z[r, q] - p
                else:
                    z[r, q] = z[r, q] + p
    return out


def apply_z_weighted(double complex[:, ::1] psi, int n, double[:, ::1] weights):
    """Return rows of (sum_q w[r, q] Z_q) psi[r] as a new array."""
    cdef Py_ssize_t rows = psi.shape[0]
    cdef Py_ssize_t dim = psi.shape[1]
    out = np.empty((rows, dim), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t r, i
    cdef int q
    cdef double s
    for r in prange(rows, nogil=True, num_threads=_threads, schedule="static"):
        for i in range(dim):
            s = 0.0
            for q in range(n):
                if (i >> (n - 1 - q)) & 1:
                    s = s - weights[r, q]
                else:
                    s = s + weights[r, q]
            o[r, i].real = s * psi[r, i].real
            o[r, i].imag = s * psi[r, i].imag
    return out


def re_inner_rows(double complex[:, ::1] a, double complex[:, ::1] b):
    """Re(<a_r|b_r>) per row; a one-row operand is broadcast against the other."""
    cdef Py_ssize_t rows = max(a.shape[0], b.shape[0])
    cdef Py_ssize_t dim = b.shape[1]
    cdef bint a_shared = a.shape[0] == 1
    cdef bint b_shared = b.shape[0] == 1
    out = np.empty(rows, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t r, i, ra, rb
    cdef double acc
    for r in prange(rows, nogil=True, num_threads=_threads, schedule="static"):
        ra = 0 if a_shared else r
        rb = 0 if b_shared else r
        acc = 0.0
        for i in range(dim):
            acc = acc + a[ra, i].real * b[rb, i].real + a[ra, i].imag * b[rb, i].imag
        o[r] = acc
    return out
