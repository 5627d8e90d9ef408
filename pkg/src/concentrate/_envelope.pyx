# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled min-plus convolution with a convex kernel.

For every line ``f`` and output index ``i`` computes

    out[i] = min_j f[j] + c[i - j + n - 1]

where ``c`` holds the kernel sampled at integer offsets ``-(n-1) .. n-1``.
Convexity of the kernel makes the leftmost minimizer nondecreasing in ``i``
(Monge property), so rows are solved by divide and conquer over the
admissible column window, ``O(n log n)`` per line.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef void _solve(const double* f, const double* c, Py_ssize_t n,
                 double* out, cnp.int64_t* arg,
                 Py_ssize_t ilo, Py_ssize_t ihi,
                 Py_ssize_t jlo, Py_ssize_t jhi) noexcept nogil:
    cdef Py_ssize_t mid, j, best_j
    cdef double v, best
    while ilo <= ihi:
        mid = (ilo + ihi) >> 1
        best_j = jlo
        best = f[jlo] + c[mid - jlo + n - 1]
        for j in range(jlo + 1, jhi + 1):
            v = f[j] + c[mid - j + n - 1]
            if v < best:
                best = v
                best_j = j
        out[mid] = best
        arg[mid] = best_j
        # left half recursively, right half by iteration
        _solve(f, c, n, out, arg, ilo, mid - 1, jlo, best_j)
        ilo = mid + 1
        jlo = best_j


def lower_envelope(const double[:, ::1] f, const double[::1] c):
    """Row-wise min-plus convolution of ``f`` (lines x n) with kernel ``c``."""
    cdef Py_ssize_t lines = f.shape[0]
    cdef Py_ssize_t n = f.shape[1]
    if c.shape[0] != 2 * n - 1:
        raise ValueError("kernel table must have length 2*n - 1")
    out_arr = np.empty((lines, n), dtype=np.float64)
    arg_arr = np.empty((lines, n), dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef cnp.int64_t[:, ::1] arg = arg_arr
    cdef Py_ssize_t r
    with nogil:
        for r in range(lines):
            _solve(&f[r, 0], &c[0], n, &out[r, 0], &arg[r, 0], 0, n - 1, 0, n - 1)
    return out_arr, arg_arr
