# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused CSR diffusion iteration: matvec + source add + max-delta per pass."""

import numpy as np

from libc.math cimport fabs, INFINITY


def csr_diffuse(
    long long[::1] indptr,
    long long[::1] indices,
    double[::1] data,
    z_init,
    double[:, ::1] source,
    int max_iters,
    double tolerance,
):
    """Iterate ``z <- A @ z + source`` until the max entry change < tolerance.

    Returns ``(z_final, iterations_run, last_delta)``.
    """
    buf_a = np.array(z_init, dtype=np.float64, order="C")
    buf_b = np.empty_like(buf_a)

    cdef double[:, ::1] view_a = buf_a
    cdef double[:, ::1] view_b = buf_b
    cdef double[:, ::1] cur = view_a
    cdef double[:, ::1] nxt = view_b
    cdef double[:, ::1] tmp

    cdef Py_ssize_t n = view_a.shape[0]
    cdef Py_ssize_t cols = view_a.shape[1]
    cdef Py_ssize_t i, c
    cdef long long p, j
    cdef double w, diff, delta
    cdef int iteration = 0
    cdef double last_delta = INFINITY

    with nogil:
        while iteration < max_iters:
            iteration += 1
            delta = 0.0
            for i in range(n):
                for c in range(cols):
                    nxt[i, c] = source[i, c]
                for p in range(indptr[i], indptr[i + 1]):
                    j = indices[p]
                    w = data[p]
                    for c in range(cols):
                        nxt[i, c] += w * cur[j, c]
                for c in range(cols):
                    diff = fabs(nxt[i, c] - cur[i, c])
                    if diff > delta:
                        delta = diff
            tmp = cur
            cur = nxt
            nxt = tmp
            last_delta = delta
            if delta < tolerance:
                break

    result = buf_a if iteration % 2 == 0 else buf_b
    return result, iteration, last_delta
