# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython twin of the reference exhaustive-enumeration kernel.

Same contract as ``_ref.exhaustive_argmin``; the mask loop runs in C so
labeling large instance batches does not pay the numpy broadcast cost of
materialising the full (n_inst, 2^N) cost matrix.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def exhaustive_argmin(
    cnp.ndarray[cnp.float64_t, ndim=2] local,
    cnp.ndarray[cnp.float64_t, ndim=2] off_base,
    cnp.ndarray[cnp.float64_t, ndim=2] sqrt_cycles,
    cnp.ndarray[cnp.float64_t, ndim=1] wt_over_f,
):
    cdef Py_ssize_t n_inst = local.shape[0]
    cdef int n = <int> local.shape[1]
    cdef unsigned int n_masks = 1u << n
    cdef cnp.ndarray[cnp.int64_t, ndim=1] best_mask = np.empty(n_inst, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_cost = np.empty(n_inst, dtype=np.float64)

    cdef Py_ssize_t k
    cdef unsigned int m, bit
    cdef int i
    cdef double base, s, cost, best, wt
    cdef long arg

    for k in range(n_inst):
        wt = wt_over_f[k]
        best = np.inf
        arg = 0
        for m in range(n_masks):
            base = 0.0
            s = 0.0
            for i in range(n):
                bit = (m >> (n - 1 - i)) & 1u
                if bit:
                    base += off_base[k, i]
                    s += sqrt_cycles[k, i]
                else:
                    base += local[k, i]
            cost = base + wt * s * s
            if cost < best:
                best = cost
                arg = <long> m
        best_mask[k] = arg
        best_cost[k] = best
    return best_mask, best_cost
