# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for state-recursion simulation.

Contracts match ``_kernels_py``; see there for shapes.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def switched_states(double[:, :, ::1] A, double[:, :, ::1] K,
                    long long[::1] idx, double[:, ::1] noise,
                    double[::1] x0):
    cdef Py_ssize_t S = idx.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t m = K.shape[2]
    out = np.empty((S + 1, n))
    cdef double[:, ::1] X = out
    cdef double[::1] cur = np.array(x0, dtype=np.float64)
    cdef double[::1] nxt = np.empty(n)
    cdef Py_ssize_t t, i, j, k
    cdef double acc
    for i in range(n):
        X[0, i] = cur[i]
    for t in range(S):
        k = <Py_ssize_t> idx[t]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[k, i, j] * cur[j]
            for j in range(m):
                acc += K[k, i, j] * noise[t, j]
            nxt[i] = acc
        for i in range(n):
            cur[i] = nxt[i]
            X[t + 1, i] = cur[i]
    return out


def blend_states(double[:, :, ::1] A, double[:, :, ::1] K,
                 double[:, ::1] U, double[:, ::1] noise,
                 double[::1] x0):
    cdef Py_ssize_t S = U.shape[0]
    cdef Py_ssize_t L = U.shape[1]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t m = K.shape[2]
    out = np.empty((S + 1, n))
    cdef double[:, ::1] X = out
    cdef double[::1] cur = np.array(x0, dtype=np.float64)
    cdef double[::1] nxt = np.empty(n)
    cdef Py_ssize_t t, i, j, k
    cdef double acc, u
    for i in range(n):
        X[0, i] = cur[i]
    for t in range(S):
        for i in range(n):
            nxt[i] = 0.0
        for k in range(L):
            u = U[t, k]
            if u == 0.0:
                continue
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += A[k, i, j] * cur[j]
                for j in range(m):
                    acc += K[k, i, j] * noise[t, j]
                nxt[i] += u * acc
        for i in range(n):
            cur[i] = nxt[i]
            X[t + 1, i] = cur[i]
    return out
