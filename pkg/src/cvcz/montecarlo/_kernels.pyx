# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled shot kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

NAME = "cython"

ctypedef cnp.float64_t f64


def propagate(const f64[:, ::1] z, const f64[::1] offset, const f64[:, ::1] inject,
              const f64[:, ::1] prep, const f64[:, ::1] post, const f64[:, ::1] bell,
              const f64[:, ::1] select, const f64[:, ::1] feedforward,
              const f64[:, ::1] out_noise):
    cdef Py_ssize_t n = z.shape[0], K = z.shape[1], D = offset.shape[0]
    cdef Py_ssize_t M = bell.shape[0], Q = select.shape[0]
    cdef Py_ssize_t i, a, b
    cdef f64 acc
    y_arr = np.empty((n, D))
    t_arr = np.empty((n, M))
    o_arr = np.empty((n, Q))
    cdef f64[:, ::1] y = y_arr
    cdef f64[:, ::1] t = t_arr
    cdef f64[:, ::1] o = o_arr
    cdef f64[::1] y0 = np.empty(D)
    with nogil:
        for i in range(n):
            for a in range(D):
                acc = offset[a]
                for b in range(K):
                    acc = acc + inject[a, b] * z[i, b]
                y0[a] = acc
            for a in range(D):
                acc = 0.0
                for b in range(D):
                    acc = acc + prep[a, b] * y0[b]
                for b in range(K):
                    acc = acc + post[a, b] * z[i, b]
                y[i, a] = acc
            for a in range(M):
                acc = 0.0
                for b in range(D):
                    acc = acc + bell[a, b] * y[i, b]
                t[i, a] = acc
            for a in range(Q):
                acc = 0.0
                for b in range(D):
                    acc = acc + select[a, b] * y[i, b]
                for b in range(M):
                    acc = acc + feedforward[a, b] * t[i, b]
                for b in range(K):
                    acc = acc + out_noise[a, b] * z[i, b]
                o[i, a] = acc
    return y_arr, t_arr, o_arr


def moments(const f64[:, ::1] series):
    cdef Py_ssize_t n = series.shape[0], Q = series.shape[1]
    cdef Py_ssize_t i, a, b
    mean_arr = np.zeros(Q)
    com_arr = np.zeros((Q, Q))
    cdef f64[::1] mean = mean_arr
    cdef f64[:, ::1] com = com_arr
    cdef f64[::1] d = np.empty(Q)
    with nogil:
        for i in range(n):
            for a in range(Q):
                mean[a] += series[i, a]
        for a in range(Q):
            mean[a] /= n
        for i in range(n):
            for a in range(Q):
                d[a] = series[i, a] - mean[a]
            for a in range(Q):
                for b in range(a, Q):
                    com[a, b] += d[a] * d[b]
        for a in range(Q):
            for b in range(a + 1, Q):
                com[b, a] = com[a, b]
    return mean_arr, com_arr


def shot_statistics(const f64[:, ::1] z, const f64[:, ::1] weights, const f64[::1] bias,
                    const f64[::1] gains):
    cdef Py_ssize_t n = z.shape[0], K = z.shape[1], G = gains.shape[0]
    cdef Py_ssize_t Q = 4 + 2 * G
    cdef Py_ssize_t i, a, b
    cdef f64 acc
    series_arr = np.empty((n, Q))
    cdef f64[:, ::1] s = series_arr
    with nogil:
        for i in range(n):
            for a in range(4):
                acc = bias[a]
                for b in range(K):
                    acc = acc + weights[a, b] * z[i, b]
                s[i, a] = acc
            for a in range(G):
                s[i, 4 + 2 * a] = gains[a] * s[i, 1] - s[i, 2]
                s[i, 5 + 2 * a] = gains[a] * s[i, 3] - s[i, 0]
    return moments(series_arr)
