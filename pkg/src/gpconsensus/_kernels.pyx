# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernel for the coupled state/weight dynamics.

Mirrors ``_kernels_py.integrate`` loop for loop.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, isfinite

cnp.import_array()


cdef inline double _interp(double v, const double[::1] grid, const double[::1] values) noexcept nogil:
    cdef Py_ssize_t n = grid.shape[0]
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    if v <= grid[0]:
        return values[0]
    if v >= grid[n - 1]:
        return values[n - 1]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if grid[mid] <= v:
            lo = mid
        else:
            hi = mid
    return values[lo] + (values[hi] - values[lo]) * (v - grid[lo]) / (grid[hi] - grid[lo])


cdef void _field(const double[:, ::1] x, const double[::1] w,
                 const unsigned char[::1] edge,
                 const Py_ssize_t[::1] first, const Py_ssize_t[::1] second,
                 const double[:, ::1] A, const double[:, ::1] BK, const double[:, ::1] Ku,
                 int code, Py_ssize_t src, Py_ssize_t tgt, double scale,
                 const double[::1] grid, const double[::1] values,
                 double[:, ::1] s, double[::1] diff,
                 double[:, ::1] dx, double[::1] dw) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], d = x.shape[1], P = w.shape[0], p = Ku.shape[0]
    cdef Py_ssize_t q, i, k, j, r
    cdef double acc, v, wq
    for i in range(N):
        for j in range(d):
            s[i, j] = 0.0
    for q in range(P):
        i = first[q]
        k = second[q]
        for j in range(d):
            diff[j] = x[k, j] - x[i, j]
        acc = 0.0
        for r in range(p):
            v = 0.0
            for j in range(d):
                v = v + Ku[r, j] * diff[j]
            acc = acc + v * v
        dw[q] = acc
        if edge[q]:
            wq = w[q]
            for j in range(d):
                s[i, j] += wq * diff[j]
                s[k, j] -= wq * diff[j]
    for i in range(N):
        for r in range(d):
            v = 0.0
            for j in range(d):
                v = v + A[r, j] * x[i, j]
            for j in range(d):
                v = v + BK[r, j] * s[i, j]
            dx[i, r] = v
        if code == 1:
            dx[i, tgt] += scale * sin(x[i, src])
        elif code == 2:
            dx[i, tgt] += _interp(x[i, src], grid, values)


def integrate(x0, w0, edge, first, second, A, BK, Ku,
              int hook_code, Py_ssize_t hook_src, Py_ssize_t hook_tgt, double hook_scale,
              grid, values, steps):
    cdef double[:, ::1] x = np.array(x0, dtype=np.float64, order="C")
    cdef double[::1] w = np.array(w0, dtype=np.float64)
    cdef Py_ssize_t N = x.shape[0], d = x.shape[1], P = w.shape[0]
    cdef const double[::1] hs = np.ascontiguousarray(steps, dtype=np.float64)
    cdef Py_ssize_t n = hs.shape[0]
    cdef const unsigned char[::1] em = np.ascontiguousarray(edge, dtype=np.uint8)
    cdef const Py_ssize_t[::1] fi = np.ascontiguousarray(first, dtype=np.intp)
    cdef const Py_ssize_t[::1] se = np.ascontiguousarray(second, dtype=np.intp)
    cdef const double[:, ::1] Am = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] BKm = np.ascontiguousarray(BK, dtype=np.float64)
    cdef const double[:, ::1] Kum = np.ascontiguousarray(Ku, dtype=np.float64)
    g_arr = np.ascontiguousarray(grid, dtype=np.float64)
    v_arr = np.ascontiguousarray(values, dtype=np.float64)
    if g_arr.shape[0] == 0:
        g_arr = np.zeros(1)
        v_arr = np.zeros(1)
    cdef const double[::1] gm = g_arr
    cdef const double[::1] vm = v_arr

    X_arr = np.empty((n + 1, N, d))
    W_arr = np.empty((n + 1, P))
    cdef double[:, :, ::1] X = X_arr
    cdef double[:, ::1] W = W_arr

    cdef double[:, ::1] s = np.zeros((N, d))
    cdef double[::1] diff = np.zeros(d)
    cdef double[:, ::1] xt = np.zeros((N, d))
    cdef double[::1] wt = np.zeros(P)
    cdef double[:, ::1] k1x = np.zeros((N, d)), k2x = np.zeros((N, d))
    cdef double[:, ::1] k3x = np.zeros((N, d)), k4x = np.zeros((N, d))
    cdef double[::1] k1w = np.zeros(P), k2w = np.zeros(P), k3w = np.zeros(P), k4w = np.zeros(P)
    cdef Py_ssize_t step, i, j, q
    cdef double h, c
    cdef int fail = -1

    X[0, :, :] = x
    W[0, :] = w
    with nogil:
        for step in range(n):
            h = hs[step]
            _field(x, w, em, fi, se, Am, BKm, Kum, hook_code, hook_src, hook_tgt, hook_scale,
                   gm, vm, s, diff, k1x, k1w)
            for i in range(N):
                for j in range(d):
                    xt[i, j] = x[i, j] + 0.5 * h * k1x[i, j]
            for q in range(P):
                wt[q] = w[q] + 0.5 * h * k1w[q]
            _field(xt, wt, em, fi, se, Am, BKm, Kum, hook_code, hook_src, hook_tgt, hook_scale,
                   gm, vm, s, diff, k2x, k2w)
            for i in range(N):
                for j in range(d):
                    xt[i, j] = x[i, j] + 0.5 * h * k2x[i, j]
            for q in range(P):
                wt[q] = w[q] + 0.5 * h * k2w[q]
            _field(xt, wt, em, fi, se, Am, BKm, Kum, hook_code, hook_src, hook_tgt, hook_scale,
                   gm, vm, s, diff, k3x, k3w)
            for i in range(N):
                for j in range(d):
                    xt[i, j] = x[i, j] + h * k3x[i, j]
            for q in range(P):
                wt[q] = w[q] + h * k3w[q]
            _field(xt, wt, em, fi, se, Am, BKm, Kum, hook_code, hook_src, hook_tgt, hook_scale,
                   gm, vm, s, diff, k4x, k4w)
            c = h / 6.0
            for i in range(N):
                for j in range(d):
                    x[i, j] = x[i, j] + c * (k1x[i, j] + 2.0 * k2x[i, j] + 2.0 * k3x[i, j] + k4x[i, j])
                    if not isfinite(x[i, j]):
                        fail = <int>step
                    X[step + 1, i, j] = x[i, j]
            for q in range(P):
                w[q] = w[q] + c * (k1w[q] + 2.0 * k2w[q] + 2.0 * k3w[q] + k4w[q])
                if not isfinite(w[q]):
                    fail = <int>step
                W[step + 1, q] = w[q]
            if fail >= 0:
                break
    return X_arr, W_arr, fail
