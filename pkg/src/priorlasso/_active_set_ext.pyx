# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled active-set iteration.

Mirrors ``_active_set_py.active_set_kernel`` step for step; the KKT system
is assembled column-major and solved with LAPACK ``dgesv``.
"""

import numpy as np

from libc.math cimport fabs
from scipy.linalg.cython_lapack cimport dgesv

cdef enum:
    OPTIMAL = 0
    ITERATION_LIMIT = 1
    SINGULAR = 2

cdef double PARALLEL_TOL = 1e-12


def active_set_kernel(const double[:, ::1] G, const double[::1] c,
                      const double[:, ::1] A, const double[::1] b,
                      const double[:, ::1] E, const double[::1] e,
                      x0, working0, int max_iter, double step_tol, double dual_tol):
    cdef int d = G.shape[0]
    cdef int m = A.shape[0]
    cdef int q = E.shape[0]
    cdef int nmax = d + q + m
    cdef int i, j, r, it, k, n, nrhs = 1, info = 0, lda, block, wsize, argmin_w
    cdef double acc, pmax, xmax, alpha, ratio, slack, thresh, lam_min

    x_arr = np.array(x0, dtype=np.float64, copy=True)
    working_arr = np.array(working0, dtype=np.int8, copy=True)
    lam_arr = np.zeros(m)
    nu_arr = np.zeros(q)
    cdef double[::1] x = x_arr
    cdef signed char[::1] working = working_arr
    cdef double[::1] lam = lam_arr
    cdef double[::1] nu = nu_arr

    cdef double[::1] K = np.empty(max(nmax * nmax, 1))
    cdef double[::1] rhs = np.empty(max(nmax, 1))
    cdef int[::1] ipiv = np.empty(max(nmax, 1), dtype=np.intc)
    cdef int[::1] wlist = np.empty(max(m, 1), dtype=np.intc)
    cdef double[::1] rowabs = np.empty(max(m, 1))
    cdef bint at_minimizer = False
    # the row just dropped has A p < 0 in exact arithmetic; rounding must not re-add it
    cdef Py_ssize_t dropped = -1
    # after a zero-length step use the lowest-index negative multiplier (Bland) to avoid cycling
    cdef bint degenerate = False

    for i in range(m):
        acc = 0.0
        for j in range(d):
            acc += fabs(A[i, j])
        rowabs[i] = acc

    for it in range(max_iter):
        wsize = 0
        for i in range(m):
            if working[i]:
                wlist[wsize] = i
                wsize += 1
        k = q + wsize
        n = d + k
        lda = n

        # column-major KKT: K[r + col * lda]
        for j in range(n):
            for i in range(n):
                K[i + j * lda] = 0.0
        for i in range(d):
            for j in range(d):
                K[i + j * lda] = G[i, j]
        for r in range(q):
            for j in range(d):
                K[(d + r) + j * lda] = E[r, j]
                K[j + (d + r) * lda] = E[r, j]
        for r in range(wsize):
            for j in range(d):
                K[(d + q + r) + j * lda] = A[wlist[r], j]
                K[j + (d + q + r) * lda] = A[wlist[r], j]
        for i in range(d):
            acc = c[i]
            for j in range(d):
                acc += G[i, j] * x[j]
            rhs[i] = -acc
        for i in range(d, n):
            rhs[i] = 0.0

        dgesv(&n, &nrhs, &K[0], &lda, &ipiv[0], &rhs[0], &n, &info)
        if info != 0:
            return x_arr, lam_arr, nu_arr, working_arr, it, SINGULAR

        pmax = 0.0
        xmax = 0.0
        for i in range(d):
            if fabs(rhs[i]) > pmax:
                pmax = fabs(rhs[i])
            if fabs(x[i]) > xmax:
                xmax = fabs(x[i])

        if at_minimizer or pmax <= step_tol * (1.0 + xmax):
            at_minimizer = False
            if wsize == 0:
                lam_min = 0.0
                argmin_w = -1
            else:
                lam_min = rhs[d + q]
                argmin_w = 0
                for r in range(1, wsize):
                    if rhs[d + q + r] < lam_min:
                        lam_min = rhs[d + q + r]
                        argmin_w = r
            if wsize == 0 or lam_min >= -dual_tol:
                for i in range(m):
                    lam[i] = 0.0
                for r in range(wsize):
                    lam[wlist[r]] = rhs[d + q + r]
                for r in range(q):
                    nu[r] = rhs[d + r]
                return x_arr, lam_arr, nu_arr, working_arr, it + 1, OPTIMAL
            if degenerate:
                for r in range(wsize):
                    if rhs[d + q + r] < -dual_tol:
                        argmin_w = r
                        break
            dropped = wlist[argmin_w]
            working[dropped] = 0
            continue

        alpha = 1.0
        block = -1
        for i in range(m):
            if working[i] or i == dropped:
                continue
            acc = 0.0
            for j in range(d):
                acc += A[i, j] * rhs[j]
            thresh = PARALLEL_TOL * rowabs[i] * pmax
            if acc > thresh:
                slack = b[i]
                for j in range(d):
                    slack -= A[i, j] * x[j]
                if slack < 0.0:
                    slack = 0.0
                ratio = slack / acc
                if ratio < alpha:
                    alpha = ratio
                    block = i
        dropped = -1
        degenerate = alpha == 0.0
        for i in range(d):
            x[i] += alpha * rhs[i]
        if block >= 0:
            working[block] = 1
        else:
            at_minimizer = True

    return x_arr, lam_arr, nu_arr, working_arr, max_iter, ITERATION_LIMIT
