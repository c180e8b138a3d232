# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot inner-loop kernels.

Signature-compatible with the pure-numpy fallback in ``_inner_loops_py``;
see that module for the full contracts.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def ista_quadratic(double[:, ::1] gram, double[::1] lin, double n_scale,
                   double l1_weight, double l2_weight, double[::1] phi0,
                   double step, int budget, double tol):
    cdef int p = phi0.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phi_arr = np.array(phi0, dtype=np.float64, copy=True)
    cdef double[::1] phi = phi_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(p, dtype=np.float64)
    cdef double[::1] nxt = work
    cdef int it, i, j, iterations = 0
    cdef bint converged = False
    cdef double thr = step * l1_weight
    cdef double g, v, d, step_sq, phi_sq

    for it in range(budget):
        iterations += 1
        step_sq = 0.0
        phi_sq = 0.0
        for i in range(p):
            g = lin[i]
            for j in range(p):
                g += gram[i, j] * phi[j]
            g = 2.0 * n_scale * g + 2.0 * l2_weight * phi[i]
            v = phi[i] - step * g
            if l1_weight != 0.0:
                if v > thr:
                    v -= thr
                elif v < -thr:
                    v += thr
                else:
                    v = 0.0
            nxt[i] = v
        for i in range(p):
            d = nxt[i] - phi[i]
            step_sq += d * d
            phi[i] = nxt[i]
            phi_sq += phi[i] * phi[i]
        if sqrt(step_sq) <= tol * (1.0 + sqrt(phi_sq)):
            converged = True
            break
    return phi_arr, iterations, converged


def subgrad_composite(double[:, ::1] a, double[::1] q, double n_scale,
                      double l1_weight, double l2_weight, double[::1] phi0,
                      double scale, int budget, long t0):
    cdef int m = a.shape[0]
    cdef int p = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phi_arr = np.array(phi0, dtype=np.float64, copy=True)
    cdef double[::1] phi = phi_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_arr = phi_arr.copy()
    cdef double[::1] best = best_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gbuf = np.empty(p, dtype=np.float64)
    cdef double[::1] g = gbuf
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sbuf = np.empty(m, dtype=np.float64)
    cdef double[::1] sgn = sbuf
    cdef double best_obj = np.inf
    cdef int it, i, j, iterations = 0
    cdef double r, obj, gnorm, stp

    for it in range(1, budget + 1):
        iterations = it
        obj = 0.0
        for i in range(m):
            r = q[i]
            for j in range(p):
                r += a[i, j] * phi[j]
            obj += fabs(r)
            sgn[i] = 0.0 if r == 0.0 else (1.0 if r > 0.0 else -1.0)
        obj *= n_scale
        for j in range(p):
            obj += l2_weight * phi[j] * phi[j] + l1_weight * fabs(phi[j])
        if obj < best_obj:
            best_obj = obj
            for j in range(p):
                best[j] = phi[j]
        gnorm = 0.0
        for j in range(p):
            r = 0.0
            for i in range(m):
                r += a[i, j] * sgn[i]
            r = n_scale * r + 2.0 * l2_weight * phi[j]
            if l1_weight != 0.0:
                if phi[j] > 0.0:
                    r += l1_weight
                elif phi[j] < 0.0:
                    r -= l1_weight
            g[j] = r
            gnorm += r * r
        gnorm = sqrt(gnorm)
        if gnorm <= 1e-300:
            for j in range(p):
                best[j] = phi[j]
            break
        stp = scale / sqrt(<double>(t0 + it)) / gnorm
        for j in range(p):
            phi[j] -= stp * g[j]
    else:
        obj = 0.0
        for i in range(m):
            r = q[i]
            for j in range(p):
                r += a[i, j] * phi[j]
            obj += fabs(r)
        obj *= n_scale
        for j in range(p):
            obj += l2_weight * phi[j] * phi[j] + l1_weight * fabs(phi[j])
        if obj < best_obj:
            for j in range(p):
                best[j] = phi[j]
    return best_arr, iterations
