# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for batched sparse-polynomial evaluation.

These loops dominate the runtime of Monte Carlo volume estimation and of
the nested quadratures in the kernel evaluator, so they are kept free of
Python-object traffic.  The pure-numpy fallback in ``_purepoly`` has the
same signatures.
"""

import numpy as np

from libc.math cimport exp

cimport numpy as cnp

cnp.import_array()

DEF MAXDIM = 8


cdef inline double ipow(double x, long long k) nogil:
    # exponents are small (degree <= ~10); repeated multiply beats pow()
    cdef double r = 1.0
    cdef long long i
    for i in range(k):
        r *= x
    return r


def eval_many(double[::1] coeffs, long long[:, ::1] exps,
              double[:, ::1] pts, double[::1] out):
    """out[p] = sum_t coeffs[t] * prod_i pts[p,i]**exps[t,i]."""
    cdef Py_ssize_t T = coeffs.shape[0]
    cdef Py_ssize_t n = exps.shape[1]
    cdef Py_ssize_t N = pts.shape[0]
    cdef Py_ssize_t p, t, i
    cdef double acc, mono
    if n > MAXDIM:
        raise ValueError("dimension exceeds compiled-backend limit")
    with nogil:
        for p in range(N):
            acc = 0.0
            for t in range(T):
                mono = coeffs[t]
                for i in range(n):
                    mono *= ipow(pts[p, i], exps[t, i])
                acc += mono
            out[p] = acc


def grad_many(double[::1] coeffs, long long[:, ::1] exps,
              double[:, ::1] pts, double[:, ::1] out):
    """out[p,j] = d/dx_j of the polynomial at pts[p]."""
    cdef Py_ssize_t T = coeffs.shape[0]
    cdef Py_ssize_t n = exps.shape[1]
    cdef Py_ssize_t N = pts.shape[0]
    cdef Py_ssize_t p, t, i, j
    cdef double c
    cdef double pw[MAXDIM]
    cdef double pre[MAXDIM]
    cdef double suf[MAXDIM]
    if n > MAXDIM:
        raise ValueError("dimension exceeds compiled-backend limit")
    with nogil:
        for p in range(N):
            for j in range(n):
                out[p, j] = 0.0
            for t in range(T):
                c = coeffs[t]
                for i in range(n):
                    pw[i] = ipow(pts[p, i], exps[t, i])
                pre[0] = 1.0
                for i in range(1, n):
                    pre[i] = pre[i - 1] * pw[i - 1]
                suf[n - 1] = 1.0
                for i in range(n - 2, -1, -1):
                    suf[i] = suf[i + 1] * pw[i + 1]
                for j in range(n):
                    if exps[t, j] > 0:
                        out[p, j] += (c * exps[t, j]
                                      * ipow(pts[p, j], exps[t, j] - 1)
                                      * pre[j] * suf[j])


def j_quad_many(double[::1] coeffs, long long[:, ::1] exps,
                double[:, ::1] v0, double[:, ::1] rho,
                double[:, ::1] etas, double[::1] g0,
                double[::1] nodes, double[::1] wts, double[::1] out):
    """Fused tensor-box quadrature of the centered Laplace integrand.

    out[k] = prod_i rho[k,i] * sum over the tensor grid x of
             w(x) * exp(-[g(v0_k + rho_k*x) - g0_k - eta_k.(rho_k*x)])

    with (nodes, wts) a 1-D rule on [-1, 1].  This is the innermost loop
    of the kernel evaluator; fusing it avoids the large [K, Q^n, n]
    temporaries of the fallback path.
    """
    cdef Py_ssize_t T = coeffs.shape[0]
    cdef Py_ssize_t n = exps.shape[1]
    cdef Py_ssize_t K = v0.shape[0]
    cdef Py_ssize_t Q = nodes.shape[0]
    cdef Py_ssize_t k, q1, q2, q3, t, i
    cdef double acc, mono, f, w1, w2, jac
    cdef double p[3]
    if n > 3:
        raise ValueError("fused quadrature implemented for dim <= 3")
    cdef double emin = -60.0
    with nogil:
        for k in range(K):
            acc = 0.0
            if n == 1:
                for q1 in range(Q):
                    p[0] = v0[k, 0] + rho[k, 0] * nodes[q1]
                    f = -g0[k] - etas[k, 0] * rho[k, 0] * nodes[q1]
                    for t in range(T):
                        mono = coeffs[t]
                        for i in range(1):
                            mono *= ipow(p[i], exps[t, i])
                        f += mono
                    if f < emin:
                        f = emin
                    if f < 700.0:
                        acc += wts[q1] * exp(-f)
            elif n == 2:
                for q1 in range(Q):
                    p[0] = v0[k, 0] + rho[k, 0] * nodes[q1]
                    w1 = wts[q1]
                    for q2 in range(Q):
                        p[1] = v0[k, 1] + rho[k, 1] * nodes[q2]
                        f = (-g0[k] - etas[k, 0] * rho[k, 0] * nodes[q1]
                             - etas[k, 1] * rho[k, 1] * nodes[q2])
                        for t in range(T):
                            mono = coeffs[t]
                            for i in range(2):
                                mono *= ipow(p[i], exps[t, i])
                            f += mono
                        if f < emin:
                            f = emin
                        if f < 700.0:
                            acc += w1 * wts[q2] * exp(-f)
            else:
                for q1 in range(Q):
                    p[0] = v0[k, 0] + rho[k, 0] * nodes[q1]
                    for q2 in range(Q):
                        p[1] = v0[k, 1] + rho[k, 1] * nodes[q2]
                        w2 = wts[q1] * wts[q2]
                        for q3 in range(Q):
                            p[2] = v0[k, 2] + rho[k, 2] * nodes[q3]
                            f = (-g0[k]
                                 - etas[k, 0] * rho[k, 0] * nodes[q1]
                                 - etas[k, 1] * rho[k, 1] * nodes[q2]
                                 - etas[k, 2] * rho[k, 2] * nodes[q3])
                            for t in range(T):
                                mono = coeffs[t]
                                for i in range(3):
                                    mono *= ipow(p[i], exps[t, i])
                                f += mono
                            if f < emin:
                                f = emin
                            if f < 700.0:
                                acc += w2 * wts[q3] * exp(-f)
            jac = 1.0
            for i in range(n):
                jac *= rho[k, i]
            out[k] = jac * acc


def hess_many(double[::1] coeffs, long long[:, ::1] exps,
              double[:, ::1] pts, double[:, :, ::1] out):
    """out[p,j,k] = second partials of the polynomial at pts[p]."""
    cdef Py_ssize_t T = coeffs.shape[0]
    cdef Py_ssize_t n = exps.shape[1]
    cdef Py_ssize_t N = pts.shape[0]
    cdef Py_ssize_t p, t, i, j, k
    cdef double c, djk
    cdef long long ej, ek
    cdef double pw[MAXDIM]
    if n > MAXDIM:
        raise ValueError("dimension exceeds compiled-backend limit")
    with nogil:
        for p in range(N):
            for j in range(n):
                for k in range(n):
                    out[p, j, k] = 0.0
            for t in range(T):
                c = coeffs[t]
                for i in range(n):
                    pw[i] = ipow(pts[p, i], exps[t, i])
                for j in range(n):
                    ej = exps[t, j]
                    if ej == 0:
                        continue
                    # diagonal
                    if ej >= 2:
                        djk = c * ej * (ej - 1) * ipow(pts[p, j], ej - 2)
                        for i in range(n):
                            if i != j:
                                djk *= pw[i]
                        out[p, j, j] += djk
                    # off-diagonal, upper triangle then mirrored
                    for k in range(j + 1, n):
                        ek = exps[t, k]
                        if ek == 0:
                            continue
                        djk = (c * ej * ek
                               * ipow(pts[p, j], ej - 1)
                               * ipow(pts[p, k], ek - 1))
                        for i in range(n):
                            if i != j and i != k:
                                djk *= pw[i]
                        out[p, j, k] += djk
                        out[p, k, j] += djk
