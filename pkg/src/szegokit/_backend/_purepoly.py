"""Pure-numpy fallback for the compiled polynomial kernels.

Same contracts as ``_fastpoly``; used when the extension is not built.
Broadcasting keeps it vectorized, but the compiled backend avoids the
temporaries and is several times faster on the hot loops (see
``benchmarks/bench_backends.py``).
"""

import numpy as np


def eval_many(coeffs, exps, pts, out):
    N = pts.shape[0]
    acc = np.zeros(N)
    for t in range(coeffs.shape[0]):
        mono = np.full(N, coeffs[t])
        for i in range(exps.shape[1]):
            e = exps[t, i]
            if e:
                mono *= pts[:, i] ** e
        acc += mono
    out[:] = acc


def grad_many(coeffs, exps, pts, out):
    N, n = pts.shape
    out[:] = 0.0
    for t in range(coeffs.shape[0]):
        for j in range(n):
            ej = exps[t, j]
            if ej == 0:
                continue
            mono = np.full(N, coeffs[t] * ej)
            for i in range(n):
                e = exps[t, i] - (i == j)
                if e:
                    mono *= pts[:, i] ** e
            out[:, j] += mono


def j_quad_many(coeffs, exps, v0, rho, etas, g0, nodes, wts, out):
    K, n = v0.shape
    q = nodes.shape[0]
    mesh = np.meshgrid(*([nodes] * n), indexing="ij")
    std = np.stack([m.ravel() for m in mesh], axis=-1)  # [Q^n, n]
    wprod = wts
    for _ in range(n - 1):
        wprod = np.multiply.outer(wprod, wts)
    wflat = wprod.ravel()
    w_pts = rho[:, None, :] * std[None, :, :]
    pts = (v0[:, None, :] + w_pts).reshape(-1, n)
    gv = np.empty(pts.shape[0])
    eval_many(coeffs, exps, pts, gv)
    f = gv.reshape(K, -1) - g0[:, None] - np.einsum("ki,kqi->kq", etas, w_pts)
    vals = np.where(f < 700.0, np.exp(-np.clip(f, -60.0, 700.0)), 0.0)
    out[:] = np.prod(rho, axis=1) * (vals @ wflat)


def hess_many(coeffs, exps, pts, out):
    N, n = pts.shape
    out[:] = 0.0
    for t in range(coeffs.shape[0]):
        for j in range(n):
            ej = exps[t, j]
            if ej == 0:
                continue
            for k in range(j, n):
                ek = exps[t, k]
                if j == k:
                    if ej < 2:
                        continue
                    fac = coeffs[t] * ej * (ej - 1)
                elif ek == 0:
                    continue
                else:
                    fac = coeffs[t] * ej * ek
                mono = np.full(N, fac)
                for i in range(n):
                    e = exps[t, i] - (i == j) - (i == k)
                    if e:
                        mono *= pts[:, i] ** e
                out[:, j, k] += mono
                if j != k:
                    out[:, k, j] += mono
