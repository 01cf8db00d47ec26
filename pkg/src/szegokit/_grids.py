"""Quadrature grids, direction sets, and sequence acceleration helpers."""

from __future__ import annotations

import functools

import numpy as np


@functools.lru_cache(maxsize=64)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def panel_rule(a: float, b: float, npanels: int, order: int):
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    x0, w0 = _leggauss(order)
    edges = np.linspace(a, b, npanels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    weights = (half[:, None] * w0[None, :]).ravel()
    return nodes, weights


def edges_rule(edges: np.ndarray, order: int):
    """Gauss-Legendre nodes/weights on panels with the given edges."""
    x0, w0 = _leggauss(order)
    edges = np.asarray(edges, dtype=np.float64)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    weights = (half[:, None] * w0[None, :]).ravel()
    return nodes, weights


def chebyshev_nodes(a: float, b: float, k: int) -> np.ndarray:
    """Chebyshev points of the second kind on [a, b], ascending."""
    i = np.arange(k)
    x = np.cos(np.pi * i / (k - 1))[::-1]
    return (a + b) / 2.0 + (b - a) / 2.0 * x


def barycentric_matrix(nodes: np.ndarray, evalpts: np.ndarray) -> np.ndarray:
    """Matrix B with B @ f(nodes) = interpolant values at evalpts.

    Uses the closed-form Chebyshev(2nd kind) barycentric weights
    (+-1 alternating, halved at the ends), valid for nodes from
    ``chebyshev_nodes``.
    """
    k = len(nodes)
    wts = np.ones(k)
    wts[1::2] = -1.0
    wts[0] /= 2.0
    wts[-1] /= 2.0
    diff = evalpts[:, None] - nodes[None, :]
    exact_rows, exact_cols = np.nonzero(diff == 0.0)
    diff[exact_rows, :] = 1.0  # placeholder, overwritten below
    ratio = wts[None, :] / diff
    bmat = ratio / ratio.sum(axis=1, keepdims=True)
    for r, c in zip(exact_rows, exact_cols):
        bmat[r, :] = 0.0
        bmat[r, c] = 1.0
    return bmat


def circle_directions(k: int) -> np.ndarray:
    """k unit vectors in R^2 in antipodal pairs, deterministic."""
    half = max(1, k // 2)
    ang = np.pi * (np.arange(half) + 0.5) / half
    u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return np.vstack([u, -u])


def sphere_directions(k: int) -> np.ndarray:
    """k unit vectors in R^3 in antipodal pairs (Fibonacci hemisphere)."""
    half = max(1, k // 2)
    i = np.arange(half) + 0.5
    phi = np.pi * (1.0 + 5.0**0.5) * i
    z = i / half  # upper hemisphere only; antipodes added below
    r = np.sqrt(np.clip(1.0 - z**2, 0.0, None))
    u = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return np.vstack([u, -u])


def directions(dim: int, k: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        return circle_directions(k)
    if dim == 3:
        return sphere_directions(k)
    raise ValueError("direction sets implemented for dim <= 3")


def unit_ball_volume(n: int) -> float:
    from math import gamma, pi

    return pi ** (n / 2) / gamma(n / 2 + 1)


def wynn_epsilon(partial_sums) -> complex:
    """Limit estimate for a (possibly divergent-oscillating) partial-sum
    sequence via Wynn's epsilon algorithm.

    Returns the deepest even-column entry that remains finite; for
    alternating sequences with polynomially growing terms this converges
    to the Abel-summed value.
    """
    s = [complex(v) for v in partial_sums]
    n = len(s)
    if n == 1:
        return s[0]
    eps_prev2 = [0j] * (n + 1)  # epsilon_{-1}
    eps_prev1 = list(s)  # epsilon_0
    best = s[-1]
    col = 1
    while len(eps_prev1) > 1:
        cur = []
        ok = True
        for i in range(len(eps_prev1) - 1):
            diff = eps_prev1[i + 1] - eps_prev1[i]
            if diff == 0:
                ok = False
                break
            cur.append(eps_prev2[i + 1] + 1.0 / diff)
        if not ok or not cur:
            break
        if col % 2 == 0 and np.isfinite(cur[-1]).all():
            best = cur[-1]
        eps_prev2, eps_prev1 = eps_prev1, cur
        col += 1
    return best
