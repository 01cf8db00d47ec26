"""Boundary-pair geometry on the model hypersurface.

For a pair of boundary points (x, y, t), (x', y', t') and a convex
polynomial b this module produces the recentered polynomial, the
symmetrized second difference, and the phase offset

    b_tilde(v) = b(v + m) - grad b(m) . v - b(m),      m = (x + x') / 2
    delta      = b(x) + b(x') - 2 b(m)
    w          = (t' - t) + grad b(m) . (y' - y)

Recentering happens on coefficients (exact binomial shift) so that the
constant and linear terms of b_tilde vanish exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .polyform import Polynomial, gradient


@dataclass(frozen=True)
class BoundaryPoint:
    """A boundary point (x, y, t) with x, y in R^n and t real."""

    x: tuple
    y: tuple
    t: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))
        object.__setattr__(self, "y", tuple(float(v) for v in np.atleast_1d(self.y)))
        object.__setattr__(self, "t", float(self.t))
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same length")

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class PairData:
    b_tilde: Polynomial
    delta: float
    w: float
    gamma: tuple = field()

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))

    @property
    def scales(self) -> tuple:
        """(delta, b_tilde(gamma), |w|): the three comparison scales."""
        return (self.delta, float(self.b_tilde(np.array(self.gamma))), abs(self.w))


def tilde_b(b: Polynomial, x, x_prime) -> Polynomial:
    """Recenter b at the pair midpoint and subtract its tangent plane."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    xp = np.asarray(x_prime, dtype=np.float64).reshape(-1)
    if x.shape[0] != b.dim or xp.shape[0] != b.dim:
        raise ValueError("dimension mismatch between b and the pair")
    m = (x + xp) / 2.0
    shifted = b.shifted(m)
    terms = shifted.terms()
    zero = (0,) * b.dim
    terms.pop(zero, None)
    for i in range(b.dim):
        lin = tuple(1 if j == i else 0 for j in range(b.dim))
        terms.pop(lin, None)
    return Polynomial(b.dim, terms)


def delta(b: Polynomial, x, x_prime) -> float:
    """b(x) + b(x') - 2 b((x+x')/2), accumulated term-by-term.

    Compensated summation over per-term contributions keeps the result
    accurate when x ~ x' and the three values nearly cancel.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    xp = np.asarray(x_prime, dtype=np.float64).reshape(-1)
    if x.shape[0] != b.dim or xp.shape[0] != b.dim:
        raise ValueError("dimension mismatch between b and the pair")
    m = (x + xp) / 2.0
    parts = []
    for a, c in zip(b.exps, b.coeffs):
        mono_x = c * float(np.prod(x ** a))
        mono_xp = c * float(np.prod(xp ** a))
        mono_m = c * float(np.prod(m ** a))
        parts.extend((mono_x, mono_xp, -2.0 * mono_m))
    return math.fsum(parts)


def w_offset(b: Polynomial, p: BoundaryPoint, p_prime: BoundaryPoint) -> float:
    """(t' - t) + grad b(midpoint) . (y' - y)."""
    if p.n != b.dim or p_prime.n != b.dim:
        raise ValueError("dimension mismatch between b and the points")
    m = (np.array(p.x) + np.array(p_prime.x)) / 2.0
    grad_m = gradient(b, m)
    return float((p_prime.t - p.t) + grad_m @ (np.array(p_prime.y) - np.array(p.y)))


def pair_data(b: Polynomial, p: BoundaryPoint, p_prime: BoundaryPoint) -> PairData:
    """Bundle (b_tilde, delta, w, gamma = y - y') for a boundary pair."""
    bt = tilde_b(b, p.x, p_prime.x)
    d = delta(b, p.x, p_prime.x)
    w = w_offset(b, p, p_prime)
    gamma = tuple(np.array(p.y) - np.array(p_prime.y))
    return PairData(bt, d, w, gamma)
