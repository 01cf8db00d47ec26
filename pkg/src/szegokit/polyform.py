"""Sparse multivariate polynomials: evaluation, derivatives, convexity
sampling, and the anisotropic (combined) degree classifier.

A polynomial is a finite map from exponent multi-indices to real
coefficients, held in canonical graded-lexicographic order so every
reduction over terms is deterministic.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ._backend import eval_many, grad_many, hess_many

COEFF_DROP_TOL = 1e-14
CONVEXITY_EIG_TOL = 1e-9


class Polynomial:
    """Sparse polynomial over R^n with canonically ordered terms.

    Parameters
    ----------
    dim : int
        Number of variables, >= 1.
    terms : dict[tuple[int, ...], float]
        Map from exponent multi-index to coefficient.  Coefficients with
        magnitude below ``COEFF_DROP_TOL`` are dropped; duplicate indices
        are merged.
    """

    __slots__ = ("dim", "exps", "coeffs")

    def __init__(self, dim: int, terms: dict):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        merged: dict = {}
        for alpha, c in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim:
                raise ValueError(f"multi-index {alpha} has wrong length for dim {dim}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            merged[alpha] = merged.get(alpha, 0.0) + float(c)
        # graded-lexicographic order fixes the reduction order
        kept = sorted(
            (a for a, c in merged.items() if abs(c) > COEFF_DROP_TOL),
            key=lambda a: (sum(a), a),
        )
        self.dim = dim
        self.exps = np.array(kept if kept else np.empty((0, dim)), dtype=np.int64).reshape(len(kept), dim)
        self.coeffs = np.array([merged[a] for a in kept], dtype=np.float64)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim, {})

    def terms(self) -> dict:
        return {tuple(int(e) for e in a): float(c) for a, c in zip(self.exps, self.coeffs)}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.dim == other.dim
            and self.exps.shape == other.exps.shape
            and bool(np.all(self.exps == other.exps))
            and bool(np.all(self.coeffs == other.coeffs))
        )

    def __hash__(self):
        return hash((self.dim, self.exps.tobytes(), self.coeffs.tobytes()))

    def __repr__(self):
        parts = []
        for a, c in zip(self.exps, self.coeffs):
            mono = "*".join(f"v{i + 1}^{e}" for i, e in enumerate(a) if e) or "1"
            parts.append(f"{c:g}*{mono}")
        return f"Polynomial({self.dim}, {' + '.join(parts) or '0'})"

    @property
    def nterms(self) -> int:
        return len(self.coeffs)

    def total_degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if self.nterms else 0

    def coeff_abs_sum(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.dim).encode())
        h.update(self.exps.tobytes())
        h.update(self.coeffs.tobytes())
        return h.hexdigest()[:16]

    # -- evaluation ------------------------------------------------------------

    def __call__(self, v) -> float:
        return evaluate(self, v)

    def eval_batch(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at an [N, dim] array of points."""
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError("points must have shape [N, dim]")
        out = np.empty(pts.shape[0])
        eval_many(self.coeffs, self.exps, pts, out)
        return out

    def grad_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        out = np.empty((pts.shape[0], self.dim))
        grad_many(self.coeffs, self.exps, pts, out)
        return out

    def hess_batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        out = np.empty((pts.shape[0], self.dim, self.dim))
        hess_many(self.coeffs, self.exps, pts, out)
        return out

    # -- coefficient-level transforms -------------------------------------------

    def scaled(self, factor: float) -> "Polynomial":
        """factor * p, as a new polynomial."""
        return Polynomial(self.dim, {tuple(a): factor * c for a, c in zip(self.exps, self.coeffs)})

    def dilated(self, scales) -> "Polynomial":
        """p(scales * v) for a per-axis positive scale vector."""
        scales = np.asarray(scales, dtype=np.float64)
        if scales.shape != (self.dim,):
            raise ValueError("scales must have length dim")
        out = {}
        for a, c in zip(self.exps, self.coeffs):
            out[tuple(a)] = c * float(np.prod(scales ** a))
        return Polynomial(self.dim, out)

    def shifted(self, m) -> "Polynomial":
        """p(v + m), expanded exactly on coefficients via the binomial theorem."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (self.dim,):
            raise ValueError("shift must have length dim")
        out: dict = {}
        for a, c in zip(self.exps, self.coeffs):
            # expand prod_i (v_i + m_i)^{a_i}
            partial = {(): c}
            for i, ai in enumerate(a):
                nxt: dict = {}
                for beta, cb in partial.items():
                    for k in range(int(ai) + 1):
                        w = cb * math.comb(int(ai), k) * m[i] ** (int(ai) - k)
                        key = beta + (k,)
                        nxt[key] = nxt.get(key, 0.0) + w
                partial = nxt
            for beta, cb in partial.items():
                out[beta] = out.get(beta, 0.0) + cb
        return Polynomial(self.dim, out)

    def partial(self, i: int) -> "Polynomial":
        """d/dv_i as a polynomial."""
        out = {}
        for a, c in zip(self.exps, self.coeffs):
            if a[i] == 0:
                continue
            beta = list(a)
            beta[i] -= 1
            key = tuple(beta)
            out[key] = out.get(key, 0.0) + c * a[i]
        return Polynomial(self.dim, out)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        out = self.terms()
        for a, c in other.terms().items():
            out[a] = out.get(a, 0.0) + c
        return Polynomial(self.dim, out)

    # -- text form ---------------------------------------------------------------

    def to_text(self) -> str:
        """One term per line: ``coefficient exponent_1 ... exponent_n``."""
        lines = []
        for a, c in zip(self.exps, self.coeffs):
            lines.append(" ".join([f"{c:.17g}"] + [str(int(e)) for e in a]))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, dim: int | None = None) -> "Polynomial":
        terms = {}
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if dim is None:
                dim = len(fields) - 1
            if len(fields) != dim + 1:
                raise ValueError(f"line {ln}: expected coefficient plus {dim} exponents")
            try:
                c = float(fields[0])
                alpha = tuple(int(f) for f in fields[1:])
            except ValueError as exc:
                raise ValueError(f"line {ln}: {exc}") from None
            terms[alpha] = terms.get(alpha, 0.0) + c
        if dim is None:
            raise ValueError("empty polynomial text")
        return cls(dim, terms)


@dataclass(frozen=True)
class CombinedDegree:
    """The per-variable half-degrees (m_1, ..., m_n) of the growth condition."""

    m: tuple

    def __post_init__(self):
        if not self.m or any(int(mi) < 1 for mi in self.m):
            raise ValueError("all m_i must be positive integers")
        object.__setattr__(self, "m", tuple(int(mi) for mi in self.m))

    @property
    def n(self) -> int:
        return len(self.m)

    def decay_exponents(self) -> np.ndarray:
        """2m_i / (2m_i - 1) per axis."""
        m = np.asarray(self.m, dtype=np.float64)
        return 2 * m / (2 * m - 1)


@dataclass(frozen=True)
class ConvexityReport:
    sampled_points: int
    min_eigenvalue: float
    strictly_convex: bool


def _check_dim(p: Polynomial, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != p.dim:
        raise ValueError(f"point has length {v.shape[0]}, polynomial has dim {p.dim}")
    return v


def evaluate(p: Polynomial, v) -> float:
    """Value of p at a point, summed in canonical term order."""
    v = _check_dim(p, v)
    return float(p.eval_batch(v[None, :])[0])


def gradient(p: Polynomial, v) -> np.ndarray:
    v = _check_dim(p, v)
    return p.grad_batch(v[None, :])[0]


def hessian(p: Polynomial, v) -> np.ndarray:
    v = _check_dim(p, v)
    return p.hess_batch(v[None, :])[0]


def combined_degree(p: Polynomial) -> CombinedDegree | None:
    """Classify p, reading 2m_i off the highest pure power of variable i.

    Returns None when some variable has no even pure top power, or when a
    stored multi-index violates either degree condition.  All exponent
    arithmetic is exact (integers, cross-multiplied).
    """
    if p.nterms == 0:
        raise ValueError("zero polynomial cannot be classified")
    two_m = [0] * p.dim
    for a in p.exps:
        nz = np.nonzero(a)[0]
        if len(nz) == 1:
            i = int(nz[0])
            two_m[i] = max(two_m[i], int(a[i]))
    if any(t < 2 or t % 2 for t in two_m):
        return None
    prod = 1
    for t in two_m:
        prod *= t
    for a in p.exps:
        s = sum(int(ai) * (prod // t) for ai, t in zip(a, two_m))
        if s > prod:
            return None
        at_top = any(int(ai) == t for ai, t in zip(a, two_m))
        if (s == prod) != at_top:
            return None
    return CombinedDegree(tuple(t // 2 for t in two_m))


def _ball_samples(dim: int, radius: float, samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, dim))
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.random(samples) ** (1.0 / dim)
    return u / norms * r[:, None]


def check_convexity(p: Polynomial, radius: float, samples: int, seed: int) -> ConvexityReport:
    """Sample the Hessian spectrum over a ball and report the observed floor."""
    if radius <= 0 or samples < 1:
        raise ValueError("radius must be positive and samples >= 1")
    pts = _ball_samples(p.dim, radius, samples, seed)
    hs = p.hess_batch(pts)
    if p.dim == 1:
        min_eig = float(hs[:, 0, 0].min())
    else:
        min_eig = float(np.linalg.eigvalsh(hs)[:, 0].min())
    return ConvexityReport(samples, min_eig, min_eig > CONVEXITY_EIG_TOL)


def r_majorant(m: CombinedDegree) -> Polynomial:
    """The pure-power majorant sum_i v_i^{2 m_i}."""
    n = m.n
    terms = {}
    for i, mi in enumerate(m.m):
        alpha = [0] * n
        alpha[i] = 2 * mi
        terms[tuple(alpha)] = terms.get(tuple(alpha), 0.0) + 1.0
    return Polynomial(n, terms)


def dominance_constant(g: Polynomial, m: CombinedDegree, radius: float,
                       samples: int, seed: int) -> float:
    """Empirical sup of g(v) / (1 + sum_i v_i^{2m_i}) over a sampled ball.

    The sup is approached along rays, so axis and corner points at the
    sampling radius are always included alongside the uniform draw.
    """
    if combined_degree(g) != m:
        raise ValueError("polynomial is not of the stated combined degree")
    pts = _ball_samples(g.dim, radius, samples, seed)
    extremes = []
    for signs in np.ndindex(*(2,) * g.dim):
        d = np.array([1.0 if s else -1.0 for s in signs])
        extremes.append(radius * d / np.linalg.norm(d))
    for i in range(g.dim):
        e = np.zeros(g.dim)
        e[i] = radius
        extremes.extend([e, -e])
    pts = np.vstack([pts, np.array(extremes)])
    r = r_majorant(m)
    ratio = g.eval_batch(pts) / (1.0 + r.eval_batch(pts))
    return float(ratio.max())
