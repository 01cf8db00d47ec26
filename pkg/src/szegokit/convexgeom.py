"""Sublevel-set geometry: bounding radii, volumes, ray symmetrization, the
maximal inscribed (John) ellipsoid of the symmetrized body, and the two
convex-scaling facts used by the dyadic estimates.

All bodies here are sublevel sets {v : g(v) <= level} of convex
polynomials with g(0) = 0 and a positive level, probed only through
membership and ray evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _grids
from .polyform import Polynomial, combined_degree

MIN_LEVEL = 1e-300


@dataclass(frozen=True)
class VolumeConfig:
    samples: int = 10**6
    seed: int = 2024
    method: str = "mc"  # "mc" | "grid"
    grid_per_axis: int = 0  # 0 -> per-dim default
    chunk: int = 1 << 19

    def grid_points(self, dim: int) -> int:
        if self.grid_per_axis:
            return self.grid_per_axis
        return {1: 200_001, 2: 1201, 3: 151}[dim]


@dataclass(frozen=True)
class EllipsoidConfig:
    n_directions: int = 0  # 0 -> per-dim default (64 for n=2, 256 for n=3)
    n_check: int = 512
    cstar_directions: int = 256
    tol: float = 1e-10
    max_iter: int = 20_000

    def directions(self, dim: int) -> int:
        if self.n_directions:
            return self.n_directions
        return {1: 2, 2: 64, 3: 256}[dim]


@dataclass(frozen=True)
class SublevelSet:
    """{v : g(v) <= level} for convex g with g(0) = 0, grad g(0) = 0."""

    g: Polynomial
    level: float

    def __post_init__(self):
        if not np.isfinite(self.level) or self.level <= 0:
            raise ValueError("level must be positive")
        if self.level < MIN_LEVEL:
            raise ValueError("level underflows")

    @property
    def dim(self) -> int:
        return self.g.dim

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.g.eval_batch(pts) <= self.level


@dataclass(frozen=True)
class Ellipsoid:
    """Origin-centered ellipsoid {v : v^T A v <= 1}."""

    dim: int
    shape: np.ndarray
    converged: bool = True
    semi_axes: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.shape, dtype=np.float64)
        if a.shape != (self.dim, self.dim):
            raise ValueError("shape matrix has wrong dimensions")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ValueError("shape matrix must be symmetric")
        a = (a + a.T) / 2.0
        eig = np.linalg.eigvalsh(a)
        if eig[0] <= 0:
            raise ValueError("shape matrix must be positive definite")
        object.__setattr__(self, "shape", a)
        object.__setattr__(self, "semi_axes", np.sort(1.0 / np.sqrt(eig))[::-1])

    def gauge(self, pts: np.ndarray) -> np.ndarray:
        """sqrt(v^T A v): < 1 inside, 1 on the boundary."""
        return np.sqrt(np.einsum("pi,ij,pj->p", pts, self.shape, pts))

    def boundary_points(self, k: int) -> np.ndarray:
        u = _grids.directions(self.dim, k)
        lam, q = np.linalg.eigh(self.shape)
        inv_sqrt = q @ np.diag(1.0 / np.sqrt(lam)) @ q.T
        return u @ inv_sqrt.T

    def axis_extents(self) -> np.ndarray:
        """Half-width of the ellipsoid along each coordinate axis."""
        return np.sqrt(np.diag(np.linalg.inv(self.shape)))

    def volume(self) -> float:
        return _grids.unit_ball_volume(self.dim) * float(np.prod(self.semi_axes))


@dataclass(frozen=True)
class MuFactors:
    """Semi-axes of the outer-dilated inscribed ellipsoid, plus the measured
    dilation needed to cover the body."""

    mu: np.ndarray
    sandwich_outer: float
    ellipsoid: Ellipsoid
    axis_scales: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        if np.any(mu <= 0) or np.any(np.diff(mu) > 0):
            raise ValueError("mu must be positive and descending")
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float
    method: str

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("volume cannot be negative")


def bounding_radius(s: SublevelSet, n_dirs: int = 64) -> float:
    """Radius of a ball containing the sublevel set, found by doubling.

    Fails when g is not of combined degree (the set may be unbounded).
    """
    if combined_degree(s.g) is None:
        raise ValueError("not combined degree: compactness is not guaranteed")
    u = _grids.directions(s.dim, max(n_dirs, 2 * s.dim))
    rho = 1.0
    for _ in range(120):
        vals = s.g.eval_batch(rho * u)
        if np.all(vals > s.level):
            return rho
        rho *= 2.0
    raise RuntimeError("bounding radius search did not terminate")


def _ray_roots(g: Polynomial, level: float, dirs: np.ndarray,
               rel_tol: float = 1e-10) -> np.ndarray:
    """Per-direction positive root of g(t u) = level (bracketing + bisection).

    g(t u) is convex in t with g(0) = 0 < level, so the root is unique and
    the bracket never fails once g(t u) > level.
    """
    k = dirs.shape[0]
    hi = np.ones(k)
    for _ in range(200):
        vals = g.eval_batch(hi[:, None] * dirs)
        mask = vals <= level
        if not mask.any():
            break
        hi[mask] *= 2.0
    else:
        raise RuntimeError("ray bracket search did not terminate")
    lo = np.zeros(k)
    for _ in range(64):
        mid = (lo + hi) / 2.0
        inside = g.eval_batch(mid[:, None] * dirs) <= level
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.all((hi - lo) <= rel_tol * hi):
            break
    return (lo + hi) / 2.0


def ray_ratio(s: SublevelSet, direction) -> float:
    """max/min of the two boundary distances along +-direction; always >= 1."""
    u = np.asarray(direction, dtype=np.float64).reshape(1, -1)
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise ValueError("direction must be nonzero")
    u = u / nrm
    d = _ray_roots(s.g, s.level, np.vstack([u, -u]))
    return float(max(d) / min(d))


def john_ellipsoid(s: SublevelSet, cfg: EllipsoidConfig = EllipsoidConfig()) -> Ellipsoid:
    """Maximal inscribed ellipsoid of R intersect (-R), via ray sampling.

    Supporting hyperplanes at the sampled symmetrized boundary points form
    an outer polytope; its max-determinant inscribed ellipsoid is computed
    through the polar (a centered minimum-covering-ellipsoid iteration on
    the normalized normals), then shrunk until sampled boundary points of
    the ellipsoid pass the membership test.
    """
    if s.dim > 3:
        raise ValueError("desk scale only: dim <= 3")
    g, level = s.g, s.level
    if s.dim == 1:
        d = _ray_roots(g, level, np.array([[1.0], [-1.0]]))
        rho = float(d.min())
        return Ellipsoid(1, np.array([[1.0 / rho**2]]))

    u = _grids.directions(s.dim, cfg.directions(s.dim))
    half = u.shape[0] // 2
    u_half = u[:half]
    d_plus = _ray_roots(g, level, u_half)
    d_minus = _ray_roots(g, level, -u_half)
    rho = np.minimum(d_plus, d_minus)
    pts = rho[:, None] * u_half
    # supporting hyperplane of the symmetrized body at each touching point
    grads_p = g.grad_batch(pts)
    grads_m = -g.grad_batch(-pts)
    normals = np.where((d_plus <= d_minus)[:, None], grads_p, grads_m)
    offsets = np.einsum("ki,ki->k", normals, pts)
    keep = offsets > 0
    q = normals[keep] / offsets[keep, None]

    # polar: centered minimum covering ellipsoid of the points +-q
    n = s.dim
    k = q.shape[0]
    wts = np.full(k, 1.0 / k)
    converged = False
    for _ in range(cfg.max_iter):
        m_mat = (q * wts[:, None]).T @ q
        m_inv = np.linalg.inv(m_mat)
        gk = np.einsum("ki,ij,kj->k", q, m_inv, q)
        j = int(np.argmax(gk))
        gmax = gk[j]
        if gmax <= n * (1.0 + cfg.tol):
            converged = True
            break
        step = (gmax - n) / (n * (gmax - 1.0))
        wts *= 1.0 - step
        wts[j] += step
    shape = n * ((q * wts[:, None]).T @ q)  # inscribed = polar of the MVEE

    ell = Ellipsoid(s.dim, shape, converged=converged)
    # shrink to feasibility at sampled ellipsoid boundary points
    bpts = ell.boundary_points(cfg.n_check)
    dirs = bpts / np.linalg.norm(bpts, axis=1, keepdims=True)
    body_r = np.minimum(_ray_roots(g, level, dirs), _ray_roots(g, level, -dirs))
    factor = float(np.min(body_r / np.linalg.norm(bpts, axis=1)))
    factor = min(1.0, factor) * (1.0 - 1e-12)
    return Ellipsoid(s.dim, shape / factor**2, converged=converged)


def outer_dilation(s: SublevelSet, ell: Ellipsoid, n_dirs: int = 256) -> float:
    """Smallest sampled c with R inside c * ellipsoid (max gauge over the
    sampled boundary of R)."""
    u = _grids.directions(s.dim, n_dirs)
    r = _ray_roots(s.g, s.level, u)
    return float(ell.gauge(r[:, None] * u).max())


def mu_factors(b_tilde: Polynomial, tau: float,
               cfg: EllipsoidConfig = EllipsoidConfig()) -> MuFactors:
    """Rescaling factors from the inscribed ellipsoid of {b_tilde <= 1/tau}.

    The returned semi-axes are dilated by the measured outer factor c*,
    which stands in for the universal dilation constant of the sandwich.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    s = SublevelSet(b_tilde, 1.0 / tau)
    ell = john_ellipsoid(s, cfg)
    cstar = outer_dilation(s, ell, cfg.cstar_directions)
    mu = cstar * ell.semi_axes
    axis_scales = cstar * ell.axis_extents()
    return MuFactors(mu=mu, sandwich_outer=cstar, ellipsoid=ell, axis_scales=axis_scales)


def sublevel_volume(s: SublevelSet, cfg: VolumeConfig = VolumeConfig()) -> VolumeEstimate:
    """Volume of the sublevel set: Monte Carlo rejection in the bounding
    box (counter-based generator, fixed seed) or tensor-grid counting."""
    rho = bounding_radius(s)
    n = s.dim
    if cfg.method == "grid":
        k = cfg.grid_points(n)
        axis = (np.arange(k) + 0.5) / k * 2 * rho - rho
        cell = (2 * rho / k) ** n
        count = 0
        if n == 1:
            count = int(np.count_nonzero(s.contains(axis[:, None])))
        else:
            for x0 in axis:  # row-by-row keeps memory flat
                if n == 2:
                    pts = np.column_stack([np.full(k, x0), axis])
                    count += int(np.count_nonzero(s.contains(pts)))
                else:
                    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
                    pts = np.column_stack([np.full(grid.shape[0], x0), grid])
                    count += int(np.count_nonzero(s.contains(pts)))
        return VolumeEstimate(cell * count, 0.0, "grid")
    if cfg.method != "mc":
        raise ValueError(f"unknown volume method {cfg.method!r}")
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    box = (2.0 * rho) ** n
    total = 0
    hits = 0
    while total < cfg.samples:
        m = min(cfg.chunk, cfg.samples - total)
        pts = rng.random((m, n)) * 2 * rho - rho
        hits += int(np.count_nonzero(s.contains(pts)))
        total += m
    p = hits / cfg.samples
    err = box * float(np.sqrt(max(p * (1.0 - p), 1e-30) / cfg.samples))
    return VolumeEstimate(box * p, err, "mc")


def scaling_check(f: Polynomial, x: float, lam: float,
                  cfg: VolumeConfig = VolumeConfig()):
    """Check vol{f <= lam*x} >= lam^n vol{f <= x} with 3-sigma MC slack.

    Returns (vol_lx, vol_x, holds).  lam = 0 degenerates to a trivially
    true comparison.
    """
    if x <= 0 or not 0 <= lam <= 1:
        raise ValueError("need x > 0 and lambda in [0, 1]")
    n = f.dim
    vol_x = sublevel_volume(SublevelSet(f, x), cfg)
    if lam == 0:
        return VolumeEstimate(0.0, 0.0, "degenerate"), vol_x, True
    vol_lx = sublevel_volume(SublevelSet(f, lam * x), replace(cfg, seed=cfg.seed + 1))
    slack = 3.0 * np.hypot(vol_lx.std_error, lam**n * vol_x.std_error)
    holds = vol_lx.value >= lam**n * vol_x.value - slack
    return vol_lx, vol_x, bool(holds)


def _exp_integral(f: Polynomial, level_cut: float = 40.0,
                  panels: int = 16, order: int = 12):
    """Tensor quadrature of exp(-f) over the box of {f <= level_cut},
    with per-unit-level shell sums for the truncation report."""
    rho = bounding_radius(SublevelSet(f, level_cut))
    n = f.dim
    if n == 3:
        panels, order = 8, 8
    nodes, wts = _grids.panel_rule(-rho, rho, panels, order)
    grids = np.meshgrid(*([nodes] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wprod = wts
    for _ in range(n - 1):
        wprod = np.multiply.outer(wprod, wts)
    wflat = wprod.ravel()
    fv = f.eval_batch(pts)
    contrib = wflat * np.exp(-np.clip(fv, None, 700.0))
    total = float(contrib.sum())
    shells = []
    for j in range(int(level_cut)):
        mask = (fv >= j) & (fv < j + 1)
        val = float(contrib[mask].sum())
        shells.append(val)
        if total > 0 and j >= 1 and val < 1e-12 * total:
            break
    return total, shells


def exp_integral_equiv(f: Polynomial, cfg: VolumeConfig = VolumeConfig()):
    """Compare I = integral of exp(-f) with V = vol{f <= 1}.

    Returns (I, V_estimate, ratio); the comparison interval
    [1/e, 1 + sum_j e^{-j} (j+1)^n] is checked by the verify suite.
    """
    if combined_degree(f) is None:
        raise ValueError("not combined degree: integral may diverge")
    integral, _shells = _exp_integral(f)
    vol = sublevel_volume(SublevelSet(f, 1.0), cfg)
    return integral, vol, integral / vol.value


def exp_vol_ratio_bounds(n: int, jmax: int = 50):
    """The two-sided comparison constants for exp_integral_equiv."""
    upper = 1.0 + sum(np.exp(-j) * (j + 1) ** n for j in range(1, jmax + 1))
    return 1.0 / np.e, float(upper)
