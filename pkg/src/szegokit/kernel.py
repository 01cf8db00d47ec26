"""Numerical evaluation of the boundary projection kernel for model
domains, via the recentered triple integral

    S = int_0^inf e^{-2 pi tau delta} e^{-2 pi i tau w}
        int e^{2 pi i eta . gamma} / int e^{4 pi [eta . v - tau bt(v)]} dv
        d eta d tau,

together with the size-estimate right-hand sides and the exact
separable-quadratic oracle used for acceptance.

The eta/v integrals are preconditioned per tau by the componentwise
rescaling built from the inscribed-ellipsoid factors; the substitution is
exact for any positive factors, so the factors only control conditioning.
The tau integral is summed over dyadic cells with oscillation-capped
panels, switching to half-period blocks with sequence extrapolation when
the phase e^{-2 pi i tau w} is the only source of convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._grids import barycentric_matrix, chebyshev_nodes, panel_rule, wynn_epsilon
from .convexgeom import (EllipsoidConfig, SublevelSet, VolumeConfig, _ray_roots,
                         mu_factors, sublevel_volume)
from .laplace import LaplaceConfig, conjugate_growth, theta_batch
from .pairgeom import BoundaryPoint, PairData, pair_data
from .polyform import Polynomial, combined_degree

DIAGONAL_FLOOR = 1e-8


@dataclass(frozen=True)
class QuadratureConfig:
    tau_dyadic_range: tuple = (-20, 40)
    tau_points_per_cell: int = 10
    eta_radius: float | None = None  # None -> sized from the conjugate bound
    eta_grid: int = 33               # interpolation points per eta axis
    v_tol: float = 1e-6
    seed: int = 0
    oscillation_safety: float = 0.25
    tail_blocks: int = 48
    tau_interp: int = 16  # Chebyshev points replacing direct G evals per span
    laplace: LaplaceConfig = field(default_factory=LaplaceConfig)
    ellipsoid: EllipsoidConfig = field(default_factory=EllipsoidConfig)
    volume: VolumeConfig = field(default_factory=VolumeConfig)

    def __post_init__(self):
        j0, j1 = self.tau_dyadic_range
        if j0 >= j1:
            raise ValueError("tau_dyadic_range must be increasing")
        if self.tau_points_per_cell < 2 or self.eta_grid < 2:
            raise ValueError("quadrature counts must be >= 2")
        if not 0 < self.oscillation_safety <= 0.25:
            raise ValueError("oscillation_safety must be in (0, 1/4]")

    def refined(self) -> "QuadratureConfig":
        """One refinement step: doubled tau and eta orders, tighter tol."""
        return replace(
            self,
            tau_points_per_cell=2 * self.tau_points_per_cell,
            eta_grid=2 * self.eta_grid - 1,
            v_tol=self.v_tol / 4.0,
            laplace=replace(self.laplace, tol=self.laplace.tol / 4.0),
        )


@dataclass(frozen=True)
class KernelEstimate:
    value: complex
    err: float
    cells_used: int

    @property
    def abs(self) -> float:
        return abs(self.value)


@dataclass(frozen=True)
class BoundReport:
    A_delta: float
    B_ytilde: float
    C_w: float
    combined: float
    min_of_three: float


class _EtaIntegrand:
    """Per-pair state: recentered polynomial, rescaling cache, and the
    inner integral G(tau) of the rearranged formula."""

    def __init__(self, b: Polynomial, pd: PairData, cfg: QuadratureConfig):
        self.cfg = cfg
        self.bt = pd.b_tilde
        self.gamma = np.array(pd.gamma)
        self.m = combined_degree(self.bt)
        if self.m is None:
            raise ValueError("recentered polynomial is not of combined degree")
        self.q = self.m.decay_exponents()
        self._mu_cache: dict = {}

    def _axis_roots(self, tau: float) -> np.ndarray:
        n = self.bt.dim
        dirs = np.vstack([np.eye(n), -np.eye(n)])
        r = _ray_roots(self.bt, 1.0 / tau, dirs)
        return np.minimum(r[:n], r[n:])

    def _scales(self, tau: float) -> np.ndarray:
        # ellipsoid cached per dyadic cell; within the cell the cached
        # extents follow the body's own per-axis ray shrink, which keeps
        # the rescaled integrand width O(1) at every tau node
        j = math.floor(math.log2(tau))
        if j not in self._mu_cache:
            tau_ref = 2.0**j * math.sqrt(2.0)
            mf = mu_factors(self.bt, tau_ref, self.cfg.ellipsoid)
            self._mu_cache[j] = (mf.axis_scales, self._axis_roots(tau_ref))
        base, roots_ref = self._mu_cache[j]
        return base * (self._axis_roots(tau) / roots_ref)

    def __call__(self, tau: float):
        cfg = self.cfg
        n = self.bt.dim
        if tau <= 0.0:
            return 0j, 0.0
        scales = self._scales(tau)
        g = self.bt.dilated(scales).scaled(4.0 * math.pi * tau)

        # truncation radius per axis from the conjugate lower bound
        if cfg.eta_radius is not None:
            radii = np.full(n, float(cfg.eta_radius))
        else:
            ct, c0 = conjugate_growth(self.m, max(g.coeff_abs_sum(), 1e-12))
            target = c0 + math.log(1.0 / cfg.v_tol) + 5.0
            radii = (target / ct) ** (1.0 / self.q) / (4.0 * math.pi)

        # tighten per axis by probing the actual decay of 1/D
        probes = [np.zeros((1, n))]
        n_probe = 8
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            r = radii[i] * (np.arange(1, n_probe + 1) / n_probe)
            probes.append(r[:, None] * e[None, :])
            probes.append(-r[:, None] * e[None, :])
        pr_pts = np.vstack(probes)
        pr_th, _, _, _, _ = theta_batch(g, 4.0 * math.pi * pr_pts, cfg.laplace)
        th0 = pr_th[0]
        thresh = cfg.v_tol * th0 * 0.03
        for i in range(n):
            base = 1 + 2 * i * n_probe
            vals = np.maximum(pr_th[base:base + n_probe],
                              pr_th[base + n_probe:base + 2 * n_probe])
            small = np.nonzero(vals <= thresh)[0]
            if small.size:
                radii[i] = radii[i] * (small[0] + 1) / n_probe * 1.1

        # inner-integral values on the interpolation grid
        k = cfg.eta_grid
        axes = [chebyshev_nodes(-radii[i], radii[i], k) for i in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([mm.ravel() for mm in mesh], axis=-1)
        th, _, _, _, _ = theta_batch(g, 4.0 * math.pi * grid, cfg.laplace)
        th_grid = th.reshape([k] * n)

        # oscillatory phase integrated on a finer product-Gauss grid
        gamma_hat = self.gamma / scales
        order = max(10, (k + 2) // 2)
        us = []
        us_abs = []
        for i in range(n):
            r = radii[i]
            cap = r / 2.0
            if gamma_hat[i] != 0.0:
                cap = min(cap, cfg.oscillation_safety / abs(gamma_hat[i]))
            npanels = min(int(np.ceil(2.0 * r / cap)), 4096)
            nodes, wts = panel_rule(-r, r, npanels, order)
            bmat = barycentric_matrix(axes[i], nodes)
            us.append((wts * np.exp(2j * math.pi * gamma_hat[i] * nodes)) @ bmat)
            us_abs.append(wts @ bmat)

        if n == 1:
            val = us[0] @ th_grid
            mass = us_abs[0] @ th_grid
        elif n == 2:
            val = us[0] @ th_grid @ us[1]
            mass = us_abs[0] @ th_grid @ us_abs[1]
        else:
            val = np.einsum("i,j,l,ijl->", us[0], us[1], us[2], th_grid)
            mass = np.einsum("i,j,l,ijl->", us_abs[0], us_abs[1], us_abs[2], th_grid)
        # mass is the phase-free eta integral of theta-tilde: the scale
        # against which oscillatory cancellation noise is judged (computed
        # values below a small multiple of it are quadrature noise)
        jac = float(np.prod(scales**2))
        return complex(val / jac), abs(float(mass)) / jac


class _SpanEval:
    """Values of the smooth inner integral G on a tau interval.

    Direct evaluation when few nodes are needed; otherwise G is sampled
    at Chebyshev points of the interval and the (much finer) oscillation
    grid reads the barycentric interpolant.  The exponential damping and
    the tau phase are never interpolated.
    """

    def __init__(self, gfun, a: float, b: float, n_direct: int, interp_k: int):
        self.gfun = gfun
        self.interp = n_direct > interp_k
        if self.interp:
            self.nodes = chebyshev_nodes(a, b, interp_k)
            vals = [gfun(t) for t in self.nodes]
            self.gvals = np.array([v[0] for v in vals])
            self.masses = np.array([v[1] for v in vals])
            self.evals = interp_k
        else:
            self.evals = 0

    def __call__(self, taus: np.ndarray):
        if self.interp:
            bmat = barycentric_matrix(self.nodes, taus)
            return bmat @ self.gvals, bmat @ self.masses
        vals = [self.gfun(t) for t in taus]
        self.evals += len(taus)
        return np.array([v[0] for v in vals]), np.array([v[1] for v in vals])


def _span_integral(span: _SpanEval, a: float, b: float, npanels: int, order: int,
                   delta: float, w: float):
    nodes, wts = panel_rule(a, b, npanels, order)
    gvals, masses = span(nodes)
    damp = np.exp(-2.0 * math.pi * delta * nodes)
    phase = np.exp(-2j * math.pi * w * nodes)
    total = complex(np.sum(wts * damp * phase * gvals))
    mass = float(np.sum(wts * damp * masses))
    return total, mass


def szego_eval(b: Polynomial, p: BoundaryPoint, p_prime: BoundaryPoint,
               cfg: QuadratureConfig = QuadratureConfig()) -> KernelEstimate:
    """Evaluate the kernel at an off-diagonal boundary pair.

    Raises ValueError("on-diagonal evaluation") when all three comparison
    scales vanish (the kernel is singular there).
    """
    pd = pair_data(b, p, p_prime)
    delta, btg, absw = pd.scales
    if max(delta, btg, absw) < DIAGONAL_FLOOR:
        raise ValueError("on-diagonal evaluation")
    gfun = _EtaIntegrand(b, pd, cfg)
    w = pd.w
    # cancellation in the eta integral cannot be resolved below this
    # fraction of the phase-free mass (interpolation + inner-integral tol)
    noise_rel = 5.0 * max(cfg.laplace.tol, 1e-9)

    anchor = max(delta, btg, absw, 1.0)
    j_min, j_max = cfg.tau_dyadic_range
    order = cfg.tau_points_per_cell
    interp_k = cfg.tau_interp
    total = 0j
    err = 0.0
    cells = 0

    def cell_panels(a: float, b_: float) -> int:
        width = b_ - a
        cap = width
        if absw > 0:
            cap = min(cap, cfg.oscillation_safety / absw)
        if delta > 0:
            cap = min(cap, 1.0 / (2.0 * math.pi * delta))
        cap = max(cap, width / 256.0)
        return int(np.ceil(width / cap))

    def cell_sum(a: float, b_: float, npanels: int):
        span = _SpanEval(gfun, a, b_, npanels * order, interp_k)
        return _span_integral(span, a, b_, npanels, order, delta, w)

    # stub below the first dyadic point (direct: GL nodes stay interior)
    a0 = 2.0**j_min / anchor
    stub_span = _SpanEval(gfun, 0.0, a0, 0, interp_k)
    stub, stub_mass = _span_integral(stub_span, 0.0, a0, 1, order, delta, w)
    total += stub
    err += noise_rel * stub_mass
    cells += 1

    history: list = []
    tail_done = False
    j = j_min
    while j <= j_max:
        a = 2.0**j / anchor
        b_ = 2.0 ** (j + 1) / anchor
        if absw > 0 and (b_ - a) > 8.0 / absw:
            # oscillation is the only remaining mechanism; half-period
            # blocks with Wynn extrapolation give the regularized tail
            h = 1.0 / (2.0 * absw)
            span = _SpanEval(gfun, a, a + cfg.tail_blocks * h,
                             4 * cfg.tail_blocks, 2 * interp_k)
            partials = []
            tail = 0j
            noise = 0.0
            raw_converged = False
            for kblk in range(cfg.tail_blocks):
                blk, bmass = _span_integral(span, a + kblk * h, a + (kblk + 1) * h,
                                            2, order, delta, w)
                tail += blk
                noise = max(noise, noise_rel * bmass)
                partials.append(tail)
                cells += 2
                scale_now = max(abs(total + tail), 1e-300)
                if (len(partials) >= 3
                        and abs(blk) < max(cfg.v_tol * scale_now, noise_rel * bmass)
                        and abs(partials[-2] - partials[-3]) < max(cfg.v_tol * scale_now,
                                                                   noise_rel * bmass)):
                    raw_converged = True
                    break
            if raw_converged:
                total += tail
                err += abs(partials[-1] - partials[-2]) + noise
            else:
                limit = wynn_epsilon(partials)
                check = wynn_epsilon(partials[:-4]) if len(partials) > 8 else partials[-1]
                total += limit
                err += abs(limit - check) + noise
            tail_done = True
            break
        npan = cell_panels(a, b_)
        contribution, cmass = cell_sum(a, b_, npan)
        total += contribution
        cells += npan
        cell_noise = noise_rel * cmass
        err += cell_noise
        history.append((abs(contribution), cell_noise))
        scale_now = max(abs(total), 1e-300)
        floor_now = max(cfg.v_tol * scale_now, 3.0 * cell_noise)
        if (len(history) >= 3
                and history[-1][0] <= max(history[-2][0], floor_now)
                and history[-1][0] < floor_now
                and history[-2][0] < max(cfg.v_tol * scale_now, 3.0 * history[-2][1])):
            err += history[-1][0]
            tail_done = True
            break
        if delta > 0 and 2.0 * math.pi * delta * b_ > 80.0:
            err += history[-1][0]
            tail_done = True
            break
        j += 1
    if not tail_done and history:
        err += history[-1][0]

    err += cfg.v_tol * abs(total)
    return KernelEstimate(value=total, err=err, cells_used=cells)


def quadratic_oracle(a, p: BoundaryPoint, p_prime: BoundaryPoint) -> complex:
    """Closed-form kernel for separable quadratics b(x) = sum_i a_i x_i^2.

    Gaussian integration in v, a Gaussian Fourier transform in eta, and a
    Gamma integral in tau collapse the triple integral to

        S = 2^n n! (prod a_i) / (2 pi delta + pi bt(gamma) + 2 pi i w)^{n+1}.

    Validated against brute-force quadrature in the test suite before use
    as the acceptance oracle.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if np.any(a <= 0):
        raise ValueError("quadratic coefficients must be positive")
    n = a.shape[0]
    b = Polynomial(n, {tuple(2 if j == i else 0 for j in range(n)): a[i] for i in range(n)})
    pd = pair_data(b, p, p_prime)
    gamma = np.array(pd.gamma)
    btg = float(np.sum(a * gamma**2))
    denom = 2.0 * math.pi * pd.delta + math.pi * btg + 2j * math.pi * pd.w
    if denom == 0:
        raise ValueError("on-diagonal evaluation")
    return complex(2.0**n * math.factorial(n) * np.prod(a) / denom ** (n + 1))


def bound_rhs(b: Polynomial, p: BoundaryPoint, p_prime: BoundaryPoint,
              cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """Size-estimate right-hand side (unit constant):
    1 / (rho * vol{bt < rho}^2) with rho = sqrt(delta^2 + bt(gamma)^2 + w^2)."""
    pd = pair_data(b, p, p_prime)
    delta, btg, absw = pd.scales
    rho = math.sqrt(delta**2 + btg**2 + absw**2)
    if rho == 0:
        raise ValueError("all three comparison scales vanish")
    vol = sublevel_volume(SublevelSet(pd.b_tilde, rho), cfg.volume)
    return 1.0 / (rho * vol.value**2)


def bound_components(b: Polynomial, p: BoundaryPoint, p_prime: BoundaryPoint,
                     cfg: QuadratureConfig = QuadratureConfig()) -> BoundReport:
    """The three per-scale bounds, their min, and the combined bound."""
    pd = pair_data(b, p, p_prime)
    delta, btg, absw = pd.scales

    def component(scale: float, seed_shift: int) -> float:
        if scale <= 0:
            return math.inf
        vol = sublevel_volume(
            SublevelSet(pd.b_tilde, scale),
            replace(cfg.volume, seed=cfg.volume.seed + seed_shift),
        )
        return 1.0 / (scale * vol.value**2)

    a_val = component(delta, 1)
    b_val = component(btg, 2)
    c_val = component(absw, 3)
    combined = bound_rhs(b, p, p_prime, cfg)
    return BoundReport(A_delta=a_val, B_ytilde=b_val, C_w=c_val,
                       combined=combined, min_of_three=min(a_val, b_val, c_val))


SWEEP_COLUMNS = ("pair_id", "delta", "btilde_gamma", "w", "S_re", "S_im", "S_abs",
                 "err", "rhs_A", "rhs_B", "rhs_C", "rhs_combined", "ratio", "error")


@dataclass(frozen=True)
class SweepResult:
    rows: list
    max_ratio: float

    def to_csv(self) -> str:
        lines = [",".join(SWEEP_COLUMNS)]
        for row in self.rows:
            cells = []
            for col in SWEEP_COLUMNS:
                v = row.get(col, "")
                if isinstance(v, float):
                    cells.append(f"{v:.17g}")
                else:
                    cells.append(str(v))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def main_theorem_sweep(b: Polynomial, pairs, cfg: QuadratureConfig = QuadratureConfig(),
                       threads: int = 1) -> SweepResult:
    """Evaluate |S| and the combined bound over a pair list; the max of
    |S| / rhs_combined is the measured constant of the size estimate."""

    def one(idx_pair):
        idx, (p, pp) = idx_pair
        row = {"pair_id": idx, "error": ""}
        try:
            pd = pair_data(b, p, pp)
            delta, btg, absw = pd.scales
            row.update(delta=delta, btilde_gamma=btg, w=pd.w)
            est = szego_eval(b, p, pp, cfg)
            rep = bound_components(b, p, pp, cfg)
            ratio = est.abs / rep.combined if rep.combined > 0 else math.inf
            row.update(S_re=est.value.real, S_im=est.value.imag, S_abs=est.abs,
                       err=est.err, rhs_A=rep.A_delta, rhs_B=rep.B_ytilde,
                       rhs_C=rep.C_w, rhs_combined=rep.combined, ratio=ratio)
        except ValueError as exc:
            row["error"] = str(exc)
        return row

    items = list(enumerate(pairs))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(it) for it in items]
    ratios = [r["ratio"] for r in rows if not r["error"] and np.isfinite(r.get("ratio", math.inf))]
    return SweepResult(rows=rows, max_ratio=max(ratios) if ratios else math.nan)


def sample_pairs(n: int, count: int, seed: int,
                 x_range=(-1.0, 1.0), y_range=(-1.0, 1.0), t_range=(-1.0, 1.0)):
    """Seeded off-diagonal boundary-point pairs for sweeps."""
    rng = np.random.Generator(np.random.Philox(key=seed))

    def draw(rg):
        return rg[0] + (rg[1] - rg[0]) * rng.random(n)

    pairs = []
    while len(pairs) < count:
        p = BoundaryPoint(draw(x_range), draw(y_range),
                          float(t_range[0] + (t_range[1] - t_range[0]) * rng.random()))
        pp = BoundaryPoint(draw(x_range), draw(y_range),
                           float(t_range[0] + (t_range[1] - t_range[0]) * rng.random()))
        if (np.max(np.abs(np.array(p.x) - np.array(pp.x))) > 1e-3
                or np.max(np.abs(np.array(p.y) - np.array(pp.y))) > 1e-3
                or abs(p.t - pp.t) > 1e-3):
            pairs.append((p, pp))
    return pairs
