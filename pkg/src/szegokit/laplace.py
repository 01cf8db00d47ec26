"""Convex conjugates and the stabilized evaluation of the denominator
integral

    I(eta) = integral exp(eta . v - g(v)) dv = e^{L(eta)} * J(eta),

where L is the convex conjugate of g at eta with maximizer v0, and
J = integral exp(-f) for the centered remainder
f(w) = g(v0 + w) - g(v0) - eta . w.

theta(eta) = 1/I(eta) is always computed in the factored form
exp(-L)/J so that large conjugate values never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._grids import panel_rule
from .polyform import CombinedDegree, Polynomial


@dataclass(frozen=True)
class LaplaceConfig:
    tol: float = 1e-6              # relative target for J refinement
    newton_tol: float = 1e-10      # gradient norm scale for the conjugate solve
    newton_max_iter: int = 200
    box_level: float = 40.0        # f >= this on the truncation boundary
    quad_order: int = 16
    start_panels: int = 2
    max_panels: int = 64


@dataclass(frozen=True)
class LegendreResult:
    v0: np.ndarray
    L: float
    converged: bool
    iterations: int
    grad_norm: float


@dataclass(frozen=True)
class ThetaValue:
    theta: float
    I: float
    factor_exp: float
    factor_vol: float


def _solve_reg(hess: np.ndarray, rhs: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Batched solve of (H + lam I) d = rhs for stacked small systems."""
    n = hess.shape[-1]
    h = hess + lam[:, None, None] * np.eye(n)[None, :, :]
    try:
        return np.linalg.solve(h, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(rhs)
        for i in range(h.shape[0]):
            try:
                out[i] = np.linalg.solve(h[i], rhs[i])
            except np.linalg.LinAlgError:
                out[i] = rhs[i]  # gradient direction fallback
        return out


def legendre_batch(g: Polynomial, etas: np.ndarray, cfg: LaplaceConfig = LaplaceConfig()):
    """Damped Newton from v = 0 for sup_v {eta . v - g(v)}, vectorized over
    a batch of eta rows.

    Returns (v0[K,n], L[K], converged[K], iterations, grad_norm[K]).
    """
    etas = np.atleast_2d(np.asarray(etas, dtype=np.float64))
    k, n = etas.shape
    if n != g.dim:
        raise ValueError("eta dimension mismatch")
    v = np.zeros((k, n))
    fval = g.eval_batch(v) - np.einsum("ki,ki->k", etas, v)
    tol = cfg.newton_tol * (1.0 + np.linalg.norm(etas, axis=1))
    active = np.ones(k, dtype=bool)
    gradn = np.full(k, np.inf)
    iters = 0
    for iters in range(1, cfg.newton_max_iter + 1):
        grad = g.grad_batch(v) - etas
        gradn = np.linalg.norm(grad, axis=1)
        active = gradn > tol
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        hess = g.hess_batch(v[idx])
        gi = grad[idx]
        lam = np.zeros(len(idx))
        d = _solve_reg(hess, -gi, lam)
        # insist on descent; raise per-point damping otherwise
        slope = np.einsum("ki,ki->k", d, gi)
        bad = slope >= 0
        scale = 1.0 + np.abs(np.einsum("kii->k", hess))
        tries = 0
        while bad.any() and tries < 60:
            lam[bad] = np.where(lam[bad] == 0, 1e-8 * scale[bad], lam[bad] * 10.0)
            d[bad] = _solve_reg(hess[bad], -gi[bad], lam[bad])
            slope = np.einsum("ki,ki->k", d, gi)
            bad = slope >= 0
            tries += 1
        if bad.any():
            d[bad] = -gi[bad]
            slope[bad] = -np.einsum("ki,ki->k", gi[bad], gi[bad])
        # backtracking line search (Armijo)
        t = np.ones(len(idx))
        fcur = fval[idx]
        remaining = np.ones(len(idx), dtype=bool)
        for _ in range(50):
            cand = v[idx] + t[:, None] * d
            fnew = g.eval_batch(cand) - np.einsum("ki,ki->k", etas[idx], cand)
            ok = fnew <= fcur + 1e-4 * t * slope
            remaining = remaining & ~ok
            if not remaining.any():
                break
            t[remaining] *= 0.5
        cand = v[idx] + t[:, None] * d
        v[idx] = cand
        fval[idx] = g.eval_batch(cand) - np.einsum("ki,ki->k", etas[idx], cand)
    grad = g.grad_batch(v) - etas
    gradn = np.linalg.norm(grad, axis=1)
    converged = gradn <= tol
    lvals = np.einsum("ki,ki->k", etas, v) - g.eval_batch(v)
    return v, lvals, converged, iters, gradn


def legendre(g: Polynomial, eta, cfg: LaplaceConfig = LaplaceConfig()) -> LegendreResult:
    """Convex conjugate value and maximizer at a single eta."""
    eta = np.asarray(eta, dtype=np.float64).reshape(1, -1)
    v0, lval, conv, iters, gradn = legendre_batch(g, eta, cfg)
    return LegendreResult(v0[0], float(lval[0]), bool(conv[0]), iters, float(gradn[0]))


def legendre_lower_bound(m: CombinedDegree, c_dom: float, eta) -> float:
    """Conjugate lower bound assembled from the pure-power domination of g:

        L(eta) >= Ct * sum_i |eta_i|^{2m_i/(2m_i-1)} - C,

    with C the domination constant and Ct built from B_j = 2 m_j C.
    """
    if c_dom <= 0:
        raise ValueError("domination constant must be positive")
    eta = np.atleast_1d(np.asarray(eta, dtype=np.float64))
    ct = min(
        (c_dom * 2 * mj) ** (-1.0 / (2 * mj - 1)) * (2 * mj - 1) / (2.0 * mj)
        for mj in m.m
    )
    q = np.array([2 * mj / (2 * mj - 1.0) for mj in m.m])
    return float(ct * np.sum(np.abs(eta) ** q) - c_dom)


def conjugate_growth(m: CombinedDegree, c_dom: float) -> tuple:
    """(Ct, C) of the conjugate lower bound, for truncation-radius sizing."""
    ct = min(
        (c_dom * 2 * mj) ** (-1.0 / (2 * mj - 1)) * (2 * mj - 1) / (2.0 * mj)
        for mj in m.m
    )
    return ct, c_dom


def _box_halfwidths(g: Polynomial, v0: np.ndarray, etas: np.ndarray,
                    g0: np.ndarray, level: float) -> np.ndarray:
    """Per-axis half-widths rho with f >= level at the sampled rays
    (axes and diagonals) from each conjugate maximizer."""
    k, n = v0.shape
    dirs = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        dirs.extend([e, -e])
    if n > 1:
        for signs in np.ndindex(*(2,) * n):
            d = np.array([1.0 if s else -1.0 for s in signs]) / math.sqrt(n)
            dirs.append(d)
    dirs = np.array(dirs)
    rho = np.zeros((k, n))
    for d in dirs:
        t = np.ones(k)
        for _ in range(200):
            pts = v0 + t[:, None] * d
            f = g.eval_batch(pts) - g0 - t * (etas @ d)
            low = f < level
            if not low.any():
                break
            t[low] *= 2.0
        else:
            raise RuntimeError("truncation box search did not terminate")
        lo = np.zeros(k)
        hi = t
        for _ in range(30):
            mid = (lo + hi) / 2.0
            pts = v0 + mid[:, None] * d
            f = g.eval_batch(pts) - g0 - mid * (etas @ d)
            below = f < level
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        rho = np.maximum(rho, hi[:, None] * np.abs(d)[None, :])
    return rho


def theta_batch(g: Polynomial, etas: np.ndarray, cfg: LaplaceConfig = LaplaceConfig()):
    """Batched stabilized evaluation of theta = exp(-L)/J.

    The centered integrals J are refined by panel doubling per point:
    only the entries that have not met the relative tolerance are
    re-evaluated at the next level.

    Returns (theta[K], L[K], J[K], v0[K,n], converged[K]).
    """
    etas = np.atleast_2d(np.asarray(etas, dtype=np.float64))
    k, n = etas.shape
    v0, lvals, conv, _, _ = legendre_batch(g, etas, cfg)
    g0 = g.eval_batch(v0)
    rho = _box_halfwidths(g, v0, etas, g0, cfg.box_level)

    def j_for(idx: np.ndarray, npanels: int) -> np.ndarray:
        nodes, wts = panel_rule(-1.0, 1.0, npanels, cfg.quad_order)
        if n == 1:
            w_pts = rho[idx, None, 0, None] * nodes[None, :, None]  # [k,Q,1]
            wflat = wts[None, :]
            jac = rho[idx, 0]
        else:
            mesh = np.meshgrid(*([nodes] * n), indexing="ij")
            std = np.stack([mm.ravel() for mm in mesh], axis=-1)  # [Q^n, n]
            wprod = wts
            for _ in range(n - 1):
                wprod = np.multiply.outer(wprod, wts)
            wflat = wprod.ravel()[None, :]
            w_pts = rho[idx, None, :] * std[None, :, :]  # [k, Q^n, n]
            jac = np.prod(rho[idx], axis=1)
        pts = (v0[idx, None, :] + w_pts).reshape(-1, n)
        gv = g.eval_batch(pts).reshape(len(idx), -1)
        f = gv - g0[idx, None] - np.einsum("ki,kqi->kq", etas[idx], w_pts)
        vals = np.exp(-np.clip(f, -60.0, 700.0))
        return jac * np.einsum("kq,kq->k", np.broadcast_to(wflat, vals.shape), vals)

    all_idx = np.arange(k)
    npanels = cfg.start_panels
    j_cur = j_for(all_idx, npanels)
    active = all_idx
    while npanels < cfg.max_panels and active.size:
        npanels *= 2
        j_new = j_for(active, npanels)
        rel = np.abs(j_new - j_cur[active]) / np.maximum(np.abs(j_new), 1e-300)
        j_cur[active] = j_new
        active = active[rel > cfg.tol]
    theta = np.exp(-lvals) / j_cur
    return theta, lvals, j_cur, v0, conv


def denominator_integral(g: Polynomial, eta, cfg: LaplaceConfig = LaplaceConfig()) -> ThetaValue:
    """I = e^{L} J in factored form, with theta = 1/I evaluated stably."""
    eta = np.asarray(eta, dtype=np.float64).reshape(1, -1)
    th, lvals, jv, _, conv = theta_batch(g, eta, cfg)
    if not conv[0]:
        raise RuntimeError("conjugate solve did not converge")
    lv, j = float(lvals[0]), float(jv[0])
    exp_l = math.exp(lv) if lv < 700 else math.inf
    return ThetaValue(theta=float(th[0]), I=exp_l * j, factor_exp=exp_l, factor_vol=j)


def theta(g: Polynomial, eta, cfg: LaplaceConfig = LaplaceConfig()) -> float:
    return denominator_integral(g, eta, cfg).theta


@dataclass(frozen=True)
class DecayReport:
    """Sampled decay table with the fitted rate against the conjugate
    growth functional X(eta) = sum_i |eta_i|^{2m_i/(2m_i-1)}."""

    rows: np.ndarray  # columns: |eta|, theta, log theta, X(eta)
    fitted_c: float
    intercept: float
    max_residual: float
    columns: tuple = field(default=("abs_eta", "theta", "log_theta", "conjugate_growth"))

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def theta_decay_report(g: Polynomial, m: CombinedDegree, etas,
                       cfg: LaplaceConfig = LaplaceConfig()) -> DecayReport:
    """Tabulate theta on an eta list and fit log theta ~ -c X + const over
    the larger-|eta| half of the samples."""
    etas = np.atleast_2d(np.asarray(etas, dtype=np.float64))
    th, _, _, _, _ = theta_batch(g, etas, cfg)
    q = m.decay_exponents()
    xvals = np.sum(np.abs(etas) ** q[None, :], axis=1)
    abse = np.linalg.norm(etas, axis=1)
    rows = np.column_stack([abse, th, np.log(th), xvals])
    fit_mask = abse >= np.median(abse)
    a = np.column_stack([xvals[fit_mask], np.ones(fit_mask.sum())])
    coef, *_ = np.linalg.lstsq(a, np.log(th[fit_mask]), rcond=None)
    resid = a @ coef - np.log(th[fit_mask])
    return DecayReport(rows=rows, fitted_c=float(-coef[0]), intercept=float(coef[1]),
                       max_residual=float(np.abs(resid).max()))


def exponential_factor_exponent(g: Polynomial, ray, svals,
                                cfg: LaplaceConfig = LaplaceConfig()) -> tuple:
    """Decay exponent of the exponential factor of theta along a ray.

    theta factors as exp(-L) / J; the polynomial prefactor J would bias a
    small-|eta| slope fit, so the exponent is regressed on the conjugate
    term alone: slope of log L(s * ray) against log s.

    Returns (slope, L values).
    """
    ray = np.asarray(ray, dtype=np.float64).reshape(1, -1)
    svals = np.asarray(svals, dtype=np.float64)
    etas = svals[:, None] * ray
    _, lvals, _, _, conv = theta_batch(g, etas, cfg)
    if not conv.all():
        raise RuntimeError("conjugate solve did not converge on the ray")
    if np.any(lvals <= 0):
        raise RuntimeError("conjugate values not positive on the fit window")
    slope = float(np.polyfit(np.log(svals), np.log(lvals), 1)[0])
    return slope, lvals


def fit_power_model(svals, neglog_thetas):
    """Fit -log theta = c s^p + d on a 1-D ray; returns (c, p, d).

    The additive constant d absorbs the normalization of theta, so p
    measures the growth exponent of the conjugate term alone.
    """
    from scipy.optimize import curve_fit

    svals = np.asarray(svals, dtype=np.float64)
    y = np.asarray(neglog_thetas, dtype=np.float64)

    def model(s, c, p, d):
        return c * s**p + d

    slope0 = (y[-1] - y[0]) / (svals[-1] ** 2 - svals[0] ** 2)
    p0 = (max(slope0, 1e-3), 2.0, y[0] - slope0 * svals[0] ** 2)
    popt, _ = curve_fit(model, svals, y, p0=p0, maxfev=20000)
    return float(popt[0]), float(popt[1]), float(popt[2])


@dataclass(frozen=True)
class V0Report:
    rows: np.ndarray  # columns: |eta|, |v0|
    slope: float
    intercept: float
    columns: tuple = field(default=("abs_eta", "abs_v0"))

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def v0_growth_diagnostic(g: Polynomial, etas,
                         cfg: LaplaceConfig = LaplaceConfig()) -> V0Report:
    """|v0| against |eta| with a fitted line; used to size eta truncation."""
    etas = np.atleast_2d(np.asarray(etas, dtype=np.float64))
    v0, _, _, _, _ = legendre_batch(g, etas, cfg)
    abse = np.linalg.norm(etas, axis=1)
    absv = np.linalg.norm(v0, axis=1)
    slope, intercept = np.polyfit(abse, absv, 1)
    return V0Report(rows=np.column_stack([abse, absv]),
                    slope=float(slope), intercept=float(intercept))
