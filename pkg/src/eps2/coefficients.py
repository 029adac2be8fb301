"""Pointwise two-phase coefficients at a center x and scale r.

All spherical quantities are normalized by r^{-n} (n = dim - 1), so they are
dimensionless and live in [0, sigma_n].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize

from .geometry import (
    TWO_PI,
    ArcDecomposition,
    Ball,
    HalfSpace,
    Hyperplane,
    RegionPair,
    SphereSample,
    arc_decomposition,
    fibonacci_sphere,
    sample_sphere,
    sphere_area,
)


class AnchorMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# kernels


def bump_profile(t):
    """Even C-infinity profile: 1 on [-1, 1], 0 outside [-1.1, 1.1]."""
    t = np.abs(np.asarray(t, dtype=float))
    s = np.clip((1.1 - t) / 0.1, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def gaussian_profile(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-t * t)


@dataclass(frozen=True)
class Kernel:
    """Radial kernel psi(y) = phi(|y|) with its half-space mass c_psi."""

    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in ("gaussian", "bump"):
            raise ValueError("kernel kind must be 'gaussian' or 'bump'")

    @property
    def profile(self) -> Callable:
        return gaussian_profile if self.kind == "gaussian" else bump_profile

    @property
    def support(self) -> float:
        """Radius beyond which the profile is ignored."""
        return 4.0 if self.kind == "gaussian" else 1.1

    def tail_bound(self, n: int) -> float:
        return math.exp(-16.0) * sphere_area(n) if self.kind == "gaussian" else 0.0

    def c_psi(self, n: int) -> float:
        """Integral of psi over a half-space through the origin in R^{n+1}."""
        if self.kind == "gaussian":
            return math.pi ** ((n + 1) / 2) / 2.0
        t, w = _gauss_panels(0.0, 1.1, 64, 16)
        return 0.5 * sphere_area(n) * float(np.sum(w * bump_profile(t) * t ** n))


def _gauss_panels(a: float, b: float, panels: int, order: int = 8, breaks=()):
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    if breaks:
        edges = np.unique(np.concatenate([edges, [t for t in breaks if a < t < b]]))
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()


# ---------------------------------------------------------------------------
# one sphere, either exact arcs or labelled nodes


class SphereSlice:
    """Labelled sphere S(x, r) in units normalized by r^n."""

    def __init__(self, R: RegionPair, x, r: float, q: SphereSample | None = None):
        self.x = np.asarray(x, float)
        self.r = float(r)
        self.n = R.dim - 1
        self.sigma = sphere_area(self.n)
        self.exact = q is None or q.mode == "exact-arc"
        if self.exact:
            if R.dim != 2:
                raise ValueError("exact slices need a planar scene; pass a SphereSample")
            self.arcs: ArcDecomposition = arc_decomposition(R, self.x, self.r)
        else:
            if abs(q.radius - self.r) > 1e-12 * self.r or np.any(np.abs(q.center - self.x) > 1e-12 * max(1.0, self.r)):
                q = SphereSample(self.x, self.r, self.x + self.r * q.directions, q.weights * (self.r / q.radius) ** self.n,
                                 q.mode, q.seed)
            self.u = q.directions
            self.w = q.weights / self.r ** self.n
            self.lab = R.classify(q.nodes)
            self.anti = R.classify(2.0 * self.x - q.nodes)
            self.mode = q.mode
            self.m = len(self.w)

    # -- measures ------------------------------------------------------------
    def measure(self, label: int) -> float:
        if self.exact:
            return self.arcs.measure(label)
        return float(np.sum(self.w[self.lab == label]))

    def _stderr(self, frac: float) -> float:
        """Three-sigma error for a measured fraction of the sphere."""
        if self.exact:
            return 1e-13 * self.sigma
        floor = self.sigma / self.m
        if self.mode == "lattice" and self.n == 1:
            changes = np.count_nonzero(self.lab != np.roll(self.lab, 1)) + np.count_nonzero(self.anti != np.roll(self.anti, 1))
            return floor * max(1, changes)
        return 3.0 * self.sigma * math.sqrt(max(frac * (1.0 - frac), 0.0) / self.m) + floor

    def asym(self) -> tuple[float, float]:
        vals = [abs(self.measure(i) - 0.5 * self.sigma) for i in (1, -1)]
        fr = max(self.measure(1), self.measure(-1)) / self.sigma
        return max(vals), self._stderr(fr)

    def gamma(self) -> tuple[float, float]:
        if self.exact:
            g = max(self._gamma_arc(1), self._gamma_arc(-1))
        else:
            g = max(float(np.sum(self.w[(self.lab == i) == (self.anti == i)])) for i in (1, -1))
        return g, self._stderr(g / self.sigma)

    def _gamma_arc(self, label: int) -> float:
        a = self.arcs
        cuts = np.concatenate([a.starts, np.mod(a.starts + math.pi, TWO_PI), [0.0, TWO_PI]])
        cuts = np.unique(cuts)
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        same = (a.label_at(mids) == label) == (a.label_at(mids + math.pi) == label)
        return float(np.sum(np.diff(cuts)[same]))

    # -- epsilon for a family of half-spaces ------------------------------------
    def eps_angles(self, phi: np.ndarray) -> np.ndarray:
        """Planar epsilon for inner normals at angles ``phi``."""
        phi = np.mod(np.asarray(phi, float), TWO_PI)
        if self.exact:
            out = np.full(phi.shape, TWO_PI)
            for label, shift in ((1, -0.5 * math.pi), (-1, 0.5 * math.pi)):
                bp, cum = self.arcs.cumulative(label)
                lo = np.mod(phi + shift, TWO_PI)
                out -= np.interp(lo + math.pi, bp, cum) - np.interp(lo, bp, cum)
            return np.maximum(out, 0.0)
        ang = np.mod(np.arctan2(self.u[:, 1], self.u[:, 0]), TWO_PI)
        order = np.argsort(ang, kind="stable")
        ang = ang[order]
        ang2 = np.concatenate([ang, ang + TWO_PI])
        total = np.full(phi.shape, 0.0)
        for label, shift in ((1, -0.5 * math.pi), (-1, 0.5 * math.pi)):
            miss = (self.lab[order] != label) * self.w[order]
            cum = np.concatenate([[0.0], np.cumsum(np.concatenate([miss, miss]))])
            lo = np.mod(phi + shift, TWO_PI)
            i0 = np.searchsorted(ang2, lo, side="right")
            i1 = np.searchsorted(ang2, lo + math.pi, side="left")
            total += cum[i1] - cum[i0]
        return total

    def eps_breakpoints(self) -> np.ndarray:
        """Normal angles at which planar epsilon can attain its minimum."""
        if self.exact:
            e = self.arcs.starts
            return np.mod(np.concatenate([e + 0.5 * math.pi, e - 0.5 * math.pi]), TWO_PI)
        ang = np.mod(np.arctan2(self.u[:, 1], self.u[:, 0]), TWO_PI)
        bp = np.unique(np.mod(np.concatenate([ang + 0.5 * math.pi, ang - 0.5 * math.pi]), TWO_PI))
        nxt = np.concatenate([bp[1:], [bp[0] + TWO_PI]])
        return np.mod(0.5 * (bp + nxt), TWO_PI)

    def eps_normals(self, U: np.ndarray) -> np.ndarray:
        """Epsilon for arbitrary unit inner normals (node mode, any dimension)."""
        U = np.atleast_2d(U)
        s = self.u @ U.T
        notp = ((self.lab != 1) * self.w)[:, None]
        notm = ((self.lab != -1) * self.w)[:, None]
        return np.sum(notp * (s > 0) + notm * (s < 0), axis=0)

    def eps_error(self, value: float) -> float:
        return self._stderr(value / self.sigma)


# ---------------------------------------------------------------------------
# epsilon


@dataclass
class SearchConfig:
    """Half-space search settings."""

    grid_2d: int = 720
    golden_tol: float = 1e-6
    grid_3d: int = 2000
    nm_iter: int = 200
    use_breakpoints: bool = True


def _check_anchor(x, H: HalfSpace, r: float):
    if np.max(np.abs(np.asarray(H.anchor, float) - np.asarray(x, float))) > 1e-12 * max(1.0, r):
        raise AnchorMismatch("half-space anchor must equal the center x")


def epsilon_given_H(R: RegionPair, x, r: float, H: HalfSpace, q: SphereSample | None = None) -> float:
    """Normalized measure of (S_H^+ minus Omega^+) together with (S_H^- minus Omega^-)."""
    _check_anchor(x, H, r)
    sl = SphereSlice(R, x, r, q)
    if sl.exact:
        return float(sl.eps_angles(np.array([math.atan2(H.normal[1], H.normal[0])]))[0])
    return float(sl.eps_normals(H.normal[None, :])[0])


def _golden(f, a: float, b: float, tol: float) -> tuple[float, float]:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, f(t)


def _svm_direction(sl: SphereSlice) -> np.ndarray | None:
    """Soft-margin linear separator of Plus against Minus nodes (L1 hinge, LP)."""
    sel = sl.lab != 0
    if not sel.any() or np.all(sl.lab[sel] == sl.lab[sel][0]):
        return None
    Y = sl.u[sel] * sl.lab[sel][:, None].astype(float)
    k, d = Y.shape
    # variables: u_plus, u_minus (d each, >= 0), slack (k); minimize sum slack + tiny |u|
    c = np.concatenate([1e-6 * np.ones(2 * d), np.ones(k)])
    A = -sparse.hstack([sparse.csr_matrix(np.hstack([Y, -Y])), sparse.identity(k, format="csr")], format="csr")
    res = linprog(c, A_ub=A, b_ub=-np.ones(k), bounds=[(0, None)] * (2 * d + k), method="highs")
    if not res.success:
        return None
    u = res.x[:d] - res.x[d:2 * d]
    nu = np.linalg.norm(u)
    return u / nu if nu > 0 else None


def _tangent_basis(u: np.ndarray) -> np.ndarray:
    a = np.eye(3)[np.argmin(np.abs(u))]
    e1 = np.cross(u, a)
    e1 /= np.linalg.norm(e1)
    return np.vstack([e1, np.cross(u, e1)])


def epsilon(R: RegionPair, x, r: float, q: SphereSample | None = None,
            cfg: SearchConfig | None = None) -> tuple[float, HalfSpace]:
    """Infimum of epsilon_given_H over half-spaces with x on the boundary.

    Planar scenes scan ``grid_2d`` normal angles, refine the best one by
    golden-section search and also probe every breakpoint of the piecewise
    linear (exact arcs) or piecewise constant (nodes) objective, so the
    returned value is the global minimum.  Spatial scenes scan a Fibonacci
    set of normals plus a linear-separator candidate and refine with
    Nelder-Mead on the tangent plane.
    """
    cfg = cfg or SearchConfig()
    sl = SphereSlice(R, x, r, q)
    return _epsilon_from_slice(sl, cfg)


def _epsilon_from_slice(sl: SphereSlice, cfg: SearchConfig) -> tuple[float, HalfSpace]:
    if sl.n == 1:
        grid = TWO_PI * np.arange(cfg.grid_2d) / cfg.grid_2d
        vals = sl.eps_angles(grid)
        i = int(np.argmin(vals))
        step = TWO_PI / cfg.grid_2d
        f = lambda t: float(sl.eps_angles(np.array([t]))[0])
        t_ref, v_ref = _golden(f, grid[i] - step, grid[i] + step, cfg.golden_tol)
        best_t, best_v = (grid[i], float(vals[i])) if vals[i] <= v_ref else (t_ref, v_ref)
        if cfg.use_breakpoints:
            bp = sl.eps_breakpoints()
            if bp.size:
                bv = sl.eps_angles(bp)
                j = int(np.argmin(bv))
                if bv[j] < best_v:
                    best_t, best_v = float(bp[j]), float(bv[j])
        if not sl.exact and not cfg.use_breakpoints:
            u = _svm_direction(sl)
            if u is not None:
                t = math.atan2(u[1], u[0])
                v = f(t)
                if v < best_v:
                    best_t, best_v = t, v
        return best_v, HalfSpace(sl.x, np.array([math.cos(best_t), math.sin(best_t)]))
    U = fibonacci_sphere(cfg.grid_3d)
    cands = [U]
    u_svm = _svm_direction(sl)
    if u_svm is not None:
        cands.append(u_svm[None, :])
    U = np.vstack(cands)
    vals = sl.eps_normals(U)
    order = np.argsort(vals, kind="stable")
    best_u, best_v = U[order[0]], float(vals[order[0]])
    starts = [U[order[0]]] + ([u_svm] if u_svm is not None else [])
    for u0 in starts:
        B = _tangent_basis(u0)

        def obj(s, u0=u0, B=B):
            u = u0 + s @ B
            return float(sl.eps_normals((u / np.linalg.norm(u))[None, :])[0])

        res = minimize(obj, np.zeros(2), method="Nelder-Mead",
                       options={"maxiter": cfg.nm_iter, "initial_simplex": 0.02 * np.array([[0, 0], [1, 0], [0, 1]]),
                                "xatol": 1e-9, "fatol": 0.0})
        u = u0 + res.x @ B
        u /= np.linalg.norm(u)
        v = obj(res.x)
        if v < best_v:
            best_u, best_v = u, v
    return best_v, HalfSpace(sl.x, best_u)


def asym_a(R: RegionPair, x, r: float, q: SphereSample | None = None) -> float:
    """Normalized imbalance max_i |H^n(Omega^i cap S) - H^n(S)/2| / r^n."""
    return SphereSlice(R, x, r, q).asym()[0]


def gamma_sym(R: RegionPair, x, r: float, q: SphereSample | None = None) -> float:
    """Normalized measure of the failure of central symmetry about x."""
    return SphereSlice(R, x, r, q).gamma()[0]


# ---------------------------------------------------------------------------
# radial integrals


def _radial_slices(R, x, radii, q):
    for t in radii:
        yield SphereSlice(R, x, t, None if q is None else q.rescaled(t) if q.mode != "exact-arc" else None)


def g_ball(R: RegionPair, x, r: float, radial_grid: int = 16, q: SphereSample | None = None,
           return_error: bool = False):
    """Solid symmetry coefficient r^{-(n+1)} int_0^r gamma(x, t) t^n dt.

    ``radial_grid`` is the number of Gauss-Legendre panels (8 nodes each).
    """
    n = R.dim - 1
    t, w = _gauss_panels(0.0, r, radial_grid)
    vals, errs = [], []
    for sl in _radial_slices(R, x, t, q):
        g, e = sl.gamma()
        vals.append(g)
        errs.append(e)
    tn = (t / r) ** n
    value = float(np.sum(w * np.array(vals) * tn)) / r
    err = float(np.sum(w * np.array(errs) * tn)) / r
    return (value, err) if return_error else value


def a_psi(R: RegionPair, x, r: float, K: Kernel | None = None, vol_quad: int = 32,
          q: SphereSample | None = None, return_error: bool = False):
    """Smoothed asymmetry pair (plus, minus) for a radial kernel.

    Uses |int_0^T phi(t) t^n (sigma_n/2 - m_i(r t)) dt| where m_i(s) is the
    normalized measure of Omega^i on S(x, s); T is the kernel support
    (4 for the Gaussian, whose tail is bounded by e^{-16} sigma_n).
    ``vol_quad`` is the number of Gauss-Legendre panels in t.
    """
    K = K or Kernel("gaussian")
    n = R.dim - 1
    sigma = sphere_area(n)
    t, w = _gauss_panels(0.0, K.support, vol_quad)
    prof = K.profile(t) * t ** n * w
    dp, dm, ep, em = [], [], [], []
    for sl in _radial_slices(R, x, r * t, q):
        mp, mm = sl.measure(1), sl.measure(-1)
        dp.append(0.5 * sigma - mp)
        dm.append(0.5 * sigma - mm)
        ep.append(sl._stderr(mp / sigma))
        em.append(sl._stderr(mm / sigma))
    plus = abs(float(np.sum(prof * np.array(dp))))
    minus = abs(float(np.sum(prof * np.array(dm))))
    tail = K.tail_bound(n)
    err = max(float(np.sum(np.abs(prof) * np.array(ep))), float(np.sum(np.abs(prof) * np.array(em)))) + tail
    return ((plus, minus), err) if return_error else (plus, minus)


# ---------------------------------------------------------------------------
# the full record


@dataclass
class CoefficientRecord:
    x: np.ndarray
    r: float
    eps: float
    eps_halfspace: HalfSpace
    a_sym: float
    gamma_sym: float
    g_ball: float
    a_psi_plus: float
    a_psi_minus: float
    quad_error: float
    errors: dict = field(default_factory=dict)

    def row(self) -> dict:
        d = {f"x{i + 1}": float(v) for i, v in enumerate(self.x)}
        d["r"] = self.r
        d.update(eps=self.eps, a_sym=self.a_sym, gamma_sym=self.gamma_sym, g_ball=self.g_ball,
                 a_psi_plus=self.a_psi_plus, a_psi_minus=self.a_psi_minus, quad_error=self.quad_error)
        for i, v in enumerate(self.eps_halfspace.normal):
            d[f"normal{i + 1}"] = float(v)
        return d


def coefficients(R: RegionPair, x, r: float, mode: str = "exact-arc", m: int = 2048, seed: int | None = None,
                 kernel: Kernel | None = None, radial_grid: int = 16, vol_quad: int = 32,
                 cfg: SearchConfig | None = None) -> CoefficientRecord:
    """Evaluate every pointwise coefficient at (x, r)."""
    x = np.asarray(x, float)
    if R.dim == 3 and mode == "exact-arc":
        mode = "lattice"
    q = None if mode == "exact-arc" else sample_sphere(x, r, mode, m, seed)
    sl = SphereSlice(R, x, r, q)
    eps, H = _epsilon_from_slice(sl, cfg or SearchConfig())
    a, ea = sl.asym()
    g, eg = sl.gamma()
    gb, egb = g_ball(R, x, r, radial_grid, q, return_error=True)
    (ap, am), eap = a_psi(R, x, r, kernel, vol_quad, q, return_error=True)
    ee = sl.eps_error(eps)
    errs = {"eps": ee, "a_sym": ea, "gamma_sym": eg, "g_ball": egb, "a_psi": eap}
    return CoefficientRecord(x, float(r), eps, H, a, g, gb, ap, am, max(errs.values()), errs)


# ---------------------------------------------------------------------------
# corkscrews and splitting


@dataclass
class CorkscrewConfig:
    c1: float = 0.25
    grid: int = 9
    samples: int = 4000
    seed: int = 0


def _ball_samples(rng, center, radius, k, dim):
    g = rng.standard_normal((k, dim))
    g /= np.linalg.norm(g, axis=1)[:, None]
    rad = radius * rng.random(k) ** (1.0 / dim)
    return center + g * rad[:, None]


def find_corkscrew(R: RegionPair, B: Ball, side: int, beta: float, cfg: CorkscrewConfig | None = None):
    """Search a ball B' inside B of radius c1 rad(B) mostly filled by one side.

    Candidate centers form a grid over the admissible region; each candidate
    is scored by Monte Carlo and accepted when the upper three-sigma bound of
    the uncovered fraction is at most ``beta``.  Returns ``(ball, report)``
    or ``(None, report)``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    cfg = cfg or CorkscrewConfig()
    rng = np.random.default_rng(cfg.seed)
    d = R.dim
    rp = cfg.c1 * B.radius
    reach = B.radius - rp
    axes = np.linspace(-reach, reach, cfg.grid)
    cands = np.array(np.meshgrid(*[axes] * d, indexing="ij")).reshape(d, -1).T
    cands = cands[np.linalg.norm(cands, axis=1) <= reach + 1e-12] + B.center
    unit = _ball_samples(rng, np.zeros(d), 1.0, cfg.samples, d)
    best = None
    for c in cands:
        lab = R.classify(c + rp * unit)
        frac = float(np.mean(lab != side))
        ub = frac + 3.0 * math.sqrt(max(frac * (1 - frac), 0.0) / cfg.samples) + 1.0 / cfg.samples
        if ub <= beta and (best is None or frac < best[1]):
            best = (c, frac, ub)
    report = {"candidates": int(len(cands)), "samples": cfg.samples, "radius": rp}
    if best is None:
        return None, report
    report.update(fraction=best[1], upper_bound=best[2])
    return Ball(best[0], rp), report


def splitting_fractions(R: RegionPair, B: Ball, L: Hyperplane, band: float, grid: int = 401):
    """Volume fractions of Omega^+ and Omega^- in the two sides of (B/2) minus the band.

    The components are D^+ = {dist > band on the normal side} and D^- on the
    other side.  Both labelings are tried and the better one (larger minimum)
    is returned.  Empty components count as fully filled.
    """
    d = R.dim
    rho = 0.5 * B.radius
    k = grid if d == 2 else max(41, int(round(grid ** (2.0 / 3.0))))
    ax = (np.arange(k) + 0.5) / k * 2 - 1
    pts = np.array(np.meshgrid(*[ax] * d, indexing="ij")).reshape(d, -1).T
    pts = B.center + rho * pts[np.linalg.norm(pts, axis=1) < 1.0]
    sd = L.signed_distance(pts)
    lab = R.classify(pts)
    up, dn = sd > band, sd < -band

    def frac(mask, label):
        return float(np.mean(lab[mask] == label)) if mask.any() else 1.0

    a = (frac(up, 1), frac(dn, -1))
    b = (frac(dn, 1), frac(up, -1))
    return a if min(a) >= min(b) else b
