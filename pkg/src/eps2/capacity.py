"""Riesz and logarithmic capacities, dyadic Hausdorff content and related checks.

Sets are represented by finite nets.  Point masses have infinite Riesz
energy, so the kernel is mollified at a scale delta tied to the net spacing:
k_s(d) = max(d, delta)^(-s) for s > 0 and (1/2 pi) log(1/max(d, delta)) for
s = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, solve_triangular
from scipy.optimize import nnls
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .geometry import HalfSpace, RegionPair, fibonacci_sphere


# ---------------------------------------------------------------------------
# measures and energies


@dataclass
class DiscreteMeasure:
    support: np.ndarray
    masses: np.ndarray
    mollification: float

    def __post_init__(self):
        self.support = np.atleast_2d(np.asarray(self.support, float))
        self.masses = np.asarray(self.masses, float)
        if abs(self.masses.sum() - 1.0) > 1e-12 or np.any(self.masses < 0):
            raise ValueError("masses must be nonnegative and sum to 1")
        if not self.mollification > 0:
            raise ValueError("mollification must be positive")


@dataclass
class EnergyReport:
    total: float
    self_energy: float
    cross_energy: float

    def __float__(self):
        return self.total


def kernel_matrix(points: np.ndarray, s: float, delta: float, other: np.ndarray | None = None) -> np.ndarray:
    d = cdist(points, points if other is None else other)
    d = np.maximum(d, delta)
    if s == 0:
        return np.log(1.0 / d) / (2.0 * math.pi)
    return d ** (-s)


def riesz_energy(mu: DiscreteMeasure, s: float) -> EnergyReport:
    """Mollified energy split into diagonal (self) and off-diagonal (cross) parts."""
    K = kernel_matrix(mu.support, s, mu.mollification)
    m = mu.masses
    diag = float(np.sum(np.diag(K) * m * m))
    total = float(m @ K @ m)
    return EnergyReport(total, diag, total - diag)


def net_spacing(points: np.ndarray) -> float:
    """Median nearest-neighbour distance; NaN for fewer than two points."""
    p = np.atleast_2d(points)
    if len(p) < 2:
        return math.nan
    dist, _ = cKDTree(p).query(p, k=2)
    return float(np.median(dist[:, 1]))


# ---------------------------------------------------------------------------
# simplex optimization


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


@dataclass
class _Minimum:
    masses: np.ndarray
    energy: float
    iterations: int
    gap: float
    monotone: bool


def minimize_energy(K: np.ndarray, max_iter: int = 10_000, rtol: float = 1e-8) -> _Minimum:
    """Minimize m^T K m over the simplex by projected gradient.

    The trial step is the Barzilai-Borwein step, shortened by Armijo
    backtracking along the projection arc, so every accepted iterate
    lowers the energy.  Stops when the relative decrease falls below
    ``rtol`` or after ``max_iter`` iterations.  The reported gap is the
    Frank-Wolfe duality gap g.m - min(g), an upper bound on the distance
    to the optimal energy for convex kernels.
    """
    k = len(K)
    m = np.full(k, 1.0 / k)
    Km = K @ m
    f = float(m @ Km)
    t = 1.0 / (2.0 * np.max(np.sum(np.abs(K), axis=1)))
    monotone = True
    it = 0
    g = 2.0 * Km
    for it in range(1, max_iter + 1):
        while True:
            m_new = project_simplex(m - t * g)
            Km_new = K @ m_new
            f_new = float(m_new @ Km_new)
            if f_new <= f + 1e-4 * float(g @ (m_new - m)) or t < 1e-300:
                break
            t *= 0.5
        if f_new > f:
            monotone = False
            break
        s_vec = m_new - m
        g_new = 2.0 * Km_new
        y_vec = g_new - g
        dec = f - f_new
        m, Km, g = m_new, Km_new, g_new
        f_old, f = f, f_new
        sy = float(s_vec @ y_vec)
        t = float(s_vec @ s_vec) / sy if sy > 0 else 2.0 * t
        if dec <= rtol * abs(f_old):
            break
    gap = float(g @ m - np.min(g))
    return _Minimum(m, f, it, gap, monotone)


def minimize_energy_exact(K: np.ndarray) -> _Minimum | None:
    """Equilibrium masses by nonnegative least squares (positive definite K).

    Minimizing q^T K q - 2 sum(q) over q >= 0 gives the equilibrium masses
    q / sum(q) and minimal energy 1 / sum(q).  A constant c is added to the
    kernel when needed, which shifts the energy on the simplex by exactly c.
    Returns None when no shift makes K numerically positive definite.
    """
    k = len(K)
    shift = 0.0
    if np.min(K) <= 0:
        shift = 1.0 - float(np.min(K))
    for _ in range(4):
        A = K + shift
        try:
            c, low = cho_factor(A, lower=False, check_finite=False)
        except np.linalg.LinAlgError:
            shift = 2.0 * shift + 1.0
            continue
        U = np.triu(c)
        b = solve_triangular(U, np.ones(k), trans="T", check_finite=False)
        q, _ = nnls(U, b, maxiter=50 * k)
        tot = float(q.sum())
        if tot <= 0:
            return None
        m = q / tot
        e = float(m @ K @ m)
        g = 2.0 * (K @ m)
        return _Minimum(m, e, 1, float(g @ m - np.min(g)), True)
    return None


# ---------------------------------------------------------------------------
# capacities


@dataclass
class CapacityEstimate:
    s: float
    value: float
    energy: float
    iterations: int
    residual: float
    delta: float = math.nan
    self_energy: float = math.nan
    masses: np.ndarray | None = field(default=None, repr=False)
    monotone: bool = True


def _resolve_delta(K: np.ndarray, delta: float | None) -> float:
    if delta is not None:
        return float(delta)
    sp = net_spacing(K)
    return 0.5 * sp


def capacity_s(K, s: float, delta: float | None = None, max_iter: int = 10_000, rtol: float = 1e-8,
               solver: str = "gradient") -> CapacityEstimate:
    """Riesz s-capacity 1 / min I_s(mu) of a net.

    Parameters
    ----------
    K : (k, d) array
        Net of the compact set.
    s : float
        Exponent, positive.
    delta : float, optional
        Mollification; defaults to half the median nearest-neighbour distance.
        A single point with no explicit delta has capacity zero.
    solver : {'gradient', 'exact'}
        Projected gradient (default) or the NNLS equilibrium solver.
    """
    if not s > 0:
        raise ValueError("use capacity_log for s = 0")
    P = np.atleast_2d(np.asarray(K, float)) if len(K) else np.zeros((0, 1))
    if len(P) == 0:
        return CapacityEstimate(s, 0.0, math.inf, 0, 0.0)
    dl = _resolve_delta(P, delta)
    if not dl > 0:
        return CapacityEstimate(s, 0.0, math.inf, 0, 0.0, dl)
    M = kernel_matrix(P, s, dl)
    res = minimize_energy_exact(M) if solver == "exact" else None
    if res is None:
        res = minimize_energy(M, max_iter, rtol)
    self_e = float(np.sum(res.masses ** 2) * dl ** (-s))
    return CapacityEstimate(s, 1.0 / res.energy, res.energy, res.iterations, res.gap, dl, self_e, res.masses,
                            res.monotone)


def capacity_log(K, delta: float | None = None, max_iter: int = 10_000, rtol: float = 1e-8,
                 solver: str = "gradient") -> CapacityEstimate:
    """Logarithmic capacity exp(-2 pi / Cap_0) = exp(-2 pi min I_0)."""
    P = np.atleast_2d(np.asarray(K, float)) if len(K) else np.zeros((0, 1))
    if len(P) == 0:
        return CapacityEstimate(0.0, 0.0, math.inf, 0, 0.0)
    dl = _resolve_delta(P, delta)
    if not dl > 0:
        return CapacityEstimate(0.0, 0.0, math.inf, 0, 0.0, dl)
    M = kernel_matrix(P, 0.0, dl)
    res = minimize_energy_exact(M) if solver == "exact" else None
    if res is None:
        res = minimize_energy(M, max_iter, rtol)
    self_e = float(np.sum(res.masses ** 2) * math.log(1.0 / dl) / (2 * math.pi))
    return CapacityEstimate(0.0, math.exp(-2.0 * math.pi * res.energy), res.energy, res.iterations, res.gap, dl,
                            self_e, res.masses, res.monotone)


# ---------------------------------------------------------------------------
# dyadic content


def dyadic_root(K: np.ndarray):
    """Smallest axis-aligned cube (corner, side) containing the net."""
    P = np.atleast_2d(K)
    lo = P.min(axis=0)
    side = float(np.max(P.max(axis=0) - lo))
    return lo, side


def content_depth(K, depth: int = 8, root=None) -> int:
    """``depth`` capped so the finest cubes are no smaller than the net spacing."""
    P = np.atleast_2d(np.asarray(K, float))
    if len(P) < 2:
        return depth
    side = dyadic_root(P)[1] if root is None else float(root[1])
    sp = net_spacing(P)
    if not (sp > 0 and side > 0):
        return depth
    return max(0, min(depth, int(math.floor(math.log2(side / sp)))))


def hausdorff_content(K, s: float, depth: int = 8, root=None, cap_depth: bool = True) -> float:
    """Minimal sum of side^s over dyadic covers of the net, cubes down to ``depth``.

    Dynamic programming over the dyadic tree of ``root`` = (corner, side):
    a cube's cost is min(side^s, total cost of its children meeting the net),
    and cubes at the finest level cost side^s.  Defaults to the bounding cube.
    With ``cap_depth`` the depth is limited by ``content_depth`` so cubes
    finer than the net do not undercount a sampled continuum.
    """
    P = np.atleast_2d(np.asarray(K, float)) if len(K) else np.zeros((0, 1))
    if len(P) == 0:
        return 0.0
    lo, side = (dyadic_root(P) if root is None else (np.asarray(root[0], float), float(root[1])))
    if side <= 0:
        return 0.0
    if cap_depth:
        depth = content_depth(P, depth, (lo, side))
    n_cells = 2 ** depth
    idx = np.floor((P - lo) / side * n_cells).astype(np.int64)
    idx = np.clip(idx, 0, n_cells - 1)
    keys, inv = np.unique(idx, axis=0, return_inverse=True)
    cost = np.full(len(keys), (side / n_cells) ** s)
    for level in range(depth - 1, -1, -1):
        parents = keys // 2
        pk, pinv = np.unique(parents, axis=0, return_inverse=True)
        child_sum = np.zeros(len(pk))
        np.add.at(child_sum, pinv.ravel(), cost)
        cost = np.minimum(child_sum, (side / 2 ** level) ** s)
        keys = pk
    return float(cost.sum())


def choquet_integral(f, A, s: float, p: float = 1.0, levels: Sequence[float] | None = None, depth: int = 8,
                     root=None) -> float:
    """Integral of f^p against the dyadic content, by superlevel sets.

    ``f`` is a callable on points or an array of values on the net ``A``.
    Without ``levels`` the exact step-function integral over the distinct
    values of f is returned; with ``levels`` a left Riemann sum over the
    given increasing grid is used.
    """
    P = np.atleast_2d(np.asarray(A, float)) if len(A) else np.zeros((0, 1))
    if len(P) == 0:
        return 0.0
    v = np.asarray(f(P) if callable(f) else f, float)
    if np.any(v < 0):
        raise ValueError("integrand must be nonnegative")
    if root is None:
        root = dyadic_root(P)
    depth = content_depth(P, depth, root)
    if levels is None:
        t = np.unique(np.concatenate([[0.0], v]))
    else:
        t = np.unique(np.concatenate([[0.0], np.asarray(levels, float)]))
        t = t[t <= v.max()] if v.max() > 0 else t[:1]
        t = np.concatenate([t, [v.max()]]) if t[-1] < v.max() else t
    total = 0.0
    for lo_t, hi_t in zip(t[:-1], t[1:]):
        sel = v > lo_t
        if not sel.any():
            break
        total += hausdorff_content(P[sel], s, depth, root, cap_depth=False) * (hi_t ** p - lo_t ** p)
    return float(total)


# ---------------------------------------------------------------------------
# capacity density


def free_net(R: RegionPair, x, r: float, k: int | None = None, bisections: int = 40) -> tuple[np.ndarray, float]:
    """Net of (R^{n+1} minus the two regions) inside B(x, r).

    Lattice points of spacing h that are free, plus a boundary point on
    every lattice edge whose endpoints lie in opposite regions (found by
    bisection; such an edge must cross the free set).
    """
    d = R.dim
    k = k or (41 if d == 2 else 17)
    x = np.asarray(x, float)
    ax = np.linspace(-r, r, k)
    h = ax[1] - ax[0]
    grid = np.array(np.meshgrid(*[ax] * d, indexing="ij"))
    pts = x + np.moveaxis(grid, 0, -1)
    inside = np.linalg.norm(pts - x, axis=-1) < r
    lab = R.classify(pts.reshape(-1, d)).reshape(pts.shape[:-1])
    out = [pts[inside & (lab == 0)]]
    for axis in range(d):
        a = [slice(None)] * d
        b = [slice(None)] * d
        a[axis] = slice(0, -1)
        b[axis] = slice(1, None)
        la, lb = lab[tuple(a)], lab[tuple(b)]
        ia, ib = inside[tuple(a)], inside[tuple(b)]
        cross = (la * lb == -1) & ia & ib
        if not cross.any():
            continue
        p0 = pts[tuple(a)][cross]
        p1 = pts[tuple(b)][cross]
        l0 = la[cross].astype(int)
        for _ in range(bisections):
            mid = 0.5 * (p0 + p1)
            lm = R.classify(mid).astype(int)
            same0 = lm == l0
            p0 = np.where(same0[:, None], mid, p0)
            p1 = np.where((~same0 & (lm != 0))[:, None], mid, p1)
            hit = lm == 0
            if hit.any():
                p0[hit] = mid[hit]
                p1[hit] = mid[hit]
        out.append(0.5 * (p0 + p1))
    net = np.vstack(out) if out else np.zeros((0, d))
    if len(net):
        net = np.unique(np.round(net, 14), axis=0)
    return net, h


def cdc_check(R: RegionPair, x, r: float, s: float, c: float, k: int | None = None):
    """Whether Cap_s(B(x, r) minus the regions) >= c r^s, with the margin.

    The free set is represented by ``free_net``; the mollification is half
    the lattice spacing.  Isolated single points carry zero capacity.
    """
    net, h = free_net(R, x, r, k)
    if len(net) < 2:
        cap = 0.0
    else:
        cap = capacity_s(net, s, delta=0.5 * h).value
    margin = cap - c * r ** s
    return margin >= 0, margin, {"net_points": int(len(net)), "spacing": h, "capacity": cap}


# ---------------------------------------------------------------------------
# thick points and the capacitary epsilon


def _cap_net(center_dir: np.ndarray, ang: float, M: int) -> np.ndarray:
    """M nearly uniform unit vectors in the spherical cap of angular radius ``ang``."""
    k = np.arange(M)
    z = 1.0 - (1.0 - math.cos(ang)) * (k + 0.5) / M
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    rho = np.sqrt(np.clip(1 - z * z, 0, None))
    local = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    u = center_dir
    a = np.eye(3)[np.argmin(np.abs(u))]
    e1 = np.cross(u, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    return local @ np.vstack([e1, e2, u])


@dataclass
class ThickSet:
    points: np.ndarray
    side: np.ndarray
    thick: np.ndarray
    margin: np.ndarray
    dist_plane: np.ndarray


def thick_points(R: RegionPair, x, r: float, H: HalfSpace, c0: float, a: float, grid: int = 400,
                 probe: int = 24) -> ThickSet:
    """Label sphere nodes y in S_H^i minus Omega^i as thick or not.

    y is thick when Cap_L of the closed cap B(y, a dist(y, L_H)) on S(x, r),
    with Omega^i removed, is at least c0 dist(y, L_H).  The cap is
    represented by ``probe`` spiral nodes and the logarithmic capacity is
    computed with the exact equilibrium solver.
    """
    if R.dim != 3:
        raise ValueError("thick points are implemented for scenes in R^3")
    x = np.asarray(x, float)
    dirs = fibonacci_sphere(grid)
    pts = x + r * dirs
    lab = R.classify(pts)
    s = dirs @ H.normal
    side = np.where(s > 0, 1, np.where(s < 0, -1, 0)).astype(np.int8)
    cand = (side != 0) & (lab != side)
    dist = r * np.abs(s)
    thick = np.zeros(grid, dtype=bool)
    margin = np.full(grid, -np.inf)
    for i in np.nonzero(cand)[0]:
        rad = a * dist[i]
        if rad <= 0:
            continue
        ang = 2.0 * math.asin(min(1.0, rad / (2.0 * r)))
        cap_dirs = _cap_net(dirs[i], ang, probe)
        cpts = x + r * cap_dirs
        keep = R.classify(cpts) != side[i]
        net = cpts[keep]
        if len(net) < 2:
            val = 0.0
        else:
            spacing = r * ang * math.sqrt(math.pi / probe)
            val = capacity_log(net, delta=0.5 * spacing, solver="exact").value
        margin[i] = val - c0 * dist[i]
        thick[i] = margin[i] >= 0
    return ThickSet(pts, side, thick, margin, dist)


def epsilon_s(R: RegionPair, x, r: float, s: float, c0: float, a: float, directions: int = 24, grid: int = 400,
              probe: int = 24, extra_normals: Sequence[np.ndarray] = ()) -> tuple[float, HalfSpace]:
    """inf_H r^{-s} times the Choquet integral of (dist(y, L_H)/r)^{n-s} over thick points.

    Normals come from a Fibonacci set of ``directions`` plus
    ``extra_normals``; the dyadic content uses the cube [x - r, x + r]^3
    refined down to the sphere-node spacing.
    """
    x = np.asarray(x, float)
    n = R.dim - 1
    if not 0 < s <= n:
        raise ValueError("s must lie in (0, n]")
    normals = list(fibonacci_sphere(directions)) + [np.asarray(u, float) / np.linalg.norm(u) for u in extra_normals]
    root = (x - r, 2.0 * r)
    spacing = r * math.sqrt(4 * math.pi / grid)
    depth = max(1, math.ceil(math.log2(2.0 * r / spacing)))
    best = (math.inf, None)
    for u in normals:
        H = HalfSpace(x, u)
        T = thick_points(R, x, r, H, c0, a, grid, probe)
        if not T.thick.any():
            val = 0.0
        else:
            f = (T.dist_plane[T.thick] / r) ** (n - s)
            val = choquet_integral(f, T.points[T.thick], s, 1.0, depth=depth, root=root) / r ** s
        if val < best[0]:
            best = (val, H)
    return best


# ---------------------------------------------------------------------------
# slicing


def annulus_slices(K: np.ndarray, z: np.ndarray, width: float):
    """Split the net into shells {r_k <= |y - z| < r_k + width}."""
    d = np.linalg.norm(K - z, axis=1)
    k = np.floor(d / width).astype(np.int64)
    out = []
    for b in np.unique(k):
        out.append((b * width, K[k == b]))
    return out


def slicing_check(K: np.ndarray, G_points: np.ndarray, G_weights: np.ndarray, s: float, r0: float,
                  n: int | None = None, delta: float | None = None) -> dict:
    """Both sides of the slicing inequality for a net K and a weighted sample of G.

    LHS = Cap_s(K) H^n(G)^2 / r0^n and
    RHS = sum_z w_z sum_shells width Cap_{s-1}(K cap shell), with shells of
    width equal to the net spacing around each sample point z of G.
    """
    if not s > 1:
        raise ValueError("slicing needs s > 1")
    K = np.atleast_2d(np.asarray(K, float)) if len(K) else np.zeros((0, 3))
    G_points = np.atleast_2d(G_points)
    G_weights = np.asarray(G_weights, float)
    n = n if n is not None else G_points.shape[1] - 1
    area = float(G_weights.sum())
    if len(K) == 0:
        return {"lhs": 0.0, "rhs": 0.0, "ratio": math.nan, "area": area, "capacity": 0.0}
    spacing = net_spacing(K) if len(K) > 1 else 0.0
    dl = delta if delta is not None else 0.5 * spacing
    cap = capacity_s(K, s, delta=dl).value
    lhs = cap * area ** 2 / r0 ** n
    width = spacing
    rhs = 0.0
    for z, w in zip(G_points, G_weights):
        inner = 0.0
        for _, piece in annulus_slices(K, z, width):
            inner += width * capacity_s(piece, s - 1.0, delta=dl, solver="exact").value
        rhs += w * inner
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else math.nan, "area": area,
            "capacity": cap, "spacing": spacing, "delta": dl}
