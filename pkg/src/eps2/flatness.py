"""Weighted point clouds, densities and Jones beta-infinity numbers."""
from __future__ import annotations

import csv
import itertools
import math
from pathlib import Path

import numpy as np
from numba import njit
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .geometry import Ball, Hyperplane, fibonacci_sphere


class EmptyIntersection(ValueError):
    """The ball contains no point of the set."""


class GrowthViolation(ValueError):
    """mu(B(x, r)) exceeds C0 r^n on the dyadic test grid."""


# ---------------------------------------------------------------------------
# numba kernels for planar sets (points presorted lexicographically)


@njit(cache=True)
def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@njit(cache=True)
def _min_width(hx, hy, m):
    """Rotating calipers: (width, nx, ny, offset) of the thinnest strip.

    The strip midline is {y : n . y = offset}.  A NaN normal means the hull
    is a single point, so every line through it is optimal.
    """
    nan = np.nan
    if m == 1:
        return 0.0, nan, nan, 0.0
    if m == 2:
        ex = hx[1] - hx[0]
        ey = hy[1] - hy[0]
        L = math.hypot(ex, ey)
        if L == 0.0:
            return 0.0, nan, nan, 0.0
        nx = -ey / L
        ny = ex / L
        return 0.0, nx, ny, nx * hx[0] + ny * hy[0]
    best = np.inf
    bnx = nan
    bny = nan
    boff = 0.0
    j = 1
    for i in range(m):
        i2 = (i + 1) % m
        ex = hx[i2] - hx[i]
        ey = hy[i2] - hy[i]
        L = math.hypot(ex, ey)
        if L == 0.0:
            continue
        while True:
            j2 = (j + 1) % m
            a2 = abs(_cross(hx[i], hy[i], hx[i2], hy[i2], hx[j2], hy[j2]))
            a1 = abs(_cross(hx[i], hy[i], hx[i2], hy[i2], hx[j], hy[j]))
            if a2 > a1:
                j = j2
            else:
                break
        w = abs(_cross(hx[i], hy[i], hx[i2], hy[i2], hx[j], hy[j])) / L
        if w < best:
            best = w
            bnx = -ey / L
            bny = ex / L
            boff = bnx * hx[i] + bny * hy[i] + 0.5 * w
    return best, bnx, bny, boff


LEAF = 16


@njit(cache=True)
def _hull_idx(xs, ys, idx, n, out):
    """Monotone chain over points xs[idx[:n]] (lexicographic order); returns CCW vertex indices."""
    k = 0
    for q in range(n):
        i = idx[q]
        while k >= 2 and _turn(xs, ys, out[k - 2], out[k - 1], i) <= 0.0:
            k -= 1
        out[k] = i
        k += 1
    t = k + 1
    for q in range(n - 2, -1, -1):
        i = idx[q]
        while k >= t and _turn(xs, ys, out[k - 2], out[k - 1], i) <= 0.0:
            k -= 1
        out[k] = i
        k += 1
    return k - 1 if n > 1 else k


@njit(cache=True)
def _turn(xs, ys, o, a, b):
    """Cross product with near-collinear triples snapped to zero."""
    ax = xs[a] - xs[o]
    ay = ys[a] - ys[o]
    bx = xs[b] - xs[o]
    by = ys[b] - ys[o]
    c = ax * by - ay * bx
    if abs(c) <= 1e-14 * (abs(ax) + abs(ay)) * (abs(bx) + abs(by)):
        return 0.0
    return c


@njit(cache=True)
def _build_tree(xs, ys, w):
    """Implicit binary tree over the sorted points with cached hull vertices.

    Node v covers leaves [v * 2^depth ...]; arrays are heap indexed from 1.
    Each node stores bbox, mass and its hull vertices sorted by index.
    """
    N = xs.size
    nleaf = 1
    while nleaf * LEAF < N:
        nleaf *= 2
    nn = 2 * nleaf
    lo = np.zeros(nn, dtype=np.int64)
    hi = np.zeros(nn, dtype=np.int64)
    box = np.zeros((nn, 4))
    mass = np.zeros(nn)
    hoff = np.zeros(nn + 1, dtype=np.int64)
    for leaf in range(nleaf):
        v = nleaf + leaf
        lo[v] = min(N, leaf * LEAF)
        hi[v] = min(N, (leaf + 1) * LEAF)
    for v in range(nleaf - 1, 0, -1):
        lo[v] = lo[2 * v]
        hi[v] = hi[2 * v + 1]
    tmp = np.empty(2 * N + 2, dtype=np.int64)
    cand = np.empty(N + 1, dtype=np.int64)
    # leaves first, then parents from the bottom up
    lists = [np.empty(0, dtype=np.int64) for _ in range(nn)]
    for v in range(nn - 1, 0, -1):
        a, b = lo[v], hi[v]
        if a >= b:
            box[v, 0] = np.inf
            continue
        box[v, 0] = xs[a]
        box[v, 1] = xs[b - 1]
        box[v, 2] = np.min(ys[a:b])
        box[v, 3] = np.max(ys[a:b])
        mass[v] = np.sum(w[a:b])
        if v >= nleaf:
            n = b - a
            for q in range(n):
                cand[q] = a + q
        else:
            l1 = lists[2 * v]
            l2 = lists[2 * v + 1]
            n = l1.size + l2.size
            cand[:l1.size] = l1
            cand[l1.size:n] = l2
        m = _hull_idx(xs, ys, cand, n, tmp)
        lists[v] = np.sort(tmp[:m].copy())
    total = 0
    for v in range(nn):
        hoff[v] = total
        total += lists[v].size
    hoff[nn] = total
    flat = np.empty(total, dtype=np.int64)
    for v in range(nn):
        flat[hoff[v]:hoff[v + 1]] = lists[v]
    return nleaf, lo, hi, box, mass, hoff, flat


@njit(cache=True)
def _strip_in_ball(xs, ys, w, tree, cx, cy, r, idx, hull):
    """Mass, count and thinnest strip of the points in the closed ball B(c, r).

    Nodes lying inside the ball contribute only their cached hull vertices,
    which leaves the hull of the union unchanged.
    """
    nleaf, lo, hi, box, nmass, hoff, flat = tree
    r2 = r * r
    stack = np.empty(128, dtype=np.int64)
    sp = 0
    stack[sp] = 1
    sp += 1
    k = 0
    cnt = 0
    mass = 0.0
    while sp > 0:
        sp -= 1
        v = stack[sp]
        if lo[v] >= hi[v]:
            continue
        x0, x1, y0, y1 = box[v, 0], box[v, 1], box[v, 2], box[v, 3]
        nx_ = max(x0 - cx, 0.0, cx - x1)
        ny_ = max(y0 - cy, 0.0, cy - y1)
        if nx_ * nx_ + ny_ * ny_ > r2:
            continue
        fx = max(cx - x0, x1 - cx)
        fy = max(cy - y0, y1 - cy)
        if fx * fx + fy * fy <= r2:
            for q in range(hoff[v], hoff[v + 1]):
                idx[k] = flat[q]
                k += 1
            mass += nmass[v]
            cnt += hi[v] - lo[v]
        elif v >= nleaf:
            for i in range(lo[v], hi[v]):
                dx = xs[i] - cx
                dy = ys[i] - cy
                if dx * dx + dy * dy <= r2:
                    idx[k] = i
                    k += 1
                    mass += w[i]
                    cnt += 1
        else:
            stack[sp] = 2 * v + 1
            stack[sp + 1] = 2 * v
            sp += 2
    if k == 0:
        return 0.0, 0, np.inf, np.nan, np.nan, 0.0
    m = _hull_idx(xs, ys, idx, k, hull)
    hx = np.empty(m)
    hy = np.empty(m)
    for q in range(m):
        hx[q] = xs[hull[q]]
        hy[q] = ys[hull[q]]
    wd, nx, ny, off = _min_width(hx, hy, m)
    return mass, cnt, wd, nx, ny, off


@njit(cache=True)
def _scan_planar(xs, ys, w, tree, centers, radii, theta, cos_alpha, refx, refy):
    """Top-down scan of the radius grid; returns the first bad index per center.

    A ball is good when mass / r >= theta and the thinnest-strip normal
    makes an angle at most alpha with the reference normal.  The index is
    ``len(radii)`` when every grid radius is good.
    """
    N = xs.size
    idx = np.empty(N, dtype=np.int64)
    hull = np.empty(2 * N + 2, dtype=np.int64)
    K = radii.size
    M = centers.shape[0]
    stop = np.full(M, K, dtype=np.int64)
    dens = np.zeros(M)
    for ii in range(M):
        cx = centers[ii, 0]
        cy = centers[ii, 1]
        for j in range(K):
            r = radii[j]
            mass, k, wd, nx, ny, off = _strip_in_ball(xs, ys, w, tree, cx, cy, r, idx, hull)
            t = mass / r
            bad = t < theta
            if not bad and not np.isnan(nx):
                bad = abs(nx * refx + ny * refy) < cos_alpha
            if bad:
                stop[ii] = j
                dens[ii] = t
                break
    return stop, dens


@njit(cache=True)
def _mass_profile(P, w, centers, radii):
    """mu(B(c_i, r_k)) for ascending radii; P sorted by its first column."""
    M = centers.shape[0]
    K = radii.size
    d = P.shape[1]
    out = np.zeros((M, K))
    xs = P[:, 0].copy()
    rmax = radii[K - 1]
    for i in range(M):
        lo = np.searchsorted(xs, centers[i, 0] - rmax)
        hi = np.searchsorted(xs, centers[i, 0] + rmax, side="right")
        for j in range(lo, hi):
            s = 0.0
            for c in range(d):
                t = P[j, c] - centers[i, c]
                s += t * t
            dist = math.sqrt(s)
            if dist <= rmax:
                k = np.searchsorted(radii, dist)
                out[i, k] += w[j]
        for k in range(1, K):
            out[i, k] += out[i, k - 1]
    return out


def planar_strip(P: np.ndarray) -> tuple[float, float, float, float]:
    """Exact thinnest strip (width, nx, ny, offset) of a planar point set."""
    Q = P[np.lexsort(P.T[::-1])]
    xs, ys = Q[:, 0].copy(), Q[:, 1].copy()
    out = np.empty(2 * len(Q) + 2, dtype=np.int64)
    m = _hull_idx(xs, ys, np.arange(len(Q)), len(Q), out)
    return _min_width(xs[out[:m]], ys[out[:m]], m)


# ---------------------------------------------------------------------------
# weighted clouds


def median_spacing(points: np.ndarray) -> float:
    """Median nearest-neighbour distance (0 for a single point)."""
    if len(points) < 2:
        return 0.0
    dist, _ = cKDTree(points).query(points, k=2)
    return float(np.median(dist[:, 1]))


class WeightedCloud:
    """Points with nonnegative weights and an upper n-growth constant.

    Parameters
    ----------
    points : (N, d) array
    weights : (N,) array, optional
        Defaults to the normalized counting measure.
    growth_const : float, optional
        Checked on every data point and every dyadic radius between the
        median spacing and the diameter.  When omitted the smallest valid
        constant on that grid is recorded instead.
    """

    def __init__(self, points, weights=None, growth_const: float | None = None):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.ndim != 2 or P.shape[1] not in (2, 3) or len(P) == 0:
            raise ValueError("points must be a nonempty (N, 2) or (N, 3) array")
        W = np.full(len(P), 1.0 / len(P)) if weights is None else np.asarray(weights, dtype=float).ravel()
        if W.shape != (len(P),) or np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite, nonnegative and one per point")
        if W.sum() <= 0:
            raise ValueError("total mass must be positive")
        order = np.lexsort(P.T[::-1])
        self.order = order
        self.points = P[order]
        self.weights = W[order]
        self.dim = P.shape[1]
        self.n = self.dim - 1
        self.tree = cKDTree(self.points)
        self._tree2 = None
        self.growth_grid = self._dyadic_radii()
        ratio = self.growth_ratio(self.growth_grid)
        if growth_const is None:
            self.growth_const = ratio
        else:
            if ratio > growth_const * (1 + 1e-12):
                raise GrowthViolation(f"mu(B)/r^n reaches {ratio:.6g} > C0 = {growth_const:.6g}")
            self.growth_const = float(growth_const)

    @property
    def xs(self) -> np.ndarray:
        return np.ascontiguousarray(self.points[:, 0])

    @property
    def ys(self) -> np.ndarray:
        return np.ascontiguousarray(self.points[:, 1])

    def planar_tree(self):
        """Hull-caching tree over the sorted points (planar clouds only)."""
        if self._tree2 is None:
            self._tree2 = _build_tree(self.xs, self.ys, self.weights)
        return self._tree2

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def _dyadic_radii(self) -> np.ndarray:
        diam = self.diameter()
        lo = median_spacing(self.points) or diam or 1.0
        hi = max(diam, lo)
        k0, k1 = math.floor(math.log2(lo)), math.ceil(math.log2(hi))
        return 2.0 ** np.arange(k0, k1 + 1)

    def growth_ratio(self, radii) -> float:
        radii = np.sort(np.asarray(radii, float))
        m = _mass_profile(self.points, self.weights, self.points, radii)
        return float(np.max(m / radii[None, :] ** self.n))

    def diameter(self) -> float:
        P = self.points
        if len(P) <= 2:
            return float(np.linalg.norm(P[-1] - P[0]))
        try:
            V = P[ConvexHull(P).vertices]
        except QhullError:
            # flat input: the extreme points along the principal axis suffice
            c = P - P.mean(axis=0)
            u = np.linalg.svd(c, full_matrices=False)[2][0]
            s = c @ u
            return float(np.linalg.norm(P[np.argmax(s)] - P[np.argmin(s)]))
        dif = V[:, None, :] - V[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", dif, dif))))

    def in_ball(self, B: Ball) -> np.ndarray:
        """Indices (in sorted order) of the points in the closed ball."""
        return np.array(sorted(self.tree.query_ball_point(B.center, B.radius)), dtype=int)

    def mass(self, B: Ball) -> float:
        idx = self.in_ball(B)
        return float(self.weights[idx].sum()) if len(idx) else 0.0

    @classmethod
    def from_csv(cls, path, growth_const: float | None = None) -> "WeightedCloud":
        """Rows ``x_1, ..., x_d, weight``; a header row is skipped if present."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if rows:
                        raise
        A = np.array(rows)
        return cls(A[:, :-1], A[:, -1], growth_const)

    def to_csv(self, path) -> None:
        names = [f"x{i + 1}" for i in range(self.dim)] + ["weight"]
        with open(Path(path), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(names)
            for p, w in zip(self.points, self.weights):
                wr.writerow([repr(float(v)) for v in p] + [repr(float(w))])


def theta_density(mu: WeightedCloud, B: Ball) -> float:
    """mu(B) / rad(B)^n over the closed ball."""
    return mu.mass(B) / B.radius ** mu.n


# ---------------------------------------------------------------------------
# beta-infinity


def _width(P: np.ndarray, u: np.ndarray) -> float:
    s = P @ u
    return float(s.max() - s.min())


def _nearest_normal(D: np.ndarray, ref: np.ndarray) -> np.ndarray | None:
    """Unit vector orthogonal to the rows of D closest to ``ref``; None if D has full rank."""
    d = D.shape[1]
    if len(D) == 0:
        basis = np.eye(d)
    else:
        _, s, vt = np.linalg.svd(D, full_matrices=len(D) < d)
        rank = int(np.sum(s > 1e-12 * s[0])) if s[0] > 0 else 0
        if rank >= d:
            return None
        basis = vt[rank:]
    v = basis.T @ (basis @ ref)
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        v = basis[0]
        nv = np.linalg.norm(v)
    return v / nv


def _candidate_normals(P: np.ndarray) -> np.ndarray:
    """Directions that contain the minimal-width direction of P.

    In the plane the thinnest strip is flush with a segment between two
    points; in space it is either flush with a facet or touches two skew
    edges, so its normal is a cross product of two difference vectors.
    """
    d = P.shape[1]
    diffs = np.array([P[j] - P[i] for i, j in itertools.combinations(range(len(P)), 2)])
    if d == 2:
        cand = np.stack([-diffs[:, 1], diffs[:, 0]], axis=1)
    else:
        cand = np.array([np.cross(a, b) for a, b in itertools.combinations(diffs, 2)])
    nrm = np.linalg.norm(cand, axis=1)
    keep = nrm > 1e-14
    return cand[keep] / nrm[keep, None]


def minimax_exact(P: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact thinnest strip by enumerating support sets (small inputs)."""
    C = _candidate_normals(P)
    S = P @ C.T
    widths = S.max(axis=0) - S.min(axis=0)
    k = int(np.argmin(widths))
    return float(widths[k]), C[k]


def _minimax_3d(P: np.ndarray, ref: np.ndarray, n_dirs: int = 2000) -> tuple[float, np.ndarray]:
    try:
        hull = ConvexHull(P)
        V = P[hull.vertices]
    except QhullError:
        V = P
    if len(V) <= 12:
        return minimax_exact(V)
    dirs = fibonacci_sphere(n_dirs)
    dirs = dirs[dirs[:, 2] >= 0]
    c = V - V.mean(axis=0)
    pca = np.linalg.svd(c, full_matrices=False)[2][-1]
    cand = np.vstack([dirs, pca, ref, hull.equations[:, :3]])
    S = V @ cand.T
    widths = S.max(axis=0) - S.min(axis=0)
    u0 = cand[int(np.argmin(widths))]

    a = np.eye(3)[np.argmin(np.abs(u0))]
    e1 = np.cross(u0, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u0, e1)

    def f(z):
        u = u0 + z[0] * e1 + z[1] * e2
        return _width(V, u / np.linalg.norm(u))

    res = minimize(f, np.zeros(2), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
    u = u0 + res.x[0] * e1 + res.x[1] * e2
    u /= np.linalg.norm(u)
    wu = _width(V, u)
    w0 = float(np.min(widths))
    return (wu, u) if wu <= w0 else (w0, u0)


def minimax_plane(P: np.ndarray, ref=None) -> tuple[float, np.ndarray, float]:
    """Half-width, unit normal and offset of the best approximating hyperplane.

    The plane is {y : normal . y = offset}.  Degenerate inputs, for which
    many planes are optimal, return the optimal normal nearest ``ref``.
    """
    P = np.atleast_2d(np.asarray(P, float))
    d = P.shape[1]
    ref = np.eye(d)[-1] if ref is None else np.asarray(ref, float) / np.linalg.norm(ref)
    u = _nearest_normal(P[1:] - P[0], ref)
    if u is not None:
        width = 0.0
    elif d == 2:
        width, nx, ny, _ = planar_strip(P)
        u = np.array([nx, ny])
    else:
        width, u = _minimax_3d(P, ref)
    if u @ ref < 0:
        u = -u
    s = P @ u
    return 0.5 * float(s.max() - s.min()), u, 0.5 * float(s.max() + s.min())


def beta_inf(E, B: Ball, ref=None) -> tuple[float, Hyperplane]:
    """Jones beta-infinity of E in B with its minimizing hyperplane.

    beta = inf_L sup_{y in E cap B} dist(y, L) / rad(B), the closed ball
    being used.  Raises EmptyIntersection when E misses B.
    """
    P = E.points if isinstance(E, WeightedCloud) else np.atleast_2d(np.asarray(E, float))
    inside = np.linalg.norm(P - B.center, axis=1) <= B.radius
    if not np.any(inside):
        raise EmptyIntersection("the ball contains no point of E")
    Q = P[inside]
    half, u, off = minimax_plane(Q, ref)
    foot = Q.mean(axis=0)
    foot = foot - (foot @ u - off) * u
    return half / B.radius, Hyperplane(foot, u)


def beta_bruteforce(P, B: Ball, n_dirs: int = 100_000) -> float:
    """Exhaustive direction scan used as a test oracle."""
    P = np.atleast_2d(np.asarray(P, float))
    Q = P[np.linalg.norm(P - B.center, axis=1) <= B.radius]
    if P.shape[1] == 2:
        t = np.pi * np.arange(n_dirs) / n_dirs
        U = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        U = fibonacci_sphere(2 * n_dirs)
    S = Q @ U.T
    return float(np.min(S.max(axis=0) - S.min(axis=0))) / (2 * B.radius)


def plane_angle(u, v) -> float:
    """Angle between hyperplanes with normals u and v, folded to [0, pi/2]."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    c = abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


def ball_is_good(mu: WeightedCloud, B: Ball, theta: float, alpha: float, L_ref: Hyperplane) -> bool:
    """Theta_mu(B) >= theta and the beta-plane of B within angle alpha of L_ref."""
    if theta_density(mu, B) < theta:
        return False
    try:
        _, L = beta_inf(mu, B, L_ref.normal)
    except EmptyIntersection:
        return False
    return plane_angle(L.normal, L_ref.normal) <= alpha


def scan_stop(mu: WeightedCloud, centers: np.ndarray, radii: np.ndarray, theta: float, alpha: float,
              ref_normal, fast: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """First bad index on a descending radius grid for each center.

    Returns ``(stop, density)``; ``stop == len(radii)`` when every grid
    radius is good, and ``density`` is Theta at the first bad radius.  The
    planar fast path and the generic path compute the same quantities.
    """
    centers = np.atleast_2d(np.asarray(centers, float))
    radii = np.asarray(radii, float)
    ref = np.asarray(ref_normal, float)
    ref = ref / np.linalg.norm(ref)
    if fast and mu.dim == 2:
        return _scan_planar(mu.xs, mu.ys, mu.weights, mu.planar_tree(), centers, radii,
                            float(theta), math.cos(alpha), ref[0], ref[1])
    K = len(radii)
    stop = np.full(len(centers), K, dtype=np.int64)
    dens = np.zeros(len(centers))
    L_ref = Hyperplane(np.zeros(mu.dim), ref)
    for i, c in enumerate(centers):
        for j, r in enumerate(radii):
            B = Ball(c, float(r))
            if not ball_is_good(mu, B, theta, alpha, L_ref):
                stop[i] = j
                dens[i] = theta_density(mu, B)
                break
    return stop, dens
