"""Stopping-time construction of a Lipschitz graph approximating a weighted cloud.

Starting from a base ball B0 the cloud is scanned top-down on a geometric
radius grid.  A ball is good when its density is at least theta and its
beta-infinity plane is within angle alpha of the plane of B0.  The first
bad radius at each point defines the stopping height h, the regularized
distance d and its projection D onto the base plane L0.  A Whitney
decomposition of L0 relative to D and a smooth partition of unity glue the
planes of nearby very good balls into a graph A over L0.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.linalg import null_space
from scipy.spatial import cKDTree

from .flatness import EmptyIntersection, WeightedCloud, median_spacing, minimax_plane, scan_stop
from .geometry import Ball, Hyperplane

RADIUS_FACTOR = 2.0 ** 0.25
Z, LD, BA = "Z", "LD", "BA"


class DensityTooLow(ValueError):
    """mu(B0) is below c0 rad(B0)^n."""


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# stopping heights


def radius_grid(r_top: float, r_bottom: float, factor: float = RADIUS_FACTOR) -> np.ndarray:
    """Descending grid r_top * factor^-j down to the first value <= r_bottom."""
    k = max(0, math.ceil(math.log(r_top / r_bottom) / math.log(factor) - 1e-12))
    return r_top * factor ** (-np.arange(k + 1, dtype=float))


@dataclass
class StopData:
    """Per-point outcome of the top-down scan.

    ``stop`` is the index of the first bad grid radius (``len(radii)`` if
    none); ``h`` is the smallest radius from which every larger grid radius
    is good, with 0 for points good down to the bottom of the grid.
    """

    radii: np.ndarray
    stop: np.ndarray
    density: np.ndarray

    @property
    def h(self) -> np.ndarray:
        K = len(self.radii)
        out = np.where(self.stop >= K, 0.0, self.radii[np.maximum(self.stop - 1, 0)])
        return out

    @property
    def very_good(self) -> np.ndarray:
        """Points owning at least one very good ball."""
        return self.stop >= 1


def stopping_height(mu: WeightedCloud, x, r0: float, theta: float, alpha: float, ref_normal,
                    radius_grid_: np.ndarray) -> float:
    """h(x) on a descending grid: smallest radius r with B(x, s) good for all grid s >= r.

    Returns the smallest grid radius when every ball is good and the top
    radius when the top ball already fails.
    """
    radii = np.asarray(radius_grid_, float)
    stop, _ = scan_stop(mu, np.atleast_2d(x), radii, theta, alpha, ref_normal)
    j = int(stop[0])
    if j >= len(radii):
        return float(radii[-1])
    return float(radii[max(j - 1, 0)])


def classify_points(stop: np.ndarray, density: np.ndarray, n_radii: int, theta: float) -> np.ndarray:
    """Z for points good down to the grid bottom, LD when Theta <= theta at stopping, BA otherwise."""
    lab = np.full(len(stop), BA, dtype=object)
    lab[density <= theta] = LD
    lab[stop >= n_radii] = Z
    return lab


# ---------------------------------------------------------------------------
# regularized distance


@njit(cache=True)
def _d_kernel(X, Zc, h):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        best = np.inf
        for j in range(Zc.shape[0]):
            s = 0.0
            for c in range(X.shape[1]):
                t = X[i, c] - Zc[j, c]
                s += t * t
            v = math.sqrt(s) + h[j]
            if v < best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def _box_kernel(lo, side, Zc, h):
    """min_j dist(Zc_j, cube) + h_j for axis-aligned cubes [lo, lo + side]."""
    out = np.empty(lo.shape[0])
    for i in range(lo.shape[0]):
        best = np.inf
        for j in range(Zc.shape[0]):
            s = 0.0
            for c in range(lo.shape[1]):
                t = max(lo[i, c] - Zc[j, c], 0.0, Zc[j, c] - lo[i, c] - side[i])
                s += t * t
            v = math.sqrt(s) + h[j]
            if v < best:
                best = v
        out[i] = best
    return out


def d_function(x, centers, radii) -> np.ndarray:
    """d(x) = min over balls B(z, r) of |x - z| + r; +inf for an empty family."""
    X = np.atleast_2d(np.asarray(x, float))
    C = np.atleast_2d(np.asarray(centers, float)).reshape(-1, X.shape[1])
    if len(C) == 0:
        return np.full(len(X), np.inf)
    return _d_kernel(X, C, np.asarray(radii, float).ravel())


@dataclass
class Frame:
    """Coordinates adapted to L0: x = origin + basis^T p + t normal."""

    origin: np.ndarray
    normal: np.ndarray
    basis: np.ndarray

    @classmethod
    def from_normal(cls, origin, normal) -> "Frame":
        nu = np.asarray(normal, float) / np.linalg.norm(normal)
        if len(nu) == 2:
            basis = np.array([[nu[1], -nu[0]]])
        else:
            basis = null_space(nu[None, :]).T
            if np.linalg.det(np.vstack([basis, nu])) < 0:
                basis[[0, 1]] = basis[[1, 0]]
        return cls(np.asarray(origin, float), nu, basis)

    def proj(self, X) -> np.ndarray:
        return (np.atleast_2d(X) - self.origin) @ self.basis.T

    def perp(self, X) -> np.ndarray:
        return (np.atleast_2d(X) - self.origin) @ self.normal

    def lift(self, p, t) -> np.ndarray:
        return self.origin + np.atleast_2d(p) @ self.basis + np.asarray(t)[:, None] * self.normal


def D_function(p, frame: Frame, centers, radii) -> np.ndarray:
    """D(p) = inf over x above p of d(x).

    The infimum along the vertical line is attained at the height of each
    center, so D(p) = min_z |p - Pi z| + r_z exactly.
    """
    C = np.atleast_2d(np.asarray(centers, float))
    if len(C) == 0:
        return np.full(len(np.atleast_2d(p)), np.inf)
    return d_function(np.atleast_2d(np.asarray(p, float)), frame.proj(C), radii)


def D_cube(lo, side, Pc, hz) -> np.ndarray:
    """D(I) = inf_{p in I} D(p) for cubes [lo, lo + side] (exact)."""
    lo = np.atleast_2d(np.asarray(lo, float))
    if len(Pc) == 0:
        return np.full(len(lo), np.inf)
    return _box_kernel(lo, np.broadcast_to(np.asarray(side, float), (len(lo),)).copy(), Pc, hz)


# ---------------------------------------------------------------------------
# Whitney cubes


@dataclass
class CubeFamily:
    """Dyadic cubes 2^level * (index + [0, 1]^n) of L0.

    ``kind`` is 'W' for Whitney cubes and 'U' for blocks left at the
    resolution floor, where D is below 20 times the smallest side.
    """

    level: np.ndarray
    index: np.ndarray
    kind: np.ndarray
    window_level: int
    floor_level: int

    @property
    def side(self) -> np.ndarray:
        return np.ldexp(1.0, self.level)

    @property
    def lo(self) -> np.ndarray:
        return self.index * self.side[:, None]

    @property
    def center(self) -> np.ndarray:
        return (self.index + 0.5) * self.side[:, None]

    def __len__(self) -> int:
        return len(self.level)

    def select(self, mask) -> "CubeFamily":
        return CubeFamily(self.level[mask], self.index[mask], self.kind[mask], self.window_level, self.floor_level)


def whitney(n: int, D_of_cubes, D_of_points, window_level: int, floor_level: int) -> CubeFamily:
    """Maximal dyadic cubes with side < D(I)/20 inside [-2^w, 2^w]^n.

    Parameters
    ----------
    D_of_cubes : callable (lo, side) -> D(I)
    D_of_points : callable p -> D(p), used to stop refining cubes on which
        D stays below 20 * 2^floor_level (no Whitney cube can live there).
    window_level, floor_level : int
        Window half side 2^window_level; smallest side 2^floor_level.
    """
    top = np.array(np.meshgrid(*[[-1, 0]] * n, indexing="ij")).reshape(n, -1).T.astype(np.int64)
    lev = window_level
    cur = top
    levels, idxs, kinds = [], [], []
    floor_gap = 20.0 * math.ldexp(1.0, floor_level)
    while len(cur):
        side = math.ldexp(1.0, lev)
        lo = cur * side
        DI = D_of_cubes(lo, side)
        good = side < DI / 20.0
        for mask, kind in ((good, "W"),):
            levels.append(np.full(int(mask.sum()), lev))
            idxs.append(cur[mask])
            kinds.append(np.full(int(mask.sum()), kind, dtype=object))
        rest = cur[~good]
        if len(rest) == 0:
            break
        sup = D_of_points(lo[~good] + 0.5 * side) + 0.5 * side * math.sqrt(n)
        stuck = (sup < floor_gap) | (lev <= floor_level)
        levels.append(np.full(int(stuck.sum()), lev))
        idxs.append(rest[stuck])
        kinds.append(np.full(int(stuck.sum()), "U", dtype=object))
        rest = rest[~stuck]
        offs = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
        cur = (2 * rest[:, None, :] + offs[None, :, :]).reshape(-1, n)
        lev -= 1
    if not levels:
        return CubeFamily(np.zeros(0, int), np.zeros((0, n), np.int64), np.zeros(0, object), window_level, floor_level)
    return CubeFamily(np.concatenate(levels).astype(int), np.concatenate(idxs).reshape(-1, n),
                      np.concatenate(kinds), window_level, floor_level)


def _neighbor_pairs(fam: CubeFamily, dilation: float) -> list[tuple[int, int]]:
    """Pairs (i, j), i != j, whose dilated closed cubes intersect."""
    c = fam.center
    s = fam.side
    pairs = []
    if len(fam) == 0:
        return pairs
    half = 0.5 * dilation
    for lev in np.unique(fam.level):
        sel = np.flatnonzero(fam.level == lev)
        tree = cKDTree(c[sel])
        side_l = math.ldexp(1.0, int(lev))
        rad = half * (s + side_l)
        for i in range(len(fam)):
            for q in tree.query_ball_point(c[i], rad[i] * (1 + 1e-12), p=np.inf):
                j = int(sel[q])
                if j != i:
                    pairs.append((i, j))
    return pairs


def check_whitney(fam: CubeFamily, D_of_cubes, D_of_points, samples: int = 9) -> dict:
    """Properties (a) to (d) of the Whitney family.

    (a) uses the exact minimum of D over 15R and a sample grid for the
    maximum; (b) and (c) are evaluated over all pairs with 15R_i meeting
    15R_j; (d) checks that the W and U cubes tile the window exactly.
    """
    n = fam.index.shape[1] if len(fam) else 1
    W = fam.select(fam.kind == "W")
    out = {"n_whitney": len(W), "n_floor": int(len(fam) - len(W))}
    if len(W):
        s = W.side
        lo15 = W.center - 7.5 * s[:, None]
        dmin = D_of_cubes(lo15, 15 * s)
        g = np.linspace(-7.5, 7.5, samples)
        grid = np.array(np.meshgrid(*[g] * n, indexing="ij")).reshape(n, -1).T
        dmax = np.zeros(len(W))
        for k in range(len(grid)):
            dmax = np.maximum(dmax, D_of_points(W.center + grid[k] * s[:, None]))
        # maximality gives D <= (40 + 9 sqrt(n)) l on 15R, which is <= 50 only for n = 1
        upper = 40.0 + 9.0 * math.sqrt(n)
        a_ok = bool(np.all(dmin >= 5 * s) and np.all(dmax <= upper * s))
        out["a"] = {"ok": a_ok, "min_ratio": float(np.min(dmin / s)), "max_ratio": float(np.max(dmax / s)),
                    "upper": upper, "within_50": bool(np.all(dmax <= 50 * s))}
        pairs = _neighbor_pairs(W, 15.0)
        ratio = max((s[j] / s[i] for i, j in pairs), default=1.0)
        counts = np.bincount([i for i, _ in pairs], minlength=len(W)) if pairs else np.zeros(len(W), int)
        out["b"] = {"ok": bool(ratio <= 10.0), "C": float(ratio)}
        bound = (2 * 157.5 * 10.0) ** n
        out["c"] = {"ok": bool(counts.max() <= bound), "N": int(counts.max()), "bound": bound}
    else:
        out["a"] = {"ok": True}
        out["b"] = {"ok": True, "C": 1.0}
        out["c"] = {"ok": True, "N": 0}
    total = float(np.sum(fam.side ** n)) if len(fam) else 0.0
    window = (2.0 * math.ldexp(1.0, fam.window_level)) ** n
    keys = {(int(l), tuple(int(v) for v in ix)) for l, ix in zip(fam.level, fam.index)}
    nested = False
    for l, ix in keys:
        a = np.array(ix)
        for up in range(l + 1, fam.window_level + 1):
            a = a // 2
            if (up, tuple(int(v) for v in a)) in keys:
                nested = True
                break
        if nested:
            break
    U = fam.select(fam.kind == "U")
    floor_gap = 20.0 * math.ldexp(1.0, fam.floor_level)
    u_ok = True
    if len(U):
        sup = D_of_points(U.center) + 0.5 * U.side * math.sqrt(n)
        u_ok = bool(np.all((sup < floor_gap) | (U.level <= fam.floor_level)))
    out["d"] = {"ok": bool(total == window and not nested and u_ok), "covered": total, "window": window,
                "floor_measure": float(np.sum(U.side ** n)) if len(U) else 0.0}
    out["ok"] = all(out[k]["ok"] for k in "abcd")
    return out


# ---------------------------------------------------------------------------
# partition of unity and the glued graph


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6 * u - 15) + 10)


def bump(p, center, side) -> np.ndarray:
    """Quintic bump equal to 1 on the cube and vanishing outside 3 times the cube."""
    t = np.abs(np.atleast_2d(p) - center) / (0.5 * side)
    return np.prod(_smoothstep(0.5 * (3.0 - t)), axis=1)


@dataclass
class AffinePieces:
    """A_i(p) = a_i + g_i . p on each cube, in L0 coordinates."""

    a: np.ndarray
    g: np.ndarray


def _bump_terms(P: np.ndarray, fam: CubeFamily):
    """(rows, cols, values) of every nonzero bump at the points P."""
    c = fam.center
    R, C, V = [], [], []
    for lev in np.unique(fam.level):
        sel = np.flatnonzero(fam.level == lev)
        side = math.ldexp(1.0, int(lev))
        hits = cKDTree(c[sel]).query_ball_point(P, 1.5 * side, p=np.inf)
        rows = np.repeat(np.arange(len(P)), [len(h) for h in hits])
        if len(rows) == 0:
            continue
        cols = sel[np.concatenate([np.asarray(h, dtype=int) for h in hits])]
        R.append(rows)
        C.append(cols)
        V.append(bump(P[rows], c[cols], side))
    if not R:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    return np.concatenate(R), np.concatenate(C), np.concatenate(V)


def evaluate_graph(p, fam: CubeFamily, pieces: AffinePieces) -> np.ndarray:
    """A(p) = sum phi_i(p) A_i(p) with phi_i the normalized bumps."""
    P = np.atleast_2d(np.asarray(p, float))
    rows, cols, b = _bump_terms(P, fam)
    num = np.zeros(len(P))
    den = np.zeros(len(P))
    val = pieces.a[cols] + np.einsum("ij,ij->i", pieces.g[cols], P[rows])
    np.add.at(num, rows, b * val)
    np.add.at(den, rows, b)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def partition_sum(p, fam: CubeFamily) -> np.ndarray:
    """sum_i phi_i(p) with phi_i = psi_i / sum_j psi_j summed term by term."""
    P = np.atleast_2d(np.asarray(p, float))
    rows, cols, b = _bump_terms(P, fam)
    den = np.zeros(len(P))
    np.add.at(den, rows, b)
    total = np.zeros(len(P))
    np.add.at(total, rows, b / den[rows])
    return total


def graph_nodes(fam: CubeFamily, per_side: int = 4) -> np.ndarray:
    """Lattice nodes of every cube (per_side + 1 per axis), deduplicated."""
    n = fam.index.shape[1]
    t = np.arange(per_side + 1) / per_side
    off = np.array(np.meshgrid(*[t] * n, indexing="ij")).reshape(n, -1).T
    pts = (fam.lo[:, None, :] + off[None, :, :] * fam.side[:, None, None]).reshape(-1, n)
    return np.unique(pts, axis=0)


def graph_slope(nodes: np.ndarray, values: np.ndarray, fam: CubeFamily, per_side: int = 4) -> float:
    """Lipschitz constant of the piecewise-linear interpolant on the node lattice."""
    if nodes.shape[1] == 1:
        o = np.argsort(nodes[:, 0])
        dx = np.diff(nodes[o, 0])
        return float(np.max(np.abs(np.diff(values[o])) / dx)) if len(dx) else 0.0
    lookup = {tuple(p): v for p, v in zip(map(tuple, nodes), values)}
    best = 0.0
    t = np.arange(per_side + 1) / per_side
    for lo, s in zip(fam.lo, fam.side):
        xs, ys = lo[0] + s * t, lo[1] + s * t
        V = np.array([[lookup[(x, y)] for y in ys] for x in xs])
        h = s / per_side
        gx = np.diff(V, axis=0)[:, :-1] / h
        gy = np.diff(V, axis=1)[:-1, :] / h
        best = max(best, float(np.max(np.hypot(gx, gy))))
    return best


# ---------------------------------------------------------------------------
# the construction


@dataclass
class CoronaConfig:
    """Discretization of the construction.

    ``r_bottom`` defaults to twice the median nearest-neighbour spacing;
    the Whitney floor is the dyadic side just below r_bottom / 2, so no
    cube is finer than the sampling of the cloud.
    """

    c0: float | None = None
    r_bottom: float | None = None
    factor: float = RADIUS_FACTOR
    per_side: int = 4
    pairs: int = 10_000
    seed: int = 0


@dataclass
class GraphPL:
    nodes: np.ndarray
    values: np.ndarray
    slope: float


@dataclass
class CoronaResult:
    base_ball: Ball
    L0: Hyperplane
    graph: GraphPL
    whitney: CubeFamily
    pieces: AffinePieces
    labels: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    h: np.ndarray
    params: dict
    stats: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def frame(self) -> Frame:
        return Frame.from_normal(self.base_ball.center, self.L0.normal)

    def height(self, p) -> np.ndarray:
        """Graph value at points p of L0 (partition-of-unity formula)."""
        return evaluate_graph(p, self.whitney, self.pieces)

    def to_dict(self) -> dict:
        return {
            "base_ball": {"center": self.base_ball.center.tolist(), "radius": self.base_ball.radius},
            "L0": {"point": self.L0.point.tolist(), "normal": self.L0.normal.tolist()},
            "graph": {"nodes": self.graph.nodes.tolist(), "values": self.graph.values.tolist(),
                      "slope": self.graph.slope},
            "whitney": {"level": self.whitney.level.tolist(), "index": self.whitney.index.tolist(),
                        "kind": self.whitney.kind.tolist(), "window_level": self.whitney.window_level,
                        "floor_level": self.whitney.floor_level},
            "pieces": {"a": self.pieces.a.tolist(), "g": self.pieces.g.tolist()},
            "labels": self.labels.tolist(), "points": self.points.tolist(), "weights": self.weights.tolist(),
            "h": self.h.tolist(), "params": self.params, "stats": self.stats, "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoronaResult":
        n = len(d["L0"]["normal"]) - 1
        w = d["whitney"]
        fam = CubeFamily(np.array(w["level"], dtype=int), np.array(w["index"], dtype=np.int64).reshape(-1, n),
                         np.array(w["kind"], dtype=object), int(w["window_level"]), int(w["floor_level"]))
        g = d["graph"]
        return cls(Ball(d["base_ball"]["center"], d["base_ball"]["radius"]),
                   Hyperplane(d["L0"]["point"], d["L0"]["normal"]),
                   GraphPL(np.array(g["nodes"], float).reshape(-1, n), np.array(g["values"], float), g["slope"]),
                   fam, AffinePieces(np.array(d["pieces"]["a"], float), np.array(d["pieces"]["g"], float).reshape(-1, n)),
                   np.array(d["labels"], dtype=object), np.array(d["points"], float), np.array(d["weights"], float),
                   np.array(d["h"], float), d["params"], d["stats"], d.get("diagnostics", {}))

    def export(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "CoronaResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _plane_to_affine(frame: Frame, normal: np.ndarray, offset: float) -> tuple[float, np.ndarray]:
    """Write the hyperplane {normal . y = offset} as a graph t = a + g . p over L0."""
    c = float(normal @ frame.normal)
    a = (offset - float(normal @ frame.origin)) / c
    g = -(frame.basis @ normal) / c
    return a, g


def corona(mu: WeightedCloud, B0: Ball, theta: float, alpha: float, eps: float | None = None,
           cfg: CoronaConfig | None = None) -> CoronaResult:
    """Run the stopping-time construction on ``mu`` around ``B0``.

    Parameters
    ----------
    mu : WeightedCloud
    B0 : Ball
        Base ball; its beta-infinity plane fixes the reference plane L0.
    theta, alpha : float
        Density and angle thresholds of a good ball.
    eps : float, optional
        Flatness level of the input, recorded with the parameters.

    Returns
    -------
    CoronaResult
        Labels are given for the points of E0 = E cap B0, in the cloud's
        sorted order.
    """
    cfg = cfg or CoronaConfig()
    n = mu.n
    x0, r0 = B0.center, B0.radius
    c0 = theta if cfg.c0 is None else cfg.c0
    m0 = mu.mass(B0)
    if m0 < c0 * r0 ** n:
        raise DensityTooLow(f"mu(B0) = {m0:.6g} < c0 r0^n = {c0 * r0 ** n:.6g}")
    e0 = mu.in_ball(B0)
    E0 = mu.points[e0]
    half, nu0, off0 = minimax_plane(E0, np.eye(mu.dim)[-1])
    frame = Frame.from_normal(x0, nu0)

    diam = mu.diameter()
    r_top = min(50.0 * r0, diam) if diam > 0 else 50.0 * r0
    r_bottom = cfg.r_bottom if cfg.r_bottom is not None else 2.0 * (median_spacing(mu.points) or r0 * 1e-3)
    radii = radius_grid(r_top, min(r_bottom, r_top), cfg.factor)
    stop, dens = scan_stop(mu, E0, radii, theta, alpha, nu0)
    sd = StopData(radii, stop, dens)
    labels = classify_points(stop, dens, len(radii), theta)
    h = sd.h

    vg = sd.very_good
    Zc, hz = E0[vg], h[vg]
    Pc = frame.proj(Zc)

    window_level = math.ceil(math.log2(16.0 * r0))
    floor_level = math.floor(math.log2(radii[-1] / 2.0))

    def D_cubes(lo, side):
        return D_cube(lo, side, Pc, hz)

    def D_points(p):
        return d_function(p, Pc, hz)

    fam = whitney(n, D_cubes, D_points, window_level, floor_level)
    pieces = _choose_pieces(mu, fam, frame, Zc, hz, radii, r0, nu0)

    nodes = graph_nodes(fam, cfg.per_side)
    vals = evaluate_graph(nodes, fam, pieces)
    slope = graph_slope(nodes, vals, fam, cfg.per_side)

    w0 = mu.weights[e0]
    stats = {"mu_E0": float(w0.sum()), "mu_B0": m0,
             "mu_Z": float(w0[labels == Z].sum()), "mu_LD": float(w0[labels == LD].sum()),
             "mu_BA": float(w0[labels == BA].sum()), "max_grad_A": slope}
    params = {"theta": theta, "alpha": alpha, "eps": eps, "r0": r0, "c0": c0,
              "radius_grid": {"factor": cfg.factor, "r_top": float(radii[0]), "r_bottom": float(radii[-1]),
                              "count": len(radii), "clipped": bool(r_top < 50.0 * r0)},
              "whitney": {"window_half_side": math.ldexp(1.0, window_level), "floor_side": math.ldexp(1.0, floor_level)},
              "beta_B0": half / r0}
    res = CoronaResult(B0, Hyperplane(x0, nu0), GraphPL(nodes, vals, slope), fam, pieces, labels, E0, w0, h,
                       params, stats)
    res.diagnostics = diagnostics(res, mu, Zc, hz, cfg)
    return res


def _choose_pieces(mu, fam, frame, Zc, hz, radii, r0, ref) -> AffinePieces:
    """Affine maps A_i from a very good ball B_i near each cube.

    For cubes meeting B(x0, 10 r0) the ball is centred at the very good
    point z attaining D(R_i) = min dist(Pi z, R_i) + h_z, with the smallest
    grid radius reaching across the cube, max(h_z, dist + diam R_i), capped
    at the top of the grid; other cubes get A_i = 0.
    """
    m = len(fam)
    n = frame.basis.shape[0]
    a = np.zeros(m)
    g = np.zeros((m, n))
    if m == 0 or len(Zc) == 0:
        return AffinePieces(a, g)
    lo, side = fam.lo, fam.side
    dist0 = np.linalg.norm(np.clip(0.0, lo, lo + side[:, None]), axis=1)
    near = np.flatnonzero(dist0 <= 10.0 * r0)
    Pc = frame.proj(Zc)
    asc = radii[::-1]
    cache: dict = {}
    for i in near:
        d_box = np.linalg.norm(np.maximum(0.0, np.maximum(lo[i] - Pc, Pc - lo[i] - side[i])), axis=1)
        k = int(np.argmin(d_box + hz))
        need = max(hz[k], d_box[k] + side[i] * math.sqrt(n))
        j = int(np.searchsorted(asc, need * (1 - 1e-12)))
        r = float(asc[min(j, len(asc) - 1)])
        key = (k, r)
        if key not in cache:
            try:
                pts = mu.points[mu.in_ball(Ball(Zc[k], r))]
                _, u, off = minimax_plane(pts, ref)
            except EmptyIntersection:
                u, off = ref, float(ref @ Zc[k])
            cache[key] = _plane_to_affine(frame, u, off)
        a[i], g[i] = cache[key]
    return AffinePieces(a, g)


def diagnostics(res: CoronaResult, mu: WeightedCloud, Zc, hz, cfg: CoronaConfig) -> dict:
    """Whitney properties, partition of unity, PiperpLip and graph distance checks."""
    fr = res.frame
    Pc = fr.proj(Zc)
    fam = res.whitney
    r0 = res.base_ball.radius
    alpha = res.params["alpha"]
    tol = 8.0 * res.params["radius_grid"]["r_bottom"]
    out = {}

    def D_cubes(lo, side):
        return D_cube(lo, side, Pc, hz)

    def D_points(p):
        return d_function(p, Pc, hz)

    out["whitney"] = check_whitney(fam, D_cubes, D_points)
    psum = partition_sum(res.graph.nodes, fam)
    out["partition"] = {"max_dev": float(np.max(np.abs(psum - 1.0))) if len(psum) else 0.0}
    out["partition"]["ok"] = out["partition"]["max_dev"] <= 1e-9

    rng = np.random.default_rng(cfg.seed)
    P = res.points
    m = cfg.pairs
    X = P[rng.integers(len(P), size=m)]
    Y = np.where(rng.random((m, 1)) < 0.5, P[rng.integers(len(P), size=m)],
                 res.base_ball.center + res.base_ball.radius * rng.uniform(-1, 1, size=(m, P.shape[1])))
    dX = d_function(X, Zc, hz)
    dY = d_function(Y, Zc, hz)
    lhs = np.abs(fr.perp(X) - fr.perp(Y))
    rhs = 6 * alpha * np.linalg.norm(fr.proj(X) - fr.proj(Y), axis=1) + 4 * dX + 4 * dY
    out["piperp_lip"] = {"pairs": m, "tolerance": tol, "max_excess": float(np.max(lhs - rhs)),
                         "ok": bool(np.all(lhs <= rhs + tol))}

    zmask = res.labels == Z
    if np.any(zmask):
        pz = P[zmask]
        gap = np.abs(fr.perp(pz) - res.height(fr.proj(pz)))
        dz = np.maximum(d_function(pz, Zc, hz), res.params["radius_grid"]["r_bottom"])
        out["graph_distance"] = {"max": float(gap.max()), "empirical_constant": float(np.max(gap / dz))}
    near = np.abs(res.graph.nodes).max(axis=1) > 12 * r0
    out["support"] = {"outside_12r0_max": float(np.max(np.abs(res.graph.values[near]))) if np.any(near) else 0.0}
    out["h_le_2r0"] = bool(np.all(res.h <= 2 * r0 + 1e-12))
    out["ld_small"] = {"ratio": res.stats["mu_LD"] / res.stats["mu_B0"],
                       "ok": res.stats["mu_LD"] <= 0.05 * res.stats["mu_B0"]}
    return out


# ---------------------------------------------------------------------------
# dense dyadic interval


def _measure(G, a: float, b: float) -> float:
    return float(sum(max(0.0, min(b, y) - max(a, x)) for x, y in G))


def dense_dyadic_interval(I, G, c2: float, theta: float) -> tuple[float, float]:
    """Interval J of the dyadic tree of I on which G stays dense.

    Every dyadic descendant J' of J with l(J') >= theta l(J) satisfies
    |G cap J'| >= (c2/2) |J'|.  Found by the Top/Next recursion: a bad
    interval is replaced by its generation-N descendants not contained in a
    low-density interval, with N = ceil(-log2 theta).

    Parameters
    ----------
    I : (a, b)
    G : sequence of (x, y) intervals
    c2 : float
        Requires |G cap I| >= c2 |I|.
    theta : float in (0, 1/2)
    """
    a, b = map(float, I)
    if not (0 < theta < 0.5):
        raise PreconditionError("theta must lie in (0, 1/2)")
    G = [(float(x), float(y)) for x, y in G]
    if _measure(G, a, b) < c2 * (b - a):
        raise PreconditionError("|G| < c2 |I|")
    N = math.ceil(-math.log2(theta))
    kmax = math.floor(-math.log2(theta) + 1e-12)
    L = b - a

    def low(k, j):
        s = L / 2 ** k
        return _measure(G, a + j * s, a + (j + 1) * s) <= 0.5 * c2 * s

    def good(k, j):
        for q in range(kmax + 1):
            for t in range(2 ** q):
                if low(k + q, j * 2 ** q + t):
                    return False
        return True

    queue = deque([(0, 0)])
    while queue:
        k, j = queue.popleft()
        if good(k, j):
            s = L / 2 ** k
            return a + j * s, a + (j + 1) * s
        for t in range(2 ** N):
            jj = j * 2 ** N + t
            inside_low = any(low(k + q, jj >> (N - q)) for q in range(N + 1))
            if not inside_low:
                queue.append((k + N, jj))
    raise PreconditionError("no dense interval found")  # unreachable when |G| >= c2 |I|


def dense_interval_bound(c2: float, theta: float) -> float:
    """Lower bound c(c2, theta) on l(J)/l(I) from the Top/Next recursion."""
    N = math.ceil(-math.log2(theta))
    c4 = (2 - 2 * c2) / (2 - c2)
    steps = 0
    while (1 - 2.0 ** -N) ** steps > (1 - c4) / 2:
        steps += 1
    return 2.0 ** (-steps * N)


def check_dense_interval(J, G, c2: float, theta: float) -> bool:
    """Exhaustive scan of the dyadic descendants of J down to theta l(J)."""
    a, b = J
    kmax = math.floor(-math.log2(theta) + 1e-12)
    G = [(float(x), float(y)) for x, y in G]
    for k in range(kmax + 1):
        s = (b - a) / 2 ** k
        for j in range(2 ** k):
            if _measure(G, a + j * s, a + (j + 1) * s) < 0.5 * c2 * s:
                return False
    return True
