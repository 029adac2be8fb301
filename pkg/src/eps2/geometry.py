"""Set pairs, spheres and membership oracles.

A scene is a pair of disjoint regions ``plus`` and ``minus`` in R^2 or R^3,
each described by a tree of open primitives combined with union,
intersection and complement.  Everything outside both regions is the free
set ``F``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

TWO_PI = 2.0 * math.pi


def sphere_area(n: int) -> float:
    """Surface measure sigma_n of the unit sphere in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


class Label(IntEnum):
    MINUS = -1
    FREE = 0
    PLUS = 1


class SceneError(ValueError):
    """Malformed scene description; ``path`` locates the offending node."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class DisjointnessError(ValueError):
    pass


class UnsupportedPrimitive(TypeError):
    pass


# ---------------------------------------------------------------------------
# small geometric value types


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if not np.isfinite(nv) or nv == 0.0:
        raise ValueError("zero or non-finite direction")
    return v / nv


@dataclass(frozen=True)
class HalfSpace:
    """Open half-space ``{y : (y - anchor) . normal > 0}``."""

    anchor: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=float)
        u = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            u = _unit(u)
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "normal", u)

    def flipped(self) -> "HalfSpace":
        return HalfSpace(self.anchor, -self.normal)


@dataclass(frozen=True)
class Hyperplane:
    """Affine hyperplane through ``point`` with unit ``normal``."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "normal", _unit(self.normal))

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(pts) - self.point) @ self.normal


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class Cone:
    """Two-sided cone ``{y : |(y - apex) . axis| > aperture |y - apex|}``."""

    apex: np.ndarray
    axis: np.ndarray
    aperture: float

    def __post_init__(self):
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float))
        object.__setattr__(self, "axis", _unit(self.axis))
        if not 0.0 < self.aperture < 1.0:
            raise ValueError("cone aperture must lie in (0, 1)")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(pts) - self.apex
        return np.abs(d @ self.axis) > self.aperture * np.linalg.norm(d, axis=1)


# ---------------------------------------------------------------------------
# circle crossings used by the exact planar slicer


def _line_circle_angles(x, r, p0, d) -> list[float]:
    """Angles t with x + r e(t) on the line p0 + s d."""
    x = np.asarray(x, float)
    w = np.asarray(p0, float) - x
    d = np.asarray(d, float)
    A = d @ d
    B = 2.0 * (w @ d)
    C = w @ w - r * r
    disc = B * B - 4.0 * A * C
    if disc < 0.0 or A == 0.0:
        return []
    sq = math.sqrt(disc)
    out = []
    for s in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
        q = w + s * d
        out.append(math.atan2(q[1], q[0]))
    return out


def _circle_circle_angles(x, r, c, R) -> list[float]:
    v = np.asarray(c, float) - np.asarray(x, float)
    dist = float(np.hypot(v[0], v[1]))
    if dist == 0.0:
        return []
    k = (r * r + dist * dist - R * R) / (2.0 * r * dist)
    if k > 1.0 or k < -1.0:
        return []
    base = math.atan2(v[1], v[0])
    w = math.acos(k)
    return [base - w, base + w]


# ---------------------------------------------------------------------------
# region trees


class Region:
    """Node of a region tree."""

    dim: int = 2

    def contains(self, pts: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def crossings(self, x, r) -> list[float]:
        """Superset of the angles where the circle S(x, r) meets the boundary."""
        raise UnsupportedPrimitive(f"{type(self).__name__} has no exact circle intersector")

    def bounds(self):
        """Axis-aligned bounds ``(lo, hi)`` or ``None`` when unbounded."""
        return None

    def to_dict(self) -> dict:  # pragma: no cover
        raise NotImplementedError


class Empty(Region):
    def __init__(self, dim: int):
        self.dim = dim

    def contains(self, pts):
        return np.zeros(len(np.atleast_2d(pts)), dtype=bool)

    def crossings(self, x, r):
        return []

    def bounds(self):
        return None

    def to_dict(self):
        return {"primitive": "empty", "params": {}}


class HalfSpaceRegion(Region):
    """``{y : y . normal > offset}``."""

    def __init__(self, normal, offset: float):
        u = np.asarray(normal, float)
        self.dim = len(u)
        self.normal = _unit(u)
        self.offset = float(offset) / float(np.linalg.norm(u))

    def contains(self, pts):
        return np.atleast_2d(pts) @ self.normal > self.offset

    def crossings(self, x, r):
        u = self.normal
        p0 = self.offset * u
        return _line_circle_angles(x, r, p0, np.array([-u[1], u[0]]))

    def to_dict(self):
        return {"primitive": "halfspace", "params": {"normal": self.normal.tolist(), "offset": self.offset}}


class BallRegion(Region):
    def __init__(self, center, radius: float):
        self.center = np.asarray(center, float)
        self.radius = float(radius)
        self.dim = len(self.center)

    def contains(self, pts):
        d = np.atleast_2d(pts) - self.center
        return np.einsum("ij,ij->i", d, d) < self.radius ** 2

    def crossings(self, x, r):
        return _circle_circle_angles(x, r, self.center, self.radius)

    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def to_dict(self):
        return {"primitive": "ball", "params": {"center": self.center.tolist(), "radius": self.radius}}


class BoxRegion(Region):
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)
        self.dim = len(self.lo)
        if np.any(self.hi <= self.lo):
            raise ValueError("box needs lo < hi in every coordinate")

    def contains(self, pts):
        p = np.atleast_2d(pts)
        return np.all((p > self.lo) & (p < self.hi), axis=1)

    def crossings(self, x, r):
        out = []
        for k, v in ((0, self.lo[0]), (0, self.hi[0]), (1, self.lo[1]), (1, self.hi[1])):
            p0 = np.zeros(2)
            p0[k] = v
            d = np.zeros(2)
            d[1 - k] = 1.0
            out += _line_circle_angles(x, r, p0, d)
        return out

    def bounds(self):
        return self.lo.copy(), self.hi.copy()

    def to_dict(self):
        return {"primitive": "box", "params": {"lo": self.lo.tolist(), "hi": self.hi.tolist()}}


class ConvexRegion(Region):
    """Open convex polytope ``{y : A y < b}``; built from polygon vertices in 2D."""

    def __init__(self, normals, offsets, vertices=None):
        self.A = np.atleast_2d(np.asarray(normals, float))
        norms = np.linalg.norm(self.A, axis=1)
        self.A = self.A / norms[:, None]
        self.b = np.asarray(offsets, float) / norms
        self.dim = self.A.shape[1]
        self.vertices = None if vertices is None else np.asarray(vertices, float)

    @classmethod
    def from_polygon(cls, vertices) -> "ConvexRegion":
        v = np.asarray(vertices, float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least three planar vertices")
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area2 == 0:
            raise ValueError("degenerate polygon")
        if area2 < 0:
            v = v[::-1]
        e = np.roll(v, -1, axis=0) - v
        normals = np.column_stack([e[:, 1], -e[:, 0]])  # outward for CCW
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross < 0):
            raise ValueError("polygon is not convex")
        offsets = np.einsum("ij,ij->i", normals, v)
        return cls(normals, offsets, vertices=v)

    def contains(self, pts):
        return np.all(np.atleast_2d(pts) @ self.A.T < self.b, axis=1)

    def crossings(self, x, r):
        out = []
        for a, b in zip(self.A, self.b):
            out += _line_circle_angles(x, r, a * b, np.array([-a[1], a[0]]))
        return out

    def bounds(self):
        if self.vertices is not None:
            return self.vertices.min(axis=0), self.vertices.max(axis=0)
        return None

    def to_dict(self):
        if self.vertices is not None:
            return {"primitive": "polygon", "params": {"vertices": self.vertices.tolist()}}
        return {"primitive": "polyhedron", "params": {"normals": self.A.tolist(), "offsets": self.b.tolist()}}


class GraphRegion(Region):
    """Sub- or epigraph of a piecewise-linear function of the first d-1 coordinates.

    In 2D the function is interpolated from ``knots`` (increasing) and
    ``values`` and continued by constants.  In 3D ``knots`` is a pair of
    increasing axes and ``values`` a matrix; each grid cell is split along
    its anti-diagonal into two triangles so the function is genuinely
    piecewise linear.
    """

    def __init__(self, knots, values, side: str = "below"):
        if side not in ("below", "above"):
            raise ValueError("side must be 'below' or 'above'")
        self.side = side
        if isinstance(knots, (list, tuple)) and len(knots) == 2 and np.ndim(knots[0]) == 1 and np.ndim(values) == 2:
            self.dim = 3
            self.kx = np.asarray(knots[0], float)
            self.ky = np.asarray(knots[1], float)
            self.values = np.asarray(values, float)
            if self.values.shape != (len(self.kx), len(self.ky)):
                raise ValueError("values shape must match the knot axes")
            if np.any(np.diff(self.kx) <= 0) or np.any(np.diff(self.ky) <= 0):
                raise ValueError("knots must be strictly increasing")
        else:
            self.dim = 2
            self.knots = np.asarray(knots, float)
            self.values = np.asarray(values, float)
            if self.knots.ndim != 1 or self.knots.shape != self.values.shape or len(self.knots) < 2:
                raise ValueError("knots and values must be matching 1-D arrays")
            if np.any(np.diff(self.knots) <= 0):
                raise ValueError("knots must be strictly increasing")

    def height(self, base: np.ndarray) -> np.ndarray:
        if self.dim == 2:
            return np.interp(base[:, 0], self.knots, self.values)
        px = np.clip(base[:, 0], self.kx[0], self.kx[-1])
        py = np.clip(base[:, 1], self.ky[0], self.ky[-1])
        i = np.clip(np.searchsorted(self.kx, px, side="right") - 1, 0, len(self.kx) - 2)
        j = np.clip(np.searchsorted(self.ky, py, side="right") - 1, 0, len(self.ky) - 2)
        s = (px - self.kx[i]) / (self.kx[i + 1] - self.kx[i])
        t = (py - self.ky[j]) / (self.ky[j + 1] - self.ky[j])
        v00 = self.values[i, j]
        v10 = self.values[i + 1, j]
        v01 = self.values[i, j + 1]
        v11 = self.values[i + 1, j + 1]
        low = s + t <= 1.0
        return np.where(low, v00 + s * (v10 - v00) + t * (v01 - v00),
                        v11 + (1 - s) * (v01 - v11) + (1 - t) * (v10 - v11))

    def contains(self, pts):
        p = np.atleast_2d(pts)
        f = self.height(p[:, :-1])
        return p[:, -1] < f if self.side == "below" else p[:, -1] > f

    def crossings(self, x, r):
        if self.dim != 2:
            raise UnsupportedPrimitive("3D graphs have no exact circle intersector")
        k, v = self.knots, self.values
        out = _line_circle_angles(x, r, (k[0], v[0]), (1.0, 0.0))
        out += _line_circle_angles(x, r, (k[-1], v[-1]), (1.0, 0.0))
        for i in range(len(k) - 1):
            out += _line_circle_angles(x, r, (k[i], v[i]), (k[i + 1] - k[i], v[i + 1] - v[i]))
        return out

    def to_dict(self):
        if self.dim == 2:
            knots = self.knots.tolist()
        else:
            knots = [self.kx.tolist(), self.ky.tolist()]
        return {"primitive": "graph", "params": {"knots": knots, "values": self.values.tolist(), "side": self.side}}


class VoxelRegion(Region):
    """Occupancy grid; a point belongs to the voxel whose cell contains it."""

    def __init__(self, origin, spacing: float, occupancy):
        self.origin = np.asarray(origin, float)
        self.spacing = float(spacing)
        self.occ = np.asarray(occupancy, dtype=bool)
        self.dim = len(self.origin)
        if self.occ.ndim != self.dim:
            raise ValueError("occupancy rank must equal the dimension")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    def contains(self, pts):
        p = np.atleast_2d(pts)
        idx = np.floor((p - self.origin) / self.spacing).astype(np.int64)
        shape = np.array(self.occ.shape)
        inside = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.zeros(len(p), dtype=bool)
        if inside.any():
            out[inside] = self.occ[tuple(idx[inside].T)]
        return out

    def crossings(self, x, r):
        if self.dim != 2:
            raise UnsupportedPrimitive("voxel grids are sliced exactly only in 2D")
        out = []
        for k in range(2):
            for i in range(self.occ.shape[k] + 1):
                p0 = self.origin.copy()
                p0[k] += i * self.spacing
                d = np.zeros(2)
                d[1 - k] = 1.0
                out += _line_circle_angles(x, r, p0, d)
        return out

    def bounds(self):
        return self.origin.copy(), self.origin + self.spacing * np.array(self.occ.shape)

    def to_dict(self):
        return {"primitive": "voxels", "params": {"origin": self.origin.tolist(), "spacing": self.spacing,
                                                  "occupancy": self.occ.astype(int).tolist()}}


class Union(Region):
    def __init__(self, children: Sequence[Region]):
        self.children = list(children)
        self.dim = self.children[0].dim

    def contains(self, pts):
        out = np.zeros(len(np.atleast_2d(pts)), dtype=bool)
        for c in self.children:
            out |= c.contains(pts)
        return out

    def crossings(self, x, r):
        return [t for c in self.children for t in c.crossings(x, r)]

    def bounds(self):
        bs = [c.bounds() for c in self.children]
        if any(b is None for b in bs):
            return None
        return np.min([b[0] for b in bs], axis=0), np.max([b[1] for b in bs], axis=0)

    def to_dict(self):
        return {"op": "union", "children": [c.to_dict() for c in self.children]}


class Intersection(Union):
    def contains(self, pts):
        out = np.ones(len(np.atleast_2d(pts)), dtype=bool)
        for c in self.children:
            out &= c.contains(pts)
        return out

    def bounds(self):
        bs = [c.bounds() for c in self.children if c.bounds() is not None]
        if not bs:
            return None
        return np.max([b[0] for b in bs], axis=0), np.min([b[1] for b in bs], axis=0)

    def to_dict(self):
        return {"op": "intersection", "children": [c.to_dict() for c in self.children]}


class Complement(Region):
    def __init__(self, child: Region):
        self.child = child
        self.dim = child.dim

    def contains(self, pts):
        return ~self.child.contains(pts)

    def crossings(self, x, r):
        return self.child.crossings(x, r)

    def to_dict(self):
        return {"op": "complement", "children": [self.child.to_dict()]}


# ---------------------------------------------------------------------------
# the pair


@dataclass
class RegionPair:
    """Disjoint pair (plus, minus) with a bounding box for sampling."""

    dim: int
    plus: Region
    minus: Region
    bbox: tuple = field(default=None)
    check_samples: int = 10_000

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        for name, reg in (("plus", self.plus), ("minus", self.minus)):
            if reg.dim != self.dim:
                raise ValueError(f"{name} region has dimension {reg.dim}, expected {self.dim}")
        if self.bbox is None:
            bs = [b for b in (self.plus.bounds(), self.minus.bounds()) if b is not None]
            if bs:
                lo = np.min([b[0] for b in bs], axis=0)
                hi = np.max([b[1] for b in bs], axis=0)
                lo = np.minimum(lo, -1.0)
                hi = np.maximum(hi, 1.0)
            else:
                lo, hi = -np.ones(self.dim), np.ones(self.dim)
            self.bbox = (lo, hi)
        self.bbox = (np.asarray(self.bbox[0], float), np.asarray(self.bbox[1], float))
        if self.check_samples:
            self.check_disjoint(self.check_samples)

    def check_disjoint(self, samples: int = 10_000, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        lo, hi = self.bbox
        pad = 0.1 * (hi - lo)
        pts = rng.uniform(lo - pad, hi + pad, size=(samples, self.dim))
        both = self.plus.contains(pts) & self.minus.contains(pts)
        if both.any():
            raise DisjointnessError(f"plus and minus overlap near {pts[np.argmax(both)].tolist()}")

    @property
    def diameter(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    def classify(self, pts) -> np.ndarray:
        """Labels +1 / -1 / 0 for an array of points (shape (k, dim))."""
        p = np.atleast_2d(np.asarray(pts, float))
        out = np.zeros(len(p), dtype=np.int8)
        out[self.plus.contains(p)] = 1
        out[self.minus.contains(p)] = -1
        return out

    def transformed(self, scale: float = 1.0, rotation=None, shift=None) -> "RegionPair":
        """Scene under y -> scale * Q y + shift (new primitive trees)."""
        Q = np.eye(self.dim) if rotation is None else np.asarray(rotation, float)
        b = np.zeros(self.dim) if shift is None else np.asarray(shift, float)
        return RegionPair(self.dim, _MappedRegion(self.plus, scale, Q, b),
                          _MappedRegion(self.minus, scale, Q, b), check_samples=0,
                          bbox=_map_bbox(self.bbox, scale, Q, b))

    def swapped(self) -> "RegionPair":
        return RegionPair(self.dim, self.minus, self.plus, bbox=self.bbox, check_samples=0)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "plus": self.plus.to_dict(), "minus": self.minus.to_dict(),
                "bbox": [self.bbox[0].tolist(), self.bbox[1].tolist()]}


def _map_bbox(bbox, scale, Q, b):
    lo, hi = bbox
    corners = np.array(np.meshgrid(*[[l, h] for l, h in zip(lo, hi)], indexing="ij")).reshape(len(lo), -1).T
    img = scale * corners @ Q.T + b
    return img.min(axis=0), img.max(axis=0)


class _MappedRegion(Region):
    """Image of a region under a similarity y -> s Q y + b."""

    def __init__(self, base: Region, scale: float, Q: np.ndarray, b: np.ndarray):
        self.base, self.scale, self.Q, self.b = base, float(scale), Q, b
        self.dim = base.dim

    def contains(self, pts):
        p = (np.atleast_2d(pts) - self.b) @ self.Q / self.scale
        return self.base.contains(p)

    def crossings(self, x, r):
        x0 = (np.asarray(x, float) - self.b) @ self.Q / self.scale
        rot = math.atan2(self.Q[1, 0], self.Q[0, 0])
        if np.linalg.det(self.Q) < 0:
            raise UnsupportedPrimitive("reflections are not sliced exactly")
        return [t + rot for t in self.base.crossings(x0, r / self.scale)]

    def bounds(self):
        bb = self.base.bounds()
        return None if bb is None else _map_bbox(bb, self.scale, self.Q, self.b)


def classify(p, R: RegionPair) -> Label:
    """Label of a single point."""
    return Label(int(R.classify(np.asarray(p, float)[None, :])[0]))


# ---------------------------------------------------------------------------
# exact planar slices


@dataclass
class ArcDecomposition:
    """Partition of [0, 2 pi) into labelled angular intervals."""

    starts: np.ndarray
    ends: np.ndarray
    labels: np.ndarray

    def intervals(self, label: int) -> list[tuple[float, float]]:
        m = self.labels == label
        return list(zip(self.starts[m].tolist(), self.ends[m].tolist()))

    @property
    def plus(self):
        return self.intervals(1)

    @property
    def minus(self):
        return self.intervals(-1)

    @property
    def free(self):
        return self.intervals(0)

    def measure(self, label: int) -> float:
        m = self.labels == label
        return float(np.sum(self.ends[m] - self.starts[m]))

    def label_at(self, t: np.ndarray) -> np.ndarray:
        t = np.mod(t, TWO_PI)
        idx = np.clip(np.searchsorted(self.starts, t, side="right") - 1, 0, len(self.starts) - 1)
        return self.labels[idx]

    def longest(self, label: int) -> float:
        """Length of the longest arc of one label, joining across angle 0."""
        m = self.labels == label
        if not m.any():
            return 0.0
        lengths = []
        run = 0.0
        for lab, s, e in zip(self.labels, self.starts, self.ends):
            if lab == label:
                run += e - s
            else:
                if run > 0:
                    lengths.append(run)
                run = 0.0
        if run > 0:
            if self.labels[0] == label and lengths and self.labels[-1] == label and len(self.labels) > 1:
                lengths[0] += run
            else:
                lengths.append(run)
        return float(max(lengths)) if lengths else 0.0

    def cumulative(self, label: int):
        """Breakpoints and cumulative label measure on [0, 4 pi) for window sums."""
        ind = (self.labels == label).astype(float)
        lengths = (self.ends - self.starts) * ind
        bp = np.concatenate([self.starts, self.starts + TWO_PI, [2 * TWO_PI]])
        vals = np.concatenate([[0.0], np.cumsum(np.concatenate([lengths, lengths]))])
        return bp, vals


def arc_decomposition(R: RegionPair, x, r: float) -> ArcDecomposition:
    """Exact labelled partition of the circle S(x, r) for planar primitive scenes."""
    if R.dim != 2:
        raise UnsupportedPrimitive("exact arcs exist only in the plane")
    if not r > 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, float)
    cuts = np.array(R.plus.crossings(x, r) + R.minus.crossings(x, r), dtype=float)
    cuts = np.unique(np.mod(cuts, TWO_PI)) if cuts.size else np.zeros(0)
    cuts = cuts[cuts < TWO_PI]
    pts = np.unique(np.concatenate([[0.0], cuts, [TWO_PI]]))
    pts = pts[np.concatenate([[True], np.diff(pts) > 0])]
    starts, ends = pts[:-1], pts[1:]
    mids = 0.5 * (starts + ends)
    labels = R.classify(x + r * np.column_stack([np.cos(mids), np.sin(mids)]))
    keep = np.concatenate([[True], labels[1:] != labels[:-1]])
    s = starts[keep]
    lab = labels[keep]
    e = np.concatenate([s[1:], [TWO_PI]])
    return ArcDecomposition(s, e, lab.astype(np.int8))


# ---------------------------------------------------------------------------
# sphere quadrature


@dataclass
class SphereSample:
    """Nodes and weights on S(center, radius)."""

    center: np.ndarray
    radius: float
    nodes: np.ndarray
    weights: np.ndarray
    mode: str
    seed: int | None = None

    @property
    def directions(self) -> np.ndarray:
        return (self.nodes - self.center) / self.radius

    def rescaled(self, radius: float) -> "SphereSample":
        """Same directions on a sphere of another radius (weights rescaled)."""
        n = self.nodes.shape[1] - 1
        f = radius / self.radius
        return SphereSample(self.center, radius, self.center + self.directions * radius,
                            self.weights * f ** n, self.mode, self.seed)


MODES = ("exact-arc", "lattice", "stratified-random")


def unit_directions(dim: int, mode: str, m: int, seed: int | None = None) -> np.ndarray:
    """Unit vectors for the quadrature modes (equal-weight rules)."""
    if m < 8:
        raise ValueError("node budget m must be at least 8")
    if dim == 2:
        if mode in ("lattice", "exact-arc"):
            t = TWO_PI * (np.arange(m) + 0.5) / m
        elif mode == "stratified-random":
            rng = np.random.default_rng(seed)
            t = TWO_PI * (np.arange(m) + rng.random(m)) / m
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return np.column_stack([np.cos(t), np.sin(t)])
    if dim == 3:
        if mode == "lattice":
            return fibonacci_sphere(m)
        if mode == "stratified-random":
            rng = np.random.default_rng(seed)
            nz = max(1, int(round(math.sqrt(m / 2.0))))
            counts = np.full(nz, m // nz)
            counts[: m - counts.sum()] += 1
            z_list, t_list = [], []
            for i, c in enumerate(counts):
                zlo = -1.0 + 2.0 * i / nz
                z_list.append(zlo + 2.0 / nz * rng.random(c))
                t_list.append(TWO_PI * (np.arange(c) + rng.random(c)) / c)
            z = np.concatenate(z_list)
            t = np.concatenate(t_list)
            rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
            return np.column_stack([rho * np.cos(t), rho * np.sin(t), z])
        if mode == "exact-arc":
            raise UnsupportedPrimitive("exact-arc mode is planar only")
        raise ValueError(f"unknown mode {mode!r}")
    raise ValueError("dimension must be 2 or 3")


def fibonacci_sphere(m: int) -> np.ndarray:
    """Fibonacci lattice on S^2 with m points (z-symmetric for even m)."""
    k = np.arange(m)
    z = 1.0 - (2.0 * k + 1.0) / m
    golden = math.pi * (3.0 - math.sqrt(5.0))
    t = golden * k
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([rho * np.cos(t), rho * np.sin(t), z])


def sample_sphere(x, r: float, mode: str = "lattice", m: int = 360, seed: int | None = None,
                  dim: int | None = None) -> SphereSample:
    """Equal-weight quadrature on S(x, r).

    Parameters
    ----------
    x : point
        Center.
    r : float
        Radius, positive.
    mode : {'lattice', 'stratified-random', 'exact-arc'}
        Node layout.  ``exact-arc`` carries lattice nodes but tells the
        coefficient routines to use exact planar slices instead.
    m : int
        Node budget, at least 8.
    seed : int, optional
        Seed for the stratified-random layout.
    """
    x = np.asarray(x, float)
    d = len(x) if dim is None else dim
    if not r > 0:
        raise ValueError("radius must be positive")
    u = unit_directions(d, mode, m, seed)
    nodes = x + r * u
    w = np.full(len(u), sphere_area(d - 1) * r ** (d - 1) / len(u))
    return SphereSample(x, float(r), nodes, w, mode, seed)


# ---------------------------------------------------------------------------
# cones


def cone_empty(R: RegionPair, C: Cone, r: float, n_radii: int = 64, n_dirs: int = 512):
    """Whether no sampled free point lies in C intersected with B(apex, r).

    Planar scenes with exact arcs are checked circle by circle on
    ``n_radii`` radii (uniform in (0, r)): a free arc or a phase change
    inside the cone's angular window is a hit.  Otherwise a polar grid of
    those radii times ``n_dirs`` directions restricted to the cone is
    sampled.  Returns the verdict and a
    report with the sampling density.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    d = R.dim
    radii = r * (np.arange(n_radii) + 0.5) / n_radii
    if d == 2:
        try:
            hits = sum(_cone_arc_hits(R, C, t) for t in radii)
        except UnsupportedPrimitive:
            pass
        else:
            report = {"samples": 0, "radii": int(n_radii), "directions": 0, "radial_spacing": r / n_radii,
                      "free_hits": int(hits), "exact_arcs": True}
            return hits == 0, report
    if d == 2:
        half = math.acos(C.aperture)
        base = math.atan2(C.axis[1], C.axis[0])
        k = max(1, n_dirs // 2)
        off = (np.arange(k) + 0.5) / k * 2 * half - half
        ang = np.concatenate([base + off, base + math.pi + off])
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        full = fibonacci_sphere(max(n_dirs * 4, 64))
        dirs = full[np.abs(full @ C.axis) > C.aperture]
    pts = (C.apex + radii[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    pts = pts[C.contains(pts)]
    free = R.classify(pts) == 0
    report = {"samples": int(len(pts)), "radii": int(n_radii), "directions": int(len(dirs)),
              "radial_spacing": r / n_radii, "free_hits": int(free.sum()), "exact_arcs": False}
    return (not bool(free.any())), report


def _cone_arc_hits(R: RegionPair, C: Cone, rho: float) -> int:
    """Free arcs and phase changes of S(apex, rho) inside the open cone."""
    a = arc_decomposition(R, C.apex, rho)
    half = math.acos(C.aperture)
    base = math.atan2(C.axis[1], C.axis[0])
    trans = a.starts[1:] if a.labels[0] == a.labels[-1] else a.starts
    free = a.labels == 0
    hits = 0
    for lo in (base - half, base + math.pi - half):
        width = 2 * half
        off = np.mod(trans - lo, TWO_PI)
        hits += int(np.count_nonzero((off > 0) & (off < width)))
        s, e = a.starts[free], a.ends[free]
        overlap = (np.mod(s - lo, TWO_PI) < width) | (np.mod(lo - s, TWO_PI) < e - s)
        hits += int(np.count_nonzero(overlap))
    return hits


# ---------------------------------------------------------------------------
# scene files

_PRIMITIVE_PARAMS = {
    "halfspace": {"normal", "offset"},
    "ball": {"center", "radius"},
    "box": {"lo", "hi"},
    "polygon": {"vertices"},
    "polyhedron": {"normals", "offsets"},
    "graph": {"knots", "values", "side"},
    "voxels": {"origin", "spacing", "occupancy"},
    "empty": set(),
}


def _build_primitive(name: str, params: dict, dim: int, path: str) -> Region:
    allowed = _PRIMITIVE_PARAMS[name]
    extra = set(params) - allowed
    if extra:
        raise SceneError(f"{path}.params", f"unknown parameter(s) {sorted(extra)} for {name}")
    optional = {"side"}
    missing = allowed - set(params) - optional
    if missing:
        raise SceneError(f"{path}.params", f"missing parameter(s) {sorted(missing)} for {name}")
    try:
        if name == "empty":
            reg = Empty(dim)
        elif name == "halfspace":
            reg = HalfSpaceRegion(params["normal"], params["offset"])
        elif name == "ball":
            if not float(params["radius"]) > 0:
                raise SceneError(f"{path}.params.radius", "radius must be positive")
            reg = BallRegion(params["center"], params["radius"])
        elif name == "box":
            reg = BoxRegion(params["lo"], params["hi"])
        elif name == "polygon":
            reg = ConvexRegion.from_polygon(params["vertices"])
        elif name == "polyhedron":
            reg = ConvexRegion(params["normals"], params["offsets"])
        elif name == "graph":
            reg = GraphRegion(params["knots"], params["values"], params.get("side", "below"))
        else:
            reg = VoxelRegion(params["origin"], params["spacing"], params["occupancy"])
    except SceneError:
        raise
    except (ValueError, TypeError, IndexError) as exc:
        raise SceneError(f"{path}.params", str(exc)) from None
    if reg.dim != dim:
        raise SceneError(f"{path}.params", f"primitive has dimension {reg.dim}, scene has {dim}")
    return reg


def region_from_dict(node: Any, dim: int, path: str = "region") -> Region:
    """Build a region tree from nested ``{op, children}`` / ``{primitive, params}`` maps."""
    if node is None:
        return Empty(dim)
    if not isinstance(node, dict):
        raise SceneError(path, "expected a mapping")
    if "primitive" in node:
        extra = set(node) - {"primitive", "params"}
        if extra:
            raise SceneError(path, f"unknown key(s) {sorted(extra)}")
        name = node["primitive"]
        if name not in _PRIMITIVE_PARAMS:
            raise SceneError(f"{path}.primitive", f"unknown primitive {name!r}")
        params = node.get("params", {}) or {}
        if not isinstance(params, dict):
            raise SceneError(f"{path}.params", "expected a mapping")
        return _build_primitive(name, params, dim, path)
    if "op" in node:
        extra = set(node) - {"op", "children"}
        if extra:
            raise SceneError(path, f"unknown key(s) {sorted(extra)}")
        op = node["op"]
        kids = node.get("children")
        if not isinstance(kids, list) or not kids:
            raise SceneError(f"{path}.children", "expected a non-empty list")
        built = [region_from_dict(c, dim, f"{path}.children[{i}]") for i, c in enumerate(kids)]
        if op == "union":
            return Union(built)
        if op == "intersection":
            return Intersection(built)
        if op == "complement":
            if len(built) != 1:
                raise SceneError(f"{path}.children", "complement takes exactly one child")
            return Complement(built[0])
        raise SceneError(f"{path}.op", f"unknown op {op!r}")
    raise SceneError(path, "node needs either 'primitive' or 'op'")


def scene_from_dict(doc: Any, check_samples: int = 10_000) -> RegionPair:
    if not isinstance(doc, dict):
        raise SceneError("scene", "expected a mapping at the top level")
    extra = set(doc) - {"dim", "plus", "minus", "bbox"}
    if extra:
        raise SceneError("scene", f"unknown key(s) {sorted(extra)}")
    if "dim" not in doc:
        raise SceneError("scene.dim", "missing")
    dim = doc["dim"]
    if dim not in (2, 3):
        raise SceneError("scene.dim", "must be 2 or 3")
    plus = region_from_dict(doc.get("plus"), dim, "scene.plus")
    minus = region_from_dict(doc.get("minus"), dim, "scene.minus")
    bbox = doc.get("bbox")
    if bbox is not None:
        try:
            bbox = (np.asarray(bbox[0], float), np.asarray(bbox[1], float))
            if bbox[0].shape != (dim,) or bbox[1].shape != (dim,):
                raise ValueError
        except (TypeError, ValueError, IndexError):
            raise SceneError("scene.bbox", "expected [lo, hi] corner lists") from None
    try:
        return RegionPair(dim, plus, minus, bbox=bbox, check_samples=check_samples)
    except DisjointnessError as exc:
        raise SceneError("scene", str(exc)) from None


def load_scene(path: str | Path) -> RegionPair:
    """Read a YAML or JSON scene file."""
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SceneError("scene", f"cannot parse: {exc}") from None
    return scene_from_dict(doc)


# ---------------------------------------------------------------------------
# stock scenes


def half_plane_pair(dim: int = 2) -> RegionPair:
    """Complementary open half-spaces {y_d > 0} and {y_d < 0}."""
    u = np.zeros(dim)
    u[-1] = 1.0
    return RegionPair(dim, HalfSpaceRegion(u, 0.0), HalfSpaceRegion(-u, 0.0))


def gap_strip(h: float, dim: int = 2) -> RegionPair:
    """{y_d > 0} and {y_d < -h}; the closed strip between them is free."""
    u = np.zeros(dim)
    u[-1] = 1.0
    return RegionPair(dim, HalfSpaceRegion(u, 0.0), HalfSpaceRegion(-u, h))


def empty_pair(dim: int = 2) -> RegionPair:
    return RegionPair(dim, Empty(dim), Empty(dim))


def random_scene(rng: np.random.Generator, n_primitives: int = 5, extent: float = 1.0) -> RegionPair:
    """Random planar scene; ``minus`` is cut by the complement of ``plus``.

    Primitives are drawn from half-planes, disks, boxes, triangles and
    piecewise-linear subgraphs scattered in ``[-extent, extent]^2``.
    """
    prims: list[Region] = []
    for _ in range(n_primitives):
        kind = rng.integers(5)
        c = rng.uniform(-extent, extent, 2)
        if kind == 0:
            a = rng.uniform(0, TWO_PI)
            u = np.array([math.cos(a), math.sin(a)])
            prims.append(HalfSpaceRegion(u, float(u @ c)))
        elif kind == 1:
            prims.append(BallRegion(c, rng.uniform(0.1, 0.8) * extent))
        elif kind == 2:
            w = rng.uniform(0.1, 0.8, 2) * extent
            prims.append(BoxRegion(c - w, c + w))
        elif kind == 3:
            ang = np.sort(rng.uniform(0, TWO_PI, 3))
            rad = rng.uniform(0.2, 0.8) * extent
            v = c + rad * np.column_stack([np.cos(ang), np.sin(ang)])
            try:
                prims.append(ConvexRegion.from_polygon(v))
            except ValueError:
                prims.append(BallRegion(c, rad))
        else:
            knots = np.sort(rng.uniform(-extent, extent, 4))
            knots = knots + np.arange(4) * 1e-3
            vals = rng.uniform(-0.5, 0.5, 4) * extent
            prims.append(GraphRegion(knots, vals, "below" if rng.random() < 0.5 else "above"))
    k = int(rng.integers(1, n_primitives))
    plus = Union(prims[:k])
    minus = Intersection([Union(prims[k:]), Complement(plus)])
    lo = -np.full(2, 1.5 * extent)
    return RegionPair(2, plus, minus, bbox=(lo, -lo))


def as_points(pts: Iterable) -> np.ndarray:
    return np.atleast_2d(np.asarray(pts, dtype=float))
