"""Planar arc profiles, characteristic constants and the classical flatness coefficient."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import _gauss_panels
from .dini import DEFAULT_FACTOR, DiniResult, dini
from .geometry import TWO_PI, RegionPair, arc_decomposition, fibonacci_sphere


@dataclass
class ArcProfile:
    x: np.ndarray
    r: float
    theta_plus: float
    theta_minus: float
    alpha_plus: float
    alpha_minus: float

    @property
    def spectral_gap(self) -> float:
        """min(1, alpha_plus + alpha_minus - 2); infinite alphas clamp to 1."""
        s = self.alpha_plus + self.alpha_minus - 2.0
        return 1.0 if not math.isfinite(s) else min(1.0, s)


def characteristic_alpha(theta: float) -> float:
    """alpha = pi / theta for an arc of length theta; infinity for an empty arc."""
    return math.inf if theta <= 0.0 else math.pi / theta


def arc_profile(R: RegionPair, x, r: float) -> ArcProfile:
    """Longest Plus and Minus arcs of S(x, r) and their constants."""
    d = arc_decomposition(R, x, r)
    tp, tm = d.longest(1), d.longest(-1)
    return ArcProfile(np.asarray(x, float), float(r), tp, tm, characteristic_alpha(tp), characteristic_alpha(tm))


def spectral_gap_closed_form(theta_plus: float, theta_minus: float) -> float:
    """pi/theta+ + pi/theta- - 2 written over a common denominator.

    The numerator pi (theta+ + theta-) - 2 theta+ theta- is nonnegative
    whenever theta+ + theta- <= 2 pi, so rounding cannot flip the sign of
    balanced configurations.
    """
    if theta_plus <= 0 or theta_minus <= 0:
        return math.inf
    num = math.pi * (theta_plus + theta_minus) - 2.0 * theta_plus * theta_minus
    return num / (theta_plus * theta_minus)


def carleson_epsilon(R: RegionPair, x, r: float) -> float:
    """max(|pi - theta+|, |pi - theta-|) from the longest arcs."""
    p = arc_profile(R, x, r)
    return max(abs(math.pi - p.theta_plus), abs(math.pi - p.theta_minus))


def alpha_dini(R: RegionPair, x, r_min: float, r_max: float, factor: float = DEFAULT_FACTOR) -> DiniResult:
    """Integral of min(1, alpha+ + alpha- - 2) dr/r (first power)."""
    return dini(lambda t: max(0.0, arc_profile(R, x, t).spectral_gap), r_min, r_max, factor,
                "min(1, alpha+ + alpha- - 2)", power=1)


def akn_table(R: RegionPair, x, r_grid) -> list[dict]:
    rows = []
    for r in r_grid:
        p = arc_profile(R, x, float(r))
        e = max(abs(math.pi - p.theta_plus), abs(math.pi - p.theta_minus))
        gap = min(1.0, spectral_gap_closed_form(p.theta_plus, p.theta_minus))
        rows.append({"r": float(r), "theta_plus": p.theta_plus, "theta_minus": p.theta_minus,
                     "eps2": e * e, "gap": gap})
    return rows


def akn_check(R: RegionPair, x, r_grid, tol: float = 1e-12) -> dict:
    """eps(x, r)^2 <= C min(1, alpha+ + alpha- - 2) with the empirical C.

    Scales with a vanishing gap must have eps = 0 (within ``tol``); the
    gap itself must be nonnegative.
    """
    rows = akn_table(R, x, r_grid)
    ratios = [row["eps2"] / row["gap"] for row in rows if row["gap"] > tol]
    degenerate_ok = all(row["eps2"] <= tol for row in rows if row["gap"] <= tol)
    nonneg = all(row["gap"] >= 0.0 for row in rows)
    const = max(ratios) if ratios else 0.0
    return {"lemma": "eps^2 <= C min(1, alpha+ + alpha- - 2)", "tolerances": {"degenerate": tol},
            "per_scale": rows, "empirical_constant": const, "gap_nonnegative": nonneg,
            "verdict": "PASS" if degenerate_ok and nonneg else "FAIL"}


def akn_supremum(k: int = 400) -> float:
    """Largest eps^2 / min(1, gap) over the closed-form arc simplex.

    Used as an independent ceiling for empirical AKN constants: any pair of
    disjoint arcs has theta+ + theta- <= 2 pi.
    """
    th = TWO_PI * (np.arange(0, k + 1)) / k
    tp, tm = np.meshgrid(th, th, indexing="ij")
    ok = tp + tm <= TWO_PI + 1e-12
    tp, tm = tp[ok], tm[ok]
    # an empty arc has infinite alpha, so its gap clamps to 1
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(tp * tm > 0, np.minimum(1.0, (math.pi * (tp + tm) - 2 * tp * tm) / (tp * tm)), 1.0)
    e2 = np.maximum(np.abs(math.pi - tp), np.abs(math.pi - tm)) ** 2
    sel = gap > 1e-9
    return float(np.max(e2[sel] / gap[sel]))


def l1_tangent_defect(R: RegionPair, x, r: float, u, radial_panels: int = 16, m3: int = 4000) -> tuple[float, float]:
    """L1 distance on the unit ball between the rescaled scene and H^+/H^-.

    The rescaled plus set is (Omega^+ - x)/r + x.  In the plane each
    radius rho of the unit ball is handled exactly with arcs of S(x, r rho);
    in space a Fibonacci lattice with ``m3`` nodes is used per radius.
    """
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    u = u / np.linalg.norm(u)
    rho, w = _gauss_panels(0.0, 1.0, radial_panels)
    n = R.dim - 1
    out = np.zeros(2)
    if R.dim == 2:
        phi = math.atan2(u[1], u[0])
        for t, wt in zip(rho, w):
            d = arc_decomposition(R, x, r * t)
            for k, label in enumerate((1, -1)):
                lo = phi - 0.5 * math.pi if label == 1 else phi + 0.5 * math.pi
                cuts = np.unique(np.mod(np.concatenate([d.starts, [lo, lo + math.pi, 0.0]]), TWO_PI))
                cuts = np.concatenate([cuts, [TWO_PI]])
                mids = 0.5 * (cuts[:-1] + cuts[1:])
                in_h = np.mod(mids - lo, TWO_PI) < math.pi
                in_o = d.label_at(mids) == label
                out[k] += wt * t * float(np.sum(np.diff(cuts)[in_h != in_o]))
        return float(out[0]), float(out[1])
    dirs = fibonacci_sphere(m3)
    area = 4.0 * math.pi / m3
    s = dirs @ u
    for t, wt in zip(rho, w):
        lab = R.classify(x + r * t * dirs)
        for k, label in enumerate((1, -1)):
            in_h = s > 0 if label == 1 else s < 0
            out[k] += wt * t ** n * area * float(np.count_nonzero(in_h != (lab == label)))
    return float(out[0]), float(out[1])
