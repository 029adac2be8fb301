"""Square-function integrals over scales and the inequality suites."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .coefficients import Kernel, SearchConfig, SphereSlice, _epsilon_from_slice, a_psi, g_ball
from .geometry import RegionPair, sample_sphere

DEFAULT_FACTOR = 2.0 ** 0.125


@dataclass
class DiniResult:
    """Trapezoid rule in log r of f(r)**power."""

    integrand: str
    r_min: float
    r_max: float
    grid: float
    value: float
    per_scale: list = field(default_factory=list)
    power: int = 2

    def recompute(self) -> float:
        r = np.array([p[0] for p in self.per_scale])
        f = np.array([p[1] for p in self.per_scale])
        return log_trapezoid(r, np.abs(f) ** self.power)


def log_grid(r_min: float, r_max: float, factor: float = DEFAULT_FACTOR) -> np.ndarray:
    """Geometric grid from r_min to r_max with ratio at most ``factor``."""
    if not (0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    if not (1.0 < factor <= 2.0):
        raise ValueError("grid factor must lie in (1, 2]")
    k = max(1, math.ceil(math.log(r_max / r_min) / math.log(factor) - 1e-12))
    return np.exp(np.linspace(math.log(r_min), math.log(r_max), k + 1))


def log_trapezoid(r: np.ndarray, v: np.ndarray) -> float:
    u = np.log(np.asarray(r, float))
    v = np.asarray(v, float)
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(u)))


def dini(f: Callable[[float], float] | Sequence[float], r_min: float, r_max: float,
         factor: float = DEFAULT_FACTOR, label: str = "f", power: int = 2) -> DiniResult:
    """Integral of f(r)^power dr/r over [r_min, r_max] by the trapezoid rule in log r.

    ``f`` may be a callable or a sequence of values already sampled on
    ``log_grid(r_min, r_max, factor)``.
    """
    r = log_grid(r_min, r_max, factor)
    if callable(f):
        vals = np.array([float(f(t)) for t in r])
    else:
        vals = np.asarray(f, float)
        if vals.shape != r.shape:
            raise ValueError("sampled integrand does not match the grid")
    value = log_trapezoid(r, np.abs(vals) ** power)
    return DiniResult(label, r_min, r_max, factor, value, list(zip(r.tolist(), vals.tolist())), power)


# ---------------------------------------------------------------------------
# per-scale evaluation shared by the suites


def _slice(R, x, r, mode, m, seed):
    q = None if mode == "exact-arc" else sample_sphere(x, r, mode, m, seed)
    return SphereSlice(R, x, r, q)


def _scale_seed(seed, k):
    return None if seed is None else int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def chain_table(R: RegionPair, x, r_grid, mode: str = "exact-arc", m: int = 2048, seed: int | None = 0,
                cfg: SearchConfig | None = None) -> list[dict]:
    """a, gamma, epsilon and their error bars at every scale."""
    cfg = cfg or SearchConfig()
    rows = []
    for k, r in enumerate(r_grid):
        sl = _slice(R, x, float(r), mode, m, _scale_seed(seed, k))
        a, ea = sl.asym()
        g, eg = sl.gamma()
        e, _ = _epsilon_from_slice(sl, cfg)
        ee = sl.eps_error(e)
        rows.append({"r": float(r), "a": a, "gamma": g, "eps": e, "err_a": ea, "err_gamma": eg, "err_eps": ee})
    return rows


def verify_chain(R: RegionPair, x, r_grid, mode: str = "exact-arc", m: int = 2048, seed: int | None = 0,
                 cfg: SearchConfig | None = None) -> dict:
    """Check 2a <= gamma <= 2 eps at every scale.

    The tolerance at a scale is the combined error estimate of the terms
    involved (1e-9 for exact arcs).
    """
    rows = chain_table(R, x, r_grid, mode, m, seed, cfg)
    worst, ok = 0.0, True
    for row in rows:
        exact = mode == "exact-arc"
        t1 = 1e-9 if exact else 2 * row["err_a"] + row["err_gamma"]
        t2 = 1e-9 if exact else row["err_gamma"] + 2 * row["err_eps"]
        v1 = 2 * row["a"] - row["gamma"]
        v2 = row["gamma"] - 2 * row["eps"]
        row["violation"] = max(v1, v2)
        row["tolerance"] = min(t1, t2)
        worst = max(worst, v1, v2)
        ok &= v1 <= t1 and v2 <= t2
    return {"lemma": "2a <= gamma <= 2eps", "mode": mode, "tolerances": "combined quadrature error",
            "per_scale": rows, "max_violation": worst, "verdict": "PASS" if ok else "FAIL"}


# ---------------------------------------------------------------------------
# smoothed domination


def psi_tail(M: float, n: int, kernel: Kernel | None = None) -> float:
    """int_M^inf phi(t) t^n sqrt(log(t/M)) dt for the kernel profile."""
    kernel = kernel or Kernel("gaussian")
    hi = max(kernel.support, M) + 8.0
    if M >= kernel.support:
        return 0.0
    t = np.linspace(M, hi, 4001)
    v = kernel.profile(t) * t ** n * np.sqrt(np.log(t / M))
    return float(trapezoid(v, t))


def verify_smoothed_domination(R: RegionPair, x, R_max: float, M: float = 4.0, r_min: float | None = None,
                               factor: float = DEFAULT_FACTOR, kernel: Kernel | None = None, mode: str = "exact-arc",
                               m: int = 2048, seed: int | None = 0, vol_quad: int = 32) -> dict:
    """Compare the smoothed square function of a_psi with that of epsilon.

    LHS = max_i int_{r_min}^{R_max} a_psi^i(x, r)^2 dr/r and
    RHS = int_{r_min}^{M R_max} eps(x, r)^2 dr/r; the empirical constant
    (LHS - tail) / RHS is reported, with tail = psi_tail(M).
    """
    kernel = kernel or Kernel("gaussian")
    r_min = r_min if r_min is not None else 1e-3 * R.diameter
    n = R.dim - 1
    rl = log_grid(r_min, R_max, factor)
    plus, minus = [], []
    for k, r in enumerate(rl):
        q = None if mode == "exact-arc" else sample_sphere(x, r, mode, m, _scale_seed(seed, k))
        p, mi = a_psi(R, x, float(r), kernel, vol_quad, q)
        plus.append(p)
        minus.append(mi)
    re = log_grid(r_min, M * R_max, factor)
    cfg = SearchConfig()
    eps = []
    for k, r in enumerate(re):
        sl = _slice(R, x, float(r), mode, m, _scale_seed(seed, 10_000 + k))
        eps.append(_epsilon_from_slice(sl, cfg)[0])
    lp = dini(plus, r_min, R_max, factor, "a_psi_plus")
    lm = dini(minus, r_min, R_max, factor, "a_psi_minus")
    rhs = dini(eps, r_min, M * R_max, factor, "eps")
    lhs = max(lp.value, lm.value)
    tail = psi_tail(M, n, kernel)
    const = (lhs - tail) / rhs.value if rhs.value > 0 else (0.0 if lhs <= tail + 1e-12 else math.inf)
    ok = math.isfinite(const)
    return {"lemma": "int a_psi^2 <= C int eps^2 + tail(M)", "M": M, "r_min": r_min, "R_max": R_max,
            "tolerances": "empirical constant finite", "lhs": lhs, "rhs": rhs.value, "tail": tail,
            "empirical_constant": max(const, 0.0) if ok else const,
            "per_scale": [{"r": r, "a_psi_plus": p, "a_psi_minus": mi} for r, p, mi in zip(rl.tolist(), plus, minus)],
            "verdict": "PASS" if ok else "FAIL"}


def verify_g_domination(R: RegionPair, x, R_max: float, r_min: float | None = None,
                        factor: float = DEFAULT_FACTOR, mode: str = "exact-arc", m: int = 2048,
                        seed: int | None = 0, radial_grid: int = 16) -> dict:
    """int g^2 <= C1 int gamma^2 <= 4 C1 int eps^2 with C1 reported.

    The second inequality follows scale by scale from gamma <= 2 eps and is
    checked within the accumulated quadrature error.
    """
    r_min = r_min if r_min is not None else 1e-3 * R.diameter
    r = log_grid(r_min, R_max, factor)
    gs, gam, eps, err = [], [], [], []
    cfg = SearchConfig()
    for k, t in enumerate(r):
        sq = _scale_seed(seed, k)
        q = None if mode == "exact-arc" else sample_sphere(x, t, mode, m, sq)
        sl = SphereSlice(R, x, float(t), q)
        g, eg = sl.gamma()
        e, _ = _epsilon_from_slice(sl, cfg)
        gam.append(g)
        eps.append(e)
        err.append(eg + 2 * sl.eps_error(e))
        gs.append(g_ball(R, x, float(t), radial_grid, q))
    dg = dini(gs, r_min, R_max, factor, "g_ball")
    dgam = dini(gam, r_min, R_max, factor, "gamma")
    de = dini(eps, r_min, R_max, factor, "eps")
    tol = 1e-9 if mode == "exact-arc" else log_trapezoid(r, 4 * np.array(err) * (np.array(gam) + np.array(err)))
    c1 = dg.value / dgam.value if dgam.value > 0 else (0.0 if dg.value == 0 else math.inf)
    ok = dgam.value <= 4 * de.value + tol and math.isfinite(c1)
    return {"lemma": "int g^2 <= C1 int gamma^2 <= 4 C1 int eps^2", "r_min": r_min, "R_max": R_max,
            "tolerances": {"gamma_vs_eps": tol}, "int_g2": dg.value, "int_gamma2": dgam.value, "int_eps2": de.value,
            "empirical_constant": c1,
            "per_scale": [{"r": a, "g_ball": b, "gamma": c, "eps": d} for a, b, c, d in zip(r.tolist(), gs, gam, eps)],
            "verdict": "PASS" if ok else "FAIL"}
