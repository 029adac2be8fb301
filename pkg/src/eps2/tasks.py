"""Task runners behind the command line.

Each runner takes the resolved parameter dict of its task, the loaded
scene (or None), a per-task seed and a worker count, and returns a report
dict.  Reports carrying a ``verdict`` decide the exit status of a run.
"""
from __future__ import annotations

import math

import numpy as np

from . import capacity as cap
from .coefficients import Kernel, coefficients
from .corona import corona
from .dini import chain_table, dini, log_grid, verify_chain
from .flatness import EmptyIntersection, WeightedCloud, beta_inf
from .fourier import (GridFunction, bump_function, random_lipschitz, smoothed_tent, verify_fourier_identity,
                      verify_lips, verify_second_diff)
from .geometry import Ball, RegionPair
from .planar import akn_check, akn_supremum
from .reports import dini_partial_sums
from .suites import SUITES, ball_net, cantor_quarter, desk_graph, disk_sample, pmap, spike_scene


def _origin(p: dict, R: RegionPair | None) -> list[float]:
    x = p.get("x")
    return [0.0] * R.dim if x is None else [float(v) for v in x]


def _radii(p: dict) -> list[float]:
    if p.get("radii"):
        return [float(r) for r in p["radii"]]
    return np.geomspace(p["r_min"], p["r_max"], int(p["count"])).tolist()


def _coeff_at(args):
    R, x, r, mode, m, seed, kernel = args
    return coefficients(R, x, r, mode=mode, m=m, seed=seed, kernel=Kernel(kernel)).row()


def run_coeff(p: dict, R: RegionPair, seed: int, jobs: int = 1) -> dict:
    """Coefficient table over scales at one centre."""
    x = _origin(p, R)
    mode = p["mode"]
    if R.dim == 3 and mode == "exact-arc":
        mode = "lattice"
    radii = _radii(p)
    items = [(R, x, r, mode, p["m"], seed + k, p["kernel"]) for k, r in enumerate(radii)]
    rows = pmap(_coeff_at, items, jobs)
    return {"task": "coeff", "x": x, "mode": mode, "rows": rows}


def run_dini(p: dict, R: RegionPair, seed: int, jobs: int = 1) -> dict:
    """Square-function integrals of eps, a and gamma with running partial sums."""
    x = _origin(p, R)
    mode = "lattice" if R.dim == 3 and p["mode"] == "exact-arc" else p["mode"]
    grid = log_grid(p["r_min"], p["r_max"])
    tab = chain_table(R, x, grid, mode, p["m"], seed)
    integrals = {}
    partial = {key: dini_partial_sums([(row["r"], row[key]) for row in tab]) for key in ("eps", "a", "gamma")}
    rows = []
    for k, row in enumerate(tab):
        rows.append({"r": row["r"], "eps": row["eps"], "a": row["a"], "gamma": row["gamma"],
                     **{f"partial_{key}": partial[key][k]["partial"] for key in partial}})
    for key in ("eps", "a", "gamma"):
        integrals[key] = dini([row[key] for row in tab], p["r_min"], p["r_max"], label=key).value
    return {"task": "dini", "x": x, "mode": mode, "integrals": integrals, "rows": rows}


def load_cloud(c: dict, seed: int) -> np.ndarray:
    if c["kind"] == "zigzag":
        return desk_graph(int(c["n"]), seed)
    if c["kind"] == "spike":
        return spike_scene(int(c["n"]), seed=seed)
    if not c.get("path"):
        raise ValueError("a csv cloud needs a path")
    return np.loadtxt(c["path"], delimiter=",", ndmin=2)


def run_beta(p: dict, R, seed: int, jobs: int = 1) -> dict:
    """beta-infinity of the cloud in concentric balls."""
    P = load_cloud(p["cloud"], seed)
    rows = []
    for r in p["radii"]:
        try:
            b, L = beta_inf(P, Ball(p["center"], float(r)))
            rows.append({"r": float(r), "beta": b, **{f"normal{i + 1}": float(v) for i, v in enumerate(L.normal)}})
        except EmptyIntersection:
            rows.append({"r": float(r), "beta": math.nan})
    return {"task": "beta", "points": len(P), "rows": rows}


def run_corona(p: dict, R, seed: int, jobs: int = 1):
    """Corona construction; returns the result object and a summary report."""
    P = load_cloud(p["cloud"], seed)
    res = corona(WeightedCloud(P), Ball(p["center"], p["radius"]), p["theta"], p["alpha"])
    summary = {"task": "corona", "points": len(P), "stats": res.stats, "diagnostics": res.diagnostics,
               "params": res.params}
    return res, summary


def _capacity_set(c: dict) -> np.ndarray:
    if c["kind"] == "ball_net":
        return ball_net(float(c["spacing"]))
    if c["kind"] == "cantor":
        return cantor_quarter(int(c["level"]))
    if not c.get("path"):
        raise ValueError("a csv set needs a path")
    return np.loadtxt(c["path"], delimiter=",", ndmin=2)


def run_capacity(p: dict, R, seed: int, jobs: int = 1) -> dict:
    """Riesz capacities (and optionally the logarithmic one) of a net."""
    K = _capacity_set(p["set"])
    rows = []
    for s in p["s"]:
        est = cap.capacity_s(K, float(s))
        rows.append({"s": float(s), "capacity": est.value, "energy": est.energy, "iterations": est.iterations,
                     "delta": est.delta, "content": cap.hausdorff_content(K, float(s))})
    out = {"task": "capacity", "points": len(K), "spacing": cap.net_spacing(K), "rows": rows}
    if p["log"]:
        out["log_capacity"] = cap.capacity_log(K).value
    return out


def run_slice(p: dict, R, seed: int, jobs: int = 1) -> dict:
    """Both sides of the slicing inequality for a ball net over a flat disk."""
    k = p["K"]
    h = float(k["spacing"])
    rad = float(k["radius"])
    K = ball_net(h, center=k["center"], radius=rad, shell=int(round(4 * math.pi * rad ** 2 / h ** 2)) + 8)
    G, w = disk_sample(float(p["G_radius"]), int(p["G_rings"]))
    r = cap.slicing_check(K, G, w, float(p["s"]), float(p["r0"]))
    return {"task": "slice", "points": len(K), "disk_nodes": len(G), **r}


def run_spectral(p: dict, R: RegionPair, seed: int, jobs: int = 1) -> dict:
    """Arc profiles and the empirical constant of eps^2 <= C min(1, alpha+ + alpha- - 2)."""
    if R.dim != 2:
        raise ValueError("the spectral task needs a planar scene")
    rep = akn_check(R, _origin(p, R), np.geomspace(p["r_min"], p["r_max"], int(p["count"])))
    rep["ceiling"] = akn_supremum()
    rep["task"] = "spectral"
    return rep


def _function(c: dict, seed: int) -> GridFunction:
    if c["kind"] == "csv":
        if not c.get("path"):
            raise ValueError("a csv function needs a path")
        return GridFunction.from_csv(c["path"])
    N, slope = int(c["N"]), float(c["slope"])
    if c["kind"] == "bump":
        return bump_function(N, slope=slope)
    if c["kind"] == "tent":
        return smoothed_tent(N, slope=slope)
    return random_lipschitz(seed, N, slope=slope)


def run_fourier(p: dict, R, seed: int, jobs: int = 1) -> dict:
    """Plancherel, second-difference and Lipschitz comparability checks."""
    f = _function(p["function"], seed)
    out = {"task": "fourier", "N": f.N, "n": f.n, "grad_norm2": f.grad_norm2()}
    ok = True
    for name in p["checks"]:
        if name == "plancherel":
            rep = verify_fourier_identity(f)
        elif name == "second_difference":
            rep = verify_second_diff(f)
        else:
            rep = verify_lips(f)
        out[name] = rep
        ok &= rep["verdict"] == "PASS"
    out["verdict"] = "PASS" if ok else "FAIL"
    return out


def run_verify(p: dict, R: RegionPair | None, seed: int, jobs: int = 1) -> dict:
    """Named acceptance suites plus, with a scene, the coefficient chain on it."""
    out: dict = {"task": "verify"}
    ok = True
    if R is not None:
        x = _origin(p, R)
        radii = _radii(p)
        mode = "exact-arc" if R.dim == 2 else "lattice"
        rep = verify_chain(R, x, radii, mode=mode, seed=seed)
        items = [(R, x, r, mode, 2048, seed + k, "gaussian") for k, r in enumerate(radii)]
        out["scene"] = {"chain": rep["per_scale"], "coefficients": pmap(_coeff_at, items, jobs),
                        "verdict": rep["verdict"]}
        ok &= rep["verdict"] == "PASS"
    done = set()
    reports = []
    for name in p["suites"]:
        for fn in SUITES[name]:
            if fn.__name__ in done:
                continue
            done.add(fn.__name__)
            rep = fn(jobs=jobs, seed=seed)
            reports.append(rep)
            ok &= rep["verdict"] == "PASS"
    out["suites"] = reports
    out["verdict"] = "PASS" if ok else "FAIL"
    return out


RUNNERS = {"coeff": run_coeff, "dini": run_dini, "beta": run_beta, "corona": run_corona,
           "capacity": run_capacity, "slice": run_slice, "spectral": run_spectral, "fourier": run_fourier,
           "verify": run_verify}
