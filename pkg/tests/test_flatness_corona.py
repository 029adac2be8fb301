from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eps2.corona import (Z, CoronaConfig, PreconditionError, check_dense_interval, check_whitney, corona,
                         d_function, dense_dyadic_interval, dense_interval_bound, whitney)
from eps2.flatness import (EmptyIntersection, WeightedCloud, ball_is_good, beta_bruteforce, beta_inf,
                           theta_density)
from eps2.geometry import Ball, Hyperplane
from eps2.suites import desk_graph

points2 = st.tuples(st.floats(-5, 5), st.floats(-5, 5))


def test_beta_collinear():
    P = np.column_stack([np.linspace(-0.5, 0.5, 20), 0.3 * np.linspace(-0.5, 0.5, 20)])
    assert beta_inf(P, Ball(np.zeros(2), 1.0))[0] == pytest.approx(0.0, abs=1e-12)


def test_beta_triangle_brute_force():
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.3]])
    B = Ball((0.5, 0.0), 1.0)
    assert beta_inf(P, B)[0] == pytest.approx(beta_bruteforce(P, B), abs=1e-4)


def test_beta_perturbed_grid():
    rng = np.random.default_rng(0)
    delta = 0.01
    x = np.linspace(-0.7, 0.7, 200)
    P = np.column_stack([x, rng.uniform(-delta, delta, len(x))])
    assert beta_inf(P, Ball(np.zeros(2), 1.0))[0] <= delta


def test_beta_empty_intersection():
    with pytest.raises(EmptyIntersection):
        beta_inf(np.array([[5.0, 5.0]]), Ball(np.zeros(2), 1.0))


def test_beta_3d_plane():
    rng = np.random.default_rng(1)
    P = np.column_stack([rng.uniform(-0.5, 0.5, (300, 2)), np.zeros(300)])
    b, L = beta_inf(P, Ball(np.zeros(3), 1.0))
    assert b <= 1e-6 and abs(abs(L.normal[2]) - 1) <= 1e-6


def test_theta_density_examples():
    mu = WeightedCloud(np.zeros((1, 2)), np.ones(1))
    assert theta_density(mu, Ball(np.zeros(2), 1.0)) == pytest.approx(1.0)
    assert theta_density(mu, Ball((5.0, 5.0), 1.0)) == 0.0
    assert theta_density(mu, Ball(np.zeros(2), 2.0)) == pytest.approx(0.5)


def test_ball_is_good_examples():
    P = desk_graph(2000)
    mu = WeightedCloud(P)
    L = Hyperplane(np.zeros(2), (0.0, 1.0))
    assert ball_is_good(mu, Ball(np.zeros(2), 1.0), 0.01, 0.1, L)
    assert not ball_is_good(mu, Ball((0.0, 5.0), 1.0), 0.01, 0.1, L)
    assert not ball_is_good(mu, Ball(np.zeros(2), 1.0), 10.0, 0.1, L)


@given(st.lists(points2, min_size=1, max_size=6), st.lists(st.floats(0, 2), min_size=6, max_size=6),
       points2, points2)
def test_d_is_1_lipschitz(centers, radii, x, y):
    C = np.array(centers)
    r = np.array(radii[:len(C)])
    dx, dy = d_function([x, y], C, r)
    assert abs(dx - dy) <= math.dist(x, y) + 1e-9


@given(st.lists(points2, min_size=1, max_size=5), points2, st.floats(0, 2), st.lists(points2, min_size=1, max_size=5))
def test_adding_ball_never_increases_d(centers, z, rz, probes):
    C = np.array(centers)
    r = np.ones(len(C))
    before = d_function(probes, C, r)
    after = d_function(probes, np.vstack([C, z]), np.append(r, rz))
    assert np.all(after <= before + 1e-12)


def test_d_examples():
    assert d_function([[3.0, 4.0]], [[0.0, 0.0]], [1.0])[0] == pytest.approx(6.0)
    assert math.isinf(d_function([[0.0, 0.0]], np.zeros((0, 2)), [])[0])


def _const(v):
    return (lambda lo, side: np.full(len(lo), v)), (lambda p: np.full(len(np.atleast_2d(p)), v))


def test_whitney_constant_D():
    Dc, Dp = _const(100.0)
    fam = whitney(2, Dc, Dp, 8, -4)
    assert len(fam) > 0 and np.all(fam.side == 4.0)
    rep = check_whitney(fam, Dc, Dp)
    assert rep["ok"]


def test_whitney_zero_D():
    Dc, Dp = _const(0.0)
    fam = whitney(2, Dc, Dp, 8, -4)
    assert not np.any(fam.kind == "W")


def test_whitney_distance_to_origin():
    def Dc(lo, side):
        side = np.broadcast_to(np.asarray(side, float), (len(lo),))[:, None]
        near = np.clip(np.zeros_like(lo), lo, lo + side)
        return np.linalg.norm(near, axis=1)

    def Dp(p):
        return np.linalg.norm(np.atleast_2d(p), axis=1)

    fam = whitney(2, Dc, Dp, 3, -6)
    assert len(np.unique(fam.side[fam.kind == "W"])) > 3
    rep = check_whitney(fam, Dc, Dp)
    assert rep["a"]["ok"] and rep["d"]["ok"]


def test_dense_interval_examples():
    assert dense_dyadic_interval((0.0, 1.0), [(0.0, 1.0)], 0.5, 0.25) == (0.0, 1.0)
    G = [(0.0, 0.5)]
    J = dense_dyadic_interval((0.0, 1.0), G, 0.5, 0.25)
    assert check_dense_interval(J, G, 0.5, 0.25)
    assert J[1] - J[0] >= dense_interval_bound(0.5, 0.25)
    with pytest.raises(PreconditionError):
        dense_dyadic_interval((0.0, 1.0), [(0.0, 0.1)], 0.5, 0.25)


@given(st.lists(st.tuples(st.integers(0, 63), st.integers(1, 16)), min_size=1, max_size=6),
       st.sampled_from([0.2, 0.3, 0.5]), st.sampled_from([0.1, 0.25, 0.4]))
def test_dense_interval_exhaustive(pieces, c2, theta):
    G = [(a / 64, min(1.0, (a + w) / 64)) for a, w in pieces]
    try:
        J = dense_dyadic_interval((0.0, 1.0), G, c2, theta)
    except PreconditionError:
        return
    assert check_dense_interval(J, G, c2, theta)
    assert J[1] - J[0] >= dense_interval_bound(c2, theta) - 1e-15


def test_corona_exact_line():
    x = np.linspace(-1, 1, 2001)
    P = np.column_stack([x, np.zeros_like(x)])
    res = corona(WeightedCloud(P), Ball(np.zeros(2), 1.0), 0.01, 0.1)
    assert np.all(res.labels == Z)
    assert res.stats["mu_LD"] == 0.0 and res.stats["mu_BA"] == 0.0
    assert np.max(np.abs(res.graph.values)) <= 1e-9


def test_corona_two_lines_follows_one():
    x = np.linspace(-1, 1, 1001)
    P = np.vstack([np.column_stack([x, np.zeros_like(x)]), np.column_stack([x, np.full_like(x, 10.0)])])
    res = corona(WeightedCloud(P), Ball(np.zeros(2), 1.0), 0.01, 0.1)
    inner = np.abs(res.graph.nodes[:, 0]) < 0.9
    assert np.max(np.abs(res.graph.values[inner])) <= 1e-6


def test_corona_sparse_cloud_low_density():
    P = np.random.default_rng(0).uniform(-1, 1, (40, 2))
    res = corona(WeightedCloud(P), Ball(np.zeros(2), 1.0), 0.5, 0.1)
    assert res.stats["mu_LD"] > res.stats["mu_Z"] + res.stats["mu_BA"]


def test_corona_export_round_trip(tmp_path):
    res = corona(WeightedCloud(desk_graph(2000)), Ball(np.zeros(2), 1.0), 0.01, 0.1, cfg=CoronaConfig(pairs=500))
    res.export(tmp_path / "c.json")
    back = type(res).load(tmp_path / "c.json")
    p = np.linspace(-0.9, 0.9, 33)[:, None]
    assert np.array_equal(back.height(p), res.height(p))
    assert list(back.labels) == list(res.labels)
