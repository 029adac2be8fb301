from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eps2.capacity import (DiscreteMeasure, capacity_log, capacity_s, cdc_check, choquet_integral, content_depth,
                           dyadic_root, epsilon_s, hausdorff_content, riesz_energy, slicing_check)
from eps2.geometry import half_plane_pair
from eps2.suites import ball_net, cantor_quarter, disk_sample


def segment(n, length=1.0):
    x = (np.arange(n) + 0.5) / n * length
    return np.column_stack([x, np.zeros(n)])


def test_two_atom_energy():
    mu = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0.5, 0.5]), 1e-3)
    e = riesz_energy(mu, 1.0)
    assert e.cross_energy == pytest.approx(0.5)
    assert e.self_energy == pytest.approx(0.5 * 1e3)
    big = DiscreteMeasure(mu.support * 3.0, mu.masses, 1e-3)
    assert riesz_energy(big, 1.0).cross_energy == pytest.approx(0.5 / 3.0)


def test_single_atom_energy():
    mu = DiscreteMeasure(np.zeros((1, 2)), np.ones(1), 0.01)
    assert riesz_energy(mu, 1.5).total == pytest.approx(0.01 ** -1.5)


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_scaling_law(s, lam):
    K = np.random.default_rng(0).uniform(-1, 1, (150, 2))
    assert capacity_s(lam * K, s).value / capacity_s(K, s).value == pytest.approx(lam ** s, rel=0.02)


def test_monotone_under_inclusion():
    K = np.random.default_rng(1).uniform(-1, 1, (200, 2))
    a = capacity_s(K[:100], 1.0, delta=0.02)
    b = capacity_s(K, 1.0, delta=0.02)
    assert a.value <= b.value + 1e-6 * b.value


def test_newtonian_unit_ball():
    assert capacity_s(ball_net(0.12), 1.0).value == pytest.approx(1.0, rel=0.05)


def test_log_capacity_homogeneous():
    K = segment(200)
    a = capacity_log(K).value
    assert capacity_log(2.0 * K).value == pytest.approx(2 * a, rel=1e-5)
    assert capacity_log(segment(100, 0.5)).value < a
    assert capacity_log(segment(400)).value == pytest.approx(a, rel=0.05)


def test_content_unit_segment():
    assert hausdorff_content(segment(100), 1.0) == pytest.approx(1.0, rel=0.1)


def test_content_single_point_and_depth():
    P = np.array([[0.3, 0.4]])
    assert hausdorff_content(P, 0.5, depth=12) <= hausdorff_content(P, 0.5, depth=2)
    K = cantor_quarter(4)
    vals = [hausdorff_content(K, 0.75, depth=d, cap_depth=False) for d in range(0, 11)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_choquet_examples():
    K = cantor_quarter(3)
    H = hausdorff_content(K, 1.0)
    assert choquet_integral(np.full(len(K), 3.0), K, 1.0, p=2) == pytest.approx(9.0 * H)
    assert choquet_integral(np.zeros(len(K)), K, 1.0) == 0.0
    ind = (K[:, 0] < 0.5).astype(float)
    root = dyadic_root(K)
    want = hausdorff_content(K[ind > 0], 1.0, depth=content_depth(K, 8, root), root=root, cap_depth=False)
    assert choquet_integral(ind, K, 1.0, p=2) == pytest.approx(want)
    assert 0 < want <= H


def test_cdc_half_plane():
    ok, margin, info = cdc_check(half_plane_pair(2), (0.0, 0.0), 1.0, 0.5, 0.01)
    assert ok and margin > 0
    ok2, margin2, _ = cdc_check(half_plane_pair(2).transformed(scale=4.0), (0.0, 0.0), 4.0, 0.5, 0.01)
    assert margin2 == pytest.approx(margin * 4.0 ** 0.5, rel=1e-6)


def test_epsilon_s_half_space():
    R = half_plane_pair(3)
    val, H = epsilon_s(R, np.zeros(3), 1.0, 1.5, 0.05, 0.5, directions=6, grid=120,
                       extra_normals=[np.array([0.0, 0.0, 1.0])])
    assert val == pytest.approx(0.0, abs=1e-12)


def test_slicing_examples():
    G, w = disk_sample(0.5)
    empty = slicing_check(np.zeros((0, 3)), G, w, 1.5, 1.0)
    assert empty["lhs"] == 0.0 and empty["rhs"] == 0.0
    K = ball_net(0.04, center=(0.0, 0.0, 0.5), radius=0.1, shell=87)
    full = slicing_check(K, G, w, 1.5, 1.0)
    G2, w2 = disk_sample(0.5 / math.sqrt(2))
    half = slicing_check(K, G2, w2, 1.5, 1.0)
    assert half["lhs"] / full["lhs"] == pytest.approx(0.25, rel=1e-9)
    assert half["ratio"] / full["ratio"] == pytest.approx(0.5, rel=0.35)


@given(st.floats(0.3, 3.0))
def test_capacity_dilation_property(lam):
    K = cantor_quarter(2)
    assert capacity_s(lam * K, 1.0).value == pytest.approx(lam * capacity_s(K, 1.0).value, rel=1e-6)
