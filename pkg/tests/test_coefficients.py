from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from eps2.coefficients import (AnchorMismatch, Kernel, a_psi, asym_a, coefficients, epsilon, epsilon_given_H,
                               find_corkscrew, g_ball, gamma_sym, splitting_fractions)
from eps2.geometry import (Ball, HalfSpace, Hyperplane, empty_pair, gap_strip, half_plane_pair, random_scene,
                           scene_from_dict)

O = (0.0, 0.0)


def test_half_plane_all_zero():
    rec = coefficients(half_plane_pair(2), O, 1.0)
    for v in (rec.eps, rec.a_sym, rec.gamma_sym, rec.g_ball):
        assert abs(v) <= 1e-12
    assert max(rec.a_psi_plus, rec.a_psi_minus) <= 1e-6


def test_half_space_lattice_zero():
    rec = coefficients(half_plane_pair(3), (0.0, 0.0, 0.0), 1.0, mode="lattice", m=2000)
    assert max(abs(rec.eps), abs(rec.a_sym), abs(rec.gamma_sym), abs(rec.g_ball)) <= 1e-6


@pytest.mark.parametrize("phi", [0.01, 0.1, 0.4])
def test_rotated_half_plane(phi):
    H = HalfSpace(np.zeros(2), (math.sin(phi), math.cos(phi)))
    assert epsilon_given_H(half_plane_pair(2), O, 1.0, H) == pytest.approx(2 * phi, abs=1e-12)


def test_anchor_mismatch():
    with pytest.raises(AnchorMismatch):
        epsilon_given_H(half_plane_pair(2), O, 1.0, HalfSpace((0.1, 0.0), (0.0, 1.0)))


def test_gap_strip_coefficients():
    R = gap_strip(0.1)
    e, H = epsilon(R, O, 1.0)
    assert e == pytest.approx(2 * math.asin(0.1), abs=1e-9)
    assert asym_a(R, O, 1.0) == pytest.approx(2 * math.asin(0.1), abs=1e-12)
    assert gamma_sym(R, O, 1.0) == pytest.approx(4 * math.asin(0.1), abs=1e-12)


def test_gap_strip_epsilon_brute_force():
    R = gap_strip(0.1)
    phis = 2 * math.pi * np.arange(10_000) / 10_000
    brute = min(epsilon_given_H(R, O, 1.0, HalfSpace(np.zeros(2), (math.cos(p), math.sin(p)))) for p in phis[::10])
    e, _ = epsilon(R, O, 1.0)
    assert e <= brute + 1e-12


def test_empty_scene_values():
    R = empty_pair(2)
    assert epsilon(R, O, 1.0)[0] == pytest.approx(2 * math.pi)
    p, m = a_psi(R, O, 1.0)
    assert p == pytest.approx(math.pi / 2, abs=Kernel().tail_bound(1))
    assert m == pytest.approx(p)


def test_asym_plus_everything_but_lower_half():
    doc = {"dim": 2, "plus": {"op": "complement", "children": [{"primitive": "halfspace",
                                                               "params": {"normal": [0, -1], "offset": 0}}]}}
    R = scene_from_dict(doc)
    assert asym_a(R, O, 1.0) == pytest.approx(math.pi, abs=1e-12)


def test_g_ball_gap_strip_oracle():
    h, r = 0.1, 1.0
    want = quad(lambda t: 4 * math.asin(min(1.0, h / t)) * t, 0, r, points=[h], limit=200)[0] / r ** 2
    assert g_ball(gap_strip(h), O, r, radial_grid=64) == pytest.approx(want, rel=2e-3)


def test_a_psi_gap_strip_montecarlo():
    rng = np.random.default_rng(0)
    y = rng.standard_normal((1_000_000, 2)) / math.sqrt(2.0)
    # gaussian psi(y) = exp(-|y|^2) integrates to pi; c_psi = pi/2
    inside_minus = y[:, 1] < -0.1
    est = math.pi * inside_minus.mean()
    sd = math.pi * inside_minus.std() / math.sqrt(len(y))
    _, m = a_psi(gap_strip(0.1), O, 1.0)
    assert abs(m - abs(math.pi / 2 - est)) <= 3 * sd + 1e-6


def test_bump_kernel_mass():
    k = Kernel("bump")
    assert k.c_psi(1) > 0
    with pytest.raises(ValueError):
        Kernel("box")


def test_gamma_bounded_by_sphere():
    for seed in range(5):
        R = random_scene(np.random.default_rng(seed), 5)
        assert gamma_sym(R, O, 0.7) <= 2 * math.pi + 1e-12


@given(st.floats(0.2, 5.0), st.integers(0, 500))
def test_dilation_invariance(lam, seed):
    R = random_scene(np.random.default_rng(seed), 5)
    S = R.transformed(scale=lam)
    a = coefficients(R, O, 0.6)
    b = coefficients(S, O, 0.6 * lam)
    assert b.eps == pytest.approx(a.eps, abs=1e-9)
    assert b.gamma_sym == pytest.approx(a.gamma_sym, abs=1e-9)
    assert b.g_ball == pytest.approx(a.g_ball, abs=1e-9)


def test_stratified_within_error():
    R = gap_strip(0.1)
    rec = coefficients(R, O, 1.0, mode="stratified-random", m=20_000, seed=4)
    assert abs(rec.a_sym - 2 * math.asin(0.1)) <= rec.errors["a_sym"]
    assert abs(rec.gamma_sym - 4 * math.asin(0.1)) <= rec.errors["gamma_sym"]


def test_corkscrew_examples():
    B = Ball(np.zeros(2), 1.0)
    ball, _ = find_corkscrew(half_plane_pair(2), B, 1, 0.05)
    assert ball is not None and ball.center[1] - ball.radius >= -1e-12
    assert find_corkscrew(empty_pair(2), B, 1, 0.05)[0] is None
    ball, _ = find_corkscrew(gap_strip(0.1), B, -1, 0.05)
    assert ball is not None and ball.center[1] + ball.radius <= -0.1 + 1e-12


def test_splitting_fractions():
    B = Ball(np.zeros(2), 1.0)
    assert splitting_fractions(half_plane_pair(2), B, Hyperplane(np.zeros(2), (0, 1)), 0.0) == pytest.approx((1, 1))
    assert splitting_fractions(gap_strip(0.1), B, Hyperplane((0, -0.05), (0, 1)), 0.1) == pytest.approx((1, 1))
    assert splitting_fractions(empty_pair(2), B, Hyperplane(np.zeros(2), (0, 1)), 0.0) == pytest.approx((0, 0))
