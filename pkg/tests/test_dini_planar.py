from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eps2.dini import (chain_table, dini, log_grid, log_trapezoid, psi_tail, verify_chain, verify_g_domination,
                       verify_smoothed_domination)
from eps2.geometry import empty_pair, gap_strip, half_plane_pair, random_scene
from eps2.planar import (akn_check, akn_supremum, alpha_dini, arc_profile, carleson_epsilon, characteristic_alpha,
                         l1_tangent_defect, spectral_gap_closed_form)

O = (0.0, 0.0)


def test_log_grid_endpoints():
    r = log_grid(0.01, 1.0)
    assert r[0] == pytest.approx(0.01) and r[-1] == pytest.approx(1.0)
    assert np.all(np.diff(np.log(r)) <= math.log(2 ** 0.125) + 1e-12)


def test_dini_constants():
    assert dini(lambda r: 0.0, 0.01, 1.0).value == 0.0
    assert dini(lambda r: 0.3, 0.01, 1.0).value == pytest.approx(0.09 * math.log(100), abs=1e-9)


def test_dini_rejects_degenerate_range():
    with pytest.raises(ValueError):
        dini(lambda r: 1.0, 1.0, 1.0)


def test_dini_gap_strip_refinement():
    R = gap_strip(0.1)
    f = lambda r: carleson_epsilon(R, O, r)
    coarse = dini(f, 0.2, 4.0).value
    fine = dini(f, 0.2, 4.0, factor=2 ** 0.0125).value
    assert coarse == pytest.approx(fine, rel=0.01)


def test_log_trapezoid_power():
    r = np.geomspace(0.1, 1.0, 2001)
    assert log_trapezoid(r, r) == pytest.approx(0.9, rel=1e-6)


def test_chain_examples():
    assert verify_chain(half_plane_pair(2), O, log_grid(0.1, 1.0))["verdict"] == "PASS"
    rep = verify_chain(gap_strip(0.1), O, log_grid(0.2, 2.0))
    assert rep["verdict"] == "PASS"
    for row in rep["per_scale"]:
        assert 2 * row["a"] == pytest.approx(row["gamma"], abs=1e-9)
        assert row["gamma"] == pytest.approx(2 * row["eps"], abs=1e-9)
    R = random_scene(np.random.default_rng(11), 5)
    assert verify_chain(R, O, log_grid(0.1, 1.0, 2 ** 0.5), mode="stratified-random", m=4096)["verdict"] == "PASS"


def test_chain_table_columns():
    row = chain_table(gap_strip(0.1), O, [1.0])[0]
    assert set(row) >= {"r", "a", "gamma", "eps", "err_a", "err_gamma", "err_eps"}


def test_smoothed_domination_half_plane():
    rep = verify_smoothed_domination(half_plane_pair(2), O, 1.0, r_min=0.05)
    assert rep["verdict"] == "PASS" and rep["lhs"] <= 1e-12


def test_g_domination_scale_invariant():
    R = gap_strip(0.1)
    a = verify_g_domination(R, O, 1.0, r_min=0.05)
    b = verify_g_domination(R.transformed(scale=3.0), O, 3.0, r_min=0.15)
    assert a["verdict"] == "PASS"
    assert b["empirical_constant"] == pytest.approx(a["empirical_constant"], rel=1e-9)


def test_psi_tail_vanishes_beyond_support():
    assert psi_tail(4.0, 1) == 0.0
    assert psi_tail(1.0, 1) > 0.0


def test_arc_profiles():
    p = arc_profile(half_plane_pair(2), O, 1.0)
    assert (p.theta_plus, p.theta_minus) == pytest.approx((math.pi, math.pi))
    assert (p.alpha_plus, p.alpha_minus) == pytest.approx((1.0, 1.0))
    h, r = 0.1, 1.0
    p = arc_profile(gap_strip(h), O, r)
    assert p.theta_plus == pytest.approx(math.pi)
    assert p.theta_minus == pytest.approx(math.pi - 2 * math.asin(h / r))
    assert p.alpha_minus == pytest.approx(math.pi / p.theta_minus)
    doc_empty_minus = arc_profile(half_plane_pair(2).__class__(2, half_plane_pair(2).plus, empty_pair(2).minus), O, 1.0)
    assert math.isinf(doc_empty_minus.alpha_minus) and doc_empty_minus.spectral_gap == 1.0


def test_carleson_epsilon_examples():
    assert carleson_epsilon(half_plane_pair(2), O, 1.0) == 0.0
    assert carleson_epsilon(gap_strip(0.1), O, 1.0) == pytest.approx(2 * math.asin(0.1), abs=1e-12)
    assert carleson_epsilon(empty_pair(2), O, 1.0) == pytest.approx(math.pi)


def test_alpha_dini_examples():
    assert alpha_dini(half_plane_pair(2), O, 0.01, 1.0).value == pytest.approx(0.0, abs=1e-12)
    R = half_plane_pair(2).__class__(2, half_plane_pair(2).plus, empty_pair(2).minus)
    assert alpha_dini(R, O, 0.01, 1.0).value == pytest.approx(math.log(100), abs=1e-9)


@given(st.floats(1e-3, 2 * math.pi), st.floats(0.0, 1.0))
def test_closed_form_nonnegative(tp, frac):
    tm = max(1e-3, frac * (2 * math.pi - tp))
    if tp + tm <= 2 * math.pi:
        assert spectral_gap_closed_form(tp, tm) >= 0.0


def test_characteristic_alpha():
    assert characteristic_alpha(math.pi) == 1.0
    assert math.isinf(characteristic_alpha(0.0))


def test_akn_family_stable():
    consts = []
    for h in np.linspace(0.02, 0.2, 10):
        rep = akn_check(gap_strip(float(h)), O, np.geomspace(0.01, 4.0, 64))
        assert rep["verdict"] == "PASS"
        consts.append(rep["empirical_constant"])
    assert max(consts) / min(consts) <= 2.0
    assert akn_check(half_plane_pair(2), O, [0.5, 1.0])["empirical_constant"] == 0.0
    assert max(consts) <= akn_supremum()


def test_akn_rotation_invariant():
    R = random_scene(np.random.default_rng(2), 5)
    t = 0.7
    Q = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    a = akn_check(R, O, [0.3, 0.6, 1.2])
    b = akn_check(R.transformed(rotation=Q), O, [0.3, 0.6, 1.2])
    assert a["empirical_constant"] == pytest.approx(b["empirical_constant"], rel=1e-9)


def test_tangent_defect_half_plane():
    R = half_plane_pair(2)
    assert l1_tangent_defect(R, O, 1.0, (0.0, 1.0)) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_tangent_defect_rotated_montecarlo():
    phi = 0.3
    u = (math.sin(phi), math.cos(phi))
    rng = np.random.default_rng(0)
    n = 400_000
    y = rng.uniform(-1, 1, (n, 2))
    y = y[np.linalg.norm(y, axis=1) <= 1]
    mism = (y[:, 1] > 0) != (y @ np.array(u) > 0)
    est = 4 * mism.sum() / n
    sd = 4 * math.sqrt(mism.sum()) / n
    d = l1_tangent_defect(half_plane_pair(2), O, 1.0, u)
    for v in d:
        assert abs(v - est) <= 3 * sd + 1e-6
    assert d[0] == pytest.approx(phi, rel=1e-6)


def test_tangent_defect_gap_strip_decays():
    R = gap_strip(0.1)
    vals = [max(l1_tangent_defect(R, O, r, (0.0, 1.0))) for r in (1.0, 4.0, 16.0)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] * 16.0 == pytest.approx(vals[1] * 4.0, rel=0.2)
