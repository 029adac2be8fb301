from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eps2.coefficients import Kernel
from eps2.fourier import (GridFunction, bump_function, graph_oracle_check, graph_square_function, plancherel_constant,
                          plancherel_gate, plancherel_lhs, random_lipschitz, rho_psi_gap, second_diff_constant,
                          second_diff_lhs, smoothed_tent, verify_fourier_identity, verify_second_diff)

N = 2 ** 12
BUMP = bump_function(N)
K = Kernel("bump")


def test_zero_function():
    f = GridFunction(np.zeros(N), 8.0 / N, -4.0)
    assert plancherel_lhs(f).value == 0.0
    assert second_diff_lhs(f).value == 0.0
    rep = verify_fourier_identity(f)
    assert rep["lhs"] == 0.0 and rep["rhs"] == 0.0


def test_constants_positive_and_converged():
    c1 = plancherel_constant(K)
    assert c1 > 0
    assert plancherel_constant(K, depth=2) == pytest.approx(c1, rel=5e-3)
    c2 = second_diff_constant(K)
    assert c2 > 0
    assert second_diff_constant(K, depth=2) == pytest.approx(c2, rel=5e-3)


@pytest.mark.parametrize("n", [1, 2])
def test_kernel_dilation_scaling(n):
    lam = 1.5
    assert plancherel_constant(K, n=n, dilation=lam) == pytest.approx(lam ** (2 * n + 2) * plancherel_constant(K, n=n),
                                                                     rel=1e-6)


def test_plancherel_gate():
    assert plancherel_gate(BUMP) <= 1e-10


def test_identities_at_moderate_grid():
    for f in (BUMP, smoothed_tent(N), random_lipschitz(3, N)):
        assert verify_fourier_identity(f)["verdict"] == "PASS"
    assert verify_second_diff(smoothed_tent(N))["verdict"] == "PASS"


def test_resolution_doubling():
    a = plancherel_lhs(bump_function(2 ** 11)).value
    b = plancherel_lhs(bump_function(2 ** 12)).value
    assert b == pytest.approx(a, rel=0.02)
    a = second_diff_lhs(bump_function(2 ** 11)).value
    b = second_diff_lhs(bump_function(2 ** 12)).value
    assert b == pytest.approx(a, rel=0.02)


@settings(max_examples=8)
@given(st.integers(-200, 200))
def test_translation_invariance(cells):
    assert plancherel_lhs(BUMP.rolled(cells)).value == pytest.approx(plancherel_lhs(BUMP).value, rel=1e-9)


@settings(max_examples=8)
@given(st.floats(0.1, 10.0))
def test_quadratic_homogeneity(lam):
    rep = verify_fourier_identity(BUMP.scaled(lam))
    base = verify_fourier_identity(BUMP)
    assert rep["lhs"] == pytest.approx(lam ** 2 * base["lhs"], rel=1e-9)
    assert rep["relative_error"] == pytest.approx(base["relative_error"], abs=1e-9)


def test_graph_square_function_doubles_lhs():
    assert graph_square_function(BUMP) == pytest.approx(2 * plancherel_lhs(BUMP).value, rel=1e-9)
    zero = GridFunction(np.zeros(N), 8.0 / N, -4.0)
    assert graph_square_function(zero) == 0.0


def test_montecarlo_oracle():
    rep = graph_oracle_check(BUMP, pairs=12, samples=8000, seed=1)
    assert rep["within_3sigma"] >= 11


def test_two_dimensional_identity():
    f = bump_function(128, n=2)
    rep = verify_fourier_identity(f)
    assert rep["relative_error"] <= 0.02


def test_gap_translation_invariant_and_zero():
    f = bump_function(N)
    a = rho_psi_gap(f, stride=64)
    b = rho_psi_gap(f.rolled(64), stride=64)
    assert b["gap"] == pytest.approx(a["gap"], rel=1e-6)
    z = GridFunction(np.zeros(N), 8.0 / N, -4.0)
    assert rho_psi_gap(z, stride=64)["gap"] == 0.0


def test_csv_round_trip(tmp_path):
    BUMP.to_csv(tmp_path / "f.csv")
    g = GridFunction.from_csv(tmp_path / "f.csv")
    assert np.array_equal(g.values, BUMP.values) and g.spacing == BUMP.spacing and g.origin == BUMP.origin
