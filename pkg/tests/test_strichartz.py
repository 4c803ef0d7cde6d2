import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fermi_nls.dynamics import Trajectory, free_conjugate
from fermi_nls.grid import build_grid
from fermi_nls.kernel import KernelOperator, density_coefficients, ensemble, fermi_sea, mode_index
from fermi_nls.spacetime import AdmissiblePair
from fermi_nls.strichartz import (SpaceTimeField, density_weight_sq, dual_integral_I, dual_integral_way_b,
                                  duhamel_states, free_density_lhs_sq, homogeneous_density_estimate,
                                  inhomogeneous_density_estimate, inner_weight, kernel_strichartz_check,
                                  optimality_scan, recurrence_guard, smooth_spacetime_field)

G = build_grid(2, 8)


def two_wave(grid, k, kp, a=0.3):
    data = np.zeros((grid.n_modes,) * 2, dtype=complex)
    i, j = mode_index(grid, k), mode_index(grid, kp)
    data[i, j] = data[j, i] = a
    return KernelOperator(grid, data)


def integrand_at_zero(Q, alpha1):
    g = Q.grid
    return g.volume * np.sum(density_weight_sq(g, alpha1) * np.abs(density_coefficients(g, Q.data)) ** 2)


def test_exact_matches_trapezoid():
    Q = ensemble(G, 1, 5)[0]
    a = free_density_lhs_sq(Q, 1.0, 0.7, "exact")
    b = free_density_lhs_sq(Q, 1.0, 0.7, "trapezoid", samples=2048)
    assert a == pytest.approx(b, rel=1e-6)
    with pytest.raises(ValueError):
        free_density_lhs_sq(Q, 1.0, 0.7, "simpson")


def test_two_wave_oracle():
    # |rho_hat(eta, t)| does not depend on t, so the integral is window * integrand(0)
    Q = two_wave(G, (1, 0), (-2, 1))
    for T in (0.3, 1.7):
        assert free_density_lhs_sq(Q, 0.5, T) == pytest.approx(T * integrand_at_zero(Q, 0.5), rel=1e-12)


def test_sea_and_diagonal_give_zero():
    assert free_density_lhs_sq(fermi_sea(G), 1.0, 1.0) == pytest.approx(0.0, abs=1e-14)
    rep = homogeneous_density_estimate([KernelOperator.zeros(G)], 1.0)
    assert rep.rows[0]["degenerate"]


@settings(max_examples=10)
@given(st.integers(0, 1000), st.floats(0.1, 4.0))
def test_quadratic_homogeneity(seed, c):
    Q = ensemble(G, 1, seed)[0]
    a = free_density_lhs_sq(Q, 1.0, 0.5)
    assert free_density_lhs_sq(Q * c, 1.0, 0.5) == pytest.approx(c * c * a, rel=1e-9)


def test_homogeneous_report_and_guard():
    rep = homogeneous_density_estimate(ensemble(G, 3, 1), 1.0)
    assert rep.meta["alpha1"] == 1.0 and len(rep.rows) == 3
    assert all(0 < r < 1 for r in rep.ratios)
    with pytest.warns(UserWarning, match="recurrence"):
        homogeneous_density_estimate(ensemble(G, 1, 1), 1.0, window=recurrence_guard(G) * 1.5)
    with pytest.raises(ValueError):
        homogeneous_density_estimate(ensemble(G, 1, 1), 0.2)


def test_duhamel_of_interaction_picture_constant():
    R0 = ensemble(G, 1, 2)[0]
    times = np.linspace(0, 0.4, 9)
    tr = Trajectory(G, times, [free_conjugate(R0, t) for t in times])
    for t, D in zip(times, duhamel_states(tr)):
        np.testing.assert_allclose(D, t * free_conjugate(R0, t).data, atol=1e-13)


def test_inhomogeneous_zero_and_finite():
    times = np.linspace(0, 0.2, 5)
    z = Trajectory(G, times, [KernelOperator.zeros(G)] * 5)
    assert inhomogeneous_density_estimate(z, 1.0).rows[0]["lhs"] == 0.0
    R = ensemble(G, 1, 3)[0]
    tr = Trajectory(G, times, [free_conjugate(R, t) for t in times])
    rep = inhomogeneous_density_estimate([tr], 1.0)
    assert 0 < rep.max < 10


def test_kernel_energy_pair_is_unitary():
    rep = kernel_strichartz_check(ensemble(G, 3, 9), AdmissiblePair(math.inf, 2.0, 2))
    np.testing.assert_allclose(rep.ratios, 1.0, rtol=1e-12)
    with pytest.raises(ValueError):
        kernel_strichartz_check(ensemble(G, 1, 9), AdmissiblePair(2.0, 6.0, 3))


def test_spacetime_parseval_and_roundtrip():
    V = smooth_spacetime_field(2, 4, n_time=32, modes=8)
    spec = V.spectrum()
    assert np.sum(np.abs(spec) ** 2) * V.dtau * V.dxi**2 == pytest.approx(V.l2_norm_sq(), rel=1e-12)
    W = SpaceTimeField.from_spectrum(spec, V.window, V.L)
    np.testing.assert_allclose(W.values, V.values, atol=1e-12)
    with pytest.raises(ValueError):
        SpaceTimeField(np.full((4, 4), np.nan), 1.0, 1.0)


def test_inner_weight_one_dim_closed_form():
    tau, s = np.array([0.3, -2.0]), np.array([1.0, 2.0])
    q1 = -(tau - s**2) / (2 * s)
    expect = 0.5 * (1 + s**2) ** 0.5 * (1 + q1**2) ** -1.0 * (1 + (q1 - s) ** 2) ** -1.0
    np.testing.assert_allclose(inner_weight(1, 1.0, 0.5, tau, s), expect, rtol=1e-14)


def test_inner_weight_two_dim_quadrature():
    tau, s, a = 1.3, 0.7, 0.8
    q1 = -(tau - s * s) / (2 * s)
    f = lambda r: (1 + q1**2 + r * r) ** -a * (1 + (q1 - s) ** 2 + r * r) ** -a
    ref = 0.5 * (1 + s * s) ** 0.4 * 2 * quad(f, 0, np.inf, epsabs=1e-13)[0]
    assert inner_weight(2, a, 0.4, np.array([tau]), np.array([s]))[0] == pytest.approx(ref, rel=1e-8)


def test_dual_integral_zero_field():
    V = SpaceTimeField(np.zeros((16, 8, 8)), 20.0, 2 * np.pi)
    r = dual_integral_I(V, 1.0)
    assert r.way_a == 0.0 and r.way_b == 0.0 and r.discrepancy == 0.0


def test_dual_integral_two_ways_agree():
    V = smooth_spacetime_field(2, 1, n_time=64, modes=8)
    r = dual_integral_I(V, 1.0)
    assert r.discrepancy < 1e-2
    assert r.way_b > 0


def test_one_dim_half():
    V = smooth_spacetime_field(1, 3, avoid_zero=True)
    assert dual_integral_way_b(V, 0.0, 0.0) / V.l2_norm_sq() == pytest.approx(0.5, rel=1e-10)


def test_optimality_endpoint_grows_logarithmically():
    rep = optimality_scan([4, 8, 16, 32], "endpoint", xi_step=0.2)
    assert rep.slope > 0 and rep.r_squared > 0.99
    assert len(set(np.round(rep.extra["norm_sq"], 12))) == 1
    assert all(b > a for a, b in zip(rep.y, rep.y[1:]))


def test_optimality_distribution_diverges():
    rep = optimality_scan([10, 20, 40, 80, 160], "distribution")
    assert rep.slope == pytest.approx(1.0, rel=0.05) and rep.r_squared > 0.999
    assert all(b > a for a, b in zip(rep.y, rep.y[1:]))


def test_optimality_validation():
    with pytest.raises(ValueError):
        optimality_scan([1, 2], "endpoint")
    with pytest.raises(ValueError):
        optimality_scan([1, 2, 3], "other")
    with pytest.raises(ValueError):
        optimality_scan([1, 2, 3], "endpoint", d=1)
