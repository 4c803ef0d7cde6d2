import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermi_nls.grid import band_projector, build_grid, fermi_projector
from fermi_nls.kernel import (GENERATOR_KINDS, KernelOperator, commutator, density, density_coefficients,
                              ensemble, fermi_density, fermi_sea, h2_norm, hs_sobolev_norm,
                              in_energy_cone, make_perturbation, mode_index, multiplication_operator,
                              op_norm, plane_wave_excitation, potential_commutator,
                              relative_kinetic_energy, schatten_norm, x_alpha_norm, x_norm)

G = build_grid(2, 8, 2 * np.pi, 1.0)
G105 = build_grid(2, 8)


def random_hermitian(g, seed, scale=1.0):
    r = np.random.default_rng(seed)
    a = r.standard_normal((g.n_modes,) * 2) + 1j * r.standard_normal((g.n_modes,) * 2)
    return KernelOperator(g, scale * (a + a.conj().T) / 2)


def test_hermitian_flag_checked():
    a = np.zeros((G.n_modes,) * 2, dtype=complex)
    a[0, 1] = 1.0
    with pytest.raises(ValueError):
        KernelOperator(G, a)
    KernelOperator(G, a, hermitian=False)
    with pytest.raises(ValueError):
        KernelOperator(G, np.zeros((3, 3)))


def test_density_examples():
    assert np.all(density(KernelOperator.zeros(G)).values == 0)
    rho = density(fermi_sea(G)).values
    np.testing.assert_allclose(rho, 5 / (2 * np.pi) ** 2, rtol=1e-13)
    pw = KernelOperator.plane_wave(G, (2, -1))
    np.testing.assert_allclose(density(pw).values, 1 / G.volume, rtol=1e-13)
    assert fermi_density(G) == pytest.approx(5 / (2 * np.pi) ** 2)


def test_density_matches_position_diagonal():
    # rho(x) = Q(x, x) from the defining kernel formula, at a few points
    Q = make_perturbation(G105, "smooth_random", 3)
    rho = density(Q)
    xs = rho.positions()
    for idx in [(0, 0), (3, 5), (15, 2)]:
        x = np.array([xs[0][idx], xs[1][idx]])
        e = np.exp(1j * G105.xi @ x)
        direct = (e @ Q.data @ e.conj()).real / G105.volume
        assert rho.values[idx] == pytest.approx(direct, abs=1e-13)


@given(st.integers(0, 10**6))
def test_density_integral_is_trace(seed):
    Q = random_hermitian(G, seed)
    rho = density(Q)
    assert rho.integral() == pytest.approx(Q.trace().real, rel=1e-10, abs=1e-10)
    assert np.sum(rho.values) * G.fine_cell == pytest.approx(Q.trace().real, rel=1e-10, abs=1e-10)
    assert rho.imag_residue < 1e-10
    c = rho.coefficients
    np.testing.assert_allclose(c[::-1], c.conj(), atol=1e-14)


@given(st.integers(0, 10**6))
def test_density_and_multiplication_are_adjoint(seed):
    r = np.random.default_rng(seed)
    Q = random_hermitian(G, seed)
    v = r.standard_normal(len(G.diff_k)) + 1j * r.standard_normal(len(G.diff_k))
    V = multiplication_operator(G, v)
    lhs = np.sum(V.conj() * Q.data)  # <V, Q>_F
    rhs = G.volume * np.vdot(v, density_coefficients(G, Q.data))
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_schatten_examples():
    pw = KernelOperator.plane_wave(G, (1, 1))
    for p in (1, 2, 3.5, np.inf):
        assert schatten_norm(pw, p) == pytest.approx(1.0)
    assert schatten_norm(fermi_sea(G), 1) == pytest.approx(5.0)
    Q = random_hermitian(G, 0)
    assert schatten_norm(Q, 2) == pytest.approx(np.linalg.norm(Q.data))
    with pytest.raises(ValueError):
        schatten_norm(Q, 0.5)


def test_hs_sobolev_examples():
    Q = random_hermitian(G, 1)
    assert hs_sobolev_norm(Q, 0.0) == pytest.approx(schatten_norm(Q, 2), rel=1e-14)
    pw = KernelOperator.plane_wave(G, (2, 1))
    assert hs_sobolev_norm(pw, 1.5) == pytest.approx((1 + 5) ** 1.5)
    assert hs_sobolev_norm(Q * 3.0, 1.0) == pytest.approx(3 * hs_sobolev_norm(Q, 1.0))


def test_relative_kinetic_examples():
    assert relative_kinetic_energy(KernelOperator.zeros(G105)) == 0.0
    p = plane_wave_excitation(G105, particles=[(2, 1)])
    assert relative_kinetic_energy(p) == pytest.approx(5 - 1.05)
    h = plane_wave_excitation(G105, holes=[(1, 0)])
    assert relative_kinetic_energy(h) == pytest.approx(1.05 - 1)
    bad = KernelOperator.plane_wave(G105, (0, 0))  # a "particle" inside the sea
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        relative_kinetic_energy(bad)
    assert any("energy cone" in str(x.message) for x in w)


def test_plane_wave_excitation_validation():
    with pytest.raises(ValueError):
        plane_wave_excitation(G105, particles=[(0, 0)])
    with pytest.raises(ValueError):
        plane_wave_excitation(G105, holes=[(2, 2)])
    with pytest.raises(ValueError):
        plane_wave_excitation(G105, particles=[(2, 2), (2, 2)])
    Q = plane_wave_excitation(G105, particles=[(2, 2)], holes=[(0, 1)], weights=[0.5, 0.25])
    assert Q.trace().real == pytest.approx(0.25)
    assert in_energy_cone(Q)


def test_composite_norms():
    z = x_norm(KernelOperator.zeros(G105))
    assert z.total == 0.0
    Q = make_perturbation(G105, "particle_hole", 5)
    assert x_norm(Q)["total"] >= x_norm(Q)["op"]
    low = band_projector(G105, 2.0)
    Ql = Q.sandwich(low)
    assert x_alpha_norm(Ql, 1.0).total == pytest.approx(op_norm(Ql))
    assert x_alpha_norm(Ql, 1.0)["high_hs_sobolev"] == 0.0


def test_commutator_examples():
    A = random_hermitian(G, 7)
    B = random_hermitian(G, 8)
    assert np.max(np.abs(commutator(A, A).data)) == 0.0
    C = commutator(A, B)
    assert abs(C.trace()) <= 1e-12 * np.linalg.norm(A.data) * np.linalg.norm(B.data)
    const = density(fermi_sea(G))
    assert np.max(np.abs(potential_commutator(const, A).data)) < 1e-14
    with pytest.raises(ValueError):
        commutator(A, KernelOperator.zeros(build_grid(2, 4)))


def test_potential_commutator_matches_pointwise_product():
    # [V, Q] applied to a band-limited vector equals the position-space product
    g = build_grid(1, 16)
    r = np.random.default_rng(2)
    c = np.zeros(len(g.diff_k), dtype=complex)
    mid = len(c) // 2
    c[mid] = 0.3
    c[mid + 2] = 0.1 + 0.2j
    c[mid - 2] = np.conj(c[mid + 2])
    V = multiplication_operator(g, c)
    u = np.zeros(g.n_modes, dtype=complex)
    u[6:10] = r.standard_normal(4)
    x = np.linspace(0, g.L, 7, endpoint=False)
    e = np.exp(1j * np.outer(x, g.xi.ravel())) / np.sqrt(g.L)
    vx = sum(c[mid + m] * np.exp(1j * m * g.spacing * x) for m in (-2, 0, 2))
    np.testing.assert_allclose(e @ (V @ u), vx * (e @ u), atol=1e-12)


@pytest.mark.parametrize("kind", GENERATOR_KINDS)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_generators_in_cone(kind, seed):
    Q = make_perturbation(G105, kind, seed)
    ev = np.linalg.eigvalsh(fermi_sea(G105).data + Q.data)
    assert ev.min() >= -1e-10 and ev.max() <= 1 + 1e-10
    assert relative_kinetic_energy(Q) >= -1e-10
    if kind == "unitary_conjugation":
        assert abs(Q.trace()) < 1e-10
    # Q++ - Q-- - Q^2 = gamma (1 - gamma) >= 0
    P = fermi_projector(G105)
    S = Q.block("+").data - Q.block("-").data - Q.data @ Q.data
    assert np.linalg.eigvalsh(S).min() >= -1e-10


def test_generator_zero_size_and_errors():
    assert np.all(make_perturbation(G105, "unitary_conjugation", 0, size=0).data == 0)
    with pytest.raises(ValueError):
        make_perturbation(G105, "nope", 0)
    with pytest.raises(ValueError):
        make_perturbation(G105, "smooth_random", 0, size=-1)


def test_generators_grid_consistent():
    # the same seed draws the same low modes on two grids
    a = make_perturbation(build_grid(2, 8), "particle_hole", 11)
    b = make_perturbation(build_grid(2, 16), "particle_hole", 11)
    ia = mode_index(a.grid, (1, 2))
    ib = mode_index(b.grid, (1, 2))
    assert abs(a.data[ia, ia] - b.data[ib, ib]) < 0.1 * max(abs(a.data[ia, ia]), 1e-3) + 1e-3


def test_ensemble_deterministic():
    e1 = ensemble(G105, 6, 42)
    e2 = ensemble(G105, 6, 42)
    for a, b in zip(e1, e2):
        np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(e1[0].data, ensemble(G105, 6, 43)[0].data)


def test_h2_norm_plane_wave():
    pw = KernelOperator.plane_wave(G105, (1, 2))
    assert h2_norm(pw) == pytest.approx(36.0)
