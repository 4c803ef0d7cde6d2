import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermi_nls.dynamics import evolve_rk4
from fermi_nls.energy import (LEMMA_IDS, commutator_lemma_scan, conservation_report, kinetic_density_check,
                              lieb_thirring_check, lieb_thirring_rhs, low_low_density_bound_check,
                              relative_energy, sobolev_check, window_scaling_exponent)
from fermi_nls.grid import build_grid
from fermi_nls.kernel import KernelOperator, ensemble, make_perturbation, plane_wave_excitation

G = build_grid(2, 8)


def test_zero_energy():
    e = relative_energy(KernelOperator.zeros(G))
    assert e.kinetic == 0.0 and e.potential == 0.0 and e.total == 0.0
    assert lieb_thirring_rhs(KernelOperator.zeros(G)) == (0.0, 0)


def test_single_particle():
    Q = plane_wave_excitation(G, particles=[(1, 1)])
    e = relative_energy(Q)
    assert e.kinetic == pytest.approx(2.0 - 1.05, abs=1e-14)
    assert e.potential == pytest.approx(1 / (2 * (2 * math.pi) ** 2), rel=1e-12)
    assert e.as_dict()["total"] == e.total


def test_hole_counts_positive():
    Q = plane_wave_excitation(G, holes=[(0, 0)])
    assert relative_energy(Q).kinetic == pytest.approx(1.05, abs=1e-14)


def test_dimension_guard():
    with pytest.raises(ValueError):
        relative_energy(KernelOperator.zeros(build_grid(1, 8)))


@given(st.integers(0, 50), st.floats(0.1, 3.0))
def test_energy_scaling(seed, c):
    Q = make_perturbation(G, "smooth_random", seed)
    a, b = relative_energy(Q, check=False), relative_energy(Q * c, check=False)
    assert b.kinetic == pytest.approx(c * a.kinetic, rel=1e-10, abs=1e-14)
    assert b.potential == pytest.approx(c * c * a.potential, rel=1e-10, abs=1e-14)


def test_outside_cone_warns():
    Q = plane_wave_excitation(G, particles=[(1, 1)]) * -1.0
    with pytest.warns(UserWarning, match="energy cone"):
        relative_energy(Q)


def test_conservation_report_rows():
    Q = make_perturbation(G, "unitary_conjugation", 1)
    rep = conservation_report(evolve_rk4(Q, 0.05, 0.005, record_every=5))
    assert len(rep.rows()) == 3
    assert rep.max_relative_drift < 1e-8 and rep.trace_drift < 1e-12 and rep.spectral_drift < 1e-8
    assert rep.summary()["solver"]


def test_lieb_thirring_ratios_bounded():
    members = ensemble(G, 6, 3)
    rep = lieb_thirring_check(members)
    assert all(r["negative_points"] == 0 for r in rep.rows)
    # kinetic energy dominates the density functional: ratios stay away from zero
    assert rep.min > 1.0 and all(np.isfinite(rep.ratios))


def test_static_checks():
    members = ensemble(G, 6, 4)
    assert sobolev_check(members).max < 1.0
    assert kinetic_density_check(members).max < 10
    rep = low_low_density_bound_check(members, alpha=1.0)
    # the low band has |xi| <= 2r = 4, so the H^1/L^2 ratio is at most sqrt(17)
    assert max(r["hs_ratio"] for r in rep.rows) <= math.sqrt(17) + 1e-12


@pytest.mark.parametrize("lemma", LEMMA_IDS)
def test_lemma_scans_finite(lemma):
    rep = commutator_lemma_scan(ensemble(G, 3, 7), lemma, window=0.25, samples=8)
    assert len(rep.rows) == 3
    assert all(np.isfinite(r) and r >= 0 for r in rep.ratios)
    assert rep.max < 10


def test_lemma_validation():
    with pytest.raises(ValueError):
        commutator_lemma_scan([], "nope")
    Q = make_perturbation(G, "smooth_random", 1)
    with pytest.raises(ValueError):
        window_scaling_exponent(Q, Q, "h2_sea", [0.1, 0.2])


def test_window_sea_gains_half_power():
    Q1, Q2 = ensemble(G, 2, 11)
    slope, ratios = window_scaling_exponent(Q1, Q2, "window_sea", [0.01, 0.02, 0.04], samples=16)
    assert len(ratios) == 3
    assert slope >= 0.5 - 0.05
