import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermi_nls.approx import (DISTANCE_COLUMNS, ConvergenceTable, approximation_convergence,
                              block_density_bounds, pn_truncate, regular_vs_energy_comparison,
                              saturation_index)
from fermi_nls.grid import build_grid, pn_cutoff_mask
from fermi_nls.kernel import KernelOperator, ensemble, make_perturbation, op_norm, plane_wave_excitation

G = build_grid(2, 8)
G16 = build_grid(2, 16)
NS = [1, 2, 4, 8, 16, 32, 64, 128]


def test_truncation_is_idempotent_and_contracts():
    Q = make_perturbation(G, "smooth_random", 2)
    Qn = pn_truncate(Q, 4)
    np.testing.assert_array_equal(pn_truncate(Qn, 4).data, Qn.data)
    assert op_norm(Qn) <= op_norm(Q) + 1e-12
    keep = pn_cutoff_mask(G, 4).selected
    assert np.all(Qn.data[~keep] == 0) and np.all(Qn.data[:, ~keep] == 0)


def test_saturation_index():
    n = saturation_index(G16)
    assert n == 128
    Q = ensemble(G16, 1, 1)[0]
    np.testing.assert_array_equal(pn_truncate(Q, n).data, Q.data)


def test_band_limited_operator_has_zero_distance():
    # particle at |xi|^2 = 2, hole at xi = 0: both gaps lie in [1/4, 4]
    Q = plane_wave_excitation(G, particles=[(1, 1)], holes=[(0, 0)], weights=[0.5, 0.5])
    t = approximation_convergence(Q, [4, 8, 16])
    for c in DISTANCE_COLUMNS:
        assert t.distances[c] == [0.0, 0.0, 0.0]


def test_surface_only_truncates_to_zero():
    # mu sitting between shells: a mode with gap 0.05 survives only once 1/n <= 0.05
    Q = plane_wave_excitation(G, holes=[(0, 1)])
    assert np.all(pn_truncate(Q, 8).data == 0)
    np.testing.assert_array_equal(pn_truncate(Q, 32).data, Q.data)


@settings(max_examples=8)
@given(st.integers(0, 10**6))
def test_signed_kinetic_traces_monotone_and_saturate(seed):
    Q = ensemble(G16, 3, seed)[seed % 3]
    t = approximation_convergence(Q, NS)
    assert t.monotone("kinetic_pp") and t.monotone("kinetic_mm")
    for c in DISTANCE_COLUMNS:
        assert t.saturated(c)


def test_block_densities_bound_total():
    Q = ensemble(G16, 1, 5)[0]
    for n in (2, 8, 32):
        b = block_density_bounds(Q, n)
        assert b["rho_total"] <= b["block_sum"] + 1e-12


def test_table_validation_and_csv(tmp_path):
    with pytest.raises(ValueError):
        ConvergenceTable([1.0], {"op": [-1.0]}, 4.0)
    with pytest.raises(ValueError):
        approximation_convergence(KernelOperator.zeros(G), [4, 2])
    t = ConvergenceTable([1.0, 2.0, 4.0], {"op": [1.0, 2.0, 0.0]}, 4.0)
    assert not t.monotone("op") and t.violations("op") == [(2.0, 1.0)]
    assert t.saturated("op")
    t.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "n,op"


def test_comparison_small():
    Q = ensemble(G, 1, 4)[0]
    rep = regular_vs_energy_comparison(Q, 0.05, [2, 16, 64], dt=0.005, record_every=5)
    assert [r["n"] for r in rep.rows] == [2.0, 16.0, 64.0]
    assert rep.rows[-1]["op_sup"] == 0.0
    assert rep.liminf_ok
    assert all(r["energy_drift"] < 1e-8 for r in rep.rows)
