import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermi_nls.grid import (band_projector, build_grid, fermi_projector, kinetic_weight,
                            pn_cutoff_mask, sobolev_weight, surface_modes)


def test_mode_lattice_2d():
    g = build_grid(2, 4, 2 * np.pi, 1.0)
    assert g.n_modes == 16
    assert set(np.unique(g.xi)) == {-2.0, -1.0, 0.0, 1.0}


def test_mode_lattice_spacing_1d():
    g = build_grid(1, 4, np.pi, 1.0)
    np.testing.assert_allclose(g.xi.ravel(), [-4, -2, 0, 2])


def test_lexicographic_order():
    g = build_grid(2, 4)
    assert g.k[0].tolist() == [-2, -2]
    assert g.k[1].tolist() == [-2, -1]
    assert g.k[-1].tolist() == [1, 1]


@pytest.mark.parametrize("kw", [dict(d=3, M=3), dict(d=2, M=8, L=0.0), dict(d=2, M=8, mu=-1.0),
                                dict(d=4, M=8)])
def test_rejects_bad_parameters(kw):
    with pytest.raises(ValueError):
        build_grid(**kw)


def test_bad_parameters_all_listed():
    with pytest.raises(ValueError, match="even.*positive"):
        build_grid(2, 5, L=-1.0)


@pytest.mark.parametrize("mu,count", [(1.0, 5), (0.5, 1), (1.05, 5), (2.0, 9)])
def test_fermi_sea_counts(mu, count):
    g = build_grid(2, 8, 2 * np.pi, mu)
    assert int(fermi_projector(g).selected.sum()) == count


def test_fermi_projector_saturates():
    g = build_grid(2, 4, 2 * np.pi, 100.0)
    assert fermi_projector(g).selected.all()


def test_band_projector_counts():
    g = build_grid(2, 8)
    assert int(band_projector(g, 2.0).selected.sum()) == 13
    assert int(band_projector(g, 0.5).selected.sum()) == 1
    assert band_projector(g, 100.0).selected.all()
    with pytest.raises(ValueError):
        band_projector(g, 0.0)


def test_pn_cutoff_examples():
    g = build_grid(2, 8, 2 * np.pi, 1.05)
    m = pn_cutoff_mask(g, 1)
    assert not m.values[g.k.tolist().index([1, 0])]
    assert pn_cutoff_mask(g, 64).selected.all()
    g1 = build_grid(2, 8, 2 * np.pi, 1.0)
    surf = surface_modes(g1)
    assert surf.sum() == 4
    for n in (1, 10, 1e6):
        assert not np.any(pn_cutoff_mask(g1, n).selected & surf)
    with pytest.raises(ValueError):
        pn_cutoff_mask(g, 0.5)


def test_weights():
    g = build_grid(2, 8, 2 * np.pi, 1.0)
    np.testing.assert_array_equal(sobolev_weight(g, 0.0).values, 1.0)
    w = kinetic_weight(g).values
    assert w[g.k.tolist().index([0, 0])] == 1.0
    assert w[g.k.tolist().index([1, 0])] == 0.0
    assert np.all(sobolev_weight(g, 1.3).values > 0)


@given(st.integers(1, 3), st.sampled_from([4, 6, 8]), st.floats(0.3, 6.0), st.floats(0.5, 4.0))
def test_mask_properties(d, M, mu, r):
    if d == 3 and M > 6:
        M = 6
    g = build_grid(d, M, 2 * np.pi, mu)
    for P in (fermi_projector(g), band_projector(g, r), pn_cutoff_mask(g, 1 + r)):
        np.testing.assert_array_equal((P * P).values, P.values)
        np.testing.assert_array_equal(P.values + P.complement().values, 1.0)
        # radial symbols: invariant under k -> -k wherever -k is on the grid
        keys = {tuple(k): v for k, v in zip(g.k.tolist(), P.values)}
        for k, v in keys.items():
            mk = tuple(-x for x in k)
            if mk in keys:
                assert keys[mk] == v


@given(st.floats(1.0, 50.0), st.floats(1.0, 50.0))
def test_pn_monotone(a, b):
    g = build_grid(2, 8)
    lo, hi = sorted((a, b))
    assert np.all(pn_cutoff_mask(g, lo).values <= pn_cutoff_mask(g, hi).values)


def test_with_modes_and_hash():
    g = build_grid(2, 8)
    assert g.with_modes(16).M == 16
    assert g.mode_hash() == build_grid(2, 8).mode_hash()
    assert g.mode_hash() != build_grid(2, 16).mode_hash()
