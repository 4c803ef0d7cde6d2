import numpy as np
import pytest

from fermi_nls.dynamics import evolve_rk4
from fermi_nls.grid import build_grid
from fermi_nls.io import (grid_header, load_operator, load_trajectory, operator_csv, read_json,
                          save_operator, save_trajectory, write_json)
from fermi_nls.kernel import make_perturbation

G = build_grid(2, 8)


def test_operator_roundtrip(tmp_path):
    Q = make_perturbation(G, "smooth_random", 3)
    save_operator(tmp_path / "q.npz", Q, note="x")
    back = load_operator(tmp_path / "q.npz")
    np.testing.assert_array_equal(back.data, Q.data)
    assert back.grid == G


def test_mode_hash_checked(tmp_path):
    h = grid_header(G)
    h["mode_hash"] = "0" * len(h["mode_hash"])
    write_json(tmp_path / "h.json", h)
    from fermi_nls.io import _grid_from_header
    with pytest.raises(ValueError, match="mode order"):
        _grid_from_header(read_json(tmp_path / "h.json"))


def test_operator_csv(tmp_path):
    Q = make_perturbation(G, "particle_hole", 1)
    operator_csv(tmp_path / "q.csv", Q)
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[0] == "k,k_prime,re,im"
    assert len(lines) - 1 == np.count_nonzero(Q.data)


def test_trajectory_roundtrip(tmp_path):
    tr = evolve_rk4(make_perturbation(G, "unitary_conjugation", 2), 0.02, 0.005, record_every=2)
    save_trajectory(tmp_path / "run", tr)
    back = load_trajectory(tmp_path / "run")
    np.testing.assert_array_equal(back.times, tr.times)
    for a, b in zip(back.states, tr.states):
        np.testing.assert_array_equal(a.data, b.data)
    np.testing.assert_allclose(back.series["energy"], tr.series["energy"], rtol=1e-15)


def test_json_handles_numpy_and_inf(tmp_path):
    write_json(tmp_path / "a.json", {"x": np.float64(1.5), "y": np.arange(3), "z": float("inf")})
    assert read_json(tmp_path / "a.json") == {"x": 1.5, "y": [0, 1, 2], "z": "inf"}
