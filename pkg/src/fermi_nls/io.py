"""On-disk formats: operator dumps, trajectory directories, JSON records."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .dynamics import Trajectory
from .grid import GridSpec, build_grid
from .kernel import KernelOperator
from .reports import write_csv

FORMAT_VERSION = 1


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def grid_header(grid: GridSpec) -> dict:
    return {**grid.as_dict(), "mode_hash": grid.mode_hash(), "n_modes": grid.n_modes,
            "mode_order": "lexicographic, k in [-M/2, M/2-1]^d", "format": FORMAT_VERSION}


def _grid_from_header(h: dict) -> GridSpec:
    g = build_grid(int(h["d"]), int(h["M"]), float(h["L"]), float(h["mu"]),
                   fermi_floor=float(h.get("fermi_floor", 0.0)))
    if g.mode_hash() != h["mode_hash"]:
        raise ValueError("mode order hash mismatch: the file was written with a different mode layout")
    return g


def save_operator(path: str | Path, Q: KernelOperator, **meta) -> None:
    header = {**grid_header(Q.grid), "hermitian": Q.hermitian, **meta}
    with open(path, "wb") as fh:
        np.savez(fh, data=Q.data, header=np.array(json.dumps(_jsonable(header), sort_keys=True)))


def load_operator(path: str | Path) -> KernelOperator:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        data = z["data"]
    return KernelOperator(_grid_from_header(header), data, bool(header["hermitian"]))


def operator_csv(path: str | Path, Q: KernelOperator, tol: float = 0.0) -> None:
    """Kernel entries (k, k', re, im) in mode order, skipping entries with modulus <= tol."""
    g = Q.grid
    rows = []
    ii, jj = np.nonzero(np.abs(Q.data) > tol)
    for i, j in zip(ii, jj):
        z = Q.data[i, j]
        rows.append({"k": " ".join(map(str, g.k[i])), "k_prime": " ".join(map(str, g.k[j])),
                     "re": float(z.real), "im": float(z.imag)})
    write_csv(path, rows, ["k", "k_prime", "re", "im"])


def save_trajectory(directory: str | Path, traj: Trajectory) -> Path:
    """states.npz, series.csv and manifest.json inside ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "states.npz", "wb") as fh:
        np.savez(fh, times=traj.times, states=np.stack([s.data for s in traj.states]))
    if traj.series:
        keys = list(traj.series)
        n = len(traj.series[keys[0]])
        write_csv(out / "series.csv", [{k: float(traj.series[k][i]) for k in keys} for i in range(n)], keys)
    write_json(out / "manifest.json", {"grid": grid_header(traj.grid), "meta": traj.meta,
                                       "n_states": len(traj), "series": list(traj.series)})
    return out


def load_trajectory(directory: str | Path) -> Trajectory:
    d = Path(directory)
    man = read_json(d / "manifest.json")
    grid = _grid_from_header(man["grid"])
    with np.load(d / "states.npz", allow_pickle=False) as z:
        times, states = z["times"], z["states"]
    series = {}
    if (d / "series.csv").exists():
        arr = np.genfromtxt(d / "series.csv", delimiter=",", names=True)
        series = {k: np.atleast_1d(arr[k]) for k in arr.dtype.names}
    return Trajectory(grid, times, [KernelOperator(grid, s) for s in states], series, man["meta"])
