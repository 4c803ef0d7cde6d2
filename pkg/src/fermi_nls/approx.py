"""Frequency truncation away from the Fermi surface and the regular-to-energy comparison."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import evolve_rk4
from .energy import relative_energy
from .grid import band_projector, fermi_projector, kinetic_weight, pn_cutoff_mask, surface_modes
from .kernel import KernelOperator, density, fermi_sea, h2_norm, hs_sobolev_norm, op_norm, schatten_norm
from .reports import write_csv

SIGNATURE_TOL = 1e-10
JITTER = 1e-12

DISTANCE_COLUMNS = ("op", "kinetic_pp", "kinetic_mm", "kinetic_pp_s1", "kinetic_mm_s1", "kinetic_full",
                    "rho_l2", "h2", "surface")
# the columns the convergence statement is about
CORE_COLUMNS = ("op", "kinetic_pp", "kinetic_mm", "rho_l2")


def pn_truncate(Q: KernelOperator, n: float, check: bool = True) -> KernelOperator:
    """P_n Q P_n, with P_n keeping modes with 1/n <= | |xi|^2 - mu | <= n.

    With ``check`` the signature -Pi^- <= Q^(n) <= Pi^+ is verified whenever Q
    itself satisfies it.
    """
    Qn = Q.sandwich(pn_cutoff_mask(Q.grid, n))
    if check and Q.hermitian:
        sea = fermi_sea(Q.grid).data
        ev0 = np.linalg.eigvalsh(sea + Q.data)
        if ev0.min() >= -SIGNATURE_TOL and ev0.max() <= 1 + SIGNATURE_TOL:
            ev = np.linalg.eigvalsh(sea + Qn.data)
            if ev.min() < -SIGNATURE_TOL or ev.max() > 1 + SIGNATURE_TOL:
                raise ArithmeticError(f"truncation left the admissible range: [{ev.min():.3e}, {ev.max():.3e}]")
    return Qn


def saturation_index(grid) -> float:
    """Smallest power of two n with P_n selecting every mode off the Fermi surface."""
    gap = np.abs(grid.xi2 - grid.mu)
    gap = gap[~surface_modes(grid)]
    need = max(float(gap.max(initial=1.0)), 1.0 / float(gap.min(initial=1.0)), 1.0)
    return float(2 ** int(np.ceil(np.log2(need))))


def _clip(x: float) -> float:
    # rounding can push an exactly-zero signed trace slightly negative
    return 0.0 if -1e-13 < x <= 0 else x


def _distances(Q: KernelOperator, Qn: KernelOperator) -> dict:
    D = Q - Qn
    g = Q.grid
    w = kinetic_weight(g)
    occ = fermi_projector(g)
    on_surface = surface_modes(g).astype(float)
    w2 = w.values**2
    diag = D.data.diagonal().real
    up, down = ~occ.selected, occ.selected
    return {
        "op": op_norm(D),
        # signed traces: Tr w D^{++} w and -Tr w D^{--} w, both >= 0 for Q in the cone
        "kinetic_pp": _clip(float(np.sum(w2[up] * diag[up]))),
        "kinetic_mm": _clip(-float(np.sum(w2[down] * diag[down]))),
        "kinetic_pp_s1": schatten_norm(D.sandwich(occ.complement()).sandwich(w), 1),
        "kinetic_mm_s1": schatten_norm(D.sandwich(occ).sandwich(w), 1),
        "kinetic_full": schatten_norm(D.sandwich(w), 1),
        "rho_l2": density(D).l2_norm(),
        "h2": h2_norm(D),
        "surface": float(np.linalg.norm(on_surface[:, None] * D.data * on_surface[None, :])),
    }


def block_density_bounds(Q: KernelOperator, n: float, band_radius: float = 2.0) -> dict:
    """L^2 norms of the densities of the four band blocks of Q - Q^(n), and their H^1 sizes.

    Density is linear, so the rho-distance is at most the sum of the four block
    densities; the H^1 entries are the Sobolev-side quantities bounding each block.
    """
    D = Q - pn_truncate(Q, n, check=False)
    low = band_projector(Q.grid, band_radius)
    high = low.complement()
    out = {}
    for name, (a, b) in {"ll": (low, low), "hh": (high, high), "hl": (high, low), "lh": (low, high)}.items():
        blk = D.sandwich(a, b)
        out[f"rho_{name}"] = density(blk).l2_norm()
        out[f"h1_{name}"] = hs_sobolev_norm(blk, 1.0)
    out["rho_total"] = density(D).l2_norm()
    out["block_sum"] = sum(out[f"rho_{k}"] for k in ("ll", "hh", "hl", "lh"))
    return out


@dataclass
class ConvergenceTable:
    n_values: list[float]
    distances: dict[str, list[float]]
    saturation_n: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.distances.items():
            if any(not np.isfinite(x) or x < 0 for x in v):
                raise ValueError(f"column {k} has negative or non-finite entries")

    def monotone(self, column: str, jitter: float = JITTER) -> bool:
        v = np.asarray(self.distances[column])
        return bool(np.all(np.diff(v) <= jitter))

    def violations(self, column: str, jitter: float = JITTER) -> list[tuple[float, float]]:
        """(n, increase) for every step at which the column grows beyond the jitter."""
        v = np.asarray(self.distances[column])
        inc = np.diff(v)
        return [(self.n_values[i + 1], float(inc[i])) for i in np.flatnonzero(inc > jitter)]

    def saturated(self, column: str) -> bool:
        """Exact zero at every n >= the saturation index."""
        return all(d == 0.0 for n, d in zip(self.n_values, self.distances[column]) if n >= self.saturation_n)

    def flags(self) -> dict:
        cols = [c for c in self.distances if c != "surface"]
        return {**{f"monotone_{c}": self.monotone(c) for c in cols},
                **{f"saturated_{c}": self.saturated(c) for c in cols}}

    def rows(self) -> list[dict]:
        return [{"n": n, **{k: v[i] for k, v in self.distances.items()}} for i, n in enumerate(self.n_values)]

    def to_csv(self, path) -> None:
        write_csv(path, self.rows(), ["n", *self.distances])


def approximation_convergence(Q: KernelOperator, n_values: Sequence[float]) -> ConvergenceTable:
    """Distances between Q and P_n Q P_n for each n (operator, kinetic trace, density, h2)."""
    ns = [float(n) for n in n_values]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_values must be increasing")
    cols: dict[str, list[float]] = {c: [] for c in DISTANCE_COLUMNS}
    for n in ns:
        for k, v in _distances(Q, pn_truncate(Q, n)).items():
            cols[k].append(v)
    return ConvergenceTable(ns, cols, saturation_index(Q.grid), {"grid": Q.grid.as_dict()})


@dataclass
class ComparisonReport:
    n_values: list[float]
    rows: list[dict]
    reference_energy: tuple[float, float]
    liminf_ok: bool
    tolerance: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        write_csv(path, self.rows, list(self.rows[0]) if self.rows else ["n"])


def regular_vs_energy_comparison(Q0: KernelOperator, T: float, n_values: Sequence[float],
                                 dt: float = 1e-3, record_every: int = 10,
                                 tolerance: float = 1e-6) -> ComparisonReport:
    """Evolve Q0 and each P_n Q0 P_n with RK4 and compare.

    Rows hold the distance at t=0 and the sup over recorded times (operator norm and
    density L^2), plus the energy drift of each truncated run.  The energy chain
    checked is E(Q(t)) <= E(Q^(n_max)(0)) + tolerance for all recorded t.
    """
    ref = evolve_rk4(Q0, T, dt, record_every=record_every)
    e_ref = np.array([relative_energy(s, check=False).total for s in ref.states])
    rows = []
    for n in n_values:
        Qn0 = pn_truncate(Q0, n)
        tr = evolve_rk4(Qn0, T, dt, record_every=record_every)
        op_d = [op_norm(a - b) for a, b in zip(ref.states, tr.states)]
        rho_d = [(density(a) - density(b)).l2_norm() for a, b in zip(ref.states, tr.states)]
        e_series = tr.series["energy"]
        rows.append({"n": float(n), "op_t0": op_d[0], "op_sup": max(op_d), "op_T": op_d[-1],
                     "rho_t0": rho_d[0], "rho_sup": max(rho_d), "rho_T": rho_d[-1],
                     "energy_0": float(e_series[0]),
                     "energy_drift": float(np.max(np.abs(e_series - e_series[0])))})
    last = rows[-1]["energy_0"] if rows else float(e_ref[0])
    ok = bool(np.all(e_ref <= last + tolerance))
    return ComparisonReport([float(n) for n in n_values], rows, (float(e_ref[0]), float(e_ref.max())),
                            ok, tolerance, {"T": T, "dt": dt, "record_every": record_every})
