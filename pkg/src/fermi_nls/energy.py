"""Relative energy, conservation monitoring and the static inequality suite."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dynamics import free_conjugate
from .grid import GridSpec, band_projector, fermi_projector
from .kernel import (DensityField, KernelOperator, density, fermi_density, fermi_sea, h2_norm,
                     hs_sobolev_norm, multiplication_operator, relative_kinetic_energy)
from .reports import RatioReport, safe_ratio, write_csv
from .spacetime import AdmissiblePair, strichartz_S_alpha_norm

NEGATIVE_DENSITY_TOL = 1e-12


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential

    def as_dict(self) -> dict:
        return {"kinetic": self.kinetic, "potential": self.potential, "total": self.total}


def _require_energy_dim(grid: GridSpec):
    if grid.d not in (2, 3):
        raise ValueError(f"the relative energy is set up for d = 2, 3 only, got d={grid.d}")


def relative_energy(Q: KernelOperator, check: bool = True) -> EnergyBreakdown:
    """Relative kinetic energy plus 1/2 int rho_Q^2 (Riemann sum on the density grid)."""
    _require_energy_dim(Q.grid)
    kin = relative_kinetic_energy(Q, check=check)
    pot = 0.5 * density(Q).riemann_l2_squared()
    return EnergyBreakdown(kin, pot)


@dataclass
class ConservationReport:
    times: np.ndarray
    energy: np.ndarray
    trace: np.ndarray
    spectrum_min: np.ndarray
    spectrum_max: np.ndarray
    max_relative_drift: float
    trace_drift: float
    spectral_drift: float
    meta: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"time": float(t), "energy": float(e), "trace": float(tr),
                 "spec_min": float(a), "spec_max": float(b)}
                for t, e, tr, a, b in zip(self.times, self.energy, self.trace,
                                          self.spectrum_min, self.spectrum_max)]

    def to_csv(self, path) -> None:
        write_csv(path, self.rows(), ["time", "energy", "trace", "spec_min", "spec_max"])

    def summary(self) -> dict:
        return {"max_relative_drift": self.max_relative_drift, "trace_drift": self.trace_drift,
                "spectral_drift": self.spectral_drift, **self.meta}


def _drift(values: np.ndarray) -> float:
    dev = float(np.max(np.abs(values - values[0]), initial=0.0))
    r, _ = safe_ratio(dev, abs(float(values[0])))
    return dev if math.isinf(r) else r


def conservation_report(traj) -> ConservationReport:
    """Energy, trace and gamma-spectrum drift along a trajectory.

    Recorded states are evaluated directly; when the solver kept per-step energy and
    trace series, the drifts are taken over those finer series.
    """
    grid = traj.grid
    sea = fermi_sea(grid).data
    e = np.array([relative_energy(s, check=False).total for s in traj.states])
    tr = np.array([s.trace().real for s in traj.states])
    specs = [np.linalg.eigvalsh(sea + s.data) for s in traj.states]
    lo = np.array([s[0] for s in specs])
    hi = np.array([s[-1] for s in specs])
    e_series = traj.series.get("energy", e)
    tr_series = traj.series.get("trace", tr)
    spec_drift = max((float(np.max(np.abs(s - specs[0]))) for s in specs), default=0.0)
    return ConservationReport(np.asarray(traj.times), e, tr, lo, hi, _drift(np.asarray(e_series)),
                              float(np.max(np.abs(tr_series - tr_series[0]), initial=0.0)),
                              spec_drift, {"solver": traj.meta.get("solver", "")})


# ---------------------------------------------------------------------------------------
# static inequalities


def _as_list(Qs) -> list[KernelOperator]:
    return [Qs] if isinstance(Qs, KernelOperator) else list(Qs)


def lieb_thirring_rhs(Q: KernelOperator) -> tuple[float, int]:
    """int F(rho_sea + rho_Q) with F the second-order Taylor remainder of s^{1+2/d}.

    Returns the value and the number of grid points where the total density was
    negative beyond rounding (those are clipped to zero).
    """
    g = Q.grid
    p = 1 + 2 / g.d
    r0 = fermi_density(g)
    rho = density(Q).values
    tot = r0 + rho
    bad = int(np.sum(tot < -NEGATIVE_DENSITY_TOL))
    tot = np.maximum(tot, 0.0)
    integrand = tot**p - r0**p - p * r0 ** (p - 1) * rho
    return float(np.sum(integrand) * g.fine_cell), bad


def lieb_thirring_check(Qs) -> RatioReport:
    """Relative kinetic energy against the Lieb-Thirring type density functional."""
    rep = RatioReport("lieb_thirring")
    for Q in _as_list(Qs):
        _require_energy_dim(Q.grid)
        rhs, bad = lieb_thirring_rhs(Q)
        rep.add(relative_kinetic_energy(Q, check=False), rhs, negative_points=bad, M=Q.grid.M)
    return rep


def sobolev_check(Qs, alpha: float = 1.0) -> RatioReport:
    """||rho_Q||_{L^2} against the Hilbert-Schmidt Sobolev norm."""
    rep = RatioReport("sobolev", meta={"alpha": alpha})
    for Q in _as_list(Qs):
        rep.add(density(Q).l2_norm(), hs_sobolev_norm(Q, alpha), M=Q.grid.M)
    return rep


def kinetic_density_check(Qs) -> RatioReport:
    """||rho_Q||_{L^2} against Tr_0 + Tr_0^{1/2} (relative kinetic energy)."""
    rep = RatioReport("kinetic_density")
    for Q in _as_list(Qs):
        k = max(relative_kinetic_energy(Q, check=False), 0.0)
        rep.add(density(Q).l2_norm(), k + math.sqrt(k), kinetic=k, M=Q.grid.M)
    return rep


def low_low_density_bound_check(Qs, alpha: float = 1.0, r: float = 2.0) -> RatioReport:
    """Low-low density against the relative kinetic energy, and its H^alpha / L^2 ratio."""
    rep = RatioReport("low_low_density", meta={"alpha": alpha, "band_radius": r})
    for Q in _as_list(Qs):
        low = band_projector(Q.grid, r)
        rho = density(Q.sandwich(low))
        l2 = rho.l2_norm()
        hs_ratio, _ = safe_ratio(rho.sobolev_norm(alpha), l2)
        rep.add(l2**2, relative_kinetic_energy(Q, check=False), hs_ratio=hs_ratio, M=Q.grid.M)
    return rep


# ---------------------------------------------------------------------------------------
# commutator lemmas

LEMMA_IDS = ("h2_sea", "h2_pair", "window_pair", "window_sea")


def _comm_sea(rho: DensityField) -> KernelOperator:
    g = rho.grid
    V = multiplication_operator(g, rho.coefficients)
    p = fermi_projector(g).values
    return KernelOperator(g, V * p[None, :] - p[:, None] * V, hermitian=False)


def _comm(rho: DensityField, Q: KernelOperator) -> KernelOperator:
    V = multiplication_operator(Q.grid, rho.coefficients)
    return KernelOperator(Q.grid, V @ Q.data - Q.data @ V, hermitian=False)


def _window_quantities(Q1: KernelOperator, Q2: KernelOperator, window: float, samples: int,
                       alpha: float, pairs: Sequence[AdmissiblePair] | None):
    """Free evolutions on [0, window] and the time-integrated pieces of the window lemmas."""
    from .dynamics import Trajectory
    times = np.linspace(0.0, window, samples + 1)
    s1 = [free_conjugate(Q1, t) for t in times]
    s2 = [free_conjugate(Q2, t) for t in times]
    rhos = [density(s) for s in s1]
    pair_l1 = np.trapezoid([hs_sobolev_norm(_comm(r, q), alpha) for r, q in zip(rhos, s2)], times)
    sea_l1 = np.trapezoid([hs_sobolev_norm(_comm_sea(r), alpha) for r in rhos], times)
    rho_l2h = math.sqrt(np.trapezoid([r.sobolev_norm(alpha) ** 2 for r in rhos], times))
    s_alpha = strichartz_S_alpha_norm(Trajectory(Q2.grid, times, s2), alpha,
                                      list(pairs) if pairs else None).total
    return float(pair_l1), float(sea_l1), rho_l2h, s_alpha


def commutator_lemma_scan(ensemble: Iterable, lemma_id: str, alpha: float = 1.0,
                          window: float = 0.5, samples: int = 32,
                          pairs: Sequence[AdmissiblePair] | None = None) -> RatioReport:
    """Empirical LHS / RHS ratios for the commutator estimates.

    ``h2_sea``: ||[rho_Q, Pi^-]||_{h2} / ||Q||_{h2}.
    ``h2_pair``: ||[rho_Q1, Q2]||_{h2} / (||rho_Q1||_{H^2} ||Q2||_{h2}).
    ``window_pair``: ||[rho_Q1, Q2]||_{L^1_t H^a} / (|I|^{1/8} ||rho_Q1||_{L^2_t H^a} ||Q2||_{S^a}).
    ``window_sea``: ||[rho_Q, Pi^-]||_{L^1_t H^a} / (|I|^{1/2} ||rho_Q||_{L^2_t H^a}).
    The window variants use free evolutions on [0, window].  Pair lemmas take
    consecutive members (Q1, Q2) of the ensemble, wrapping around.
    """
    if lemma_id not in LEMMA_IDS:
        raise ValueError(f"unknown lemma id {lemma_id!r}; expected one of {LEMMA_IDS}")
    members = list(ensemble)
    rep = RatioReport(f"commutator_{lemma_id}", meta={"alpha": alpha, "window": window})
    for i, Q in enumerate(members):
        Q2 = members[(i + 1) % len(members)]
        if lemma_id == "h2_sea":
            rep.add(h2_norm(_comm_sea(density(Q))), h2_norm(Q))
        elif lemma_id == "h2_pair":
            rho = density(Q)
            rep.add(h2_norm(_comm(rho, Q2)), rho.sobolev_norm(2.0) * h2_norm(Q2))
        else:
            pair_l1, sea_l1, rho_l2h, s_alpha = _window_quantities(Q, Q2, window, samples, alpha, pairs)
            if lemma_id == "window_pair":
                rep.add(pair_l1, window**0.125 * rho_l2h * s_alpha)
            else:
                rep.add(sea_l1, window**0.5 * rho_l2h)
    return rep


def window_scaling_exponent(Q1: KernelOperator, Q2: KernelOperator, lemma_id: str,
                            windows: Sequence[float], alpha: float = 1.0,
                            samples: int = 32) -> tuple[float, list[float]]:
    """Fit log(LHS / window-free RHS) against log|I|; returns the slope and the ratios.

    The window-free RHS drops the |I| power, so the slope is the measured power of
    |I| the estimate gains on these samples.
    """
    if lemma_id not in ("window_pair", "window_sea"):
        raise ValueError("window scaling applies to the window lemmas only")
    ratios = []
    for w in windows:
        pair_l1, sea_l1, rho_l2h, s_alpha = _window_quantities(Q1, Q2, w, samples, alpha, None)
        if lemma_id == "window_pair":
            ratios.append(safe_ratio(pair_l1, rho_l2h * s_alpha)[0])
        else:
            ratios.append(safe_ratio(sea_l1, rho_l2h)[0])
    slope = float(np.polyfit(np.log(windows), np.log(ratios), 1)[0])
    return slope, ratios
