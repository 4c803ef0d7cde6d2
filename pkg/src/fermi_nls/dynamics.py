"""Time evolution of the perturbation Q: reference RK4, Duhamel/Picard iteration, windowed continuation.

The equation is ``i dQ/dt = [-Delta + rho_Q, Pi^- + Q]`` with the potential the
multiplication operator of the density (delta interaction).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .grid import GridSpec, fermi_projector, kinetic_weight
from .kernel import (DensityField, KernelOperator, density_coefficients, h2_norm,
                     multiplication_operator)

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e3
SPECTRAL_TOL = 1e-6


class SolverError(RuntimeError):
    """Raised on blow-up, loss of hermiticity/spectral bounds, or non-contraction."""

    def __init__(self, message: str, **info):
        super().__init__(message)
        self.info = info


@dataclass
class Trajectory:
    grid: GridSpec
    times: np.ndarray
    states: list[KernelOperator]
    series: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.states)

    @cached_property
    def densities(self) -> list[DensityField]:
        return [DensityField(self.grid, density_coefficients(self.grid, s.data)) for s in self.states]

    @property
    def final(self) -> KernelOperator:
        return self.states[-1]

    @property
    def is_uniform(self) -> bool:
        if len(self.times) < 3:
            return True
        h = np.diff(self.times)
        return bool(np.allclose(h, h[0], rtol=1e-9, atol=0))

    def subsample(self, stride: int) -> "Trajectory":
        idx = list(range(0, len(self), stride))
        if idx[-1] != len(self) - 1:
            idx.append(len(self) - 1)
        return Trajectory(self.grid, self.times[idx], [self.states[i] for i in idx],
                          meta=dict(self.meta))

    def concatenate(self, other: "Trajectory") -> "Trajectory":
        """Append ``other``, dropping its first sample if it repeats our last time."""
        start = 1 if len(other) and np.isclose(other.times[0], self.times[-1]) else 0
        series = {}
        for k in self.series.keys() & other.series.keys():
            series[k] = np.concatenate([self.series[k], other.series[k][start:]])
        return Trajectory(self.grid, np.concatenate([self.times, other.times[start:]]),
                          self.states + other.states[start:], series, dict(self.meta))


# ---------------------------------------------------------------------------------------
# the vector field


def _phase(grid: GridSpec, t: float) -> np.ndarray:
    e = np.exp(-1j * t * grid.xi2)
    return e[:, None] * e.conj()[None, :]


def free_conjugate(Q: KernelOperator, t: float) -> KernelOperator:
    """e^{it Delta} Q e^{-it Delta}: Q_hat(xi, xi') -> e^{-it(|xi|^2 - |xi'|^2)} Q_hat(xi, xi')."""
    if t == 0:
        return Q
    return KernelOperator(Q.grid, _phase(Q.grid, t) * Q.data, Q.hermitian)


class _Field:
    """Precomputed pieces of the vector field on one grid, plus scratch buffers."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.kdiff = grid.xi2[:, None] - grid.xi2[None, :]
        self.mikdiff = -1j * self.kdiff
        self.sea = fermi_projector(grid).values
        self.w2 = kinetic_weight(grid).values ** 2
        self.sign = np.where(self.sea > 0, -1.0, 1.0)
        self.sea_idx = np.flatnonzero(self.sea)
        n = grid.n_modes
        self._c = np.empty((n, n), dtype=complex)
        self._h = np.empty((n, n), dtype=complex)

    def potential_commutator(self, rho_hat: np.ndarray, Q: np.ndarray,
                             out: np.ndarray | None = None) -> np.ndarray:
        """[V_rho, Pi^- + Q] from one matrix product: C - C* with C = V (Pi^- + Q)."""
        V = multiplication_operator(self.grid, rho_hat)
        C = np.matmul(V, Q, out=self._c)
        C[:, self.sea_idx] += V[:, self.sea_idx]
        if out is None:
            out = np.empty_like(C)
        np.conjugate(C.T, out=out)
        np.subtract(C, out, out=out)
        return out

    def rhs(self, Q: np.ndarray, rho_hat: np.ndarray | None = None,
            out: np.ndarray | None = None) -> np.ndarray:
        if rho_hat is None:
            rho_hat = density_coefficients(self.grid, Q)
        out = self.potential_commutator(rho_hat, Q, out)
        out *= -1j
        np.multiply(self.mikdiff, Q, out=self._h)
        out += self._h
        return out

    def energy(self, Q: np.ndarray, rho_hat: np.ndarray) -> float:
        kin = float(np.sum(self.sign * self.w2 * Q.diagonal().real))
        pot = 0.5 * self.grid.volume * float(np.sum(np.abs(rho_hat) ** 2))
        return kin + pot


_FIELDS: dict[GridSpec, _Field] = {}


def _field(grid: GridSpec) -> _Field:
    f = _FIELDS.get(grid)
    if f is None:
        f = _FIELDS[grid] = _Field(grid)
    return f


def rhs(Q: KernelOperator) -> KernelOperator:
    """dQ/dt = -i ([-Delta, Q] + [V_{rho_Q}, Pi^- + Q])."""
    if not Q.hermitian:
        raise ValueError("rhs expects a hermitian state")
    return KernelOperator(Q.grid, _field(Q.grid).rhs(Q.data), hermitian=True)


def _check_state(grid: GridSpec, Q: np.ndarray, t: float, guard: float, sea: np.ndarray):
    herm = float(np.max(np.abs(Q - Q.conj().T)))
    if herm > 1e-12:
        raise SolverError(f"hermiticity lost at t={t:.6g}: |Q - Q*| = {herm:.3e}", t=t, herm=herm)
    ev = np.linalg.eigvalsh(Q + np.diag(sea))
    op = float(np.max(np.abs(np.linalg.eigvalsh(Q))))
    if op > guard:
        raise SolverError(f"blow-up guard tripped at t={t:.6g}: |Q|_op = {op:.3e} > {guard:.3e}",
                          t=t, op_norm=op)
    if ev.min() < -SPECTRAL_TOL or ev.max() > 1 + SPECTRAL_TOL:
        raise SolverError(f"spectrum of gamma left [0,1] at t={t:.6g}: "
                          f"[{ev.min():.3e}, {ev.max():.3e}]", t=t)


def evolve_rk4(Q0: KernelOperator, T: float, dt: float, record_every: int = 1,
               check_every: int | None = None, blowup_factor: float = BLOWUP_FACTOR) -> Trajectory:
    """Classical RK4 with fixed step.

    States are stored every ``record_every`` steps (and at T); scalar diagnostics
    (time, trace, relative energy) are kept for every step in ``series``.
    Hermiticity, the spectral range of gamma and the blow-up guard are checked at
    every recorded state unless ``check_every`` says otherwise.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if T < dt * (1 - 1e-12):
        raise ValueError("T must be at least dt")
    if not Q0.hermitian:
        raise ValueError("initial state must be hermitian")
    grid = Q0.grid
    f = _field(grid)
    nsteps = int(round(T / dt))
    if not np.isclose(nsteps * dt, T, rtol=1e-9, atol=1e-12):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    check_every = record_every if check_every is None else check_every
    op0 = float(np.max(np.abs(np.linalg.eigvalsh(Q0.data)), initial=0.0))
    guard = blowup_factor * max(op0, 1.0)

    Q = Q0.data.astype(complex, copy=True)
    k1, k2, k3, k4, stage = (np.empty_like(Q) for _ in range(5))
    times, states = [0.0], [Q0]
    s_t = np.empty(nsteps + 1)
    s_tr = np.empty(nsteps + 1)
    s_e = np.empty(nsteps + 1)
    for n in range(nsteps + 1):
        rho = density_coefficients(grid, Q)
        s_t[n], s_tr[n], s_e[n] = n * dt, np.trace(Q).real, f.energy(Q, rho)
        if n == nsteps:
            break
        f.rhs(Q, rho, out=k1)
        np.multiply(k1, 0.5 * dt, out=stage)
        f.rhs(np.add(stage, Q, out=stage), out=k2)
        np.multiply(k2, 0.5 * dt, out=stage)
        f.rhs(np.add(stage, Q, out=stage), out=k3)
        np.multiply(k3, dt, out=stage)
        f.rhs(np.add(stage, Q, out=stage), out=k4)
        # Q += dt/6 (k1 + 2 k2 + 2 k3 + k4)
        k2 += k3
        k2 *= 2.0
        k2 += k1
        k2 += k4
        k2 *= dt / 6.0
        Q += k2
        m = n + 1
        if m % check_every == 0 or m == nsteps:
            _check_state(grid, Q, m * dt, guard, f.sea)
        if m % record_every == 0 or m == nsteps:
            times.append(m * dt)
            states.append(KernelOperator(grid, Q.copy()))
    series = {"time": s_t, "trace": s_tr, "energy": s_e}
    return Trajectory(grid, np.array(times), states, series,
                      {"solver": "rk4", "dt": dt, "T": T, "record_every": record_every})


# ---------------------------------------------------------------------------------------
# Duhamel / Picard


@dataclass
class PicardResult:
    trajectory: Trajectory
    iterations: int
    increments: list[float]
    contraction_factors: list[float]
    converged: bool

    @property
    def contraction(self) -> float:
        """Largest measured ratio of successive increments (0 if fewer than two)."""
        return max(self.contraction_factors, default=0.0)


def _duhamel(f: _Field, Q0: np.ndarray, times: np.ndarray, states: list[np.ndarray]) -> list[np.ndarray]:
    """One application of the Duhamel map on the sample grid (trapezoid in the interaction picture)."""
    grid = f.grid
    out = [Q0.copy()]
    acc = np.zeros_like(Q0)
    prev = None
    for j, t in enumerate(times):
        rho = density_coefficients(grid, states[j])
        g = _phase(grid, -t) * f.potential_commutator(rho, states[j])
        if j > 0:
            acc += 0.5 * (times[j] - times[j - 1]) * (prev + g)
            out.append(_phase(grid, t) * (Q0 - 1j * acc))
        prev = g
    return out


def _hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def picard_solve(Q0: KernelOperator, T: float, time_samples: int = 128, max_iters: int = 30,
                 tol: float = 1e-10, norm_mode: str = "h2", alpha: float = 1.0,
                 norm_samples: int = 17, raise_on_failure: bool = True) -> PicardResult:
    """Fixed-point iteration of the Duhamel map on ``time_samples`` uniform intervals.

    Iterate 0 is the free evolution of Q0.  Increments between iterates are measured
    with ``norm_mode`` ('h2' or 'y_alpha') on ``norm_samples`` evenly spaced sample
    times; the run stops once an increment drops below ``tol``.
    """
    if norm_mode not in ("h2", "y_alpha"):
        raise ValueError("norm_mode must be 'h2' or 'y_alpha'")
    if time_samples < 1 or T <= 0:
        raise ValueError("need T > 0 and time_samples >= 1")
    grid = Q0.grid
    f = _field(grid)
    times = np.linspace(0.0, T, time_samples + 1)
    sel = np.unique(np.linspace(0, time_samples, min(norm_samples, time_samples + 1)).round().astype(int))
    cur = [_phase(grid, t) * Q0.data for t in times]

    def dist(a, b) -> float:
        diffs = [KernelOperator(grid, _hermitian_part(a[i] - b[i])) for i in sel]
        if norm_mode == "h2":
            return max(h2_norm(d) for d in diffs)
        from .spacetime import y_alpha_norm
        tr = Trajectory(grid, times[sel], diffs)
        return y_alpha_norm(tr, alpha).total

    increments: list[float] = []
    factors: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        new = _duhamel(f, Q0.data, times, cur)
        new = [_hermitian_part(q) for q in new]
        inc = dist(new, cur)
        increments.append(inc)
        if len(increments) >= 2 and increments[-2] > 0:
            factors.append(inc / increments[-2])
        cur = new
        if inc < tol:
            converged = True
            break
        if len(factors) >= 3 and min(factors[-3:]) >= 1.0:
            break
    traj = Trajectory(grid, times, [KernelOperator(grid, q) for q in cur],
                      meta={"solver": "picard", "time_samples": time_samples, "norm_mode": norm_mode})
    res = PicardResult(traj, it, increments, factors, converged)
    if not converged and raise_on_failure:
        raise SolverError(f"Picard iteration did not converge in {it} iterations "
                          f"(contraction factor {res.contraction:.3g}, last increment {increments[-1]:.3e})",
                          contraction=res.contraction, increments=increments)
    return res


def constant_window(length: float) -> Callable[[KernelOperator], float]:
    return lambda Q: length


def energy_window(base: float, exponent: float = 1.0) -> Callable[[KernelOperator], float]:
    """Window length base / (1 + E(Q))^exponent, shrinking with the relative energy."""
    def policy(Q: KernelOperator) -> float:
        rho = density_coefficients(Q.grid, Q.data)
        e = max(_field(Q.grid).energy(Q.data, rho), 0.0)
        return base / (1.0 + e) ** exponent
    return policy


def picard_continuation(Q0: KernelOperator, T_total: float, window_policy=None,
                        samples_per_unit: int = 256, energy_tol: float = 1e-4,
                        **picard_kw) -> Trajectory:
    """Chain ``picard_solve`` windows, restarting from each window's end state.

    ``window_policy`` maps the current state to a window length; windows are then
    snapped so they tile [0, T_total].  Aborts if the relative energy jumps by more
    than ``energy_tol`` (relative) across a window.
    """
    if window_policy is None:
        window_policy = constant_window(T_total)
    f = _field(Q0.grid)
    t0, Q = 0.0, Q0
    traj: Trajectory | None = None
    records = []
    while t0 < T_total - 1e-12:
        w = min(float(window_policy(Q)), T_total - t0)
        if T_total - t0 - w < 1e-9:
            w = T_total - t0
        ns = max(1, int(round(w * samples_per_unit)))
        res = picard_solve(Q, w, time_samples=ns, **picard_kw)
        seg = res.trajectory
        seg = Trajectory(seg.grid, seg.times + t0, seg.states, meta=seg.meta)
        e0 = f.energy(Q.data, density_coefficients(Q.grid, Q.data))
        e1 = f.energy(seg.final.data, density_coefficients(Q.grid, seg.final.data))
        drift = abs(e1 - e0) / max(abs(e0), 1e-300)
        records.append({"start": t0, "length": w, "iterations": res.iterations,
                        "contraction": res.contraction, "energy_drift": drift})
        if drift > energy_tol:
            raise SolverError(f"energy drift {drift:.3e} across window at t={t0:.4g} exceeds {energy_tol:g}",
                              windows=records)
        traj = seg if traj is None else traj.concatenate(seg)
        t0 += w
        Q = seg.final
    traj.meta = {"solver": "picard_continuation", "windows": records}
    return traj
