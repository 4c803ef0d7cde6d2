"""Finite-N orbital representation and its split-step propagator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import expm_multiply

from .dynamics import SolverError
from .grid import GridSpec, fermi_projector
from .kernel import KernelOperator, density_coefficients, multiplication_operator, smooth_vectors


@dataclass(frozen=True, eq=False)
class OrbitalSet:
    """N wavefunctions stored as frequency coefficients, shape (N, n_modes).

    u_j(x) = L^{-d/2} sum_xi c_j(xi) e^{i xi.x}, so the coefficient inner product is
    the L^2 inner product.
    """

    grid: GridSpec
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).reshape(-1, self.grid.n_modes)
        object.__setattr__(self, "coefficients", c)

    @property
    def N(self) -> int:
        return self.coefficients.shape[0]

    def gram(self) -> np.ndarray:
        c = self.coefficients
        return c.conj() @ c.T

    def gram_error(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.N)), initial=0.0))

    def values(self) -> np.ndarray:
        """Orbitals on the M^d grid, shape (N, M, ..., M)."""
        g = self.grid
        shape = (self.N,) + (g.M,) * g.d
        axes = tuple(range(1, g.d + 1))
        c = np.fft.ifftshift(self.coefficients.reshape(shape), axes=axes)
        return np.fft.ifftn(c, axes=axes) * g.n_modes / g.volume**0.5

    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray) -> "OrbitalSet":
        axes = tuple(range(1, grid.d + 1))
        c = np.fft.fftn(values, axes=axes) * grid.volume**0.5 / grid.n_modes
        c = np.fft.fftshift(c, axes=axes)
        return cls(grid, c.reshape(values.shape[0], -1))

    def kernel_data(self) -> np.ndarray:
        c = self.coefficients
        return c.T @ c.conj()


def orbitals_to_kernel(orbitals: OrbitalSet) -> KernelOperator:
    """gamma = sum_j |u_j><u_j|."""
    data = orbitals.kernel_data()
    return KernelOperator(orbitals.grid, 0.5 * (data + data.conj().T))


def plane_wave_orbitals(grid: GridSpec, ks) -> OrbitalSet:
    from .kernel import mode_index
    c = np.zeros((len(ks), grid.n_modes), dtype=complex)
    for j, k in enumerate(ks):
        c[j, mode_index(grid, k)] = 1.0
    return OrbitalSet(grid, c)


def sea_with_particles(grid: GridSpec, n_particles: int, seed: int, decay: float = 4.0) -> OrbitalSet:
    """Fermi-sea plane waves plus smooth orthonormal particles above the surface."""
    occ = fermi_projector(grid).selected
    sea = np.zeros((int(occ.sum()), grid.n_modes), dtype=complex)
    sea[np.arange(len(sea)), np.flatnonzero(occ)] = 1.0
    if n_particles == 0:
        return OrbitalSet(grid, sea)
    rng = np.random.default_rng(seed)
    p = smooth_vectors(grid, rng, n_particles, decay)
    p[:, occ] = 0.0
    q, _ = np.linalg.qr(p.T)
    return OrbitalSet(grid, np.concatenate([sea, q.T], axis=0))


@dataclass
class OrbitalTrajectory:
    grid: GridSpec
    times: np.ndarray
    states: list[OrbitalSet]
    gram_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> OrbitalSet:
        return self.states[-1]

    def __len__(self):
        return len(self.states)


def _density(grid: GridSpec, c: np.ndarray) -> np.ndarray:
    return density_coefficients(grid, c.T @ c.conj())


def evolve_orbitals(orbitals: OrbitalSet, T: float, dt: float, record_every: int = 1,
                    potential: str = "galerkin", drift_guard: float = 1e-6) -> OrbitalTrajectory:
    """Strang splitting: half kinetic phase, potential substep, half kinetic phase.

    ``galerkin`` applies exp(-i dt V_rho) with V_rho the mode-truncated multiplication
    matrix (the same operator used by the kernel solver), with rho taken at an
    exponential-midpoint prediction so the scheme stays second order.  ``pointwise``
    multiplies the grid values by exp(-i dt rho(x)) with rho frozen after the first
    half step; it is cheaper but aliased.
    """
    if potential not in ("galerkin", "pointwise"):
        raise ValueError("potential must be 'galerkin' or 'pointwise'")
    if not dt > 0 or T < dt * (1 - 1e-12):
        raise ValueError("need dt > 0 and T >= dt")
    grid = orbitals.grid
    nsteps = int(round(T / dt))
    if orbitals.N == 0:
        return OrbitalTrajectory(grid, np.array([0.0, nsteps * dt]), [orbitals, orbitals],
                                 np.zeros(2), {"potential": potential, "dt": dt})
    if orbitals.gram_error() > 1e-10:
        raise ValueError(f"orbitals are not orthonormal (Gram error {orbitals.gram_error():.2e})")
    half = np.exp(-0.5j * dt * grid.xi2)
    c = orbitals.coefficients.copy()
    times, states, drift = [0.0], [orbitals], [orbitals.gram_error()]
    for m in range(1, nsteps + 1):
        c *= half[None, :]
        if potential == "galerkin":
            V = multiplication_operator(grid, _density(grid, c))
            pred = expm_multiply(-0.5j * dt * V, c.T)
            V = multiplication_operator(grid, _density(grid, pred.T))
            c = expm_multiply(-1j * dt * V, c.T).T
        else:
            u = OrbitalSet(grid, c).values()
            rho = np.sum(np.abs(u) ** 2, axis=0)
            c = OrbitalSet.from_values(grid, u * np.exp(-1j * dt * rho)[None]).coefficients
        c *= half[None, :]
        if m % record_every == 0 or m == nsteps:
            s = OrbitalSet(grid, c.copy())
            err = s.gram_error()
            if err > drift_guard:
                raise SolverError(f"orthonormality drift {err:.3e} at t={m * dt:.4g}", t=m * dt)
            times.append(m * dt)
            states.append(s)
            drift.append(err)
    return OrbitalTrajectory(grid, np.array(times), states, np.array(drift),
                             {"potential": potential, "dt": dt, "T": T})
