"""Dense frequency-space operator kernels, densities, static norms and generators.

An operator Q is stored as its matrix Q_hat(xi, xi') in the orthonormal plane-wave
basis ``L^{-d/2} exp(i xi.x)``, so the position kernel is

    Q(x, x') = L^{-d} sum_{xi, xi'} Q_hat(xi, xi') exp(i (xi.x - xi'.x')).

Densities live on the lattice of mode differences (no wrap-around) and multiplication
operators are assembled from the same lattice, which makes ``density`` and
``multiplication_operator`` exact adjoints of each other.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .grid import (GridSpec, MultiplierMask, band_projector, fermi_projector,
                   kinetic_weight, sobolev_weight)
from .reports import NormReport

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class KernelOperator:
    grid: GridSpec
    data: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        n = self.grid.n_modes
        if self.data.shape != (n, n):
            raise ValueError(f"kernel must be {n}x{n}, got {self.data.shape}")
        if self.hermitian:
            err = np.max(np.abs(self.data - self.data.conj().T), initial=0.0)
            if err > HERMITIAN_TOL:
                raise ValueError(f"kernel flagged hermitian but |Q - Q*| = {err:.3e}")

    # -- construction helpers --------------------------------------------------------

    @classmethod
    def zeros(cls, grid: GridSpec) -> "KernelOperator":
        return cls(grid, np.zeros((grid.n_modes,) * 2, dtype=complex))

    @classmethod
    def from_mask(cls, grid: GridSpec, mask: MultiplierMask) -> "KernelOperator":
        return cls(grid, np.diag(mask.values.astype(complex)))

    @classmethod
    def rank_one(cls, grid: GridSpec, vec: np.ndarray, weight: float = 1.0) -> "KernelOperator":
        vec = np.asarray(vec, dtype=complex)
        return cls(grid, weight * np.outer(vec, vec.conj()))

    @classmethod
    def plane_wave(cls, grid: GridSpec, k, weight: float = 1.0) -> "KernelOperator":
        """weight * |phi_k><phi_k| for the normalized plane wave with integer index k."""
        e = np.zeros(grid.n_modes, dtype=complex)
        e[mode_index(grid, k)] = 1.0
        return cls.rank_one(grid, e, weight)

    # -- algebra ---------------------------------------------------------------------

    def _check(self, other: "KernelOperator"):
        if other.grid != self.grid:
            raise ValueError("operators live on different grids")

    def __add__(self, other: "KernelOperator") -> "KernelOperator":
        self._check(other)
        return KernelOperator(self.grid, self.data + other.data,
                              self.hermitian and other.hermitian)

    def __sub__(self, other: "KernelOperator") -> "KernelOperator":
        self._check(other)
        return KernelOperator(self.grid, self.data - other.data,
                              self.hermitian and other.hermitian)

    def __neg__(self) -> "KernelOperator":
        return KernelOperator(self.grid, -self.data, self.hermitian)

    def __mul__(self, c) -> "KernelOperator":
        real = np.isreal(c)
        return KernelOperator(self.grid, c * self.data, bool(self.hermitian and real))

    __rmul__ = __mul__

    def adjoint(self) -> "KernelOperator":
        return KernelOperator(self.grid, self.data.conj().T, self.hermitian)

    def sandwich(self, left: MultiplierMask | np.ndarray | None = None,
                 right: MultiplierMask | np.ndarray | None = None) -> "KernelOperator":
        """diag(left) Q diag(right); ``right`` defaults to ``left``."""
        lv = _vals(left, self.grid)
        rv = lv if right is None else _vals(right, self.grid)
        herm = self.hermitian and right is None and np.isrealobj(lv)
        return KernelOperator(self.grid, lv[:, None] * self.data * rv[None, :], herm)

    def block(self, sign: str) -> "KernelOperator":
        """Q^{++} or Q^{--} with respect to the Fermi projector."""
        P = fermi_projector(self.grid)
        return self.sandwich(P.complement() if sign == "+" else P)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    @property
    def H(self) -> "KernelOperator":
        return self.adjoint()

    @cached_property
    def singular_values(self) -> np.ndarray:
        if self.hermitian:
            return np.sort(np.abs(np.linalg.eigvalsh(self.data)))[::-1]
        return np.linalg.svd(self.data, compute_uv=False)


def _vals(mask, grid) -> np.ndarray:
    if mask is None:
        return np.ones(grid.n_modes)
    if isinstance(mask, MultiplierMask):
        return mask.values
    return np.asarray(mask)


def mode_index(grid: GridSpec, k) -> int:
    k = np.atleast_1d(np.asarray(k, dtype=int))
    if k.shape != (grid.d,):
        raise ValueError(f"mode index must have {grid.d} components")
    if np.any(k < -grid.M // 2) or np.any(k >= grid.M // 2):
        raise ValueError(f"mode {k.tolist()} is outside the grid band")
    idx = 0
    for a in range(grid.d):
        idx = idx * grid.M + int(k[a] + grid.M // 2)
    return idx


def fermi_sea(grid: GridSpec) -> KernelOperator:
    return KernelOperator.from_mask(grid, fermi_projector(grid))


# ---------------------------------------------------------------------------------------
# densities


@lru_cache(maxsize=16)
def _diff_plan(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    idx = grid.diff_index.ravel()
    order = np.argsort(idx, kind="stable")
    starts = np.flatnonzero(np.r_[True, np.diff(idx[order]) != 0])
    return order, starts


def density_coefficients(grid: GridSpec, data: np.ndarray) -> np.ndarray:
    """rho_hat(eta) = L^{-d} sum_xi Q_hat(xi, xi - eta), flat over the difference lattice."""
    order, starts = _diff_plan(grid)
    # every difference occurs at least once, so the groups are exactly the lattice
    return np.add.reduceat(data.ravel()[order], starts) / grid.volume


def multiplication_operator(grid: GridSpec, coefficients: np.ndarray) -> np.ndarray:
    """Matrix of multiplication by V(x) = sum_eta V_hat(eta) e^{i eta.x}, no wrap-around."""
    return coefficients[grid.diff_index]


@dataclass(frozen=True, eq=False)
class DensityField:
    """Density with Fourier coefficients on the (2M-1)^d difference lattice.

    Position values are sampled on the (2M)^d grid, which represents the density
    without aliasing; Riemann sums of rho^2 on that grid are exact.
    """

    grid: GridSpec
    coefficients: np.ndarray

    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray) -> "DensityField":
        P = grid.fine_points
        full = np.fft.fftn(values) / P**grid.d
        sel = tuple(np.arange(-(grid.M - 1), grid.M) % P for _ in range(grid.d))
        coeff = full[np.ix_(*sel)].ravel()
        return cls(grid, coeff)

    @cached_property
    def complex_values(self) -> np.ndarray:
        g = self.grid
        P = g.fine_points
        full = np.zeros((P,) * g.d, dtype=complex)
        sel = tuple(np.arange(-(g.M - 1), g.M) % P for _ in range(g.d))
        full[np.ix_(*sel)] = self.coefficients.reshape(g.diff_shape)
        return np.fft.ifftn(full) * P**g.d

    @property
    def imag_residue(self) -> float:
        return float(np.max(np.abs(self.complex_values.imag)))

    @cached_property
    def values(self) -> np.ndarray:
        return self.complex_values.real

    def positions(self) -> list[np.ndarray]:
        x = np.arange(self.grid.fine_points) * self.grid.L / self.grid.fine_points
        return np.meshgrid(*([x] * self.grid.d), indexing="ij")

    def integral(self) -> float:
        return float(self.coefficients.real[self._zero] * self.grid.volume)

    @property
    def _zero(self) -> int:
        return (int(np.prod(self.grid.diff_shape)) - 1) // 2

    def weighted_norm(self, weight: np.ndarray) -> float:
        """sqrt(L^d sum_eta weight(eta)^2 |rho_hat(eta)|^2)."""
        return float(np.sqrt(self.grid.volume * np.sum(weight**2 * np.abs(self.coefficients) ** 2)))

    def l2_norm(self) -> float:
        return self.weighted_norm(np.ones(len(self.coefficients)))

    def sobolev_norm(self, s: float, half_derivative: bool = False) -> float:
        """H^s norm; with ``half_derivative`` the norm of |grad|^{1/2} rho in H^s."""
        return self.weighted_norm(density_weight(self.grid, s, half_derivative))

    def riemann_l2_squared(self) -> float:
        """Riemann sum of rho^2 on the sampling grid times the cell volume."""
        return float(np.sum(self.values**2) * self.grid.fine_cell)

    def __sub__(self, other: "DensityField") -> "DensityField":
        return DensityField(self.grid, self.coefficients - other.coefficients)


def density_weight(grid: GridSpec, s: float, half_derivative: bool = False) -> np.ndarray:
    """<eta>^s (times |eta|^{1/2} if requested) on the difference lattice."""
    eta2 = grid.diff_xi2
    w = (1.0 + eta2) ** (s / 2)
    if half_derivative:
        w = w * eta2**0.25
    return w


def density(Q: KernelOperator) -> DensityField:
    return DensityField(Q.grid, density_coefficients(Q.grid, Q.data))


def fermi_density(grid: GridSpec) -> float:
    """The constant density of the Fermi sea, (number of occupied modes) / L^d."""
    return float(np.sum(grid.xi2 <= grid.mu)) / grid.volume


# ---------------------------------------------------------------------------------------
# commutators


def commutator(A: KernelOperator, B: KernelOperator) -> KernelOperator:
    A._check(B)
    return KernelOperator(A.grid, A.data @ B.data - B.data @ A.data, hermitian=False)


def potential_commutator(rho: DensityField, Q: KernelOperator) -> KernelOperator:
    """[V_rho, Q] with V_rho the multiplication operator of the density."""
    if rho.grid != Q.grid:
        raise ValueError("density and operator live on different grids")
    V = multiplication_operator(Q.grid, rho.coefficients)
    return KernelOperator(Q.grid, V @ Q.data - Q.data @ V, hermitian=False)


# ---------------------------------------------------------------------------------------
# norms


def schatten_norm(Q: KernelOperator | np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError(f"Schatten exponent must be >= 1, got {p}")
    s = Q.singular_values if isinstance(Q, KernelOperator) else np.linalg.svd(Q, compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    if p == 1:
        return float(np.sum(s))
    if p == 2:
        return float(np.sqrt(np.sum(s**2)))
    return float(np.sum(s**p) ** (1.0 / p))


def op_norm(Q: KernelOperator) -> float:
    return schatten_norm(Q, np.inf)


def hs_sobolev_norm(Q: KernelOperator, alpha: float) -> float:
    """Frobenius norm of <grad>^alpha Q <grad>^alpha."""
    w = sobolev_weight(Q.grid, alpha).values
    return float(np.linalg.norm(w[:, None] * Q.data * w[None, :]))


def h2_norm(Q: KernelOperator) -> float:
    """Trace norm of <grad>^2 Q <grad>^2."""
    return schatten_norm(Q.sandwich(sobolev_weight(Q.grid, 2.0)), 1)


def kinetic_blocks(Q: KernelOperator) -> tuple[KernelOperator, KernelOperator]:
    """w Q^{++} w and w Q^{--} w with w the kinetic weight |Delta + mu|^{1/2}."""
    w = kinetic_weight(Q.grid)
    return Q.block("+").sandwich(w), Q.block("-").sandwich(w)


def in_energy_cone(Q: KernelOperator, tol: float = 1e-10) -> bool:
    """0 <= Pi^- + Q <= 1 up to ``tol``."""
    ev = np.linalg.eigvalsh(fermi_sea(Q.grid).data + Q.data)
    return bool(ev.min() >= -tol and ev.max() <= 1 + tol)


def relative_kinetic_energy(Q: KernelOperator, check: bool = True) -> float:
    """Tr(w Q^{++} w) - Tr(w Q^{--} w); equals Tr (-Delta - mu) Q off the floor."""
    if not Q.hermitian:
        raise ValueError("relative kinetic energy needs a hermitian operator")
    g = Q.grid
    w2 = kinetic_weight(g).values ** 2
    occ = fermi_projector(g).selected
    diag = Q.data.diagonal().real
    value = float(np.sum(w2[~occ] * diag[~occ]) - np.sum(w2[occ] * diag[occ]))
    if check:
        qpp, qmm = Q.block("+"), Q.block("-")
        lo = np.linalg.eigvalsh(qpp.data).min()
        hi = np.linalg.eigvalsh(qmm.data).max()
        if lo < -1e-10 or hi > 1e-10:
            warnings.warn("operator is outside the energy cone: Q^{++} >= 0, Q^{--} <= 0 fails "
                          f"(min eig {lo:.2e}, max eig {hi:.2e}); returning the signed trace",
                          stacklevel=2)
    return value


def x_norm(Q: KernelOperator) -> NormReport:
    if not Q.hermitian:
        raise ValueError("the X norm is defined on self-adjoint operators")
    kpp, kmm = kinetic_blocks(Q)
    e = {"op": op_norm(Q), "kinetic_pp": schatten_norm(kpp, 1), "kinetic_mm": schatten_norm(kmm, 1)}
    e["total"] = e["op"] + e["kinetic_pp"] + e["kinetic_mm"]
    return NormReport(e, grid=Q.grid.as_dict())


def x_alpha_norm(Q: KernelOperator, alpha: float, r: float = 2.0) -> NormReport:
    high = band_projector(Q.grid, r).complement()
    hq = KernelOperator(Q.grid, high.values[:, None] * Q.data, hermitian=False)
    e = {"op": op_norm(Q), "high_hs_sobolev": hs_sobolev_norm(hq, alpha)}
    e["total"] = e["op"] + e["high_hs_sobolev"]
    return NormReport(e, grid=Q.grid.as_dict(), meta={"alpha": alpha, "band_radius": r})


# ---------------------------------------------------------------------------------------
# perturbation generators

GENERATOR_KINDS = ("unitary_conjugation", "particle_hole", "smooth_random")
DEFAULT_SIZES = {"unitary_conjugation": 0.5, "particle_hole": 2, "smooth_random": 0.5}
_MASTER_BAND = {1: 512, 2: 64, 3: 32}


def smooth_vectors(grid: GridSpec, rng: np.random.Generator, count: int,
                   decay: float = 4.0) -> np.ndarray:
    """``count`` unit vectors with Sobolev-decaying random coefficients, shape (count, n).

    Draws are made on a fixed master band and restricted to the grid, so the same seed
    gives the same low-frequency content on every grid that fits inside the band.
    """
    Mm = max(_MASTER_BAND[grid.d], grid.M)
    shape = (count,) + (Mm,) * grid.d
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    idx = tuple(grid.k[:, a] + Mm // 2 for a in range(grid.d))
    v = g[(slice(None),) + idx] * (1.0 + grid.xi2) ** (-decay / 2)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _orthonormal(cols: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(cols)
    keep = np.abs(np.diag(r)) > 1e-10 * max(1.0, np.abs(np.diag(r)).max(initial=0.0))
    return q[:, keep]


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def make_perturbation(grid: GridSpec, kind: str, seed: int, size: float | None = None,
                      rank: int = 4, decay: float = 4.0) -> KernelOperator:
    """Random Q = gamma - Pi^- with 0 <= gamma <= 1.

    ``unitary_conjugation``: gamma = U Pi^- U*, U = exp(i size H) for a smooth
    low-rank hermitian H.  ``particle_hole``: int(size) smooth particle states above
    the Fermi surface and as many hole states inside the sea (capped by the sea
    size), occupations uniform in [0, 1].  ``smooth_random``: Pi^- + size H with the
    spectrum clipped to [0, 1].
    """
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")
    if size is None:
        size = DEFAULT_SIZES[kind]
    if size < 0:
        raise ValueError("size must be >= 0")
    if size == 0:
        return KernelOperator.zeros(grid)
    rng = np.random.default_rng(seed)
    occ = fermi_projector(grid).selected
    n = grid.n_modes

    if kind == "particle_hole":
        k = int(size)
        parts = smooth_vectors(grid, rng, k, decay)
        parts[:, occ] = 0.0
        P = _orthonormal(parts.T)
        sea = np.flatnonzero(occ)
        kh = min(k, len(sea))
        hv = rng.standard_normal((len(sea), kh)) + 1j * rng.standard_normal((len(sea), kh))
        H = np.zeros((n, kh), dtype=complex)
        H[sea] = hv
        H = _orthonormal(H)
        wp = rng.uniform(0.0, 1.0, P.shape[1])
        wh = rng.uniform(0.0, 1.0, H.shape[1])
        data = (P * wp) @ P.conj().T - (H * wh) @ H.conj().T
        return KernelOperator(grid, _hermitize(data))

    F = smooth_vectors(grid, rng, 2 * rank, decay)
    B = _orthonormal(F.T)
    c = rng.standard_normal((B.shape[1],) * 2) + 1j * rng.standard_normal((B.shape[1],) * 2)
    h = _hermitize(c) / np.sqrt(B.shape[1])

    if kind == "unitary_conjugation":
        lam, vec = np.linalg.eigh(h)
        W = B @ vec
        # U = 1 + W (e^{i size lam} - 1) W*
        sea = np.flatnonzero(occ)
        Ucols = np.zeros((n, len(sea)), dtype=complex)
        Ucols[sea, np.arange(len(sea))] = 1.0
        Ucols += (W * (np.exp(1j * size * lam) - 1.0)) @ W.conj()[sea].T
        gamma = Ucols @ Ucols.conj().T
        data = gamma - np.diag(occ.astype(float))
        return KernelOperator(grid, _hermitize(data))

    # smooth_random: clip the spectrum of Pi^- + size H on span(sea, range H)
    E = np.zeros((n, int(occ.sum())), dtype=complex)
    E[np.flatnonzero(occ), np.arange(int(occ.sum()))] = 1.0
    S = _orthonormal(np.concatenate([E, B], axis=1))
    Hfull_S = (S.conj().T @ B) @ (size * h) @ (B.conj().T @ S)
    gamma_S = S.conj().T @ (occ[:, None] * S) + Hfull_S
    lam, vec = np.linalg.eigh(_hermitize(gamma_S))
    lam = np.clip(lam, 0.0, 1.0)
    Wv = S @ vec
    gamma = (Wv * lam) @ Wv.conj().T
    data = gamma - np.diag(occ.astype(float))
    return KernelOperator(grid, _hermitize(data))


def plane_wave_excitation(grid: GridSpec, particles=(), holes=(), weights=None) -> KernelOperator:
    """Q = sum_p w_p |phi_p><phi_p| - sum_h w_h |phi_h><phi_h| for plane-wave modes.

    Particles must lie outside the Fermi sea and holes inside; weights default to 1
    and must lie in [0, 1], so Pi^- + Q stays in the admissible range.
    """
    occ = fermi_projector(grid).selected
    ks = ([(tuple(np.atleast_1d(k)), 1.0) for k in particles]
          + [(tuple(np.atleast_1d(k)), -1.0) for k in holes])
    w = np.ones(len(ks)) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != len(ks) or np.any((w < 0) | (w > 1)):
        raise ValueError("need one weight in [0, 1] per excitation")
    diag = np.zeros(grid.n_modes)
    for (k, sign), wk in zip(ks, w):
        i = mode_index(grid, k)
        if (sign > 0) == bool(occ[i]):
            raise ValueError(f"mode {k} is {'inside' if occ[i] else 'outside'} the Fermi sea")
        if diag[i] != 0:
            raise ValueError(f"mode {k} given twice")
        diag[i] = sign * wk
    return KernelOperator(grid, np.diag(diag.astype(complex)))


def ensemble(grid: GridSpec, count: int, seed: int, kinds=GENERATOR_KINDS,
             sizes: dict | None = None, **kw) -> list[KernelOperator]:
    """Deterministic mixed ensemble; member i uses kind i mod len(kinds)."""
    sizes = {**DEFAULT_SIZES, **(sizes or {})}
    seeds = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [make_perturbation(grid, kinds[i % len(kinds)], int(seeds[i]),
                              sizes[kinds[i % len(kinds)]], **kw) for i in range(count)]
