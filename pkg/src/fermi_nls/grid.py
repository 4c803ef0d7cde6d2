"""Periodic box, Fourier mode lattice and radial multiplier masks.

Modes are the lattice ``xi = (2 pi / L) k`` with ``k`` in ``{-M/2, ..., M/2-1}^d``,
enumerated lexicographically in ``k`` (last axis fastest).  That order is the
row/column order of every operator matrix in the package.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    d: int
    M: int
    L: float
    mu: float
    fermi_floor: float = 0.0

    def __post_init__(self):
        errors = []
        if self.d not in (1, 2, 3):
            errors.append(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.M < 4 or self.M % 2:
            errors.append(f"modes per dimension must be even and >= 4, got {self.M}")
        if not self.L > 0:
            errors.append(f"box length must be positive, got {self.L}")
        if not self.mu > 0:
            errors.append(f"chemical potential must be positive, got {self.mu}")
        if self.fermi_floor < 0:
            errors.append(f"fermi_floor must be >= 0, got {self.fermi_floor}")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def n_modes(self) -> int:
        return self.M**self.d

    @property
    def spacing(self) -> float:
        """Lattice spacing 2 pi / L of the frequency grid."""
        return 2 * np.pi / self.L

    @property
    def volume(self) -> float:
        return self.L**self.d

    @cached_property
    def k(self) -> np.ndarray:
        """Integer mode indices, shape (n_modes, d), lexicographic order."""
        axis = np.arange(-self.M // 2, self.M // 2)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def xi(self) -> np.ndarray:
        return self.spacing * self.k

    @cached_property
    def xi2(self) -> np.ndarray:
        """|xi|^2 per mode."""
        return np.sum(self.xi**2, axis=1)

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k**2, axis=1)

    # -- density / difference lattice -------------------------------------------------

    @property
    def diff_shape(self) -> tuple[int, ...]:
        """Shape of the lattice of mode differences, (2M-1)^d."""
        return (2 * self.M - 1,) * self.d

    @cached_property
    def diff_index(self) -> np.ndarray:
        """Flat index into the difference lattice of k_i - k_j, shape (n, n).

        Differences range over ``{-(M-1), ..., M-1}^d``; entry ``(i, j)`` labels the
        frequency ``xi_i - xi_j``.  Used both to extract densities and to assemble
        multiplication operators, so the two are exact adjoints.
        """
        D = 2 * self.M - 1
        off = self.k[:, None, :] - self.k[None, :, :] + (self.M - 1)
        idx = np.zeros(off.shape[:2], dtype=np.int64)
        for a in range(self.d):
            idx = idx * D + off[..., a]
        return idx

    @cached_property
    def diff_k(self) -> np.ndarray:
        """Integer vectors of the difference lattice, shape ((2M-1)^d, d)."""
        axis = np.arange(-(self.M - 1), self.M)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def diff_xi2(self) -> np.ndarray:
        return np.sum((self.spacing * self.diff_k) ** 2, axis=1)

    @property
    def fine_points(self) -> int:
        """Points per dimension of the spatial grid carrying densities (2M)."""
        return 2 * self.M

    @property
    def fine_cell(self) -> float:
        return (self.L / self.fine_points) ** self.d

    def mode_hash(self) -> str:
        """Short digest of (d, M, L) and the mode order; part of the export header."""
        h = hashlib.sha256()
        h.update(np.asarray([self.d, self.M], dtype=np.int64).tobytes())
        h.update(np.float64(self.L).tobytes())
        h.update(np.ascontiguousarray(self.k, dtype=np.int64).tobytes())
        return h.hexdigest()[:16]

    def as_dict(self) -> dict:
        return {"d": self.d, "M": self.M, "L": self.L, "mu": self.mu,
                "fermi_floor": self.fermi_floor}

    def with_modes(self, M: int) -> "GridSpec":
        return GridSpec(self.d, M, self.L, self.mu, self.fermi_floor)


def build_grid(d: int, M: int, L: float = 2 * np.pi, mu: float = 1.05,
               fermi_floor: float = 0.0) -> GridSpec:
    return GridSpec(int(d), int(M), float(L), float(mu), float(fermi_floor))


@dataclass(frozen=True)
class MultiplierMask:
    values: np.ndarray
    kind: Literal["projector", "weight"] = "weight"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        self.values.setflags(write=False)
        if self.kind == "projector" and not np.all((self.values == 0) | (self.values == 1)):
            raise ValueError("projector mask must take values in {0, 1}")

    def complement(self) -> "MultiplierMask":
        if self.kind != "projector":
            raise TypeError("complement is only defined for projector masks")
        return MultiplierMask(1.0 - self.values, "projector", f"1-{self.name}")

    def __mul__(self, other: "MultiplierMask") -> "MultiplierMask":
        kind = "projector" if self.kind == other.kind == "projector" else "weight"
        return MultiplierMask(self.values * other.values, kind)

    @property
    def selected(self) -> np.ndarray:
        return self.values != 0

    def __len__(self):
        return len(self.values)


def _projector(sel: np.ndarray, name: str) -> MultiplierMask:
    return MultiplierMask(sel.astype(float), "projector", name)


def fermi_projector(grid: GridSpec) -> MultiplierMask:
    """Occupied modes of the Fermi sea, |xi|^2 <= mu."""
    return _projector(grid.xi2 <= grid.mu, "fermi")


def band_projector(grid: GridSpec, r: float = 2.0) -> MultiplierMask:
    """Low-frequency band |xi| <= r (the complement is the high band)."""
    if not r > 0:
        raise ValueError("band radius must be positive")
    return _projector(grid.xi2 <= r * r, f"band{r:g}")


def pn_cutoff_mask(grid: GridSpec, n: float) -> MultiplierMask:
    """Modes with 1/n <= | |xi|^2 - mu | <= n."""
    if n < 1:
        raise ValueError("cutoff index n must be >= 1")
    gap = np.abs(grid.xi2 - grid.mu)
    return _projector((gap >= 1.0 / n) & (gap <= n), f"P{n:g}")


def surface_modes(grid: GridSpec) -> np.ndarray:
    """Boolean selector of modes lying exactly on the Fermi surface."""
    return np.isclose(grid.xi2, grid.mu, rtol=0, atol=1e-12 * max(1.0, grid.mu))


def sobolev_weight(grid: GridSpec, alpha: float) -> MultiplierMask:
    """<xi>^alpha = (1 + |xi|^2)^(alpha/2)."""
    return MultiplierMask((1.0 + grid.xi2) ** (alpha / 2), "weight", f"sob{alpha:g}")


def kinetic_weight(grid: GridSpec) -> MultiplierMask:
    """max(| |xi|^2 - mu |, floor)^(1/2); vanishes on the Fermi surface when floor=0."""
    gap = np.maximum(np.abs(grid.xi2 - grid.mu), grid.fermi_floor)
    return MultiplierMask(np.sqrt(gap), "weight", "kinetic")
