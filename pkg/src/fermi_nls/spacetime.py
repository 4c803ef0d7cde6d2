"""Mixed space-time norms of kernel trajectories: the Strichartz proxy and the solution norm."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import eta_of
from .grid import GridSpec, band_projector, sobolev_weight
from .kernel import density_weight
from .reports import NormReport


@dataclass(frozen=True)
class AdmissiblePair:
    """Exponents with 2/q + d/r = d/2; ``math.inf`` stands for infinity."""

    q: float
    r: float
    d: int

    def __post_init__(self):
        q, r, d = float(self.q), float(self.r), self.d
        if q < 2 or r < 2:
            raise ValueError(f"need q, r >= 2, got ({q}, {r})")
        lhs = 2 / q + d / r
        if abs(lhs - d / 2) > 1e-12:
            raise ValueError(f"(q, r) = ({q}, {r}) is not admissible in d={d}: 2/q + d/r = {lhs}")
        if d == 2 and q == 2 and math.isinf(r):
            raise ValueError("(q, r) = (2, inf) is the forbidden endpoint in d=2")

    @property
    def label(self) -> str:
        return f"q={_fmt(self.q)},r={_fmt(self.r)}"


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6g}"


def pair_from_q(d: int, q: float) -> AdmissiblePair:
    inv = d / 2 - 2 / q
    r = math.inf if abs(inv) < 1e-14 else d / inv
    return AdmissiblePair(q, r, d)


def admissible_pairs(d: int, count: int = 4, near_endpoint: float = 0.2) -> list[AdmissiblePair]:
    """(inf, 2) plus ``count - 1`` pairs spaced evenly in 1/q down to the endpoint.

    The endpoint is q = 2 (d=3), q = 4 (d=1) and, since (2, inf) is excluded in d=2,
    q = 2 + near_endpoint there.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    q_min = {1: 4.0, 2: 2.0 + near_endpoint, 3: 2.0}[d]
    pairs = [AdmissiblePair(math.inf, 2.0, d)]
    for j in range(1, count):
        inv_q = (j / (count - 1)) / q_min
        pairs.append(pair_from_q(d, 1 / inv_q))
    return pairs


def _trapezoid_lq(values: np.ndarray, times: np.ndarray, q: float) -> float:
    if math.isinf(q) or len(times) < 2:
        return float(np.max(values, initial=0.0))
    return float(np.trapezoid(values**q, times) ** (1 / q))


def _lr(f: np.ndarray, r: float, cell: float) -> np.ndarray:
    """Spatial L^r norms of f(t, x), Riemann sum over the last axis."""
    if math.isinf(r):
        return f.max(axis=1, initial=0.0)
    return (np.sum(f**r, axis=1) * cell) ** (1 / r)


def leg_profiles(grid: GridSpec, mats: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """x -> ||K(t, x, .)||_{L^2} and x' -> ||K(t, ., x')||_{L^2} on the M^d grid.

    K is the position kernel of the matrix; rows index xi, columns xi'.
    """
    M, d, n = grid.M, grid.d, grid.n_modes
    shape = (M,) * d
    shift = tuple(range(1, d + 1))

    def profile(A: np.ndarray) -> np.ndarray:
        # g_{xi'}(x) = sum_xi A(xi, xi') e^{i xi x}; modes stored lexicographically from -M/2
        cols = np.ascontiguousarray(A.T).reshape((n,) + shape)
        cols = np.fft.ifftshift(cols, axes=shift)
        g = np.fft.ifftn(cols, axes=shift) * n
        return np.sqrt(np.sum(np.abs(g) ** 2, axis=0).ravel() / grid.volume)

    left = np.array([profile(A) for A in mats])
    right = np.array([profile(A.conj().T) for A in mats])
    return left, right


def strichartz_S_alpha_norm(traj, alpha: float, pairs: list[AdmissiblePair] | None = None,
                            left_mask: np.ndarray | None = None) -> NormReport:
    """Finite-pair proxy of the operator-kernel Strichartz norm.

    For each pair the value is the sum of the two mixed norms (x-leg and x'-leg);
    ``total`` is the maximum over the pairs.  ``left_mask`` optionally multiplies
    the kernel from the left (e.g. a high-frequency projector).
    """
    grid: GridSpec = traj.grid
    if pairs is None:
        pairs = admissible_pairs(grid.d)
    if not pairs:
        raise ValueError("need at least one admissible pair")
    for p in pairs:
        if p.d != grid.d:
            raise ValueError(f"pair {p.label} is for d={p.d}, trajectory has d={grid.d}")
    if not traj.is_uniform:
        raise ValueError("Strichartz quadrature needs uniformly sampled times")
    w = sobolev_weight(grid, alpha).values
    lw = w if left_mask is None else w * left_mask
    mats = [lw[:, None] * s.data * w[None, :] for s in traj.states]
    left, right = leg_profiles(grid, mats)
    cell = (grid.L / grid.M) ** grid.d
    entries = {}
    for p in pairs:
        a = _trapezoid_lq(_lr(left, p.r, cell), traj.times, p.q)
        b = _trapezoid_lq(_lr(right, p.r, cell), traj.times, p.q)
        entries[f"{p.label}:x"] = a
        entries[f"{p.label}:x'"] = b
        entries[p.label] = a + b
    entries["total"] = max(entries[p.label] for p in pairs)
    return NormReport(entries, grid=grid.as_dict(),
                      meta={"alpha": alpha, "pairs": [p.label for p in pairs],
                            "window": [float(traj.times[0]), float(traj.times[-1])]})


def y_alpha_norm(traj, alpha: float = 1.0, pairs: list[AdmissiblePair] | None = None,
                 band_radius: float = 2.0) -> NormReport:
    """Itemized solution-space norm of a trajectory of perturbations Q(t)."""
    if alpha < 1:
        raise ValueError("the solution norm is defined for alpha >= 1")
    grid: GridSpec = traj.grid
    eta = eta_of(grid.d, alpha)
    op = max((float(np.max(np.abs(np.linalg.eigvalsh(s.data)), initial=0.0)) if s.hermitian
              else float(np.linalg.norm(s.data, 2)) for s in traj.states), default=0.0)
    high = band_projector(grid, band_radius).complement().values
    s_alpha = strichartz_S_alpha_norm(traj, alpha, pairs, left_mask=high)
    wgt = density_weight(grid, alpha + 0.5 - eta)
    sob2 = np.array([grid.volume * np.sum(wgt**2 * np.abs(r.coefficients) ** 2) for r in traj.densities])
    l2 = np.sqrt(np.array([grid.volume * np.sum(np.abs(r.coefficients) ** 2) for r in traj.densities]))
    rho_l2h = float(np.sqrt(np.trapezoid(sob2, traj.times))) if len(traj) > 1 else 0.0
    rho_linf = float(l2.max(initial=0.0))
    e = {"op_sup": op, "high_strichartz": s_alpha.total, "rho_L2H": rho_l2h, "rho_LinfL2": rho_linf}
    e["total"] = sum(e.values())
    return NormReport(e, grid=grid.as_dict(),
                      meta={"alpha": alpha, "eta": eta, "pairs": s_alpha.meta["pairs"],
                            "band_radius": band_radius})
