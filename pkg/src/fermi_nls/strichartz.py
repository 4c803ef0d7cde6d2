"""Density Strichartz estimates on the torus: free and Duhamel ratios, the dual integral, optimality."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad_vec

from .dynamics import _phase
from .exponents import ExponentConfig, alpha1_of
from .grid import GridSpec
from .kernel import KernelOperator, density_coefficients, hs_sobolev_norm
from .reports import RatioReport, safe_ratio
from .spacetime import AdmissiblePair, leg_profiles, _lr, _trapezoid_lq


def recurrence_guard(grid: GridSpec) -> float:
    """Heuristic longest window L^2 / (4 pi) on which torus dispersion is meaningful."""
    return grid.L**2 / (4 * np.pi)


def _check_window(grid: GridSpec, window: float):
    if not window > 0:
        raise ValueError("window must be positive")
    if window > recurrence_guard(grid):
        warnings.warn(f"window {window:g} exceeds the recurrence guard {recurrence_guard(grid):.3g}",
                      stacklevel=3)


def density_weight_sq(grid: GridSpec, alpha1: float) -> np.ndarray:
    """|eta| <eta>^{2 alpha1}: squared symbol of <grad>^{alpha1} |grad|^{1/2}."""
    eta2 = grid.diff_xi2
    return np.sqrt(eta2) * (1.0 + eta2) ** alpha1


# ---------------------------------------------------------------------------------------
# homogeneous estimate


def free_density_lhs_sq(Q: KernelOperator, alpha1: float, window: float,
                        method: str = "exact", samples: int = 256, chunk: int = 256) -> float:
    """int_0^T || |grad|^{1/2} rho(t) ||_{H^alpha1}^2 dt for the free evolution of Q.

    ``exact`` uses that every frequency |xi|^2 - |xi'|^2 is an integer multiple of
    (2 pi / L)^2: per density mode the time integral is a finite sum of known
    oscillatory integrals.  ``trapezoid`` samples ``samples`` + 1 uniform times.
    """
    g = Q.grid
    wsq = density_weight_sq(g, alpha1)
    if method == "trapezoid":
        times = np.linspace(0.0, window, samples + 1)
        vals = [g.volume * np.sum(wsq * np.abs(density_coefficients(g, _phase(g, t) * Q.data)) ** 2)
                for t in times]
        return float(np.trapezoid(vals, times))
    if method != "exact":
        raise ValueError("method must be 'exact' or 'trapezoid'")
    c = g.spacing**2
    w = (g.k2[:, None] - g.k2[None, :]).ravel()
    wmax = int(g.d * (g.M // 2) ** 2)
    width = 2 * wmax + 1
    nfft = 1 << int(math.ceil(math.log2(2 * width)))
    eidx = g.diff_index.ravel()
    vals = Q.data.ravel() / g.volume
    keep = (np.abs(vals) > 0) & (wsq[eidx] > 0)
    eidx, w, vals = eidx[keep], w[keep], vals[keep]
    lags = np.fft.fftfreq(nfft, 1.0 / nfft).round().astype(int)
    with np.errstate(invalid="ignore", divide="ignore"):
        kern = np.where(lags == 0, window,
                        (1 - np.exp(-1j * c * lags * window)) / (1j * c * lags))
    total = 0.0
    modes = np.unique(eidx)
    for start in range(0, len(modes), chunk):
        block = modes[start:start + chunk]
        pos = np.searchsorted(block, eidx)
        sel = (pos < len(block)) & (block[np.minimum(pos, len(block) - 1)] == eidx)
        A = np.zeros((len(block), nfft), dtype=complex)
        np.add.at(A, (pos[sel], w[sel] + wmax), vals[sel])
        F = np.fft.fft(A, axis=1)
        R = np.fft.ifft(F * F.conj(), axis=1)
        integral = (R @ kern).real
        total += float(np.sum(wsq[block] * integral))
    return total * g.volume


def homogeneous_density_estimate(gamma0s, alpha: float, window: float = 1.0,
                                 method: str = "exact", samples: int = 256) -> RatioReport:
    """|| |grad|^{1/2} rho ||_{L^2_t H^alpha1} of the free flow against ||gamma0||_{H^alpha}."""
    gs = [gamma0s] if isinstance(gamma0s, KernelOperator) else list(gamma0s)
    if not gs:
        return RatioReport("homogeneous_density")
    exps = ExponentConfig.resolve(gs[0].grid.d, alpha)
    _check_window(gs[0].grid, window)
    rep = RatioReport("homogeneous_density", meta={**exps.as_dict(), "window": window, "method": method})
    for Q in gs:
        lhs = math.sqrt(max(free_density_lhs_sq(Q, exps.alpha1, window, method, samples), 0.0))
        rep.add(lhs, hs_sobolev_norm(Q, alpha), M=Q.grid.M)
    return rep


# ---------------------------------------------------------------------------------------
# inhomogeneous estimate


def duhamel_states(traj) -> list[np.ndarray]:
    """D(t_j) = int_0^{t_j} e^{i(t-s)Delta} R(s) e^{-i(t-s)Delta} ds by cumulative trapezoid."""
    g = traj.grid
    out = [np.zeros((g.n_modes,) * 2, dtype=complex)]
    acc = np.zeros_like(out[0])
    prev = _phase(g, -traj.times[0]) * traj.states[0].data
    for j in range(1, len(traj)):
        cur = _phase(g, -traj.times[j]) * traj.states[j].data
        acc = acc + 0.5 * (traj.times[j] - traj.times[j - 1]) * (prev + cur)
        out.append(_phase(g, traj.times[j]) * acc)
        prev = cur
    return out


def inhomogeneous_density_estimate(R_trajs, alpha: float, window: float | None = None) -> RatioReport:
    """Duhamel density norm against ||R||_{L^1_t H^alpha}, both by trapezoid on the samples."""
    trajs = list(R_trajs) if isinstance(R_trajs, (list, tuple)) else [R_trajs]
    rep = RatioReport("inhomogeneous_density")
    for tr in trajs:
        g = tr.grid
        exps = ExponentConfig.resolve(g.d, alpha)
        w = float(tr.times[-1] - tr.times[0]) if window is None else window
        _check_window(g, w)
        if not tr.is_uniform:
            raise ValueError("inhomogeneous estimate needs uniform samples")
        wsq = density_weight_sq(g, exps.alpha1)
        D = duhamel_states(tr)
        vals = [g.volume * np.sum(wsq * np.abs(density_coefficients(g, d)) ** 2) for d in D]
        lhs = math.sqrt(float(np.trapezoid(vals, tr.times)))
        rhs = float(np.trapezoid([hs_sobolev_norm(s, alpha) for s in tr.states], tr.times))
        rep.meta = {**exps.as_dict(), "window": w}
        rep.add(lhs, rhs, M=g.M)
    return rep


# ---------------------------------------------------------------------------------------
# operator-kernel Strichartz estimate


def kernel_strichartz_check(gamma0s, pair: AdmissiblePair, window: float = 1.0,
                            samples: int = 128, alpha: float = 0.0) -> RatioReport:
    """||<grad>^a e^{it(Delta_x - Delta_x')} gamma0 <grad>^a||_{L^q_t L^r_x L^2_x'} against ||gamma0||_{H^a}."""
    gs = [gamma0s] if isinstance(gamma0s, KernelOperator) else list(gamma0s)
    rep = RatioReport("kernel_strichartz", meta={"pair": pair.label, "window": window, "alpha": alpha})
    for Q in gs:
        g = Q.grid
        if pair.d != g.d:
            raise ValueError("pair dimension does not match the grid")
        _check_window(g, window)
        wt = (1.0 + g.xi2) ** (alpha / 2)
        A = wt[:, None] * Q.data * wt[None, :]
        times = np.linspace(0.0, window, samples + 1)
        left, _ = leg_profiles(g, [_phase(g, t) * A for t in times])
        lhs = _trapezoid_lq(_lr(left, pair.r, (g.L / g.M) ** g.d), times, pair.q)
        rep.add(lhs, hs_sobolev_norm(Q, alpha), M=g.M)
    return rep


# ---------------------------------------------------------------------------------------
# space-time fields and the dual integral


@dataclass
class SpaceTimeField:
    """V(t, x) sampled on [0, T_w) x box; the transform is the unitary space-time DFT.

    V~(tau, xi) = (2 pi)^{-(d+1)/2} sum_{t, x} V e^{-i(tau t + xi x)} dt dx^d on the
    lattice tau_j = 2 pi j / T_w, xi = (2 pi / L) k, so that
    sum |V~|^2 dtau dxi^d = sum |V|^2 dt dx^d exactly.
    """

    values: np.ndarray
    window: float
    L: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("space-time field must be finite")
        if not self.window > 0:
            raise ValueError("window must be positive")

    @property
    def d(self) -> int:
        return self.values.ndim - 1

    @property
    def dt(self) -> float:
        return self.window / self.values.shape[0]

    @property
    def dx(self) -> float:
        return self.L / self.values.shape[1]

    @property
    def dtau(self) -> float:
        return 2 * np.pi / self.window

    @property
    def dxi(self) -> float:
        return 2 * np.pi / self.L

    def tau_axis(self) -> np.ndarray:
        n = self.values.shape[0]
        return np.fft.fftshift(np.fft.fftfreq(n, self.dt)) * 2 * np.pi

    def k_axis(self) -> np.ndarray:
        m = self.values.shape[1]
        return np.fft.fftshift(np.fft.fftfreq(m, 1.0 / m)).round().astype(int)

    def spectrum(self) -> np.ndarray:
        """V~ on the (tau, xi) lattice, centred (fftshift) along every axis."""
        d = self.d
        # e^{-i tau t} and e^{-i xi x} are both forward DFT kernels
        s = np.fft.fftn(self.values) * self.dt * self.dx**d / (2 * np.pi) ** ((d + 1) / 2)
        return np.fft.fftshift(s)

    @classmethod
    def from_spectrum(cls, spec: np.ndarray, window: float, L: float, **meta) -> "SpaceTimeField":
        d = spec.ndim - 1
        nt, m = spec.shape[0], spec.shape[1]
        dt, dx = window / nt, L / m
        vals = np.fft.ifftn(np.fft.ifftshift(spec)) * (2 * np.pi) ** ((d + 1) / 2) / (dt * dx**d)
        return cls(vals, window, L, dict(meta))

    def l2_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dt * self.dx**self.d)


def smooth_spacetime_field(d: int, seed: int, n_time: int = 128, modes: int = 16, window: float = 20.0,
                           L: float = 2 * np.pi, bumps: int = 3, tau_width: float = 3.0,
                           xi_width: float = 1.0, tau_range: float = 8.0, xi_range: float = 3.0,
                           avoid_zero: bool = False) -> SpaceTimeField:
    """Random field whose spectrum is a sum of Gaussian bumps (smooth in tau on the lattice)."""
    rng = np.random.default_rng(seed)
    probe = SpaceTimeField(np.zeros((n_time,) + (modes,) * d), window, L)
    tau = probe.tau_axis()
    xi1 = probe.k_axis() * probe.dxi
    grids = np.meshgrid(tau, *([xi1] * d), indexing="ij")
    spec = np.zeros(grids[0].shape, dtype=complex)
    for _ in range(bumps):
        t0 = rng.uniform(-tau_range, tau_range)
        x0 = rng.uniform(-xi_range, xi_range, d)
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        r2 = sum((grids[a + 1] - x0[a]) ** 2 for a in range(d))
        spec += amp * np.exp(-0.5 * ((grids[0] - t0) / tau_width) ** 2 - 0.5 * r2 / xi_width**2)
    if avoid_zero:
        zero = tuple([slice(None)] + [modes // 2] * d)
        spec[zero] = 0.0
    return SpaceTimeField.from_spectrum(spec, window, L, seed=seed, kind="gaussian_bumps")


def _sphere_factor(d: int) -> float:
    """Surface measure of the unit sphere in R^{d-1} (2 points for d=2, the circle for d=3)."""
    return {2: 2.0, 3: 2 * np.pi}[d]


def inner_weight(d: int, alpha: float, alpha1: float, tau: np.ndarray, xi_abs: np.ndarray,
                 r_max: float = np.inf) -> np.ndarray:
    """J(tau, xi) = <xi>^{2 alpha1} / 2 int_{R^{d-1}} <(q1*, q')>^{-2a} <(q1* - |xi|, q')>^{-2a} dq'.

    Vectorised over matching arrays ``tau``, ``xi_abs`` (|xi| > 0); ``r_max`` truncates
    the radial integral (used for the divergence scan).
    """
    tau = np.asarray(tau, dtype=float)
    xi_abs = np.asarray(xi_abs, dtype=float)
    q1 = -(tau - xi_abs**2) / (2 * xi_abs)
    a2 = 1.0 + q1**2
    b2 = 1.0 + (q1 - xi_abs) ** 2
    pre = 0.5 * (1.0 + xi_abs**2) ** alpha1
    if d == 1:
        return pre * a2 ** (-alpha) * b2 ** (-alpha)
    flat_a, flat_b = a2.ravel(), b2.ravel()

    def f(r):
        return r ** (d - 2) * (flat_a + r * r) ** (-alpha) * (flat_b + r * r) ** (-alpha)

    if np.isinf(r_max):
        val, _ = quad_vec(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-10, limit=400)
    else:
        val, _ = quad_vec(f, 0.0, r_max, epsabs=1e-13, epsrel=1e-10, limit=400)
    return pre * _sphere_factor(d) * np.asarray(val).reshape(a2.shape)


@dataclass
class DualIntegralResult:
    way_a: float
    way_b: float
    norm_sq: float

    @property
    def discrepancy(self) -> float:
        m = max(abs(self.way_a), abs(self.way_b))
        return 0.0 if m == 0 else abs(self.way_a - self.way_b) / m


def _frequency_points(V: SpaceTimeField, spec: np.ndarray, tol: float):
    d = V.d
    k = V.k_axis()
    mesh = np.meshgrid(*([k] * d), indexing="ij")
    xi = np.stack([m.ravel() for m in mesh], axis=1) * V.dxi
    flat = spec.reshape(spec.shape[0], -1)
    amp = np.max(np.abs(flat), axis=0)
    keep = (amp > tol * max(amp.max(initial=0.0), 1e-300)) & (np.sum(xi**2, axis=1) > 0)
    return xi[keep], flat[:, keep]


def dual_integral_way_a(V: SpaceTimeField, alpha: float, alpha1: float, q1_points: int = 48,
                        q_box: float = 30.0, q_step: float | None = None, tol: float = 1e-14) -> float:
    """Direct quadrature over xi_1 for every lattice xi, with V~ linearly interpolated in tau.

    xi_1 is written in the frame (e1 = xi / |xi|, e2, ...); along e1 only the slab on
    which tau = -2 xi.xi_1 + |xi|^2 stays inside the tau lattice contributes.
    """
    d = V.d
    spec = V.spectrum()
    tau = V.tau_axis()
    xi, cols = _frequency_points(V, spec, tol)
    if q_step is None:
        q_step = {1: 1.0, 2: 0.05, 3: 0.25}[d]
    qp = np.arange(-q_box, q_box + q_step / 2, q_step)
    total = 0.0
    for x, col in zip(xi, cols.T):
        s = float(np.sqrt(np.sum(x**2)))
        lo, hi = tau[0], tau[-1]
        # tau = -2 s q1 + s^2 on the slab
        q1 = np.linspace(-(hi - s * s) / (2 * s), -(lo - s * s) / (2 * s), q1_points)
        h1 = q1[1] - q1[0]
        tq = -2 * s * q1 + s * s
        vr = np.interp(tq, tau, col.real, left=0.0, right=0.0)
        vi = np.interp(tq, tau, col.imag, left=0.0, right=0.0)
        v2 = vr**2 + vi**2
        w1 = np.full(q1_points, h1)
        w1[[0, -1]] *= 0.5
        pre = (1.0 + s * s) ** alpha1 * s
        if d == 1:
            wt = (1 + q1**2) ** (-alpha) * (1 + (q1 - s) ** 2) ** (-alpha)
            total += pre * float(np.sum(w1 * v2 * wt))
            continue
        mesh = np.meshgrid(*([qp] * (d - 1)), indexing="ij")
        r2 = sum(m**2 for m in mesh).ravel()
        wq = np.full(len(qp), q_step)
        wq[[0, -1]] *= 0.5
        wq = np.prod(np.meshgrid(*([wq] * (d - 1)), indexing="ij"), axis=0).ravel()
        wt = ((1 + q1[:, None] ** 2 + r2[None, :]) ** (-alpha)
              * (1 + (q1[:, None] - s) ** 2 + r2[None, :]) ** (-alpha))
        total += pre * float(np.sum((w1 * v2)[:, None] * wt * wq[None, :]))
    return total * V.dxi**d


def dual_integral_way_b(V: SpaceTimeField, alpha: float, alpha1: float, tol: float = 1e-14) -> float:
    """Change-of-variables form: sum over the (tau, xi) lattice of J(tau, xi) |V~|^2."""
    spec = V.spectrum()
    tau = V.tau_axis()
    xi, cols = _frequency_points(V, spec, tol)
    if len(xi) == 0:
        return 0.0
    s = np.sqrt(np.sum(xi**2, axis=1))
    T, S = np.meshgrid(tau, s, indexing="ij")
    J = inner_weight(V.d, alpha, alpha1, T, S)
    return float(np.sum(J * np.abs(cols) ** 2) * V.dtau * V.dxi**V.d)


def dual_integral_I(V: SpaceTimeField, alpha: float, alpha1: float | None = None,
                    **kw) -> DualIntegralResult:
    """The squared dual-side integral, computed directly (A) and after the change of variables (B)."""
    if alpha1 is None:
        alpha1, _ = alpha1_of(V.d, alpha)
    a = dual_integral_way_a(V, alpha, alpha1, **kw)
    b = dual_integral_way_b(V, alpha, alpha1)
    return DualIntegralResult(a, b, V.l2_norm_sq())


# ---------------------------------------------------------------------------------------
# optimality


@dataclass
class FitReport:
    variant: str
    x: list[float]
    y: list[float]
    slope: float
    intercept: float
    r_squared: float
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [{"x": x, "y": y, **{k: v[i] for k, v in self.extra.items() if isinstance(v, list)}}
                for i, (x, y) in enumerate(zip(self.x, self.y))]


def _log_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    lx = np.log(x)
    a, b = np.polyfit(lx, y, 1)
    pred = a * lx + b
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(a), float(b), 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def endpoint_family_integral(n: float, d: int = 2, xi_step: float = 0.1,
                             tau_nodes: int = 24) -> tuple[float, float]:
    """I_n and ||V_n||^2 for V~_n = 1[|tau - |xi|^2| <= 1] 1[|xi - n e1| <= 1] at alpha = alpha1 = (d-1)/2.

    The xi-ball is sampled on a lattice of spacing ``xi_step``; the tau window is
    integrated with Gauss-Legendre nodes.
    """
    a = (d - 1) / 2
    ax = np.arange(-1.0, 1.0 + xi_step / 2, xi_step)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    off = np.stack([m.ravel() for m in mesh], axis=1)
    off = off[np.sum(off**2, axis=1) <= 1.0 + 1e-12]
    pts = off.copy()
    pts[:, 0] += n
    s = np.sqrt(np.sum(pts**2, axis=1))
    nodes, weights = np.polynomial.legendre.leggauss(tau_nodes)
    T = s[:, None] ** 2 + nodes[None, :]
    S = np.broadcast_to(s[:, None], T.shape)
    J = inner_weight(d, a, a, T, S)
    cell = xi_step**d
    I_n = float(np.sum(J * weights[None, :]) * cell)
    norm_sq = float(2.0 * len(pts) * cell)
    return I_n, norm_sq


def optimality_scan(n_values: Sequence[float], variant: str = "endpoint", d: int = 2,
                    radii: Sequence[float] | None = None, xi_step: float = 0.1) -> FitReport:
    """Growth of the dual integral along the optimality families.

    ``endpoint``: I_n for the indicator family and a fit I_n = a ln n + b.
    ``distribution``: at alpha = (d-1)/4 the inner q'-integral truncated at radius R
    for R in ``radii`` (default n_values), fitted against ln R.
    """
    if d < 2:
        raise ValueError("optimality statements are for d >= 2")
    xs = np.asarray(list(n_values) if radii is None or variant == "endpoint" else list(radii), dtype=float)
    if len(xs) < 3 or np.any(np.diff(xs) <= 0):
        raise ValueError("need at least three increasing values")
    if variant == "endpoint":
        vals, norms = zip(*(endpoint_family_integral(n, d, xi_step) for n in xs))
        a, b, r2 = _log_fit(xs, np.array(vals))
        return FitReport("endpoint", xs.tolist(), list(vals), a, b, r2,
                         {"norm_sq": list(norms), "d": d, "alpha": (d - 1) / 2})
    if variant == "distribution":
        alpha = (d - 1) / 4
        vals = [float(inner_weight(d, alpha, 0.0, np.array([1.0]), np.array([1.0]), r_max=R)[0]) for R in xs]
        a, b, r2 = _log_fit(xs, np.array(vals))
        return FitReport("distribution", xs.tolist(), vals, a, b, r2, {"d": d, "alpha": alpha})
    raise ValueError("variant must be 'endpoint' or 'distribution'")
