"""Batch entry point: ``fermi-nls <subcommand> [--config FILE] [--set key=value ...]``.

Every run writes its tables as CSV plus a ``manifest.json`` holding the resolved
configuration, its hash and a digest of each artifact.  ``--from-manifest`` re-runs
a manifest; with ``--verify`` the new artifacts are compared byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import traceback
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .approx import approximation_convergence
from .config import SUBCOMMANDS, ConfigError, RunConfig
from .dynamics import SolverError, evolve_rk4, picard_solve
from .energy import (commutator_lemma_scan, conservation_report, kinetic_density_check,
                     lieb_thirring_check, sobolev_check)
from .exponents import ExponentConfig
from .grid import build_grid
from .io import write_json
from .kernel import DEFAULT_SIZES, GENERATOR_KINDS, KernelOperator, ensemble, fermi_sea, schatten_norm
from .orbitals import evolve_orbitals, orbitals_to_kernel, sea_with_particles
from .reports import write_csv
from .spacetime import admissible_pairs
from .strichartz import (dual_integral_I, homogeneous_density_estimate, inhomogeneous_density_estimate,
                         kernel_strichartz_check, optimality_scan, smooth_spacetime_field)

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_OTHER = 1


class Run:
    """Artifact sink for one subcommand invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output)
        self.out.mkdir(parents=True, exist_ok=True)
        self.hash = cfg.config_hash()
        self.artifacts: dict[str, str] = {}
        self.summary: dict = {}

    def table(self, name: str, rows: list[dict], columns: list[str] | None = None) -> None:
        if columns is None:
            columns = []
            for r in rows:
                columns.extend(c for c in r if c not in columns)
        path = self.out / f"{name}.csv"
        write_csv(path, rows, columns, comment=f"config_hash={self.hash}")
        self.artifacts[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def manifest(self, status: str = "ok", error: dict | None = None) -> dict:
        m = {"subcommand": self.cfg.scenario, "config": self.cfg.as_dict(), "config_hash": self.hash,
             "artifacts": self.artifacts, "summary": self.summary, "status": status,
             "version": __version__}
        if error:
            m["error"] = error
        write_json(self.out / "manifest.json", m)
        return m


# ---------------------------------------------------------------------------------------
# helpers


def _grid(cfg: RunConfig, M: int | None = None):
    return build_grid(cfg.d, M or cfg.M, cfg.L, cfg.mu)


def _ensemble(cfg: RunConfig, grid=None) -> list[KernelOperator]:
    grid = grid or _grid(cfg)
    kinds = GENERATOR_KINDS if cfg.kind == "mixed" else (cfg.kind,)
    sizes = dict(DEFAULT_SIZES) if cfg.amplitude < 0 else {k: cfg.amplitude for k in kinds}
    return ensemble(grid, cfg.ensemble_size, cfg.seed, kinds, sizes)


def _kind(cfg: RunConfig, i: int) -> str:
    kinds = GENERATOR_KINDS if cfg.kind == "mixed" else (cfg.kind,)
    return kinds[i % len(kinds)]


def _ratio_rows(rep) -> list[dict]:
    return [dict(r) for r in rep.rows]


# ---------------------------------------------------------------------------------------
# pipelines


def cmd_evolve(run: Run) -> None:
    cfg = run.cfg
    rows = []
    for i, Q0 in enumerate(_ensemble(cfg)):
        tr = evolve_rk4(Q0, cfg.T, cfg.dt, record_every=cfg.record_every)
        rep = conservation_report(tr) if cfg.d in (2, 3) else None
        rows.append({"member": i, "kind": _kind(cfg, i), "trace_0": float(tr.series["trace"][0]),
                     "trace_drift": float(np.max(np.abs(tr.series["trace"] - tr.series["trace"][0]))),
                     "energy_0": float(tr.series["energy"][0]),
                     "energy_drift": float(np.max(np.abs(tr.series["energy"] - tr.series["energy"][0]))),
                     "spectral_drift": rep.spectral_drift if rep else float("nan"),
                     "op_T": schatten_norm(tr.final, math.inf)})
        step = tr.series
        stride = cfg.record_every
        run.table(f"series_{i:03d}", [{"time": float(step["time"][j]), "trace": float(step["trace"][j]),
                                        "energy": float(step["energy"][j])}
                                       for j in range(0, len(step["time"]), stride)])
    run.table("summary", rows, ["member", "kind", "trace_0", "trace_drift", "energy_0", "energy_drift",
                                "spectral_drift", "op_T"])
    run.summary = {"members": len(rows),
                   "max_energy_drift": max((r["energy_drift"] for r in rows), default=0.0)}


def cmd_energy_conservation(run: Run) -> None:
    cfg = run.cfg
    rows = []
    for i, Q0 in enumerate(_ensemble(cfg)):
        drifts = []
        for dt in (cfg.dt, cfg.dt / 2):
            tr = evolve_rk4(Q0, cfg.T, dt, record_every=max(1, int(round(cfg.T / dt))))
            drifts.append(conservation_report(tr))
        a, b = drifts
        ratio = a.max_relative_drift / b.max_relative_drift if b.max_relative_drift > 0 else math.inf
        rows.append({"member": i, "kind": _kind(cfg, i), "drift_dt": a.max_relative_drift,
                     "drift_half_dt": b.max_relative_drift, "halving_ratio": ratio,
                     "trace_drift": a.trace_drift, "spectral_drift": a.spectral_drift})
    run.table("conservation", rows)
    run.summary = {"max_drift": max((r["drift_dt"] for r in rows), default=0.0),
                   "min_halving_ratio": min((r["halving_ratio"] for r in rows), default=math.inf)}


def cmd_picard(run: Run) -> None:
    cfg = run.cfg
    rows = []
    for i, Q0 in enumerate(_ensemble(cfg)):
        res = picard_solve(Q0, cfg.T, time_samples=cfg.time_samples, max_iters=cfg.max_iters,
                           tol=cfg.tol, raise_on_failure=False)
        ref = evolve_rk4(Q0, cfg.T, cfg.dt, record_every=int(round(cfg.T / cfg.dt)))
        rows.append({"member": i, "kind": _kind(cfg, i), "iterations": res.iterations,
                     "converged": res.converged, "contraction": res.contraction,
                     "last_increment": res.increments[-1] if res.increments else 0.0,
                     "distance_rk4": schatten_norm(res.trajectory.final - ref.final, 2)})
    run.table("picard", rows)
    run.summary = {"converged": sum(r["converged"] for r in rows), "members": len(rows)}


def cmd_orbitals(run: Run) -> None:
    cfg = run.cfg
    g = _grid(cfg)
    orb = sea_with_particles(g, cfg.particles, cfg.seed)
    otr = evolve_orbitals(orb, cfg.T, cfg.dt, record_every=cfg.record_every)
    Q0 = orbitals_to_kernel(orb) - fermi_sea(g)
    ktr = evolve_rk4(Q0, cfg.T, cfg.dt, record_every=cfg.record_every)
    sea = fermi_sea(g)
    rows = [{"time": float(t), "gram_drift": float(gd),
             "distance_s2": schatten_norm(orbitals_to_kernel(o) - sea - q, 2)}
            for t, gd, o, q in zip(otr.times, otr.gram_drift, otr.states, ktr.states)]
    run.table("orbitals", rows, ["time", "gram_drift", "distance_s2"])
    run.summary = {"N": orb.N, "terminal_distance": rows[-1]["distance_s2"],
                   "max_gram_drift": max(r["gram_drift"] for r in rows)}


def cmd_strichartz_homogeneous(run: Run) -> None:
    cfg = run.cfg
    rep = homogeneous_density_estimate(_ensemble(cfg), cfg.alpha, cfg.window)
    run.table("homogeneous", _ratio_rows(rep))
    run.summary = {**rep.summary(), **rep.meta}


def cmd_strichartz_inhomogeneous(run: Run) -> None:
    from .dynamics import Trajectory, free_conjugate
    cfg = run.cfg
    g = _grid(cfg)
    times = np.linspace(0.0, cfg.window, cfg.time_samples + 1)
    trajs = [Trajectory(g, times, [free_conjugate(R, t) * math.cos(t) for t in times])
             for R in _ensemble(cfg, g)]
    rep = inhomogeneous_density_estimate(trajs, cfg.alpha, cfg.window)
    run.table("inhomogeneous", _ratio_rows(rep))
    run.summary = {**rep.summary(), **rep.meta}


def cmd_strichartz_kernel(run: Run) -> None:
    cfg = run.cfg
    ens = _ensemble(cfg)
    rows = []
    for p in admissible_pairs(cfg.d, cfg.pair_count):
        rep = kernel_strichartz_check(ens, p, cfg.window, cfg.time_samples, alpha=0.0)
        rows.extend({"pair": p.label, **r} for r in rep.rows)
    run.table("kernel_strichartz", rows)
    run.summary = {"max_ratio": max((r["ratio"] for r in rows), default=0.0)}


def cmd_dual_integral(run: Run) -> None:
    cfg = run.cfg
    exps = ExponentConfig.resolve(cfg.d, cfg.alpha)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.ensemble_size, dtype=np.uint32)
    rows = []
    for i, s in enumerate(seeds):
        V = smooth_spacetime_field(cfg.d, int(s), modes=min(cfg.M, 16 if cfg.d < 3 else 8))
        r = dual_integral_I(V, exps.alpha, exps.alpha1)
        rows.append({"member": i, "way_a": r.way_a, "way_b": r.way_b, "discrepancy": r.discrepancy,
                     "norm_sq": r.norm_sq})
    run.table("dual_integral", rows, ["member", "way_a", "way_b", "discrepancy", "norm_sq"])
    run.summary = {**exps.as_dict(), "max_discrepancy": max((r["discrepancy"] for r in rows), default=0.0)}


def cmd_optimality(run: Run) -> None:
    cfg = run.cfg
    fit = optimality_scan(cfg.n_values, "endpoint", d=cfg.d)
    run.table("optimality_endpoint", [{"n": n, "I_n": y, "norm_sq": v}
                                      for n, y, v in zip(fit.x, fit.y, fit.extra["norm_sq"])])
    radii = [10.0 * 2**j for j in range(5)]
    div = optimality_scan(radii, "distribution", d=cfg.d)
    run.table("optimality_distribution", [{"radius": r, "inner_integral": y} for r, y in zip(div.x, div.y)])
    run.table("optimality_fit", [{"variant": f.variant, "slope": f.slope, "intercept": f.intercept,
                                  "r_squared": f.r_squared} for f in (fit, div)])
    run.summary = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}


def cmd_lieb_thirring(run: Run) -> None:
    ens = _ensemble(run.cfg)
    lt = lieb_thirring_check(ens)
    kd = kinetic_density_check(ens)
    run.table("lieb_thirring", _ratio_rows(lt))
    run.table("kinetic_density", _ratio_rows(kd))
    run.summary = {"lt_min": lt.min, "kinetic_density_max": kd.max}


def cmd_sobolev(run: Run) -> None:
    rep = sobolev_check(_ensemble(run.cfg), run.cfg.alpha)
    run.table("sobolev", _ratio_rows(rep))
    run.summary = rep.summary()


def cmd_approx_lemma(run: Run) -> None:
    cfg = run.cfg
    rows, flags = [], {}
    for i, Q in enumerate(_ensemble(cfg)):
        t = approximation_convergence(Q, cfg.n_values)
        rows.extend({"member": i, **r} for r in t.rows())
        for k, v in t.flags().items():
            flags[k] = flags.get(k, True) and v
    run.table("approx_lemma", rows)
    run.summary = flags


def cmd_lemma_ratios(run: Run) -> None:
    cfg = run.cfg
    rep = commutator_lemma_scan(_ensemble(cfg), cfg.lemma, cfg.alpha, cfg.window,
                                samples=min(cfg.time_samples, 32))
    run.table(f"lemma_{cfg.lemma}", _ratio_rows(rep))
    run.summary = rep.summary()


def cmd_exponent_table(run: Run) -> None:
    cfg = run.cfg
    rows = []
    for a in cfg.alphas or [cfg.alpha]:
        rows.append(ExponentConfig.resolve(cfg.d, a).as_dict())
    run.table("exponents", rows, ["d", "alpha", "alpha1", "eta", "regime"])
    run.summary = {"rows": len(rows)}


PIPELINES: dict[str, Callable[[Run], None]] = {
    "evolve": cmd_evolve, "picard": cmd_picard, "orbitals": cmd_orbitals,
    "energy-conservation": cmd_energy_conservation,
    "strichartz-homogeneous": cmd_strichartz_homogeneous,
    "strichartz-inhomogeneous": cmd_strichartz_inhomogeneous,
    "strichartz-kernel": cmd_strichartz_kernel, "dual-integral": cmd_dual_integral,
    "optimality": cmd_optimality, "lieb-thirring": cmd_lieb_thirring, "sobolev": cmd_sobolev,
    "approx-lemma": cmd_approx_lemma, "lemma-ratios": cmd_lemma_ratios,
    "exponent-table": cmd_exponent_table,
}
assert set(PIPELINES) == set(SUBCOMMANDS)


# ---------------------------------------------------------------------------------------
# entry


def run(subcommand: str, cfg: RunConfig) -> tuple[int, dict]:
    """Validate, execute and record; returns (exit status, manifest or error record)."""
    cfg.scenario = subcommand
    try:
        cfg.validate()
    except ConfigError as exc:
        return EXIT_CONFIG, {"status": "error", "kind": "config", "errors": exc.errors,
                             "subcommand": subcommand}
    r = Run(cfg)
    try:
        PIPELINES[subcommand](r)
    except SolverError as exc:
        err = {"kind": "solver", "message": str(exc), "info": exc.info}
        r.manifest("error", err)
        return EXIT_SOLVER, {"status": "error", **err, "subcommand": subcommand}
    except Exception as exc:  # noqa: BLE001 - reported as a record, not a traceback
        err = {"kind": type(exc).__name__, "message": str(exc),
               "traceback": traceback.format_exc(limit=5)}
        r.manifest("error", err)
        return EXIT_OTHER, {"status": "error", **err, "subcommand": subcommand}
    return 0, r.manifest()


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fermi-nls", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--output", help="artifact directory (overrides the config)")
    p.add_argument("--from-manifest", help="re-run the configuration stored in a manifest.json")
    p.add_argument("--verify", action="store_true",
                   help="with --from-manifest: compare the new artifact digests to the stored ones")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    stored = None
    try:
        if args.from_manifest:
            stored = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
            cfg = RunConfig.from_dict(stored["config"])
            sub = args.subcommand or stored["subcommand"]
        else:
            if not args.subcommand:
                raise ConfigError(["a subcommand is required unless --from-manifest is given"])
            cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
            sub = args.subcommand
        pairs = {}
        bad = []
        for item in args.set:
            if "=" not in item:
                bad.append(f"--set expects KEY=VALUE, got {item!r}")
                continue
            k, v = item.split("=", 1)
            pairs[k.strip()] = v
        if bad:
            raise ConfigError(bad)
        cfg = RunConfig.from_pairs(pairs, cfg)
        if args.output:
            cfg.output = args.output
    except ConfigError as exc:
        print(json.dumps({"status": "error", "kind": "config", "errors": exc.errors}), file=sys.stderr)
        return EXIT_CONFIG
    status, record = run(sub, cfg)
    if status:
        print(json.dumps(record, default=str), file=sys.stderr)
        return status
    if stored is not None and args.verify:
        mismatched = sorted(k for k, v in stored.get("artifacts", {}).items()
                            if record["artifacts"].get(k) != v)
        if mismatched:
            print(json.dumps({"status": "error", "kind": "reproduction", "mismatched": mismatched}),
                  file=sys.stderr)
            return EXIT_OTHER
    print(json.dumps({"status": "ok", "output": cfg.output, "config_hash": record["config_hash"],
                      "summary": record["summary"]}, default=str, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
