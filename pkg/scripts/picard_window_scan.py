"""Picard iteration against an RK4 reference over window lengths and time resolutions.

    python3 scripts/picard_window_scan.py --windows 0.25 0.5 1.0 --samples 32 64 128
"""
import argparse
import time

from fermi_nls.dynamics import evolve_rk4, picard_solve
from fermi_nls.grid import build_grid
from fermi_nls.kernel import ensemble, schatten_norm
from fermi_nls.reports import write_csv


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--members", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--windows", type=float, nargs="+", default=[0.25, 0.5])
    p.add_argument("--samples", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--ref-dt", type=float, default=5e-4)
    p.add_argument("--out", default="picard_window_scan.csv")
    a = p.parse_args()
    g = build_grid(2, a.M)
    rows = []
    for w in a.windows:
        for i, Q0 in enumerate(ensemble(g, a.members, a.seed)):
            ref = evolve_rk4(Q0, w, a.ref_dt, record_every=10**9).final
            prev = None
            for n in a.samples:
                t0 = time.perf_counter()
                res = picard_solve(Q0, w, time_samples=n, raise_on_failure=False)
                dist = schatten_norm(res.trajectory.final - ref, 2)
                rows.append({"window": w, "member": i, "time_samples": n, "iterations": res.iterations,
                             "converged": res.converged, "contraction": res.contraction,
                             "distance_s2": dist, "reduction": prev / dist if prev else "",
                             "seconds": time.perf_counter() - t0})
                prev = dist
                print(rows[-1], flush=True)
    write_csv(a.out, rows)


if __name__ == "__main__":
    main()
