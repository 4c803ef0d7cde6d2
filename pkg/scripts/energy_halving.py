"""Relative-energy drift of RK4 for a ladder of time steps, with wall-clock cost.

    python3 scripts/energy_halving.py --members 3 --dts 2e-3 1e-3 5e-4
"""
import argparse
import time

from fermi_nls.dynamics import evolve_rk4
from fermi_nls.energy import conservation_report
from fermi_nls.grid import build_grid
from fermi_nls.kernel import ensemble
from fermi_nls.reports import write_csv


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--members", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dts", type=float, nargs="+", default=[2e-3, 1e-3, 5e-4])
    p.add_argument("--out", default="energy_halving.csv")
    a = p.parse_args()
    g = build_grid(2, a.M)
    rows = []
    for i, Q0 in enumerate(ensemble(g, a.members, a.seed)):
        prev = None
        for dt in a.dts:
            t0 = time.perf_counter()
            tr = evolve_rk4(Q0, a.T, dt, record_every=max(1, int(round(a.T / dt / 10))))
            rep = conservation_report(tr)
            row = {"member": i, "dt": dt, "energy_drift": rep.max_relative_drift,
                   "trace_drift": rep.trace_drift, "spectral_drift": rep.spectral_drift,
                   "ratio_to_previous": prev / rep.max_relative_drift if prev else "",
                   "seconds": time.perf_counter() - t0}
            prev = rep.max_relative_drift
            rows.append(row)
            print(row, flush=True)
    write_csv(a.out, rows)


if __name__ == "__main__":
    main()
