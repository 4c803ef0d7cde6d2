"""How often the truncation distances grow with n, plus a 2x2 example where the operator norm does.

    python3 scripts/approx_monotonicity.py --members 30
"""
import argparse

import numpy as np

from fermi_nls.approx import DISTANCE_COLUMNS, approximation_convergence
from fermi_nls.grid import build_grid
from fermi_nls.kernel import ensemble


def two_by_two():
    A = np.array([[-0.5, 0.5], [0.5, 1.0]])
    keep_none = A
    P = np.diag([1.0, 0.0])
    keep_first = A - P @ A @ P
    print("|A - PAP| with P = 0        :", np.linalg.norm(keep_none, 2))
    print("|A - PAP| with P = e0 e0^T  :", np.linalg.norm(keep_first, 2), "(larger projector, larger distance)")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--members", type=int, default=30)
    p.add_argument("--seed", type=int, default=42)
    a = p.parse_args()
    two_by_two()
    ns = [2.0**j for j in range(9)]
    counts = dict.fromkeys(DISTANCE_COLUMNS, 0)
    worst = dict.fromkeys(DISTANCE_COLUMNS, 0.0)
    for Q in ensemble(build_grid(2, a.M), a.members, a.seed):
        t = approximation_convergence(Q, ns)
        for c in DISTANCE_COLUMNS:
            v = t.violations(c)
            counts[c] += bool(v)
            worst[c] = max([worst[c]] + [inc for _, inc in v])
    for c in DISTANCE_COLUMNS:
        print(f"{c:15s} non-monotone in {counts[c]:3d}/{a.members}   largest increase {worst[c]:.3e}")


if __name__ == "__main__":
    main()
