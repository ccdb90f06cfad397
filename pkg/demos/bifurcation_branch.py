"""Order-parameter branch of the homogeneous equilibria.

Sweeps the alignment strength mu through the critical value mu = d for
d = 2 and d = 3, solves the consistency relation L = mu c(L), and compares
the branch with its square-root asymptotic sqrt((d+2)(mu-d)) near onset.
Prints the branch table and writes it to out/branch_d{2,3}.csv.
"""

from pathlib import Path

import numpy as np

from vicsekbgk.equilibria import asymptotic_L, equilibrium_branch

OUT = Path(__file__).resolve().parent / "out"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for d in (2, 3):
        mu = np.concatenate([np.linspace(0.5 * d, d, 6),
                             d + np.geomspace(1e-3, 1.5, 12)])
        branch = equilibrium_branch(mu, d)
        asym = np.array([asymptotic_L(m, d) for m in mu])
        print(f"\nd = {d}: L = mu c(L) branch (threshold mu = {d})")
        print(f"{'mu':>10} {'L':>12} {'sqrt asym':>12} {'residual':>10}")
        for m, L, a, r in zip(mu, branch.L, asym, branch.residual):
            print(f"{m:10.4f} {L:12.8f} {a:12.8f} {r:10.1e}")
        path = OUT / f"branch_d{d}.csv"
        np.savetxt(path, np.column_stack([mu, branch.L, asym, branch.residual]),
                   delimiter=",", header="mu,L,asymptotic,residual", comments="")
        print(f"wrote {path}")
        near = np.abs(mu - d) < 0.2
        gap = np.max(np.abs(branch.L[near] - asym[near]))
        print(f"max |L - asymptotic| within 0.2 of threshold: {gap:.2e}")


if __name__ == "__main__":
    main()
