"""Nonlinear relaxation to the ordered equilibrium manifold.

Above threshold a small perturbation of an aligned state relaxes back to
the von Mises family: the distance to the manifold decays exponentially
while the mass is conserved to round-off, and the limiting flux stays
within a perturbation-sized neighbourhood of the projected initial flux.
Writes the diagnostics to out/nonlinear_relaxation.csv.
"""

import math
from pathlib import Path

import numpy as np

from vicsekbgk.equilibria import project_to_manifold, solve_L
from vicsekbgk.solver import (InitSpec, SolverConfig, fit_decay_rate, run,
                              write_diagnostics_csv)

MU = 2.2
AMPLITUDE = 1e-2
OUT = Path(__file__).resolve().parent / "out"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    cfg = SolverConfig(mu=MU, nx=16, ntheta=64, dt=0.01, t_end=20.0,
                       snapshot_every=100, seed=5,
                       init=InitSpec(recipe="random-smooth",
                                     amplitude=AMPLITUDE))
    res = run(cfg)
    s = res.series
    print(f"mu = {MU}, L_mu = {solve_L(MU, 2):.6f}, perturbation "
          f"amplitude {AMPLITUDE}")
    print(f"{'t':>6} {'dist':>10} {'|Jbar|':>10} {'mass drift':>11}")
    for i in range(0, len(s.t), 4):
        jmag = math.hypot(s.jbar_x[i], s.jbar_y[i])
        print(f"{s.t[i]:6.1f} {s.dist[i]:10.3e} {jmag:10.6f} "
              f"{abs(s.mass[i] - s.mass[0]) / s.mass[0]:11.1e}")
    rate, r2 = fit_decay_rate(s, 3.0, 20.0, column="dist")
    J1 = project_to_manifold(MU, np.array([s.jbar_x[0], s.jbar_y[0]]))
    Jinf = np.array([s.jbar_x[-1], s.jbar_y[-1]])
    print(f"\nfitted dist decay rate {rate:.4f} (r^2 = {r2:.5f})")
    print(f"|J_projected(0) - Jbar(t_end)| = {np.linalg.norm(J1 - Jinf):.2e} "
          f"(perturbation-sized bound: {5 * AMPLITUDE})")
    path = OUT / "nonlinear_relaxation.csv"
    write_diagnostics_csv(path, s)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
