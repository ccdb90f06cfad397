"""Linearized decay rates: spectral prediction vs time-stepped measurement.

Below the alignment threshold the linearized dynamics is hypocoercive: the
perturbation L2 norm decays at the rate given by the rightmost dispersion
root.  For several subcritical mu this demo predicts the rate from the
root search, then integrates the linearized PDE from a random smooth
perturbation and fits the observed slope.  Writes the diagnostics of each
run to out/linear_decay_mu*.csv.
"""

from pathlib import Path

from vicsekbgk.linstab import spectral_abscissa
from vicsekbgk.solver import (InitSpec, SolverConfig, fit_decay_rate, run,
                              write_diagnostics_csv)

GAMMA = 10.0
OUT = Path(__file__).resolve().parent / "out"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    print(f"{'mu':>6} {'predicted':>10} {'fitted':>10} {'rel err':>9} "
          f"{'r^2':>8}")
    for mu in (1.2, 1.5, 1.8):
        pred = spectral_abscissa(mu, GAMMA)
        cfg = SolverConfig(mu=mu, mode="linearized", gamma=GAMMA, nx=16,
                           ntheta=32, dt=0.01, t_end=20.0, snapshot_every=10,
                           seed=11,
                           init=InitSpec(recipe="random-smooth", amplitude=1.0))
        res = run(cfg)
        rate, r2 = fit_decay_rate(res.series, 8.0, 20.0, column="l2")
        path = OUT / f"linear_decay_mu{mu:.1f}.csv"
        write_diagnostics_csv(path, res.series)
        print(f"{mu:6.2f} {pred:10.6f} {rate:10.6f} "
              f"{abs(rate - pred) / pred:9.2%} {r2:8.5f}")
    print("\nfitted slopes track the rightmost dispersion root; the gap "
          "shrinks\nwith a longer fit window as subdominant modes die out")


if __name__ == "__main__":
    main()
