"""Congestion in the source zone: simulation versus analytic fixed point.

Sweeps the deployment probability and, for each load, runs a 1200-vehicle
simulation and solves the source-zone queueing model, printing the busy
fraction from both sides.  The two agree to a few percent across the whole
range; past lambda ~ 0.5 the zone saturates near (S - M) / S.
"""

import numpy as np

from airstream import RunConfig, simulate
from airstream.analytics import ZoneInputs, solve_zone
from airstream.config import simulation_scenario
from airstream.pgf import Pgf


def main():
    M = 2
    print(f"source-zone busy fraction, M={M}, S=11  (saturation level "
          f"{(11 - M) / 11:.4f})")
    print(f"{'lambda':>7} {'analytic':>9} {'simulated':>10} {'delta':>8}")
    for lam in np.arange(0.1, 1.01, 0.1):
        lam = round(float(lam), 1)
        analytic = solve_zone(ZoneInputs(
            stream=0, level=1, S=11, L=5, M=M, eta=0.5,
            a=Pgf.bernoulli(lam))).theta0_star
        cfg = RunConfig(M=M, lam=lam, max_uas=1200, seed=1)
        metrics = simulate(simulation_scenario(cfg))
        busy = metrics.zone_stats[(0, 1)]["busy_fraction"]
        print(f"{lam:7.1f} {analytic:9.4f} {busy:10.4f} "
              f"{abs(busy - analytic):8.4f}")


if __name__ == "__main__":
    main()
