"""Reduced quadrature against brute-force 2D Monte-Carlo on the toy system.

omega = k^2, unit vertex, n = exp(-k) on [1e-4, 10] (zero outside).

    python3 scripts/toy_oracle.py [--samples 4194304] [--seed 0]
"""

import argparse

import numpy as np

from wavemoments.core import IsotropicSpectrum, geometric_grid, power_law_system
from wavemoments.rates import mc_rate_oracle, rate_components


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2**22)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    system = power_law_system(2.0)
    grid = geometric_grid(1e-4, 10.0, 200)
    spec = IsotropicSpectrum(grid, np.exp(-grid), extrapolation="zero")
    print(f"{'k':>5} {'eta quad':>13} {'eta MC':>13} {'z':>6} {'gamma quad':>13} {'gamma MC':>13} {'z':>6}")
    for k in (0.3, 1.0, 3.0):
        rc = rate_components(system, spec, k)
        mc = mc_rate_oracle(system, spec, k, samples=args.samples, seed=args.seed)
        print(f"{k:5.1f} {rc.eta:13.6e} {mc.eta:13.6e} {(mc.eta - rc.eta) / mc.eta_stderr:6.2f} "
              f"{rc.gamma:13.6e} {mc.gamma:13.6e} {(mc.gamma - rc.gamma) / mc.gamma_stderr:6.2f}")


if __name__ == "__main__":
    main()
