"""Propagation of a deviation bump towards large p, for several starting orders.

    python3 scripts/transport_wave.py [--P 1024]
"""

import argparse

import numpy as np

from wavemoments.moments import DeviationTrajectory, log_gaussian_bump, transport_wave_diagnostic


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--P", type=int, default=1024)
    ap.add_argument("--width", type=float, default=0.5)
    args = ap.parse_args()
    thetas = np.linspace(0.0, 1.0, 21)
    print(f"{'p0':>5} {'speed':>7} {'width var':>10} {'peak loss/theta':>16} "
          f"{'F(p0) decay':>12} {'p_max(theta=1)':>15}")
    for p0 in (8, 16, 32, 64, 128):
        traj = DeviationTrajectory.exact(log_gaussian_bump(args.P, p0, args.width), thetas)
        rep = transport_wave_diagnostic(traj, fixed_p=p0)
        flag = "  (truncated)" if rep.truncated else ""
        print(f"{p0:5d} {rep.speed:7.4f} {rep.width_variation:10.4f} "
              f"{rep.amplitude_decay_per_unit_theta:16.4f} {rep.fixed_p_decay_rate:12.4f} "
              f"{rep.position_p[-1]:15.2f}{flag}")


if __name__ == "__main__":
    main()
