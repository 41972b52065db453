"""Fluctuation growth from a deterministic start on the capillary ZF spectrum.

Writes xi2.csv (k, t, xi^2/n^2 integrated and closed form) and prints the
saturation-time scaling for both damping-rate sources.

    python3 scripts/fluctuation_growth.py [--out fluctuation_growth]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from wavemoments.core import PhysicalParams
from wavemoments.validation import fluctuation_experiment, saturation_times


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="fluctuation_growth")
    ap.add_argument("--nodes", type=int, default=9)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = PhysicalParams()
    for source in ("reference", "computed"):
        grid, times, xi2, theory, n = fluctuation_experiment(params, args.nodes, gamma_source=source)
        ts = saturation_times(grid, times, xi2, n)
        slope = np.polyfit(np.log(grid), np.log(ts), 1)[0]
        err = np.max(np.abs(xi2[1:] / theory[1:] - 1))
        print(f"{source:>9} rates: saturation time ~ k^{slope:.4f}, "
              f"max |xi2/closed form - 1| = {err:.1e}, t_sat(k=1) = {ts[0]:.4f}")
        with open(out / f"xi2_{source}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t", "xi2_over_n2", "closed_form_over_n2"])
            for ti, t in enumerate(times):
                for i, k in enumerate(grid):
                    w.writerow([k, t, xi2[ti, i] / n[i] ** 2, theory[ti, i] / n[i] ** 2])
    print(f"wrote {out}/xi2_reference.csv and {out}/xi2_computed.csv")


if __name__ == "__main__":
    main()
