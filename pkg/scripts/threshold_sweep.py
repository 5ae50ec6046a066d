"""Sweep the two-component constants d1, d2, d3 and nu* over admissible alpha.

Writes CSV (N, alpha, beta, d1, d2, d3, d2_literal, nu_star, grid_d2, grid_d3).
"""

import argparse
import csv
import sys
from dataclasses import dataclass

import numpy as np

from hardy_ground_states.constraint_checker import alpha_range, grid_minimum, q2, q3, thresholds_d
from hardy_ground_states.extremals import critical_exponent


@dataclass
class SweepConfig:
    dims: tuple = (5, 6, 7, 8)
    points: int = 25
    margin: float = 0.01


def rows(cfg: SweepConfig):
    for N in cfg.dims:
        lo, hi = alpha_range(N)
        w = cfg.margin * (hi - lo)
        for a in np.linspace(lo + w, hi - w, cfg.points):
            b = critical_exponent(N) - a
            t = thresholds_d(a, b, N)
            yield (N, a, b, float(t.d1), float(t.d2), float(t.d3), float(t.d2_literal),
                   float(t.nu_star), grid_minimum(q2, a, b)[0], grid_minimum(q3, a, b)[0])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", default="5,6,7,8")
    ap.add_argument("--points", type=int, default=25)
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args(argv)
    cfg = SweepConfig(tuple(int(x) for x in args.dims.split(",")), args.points)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["N", "alpha", "beta", "d1", "d2", "d3", "d2_literal", "nu_star",
                "grid_d2", "grid_d3"])
    for row in rows(cfg):
        w.writerow([row[0]] + [f"{x:.12g}" for x in row[1:]])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
