"""Grid convergence of the minimized energy level.

Runs the radial minimizer on the explicit gamma configuration (exact level
known) and on a two-component pair with distinct Hardy coefficients, over
a sequence of grids, and reports errors, observed order and the Richardson
extrapolation.
"""

import argparse
import math
from dataclasses import dataclass

import numpy as np

from hardy_ground_states.coupled_ground_states import GammaSpec, solve_gamma_system
from hardy_ground_states.grid import RadialGrid
from hardy_ground_states.nehari import CouplingSpec, existence_energy_bound
from hardy_ground_states.radial_solver import minimize_theta


@dataclass
class LevelConfig:
    sizes: tuple = (129, 257, 513, 1025)
    r_min: float = 1e-4
    r_max: float = 1e4
    init: str = "random"


def sweep(spec, cfg: LevelConfig):
    vals = []
    for M in cfg.sizes:
        rep = minimize_theta(spec, RadialGrid(spec.N, cfg.r_min, cfg.r_max, M), cfg.init)
        vals.append((M, rep.theta_estimate, rep.iterations, rep.stop_reason))
    return vals


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--init", default="random")
    args = ap.parse_args(argv)
    cfg = LevelConfig(init=args.init)
    gamma = GammaSpec(0.5, np.array([[1.0, 2, 2], [2, 1, 2], [2, 2, 1]]))
    exact = solve_gamma_system(gamma).energy
    print(f"gamma configuration, exact level {exact:.12f}")
    prev = None
    for M, th, it, conv in sweep(gamma.coupling_spec(), cfg):
        err = th - exact
        order = "" if prev is None else f" order {math.log2(abs(prev / err)):.2f}"
        print(f"  M={M:5d} theta={th:.12f} err={err:+.3e} its={it} stop={conv}{order}")
        prev = err
    pair = CouplingSpec.uniform(4, [0.5, 0.6], 1.0)
    vals = sweep(pair, cfg)
    print(f"pair lambda=(0.5, 0.6), beta=1, bound {existence_energy_bound(pair):.12f}")
    for (M, th, it, conv), nxt in zip(vals, vals[1:] + [None]):
        extra = "" if nxt is None else f" richardson {(4 * nxt[1] - th) / 3:.12f}"
        print(f"  M={M:5d} theta={th:.12f} its={it} stop={conv}{extra}")


if __name__ == "__main__":
    main()
