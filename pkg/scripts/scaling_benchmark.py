"""Random admissible scaling problems: certificate statistics and the limit law.

Reports the distribution of the contraction constant d, Picard iteration
counts against Newton, how often a Newton root falls outside the literal
and the corrected a-priori boxes, and the linear decay of t(s) - t(0) as
the coupling is scaled down.
"""

import argparse
import time
from dataclasses import dataclass

import numpy as np

from hardy_ground_states import scaling_system as ss


@dataclass
class BenchConfig:
    instances: int = 200
    seed: int = 0
    starts: int = 16


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    cfg = BenchConfig(args.instances, args.seed)
    rng = np.random.default_rng(cfg.seed)
    ds, its, gaps = [], [], []
    outside = {"literal": 0, "corrected": 0}
    t0 = time.perf_counter()
    for i in range(cfg.instances):
        p = ss.random_admissible_problem(rng, int(rng.integers(2, 5)), int(rng.integers(3, 6)))
        sol = ss.solve_picard(p)
        roots = ss.solve_newton_oracle(p, cfg.starts, seed=i)
        ds.append(sol.contraction_ratio_d)
        its.append(sol.iterations)
        gaps.append(max(float(np.max(np.abs(r - sol.t))) for r in roots))
        for form in outside:
            T1, T2 = p.box(form)
            outside[form] += sum(bool(np.any(r > T2 * (1 + 1e-12))) for r in roots)
    dt = time.perf_counter() - t0
    print(f"{cfg.instances} instances in {dt:.2f} s")
    print(f"d: median {np.median(ds):.3f}, max {np.max(ds):.4f}")
    print(f"Picard iterations: median {int(np.median(its))}, max {max(its)}")
    print(f"max |Picard - Newton|: {max(gaps):.2e}")
    print(f"roots above the literal box: {outside['literal']}, corrected box: {outside['corrected']}")
    p = ss.random_admissible_problem(np.random.default_rng(cfg.seed + 1), 3, 4)
    print("limit law (s, max|t(s) - t(0)|, ratio to s):")
    for s, dev in ss.limit_law_table(p):
        print(f"  {s:.0e}  {dev:.3e}  {dev / s:.4f}")


if __name__ == "__main__":
    main()
