"""Compare the low-rank solver with the dense Kleinman-Newton oracle.

Prints one line per instance: size, relative feedback error, the largest
real part of the closed-loop pencil, Newton and ADI step counts.

    python3 scripts/oracle_sweep.py --family random_sparse --count 10
"""
import argparse
import time

import numpy as np

from dae2care import oracle
from dae2care.newton import SolverConfig, newton_solve
from dae2care.problems import ProblemSpec, generate, initial_feedback


def specs(family, count, mu):
    for i in range(count):
        if family == "stokes2d":
            nx = [4, 6, 8, 10, 12, 16][i % 6]
            yield ProblemSpec("stokes2d", nx=nx, ny=nx, mu=mu, convection=0.5 * (i % 2), seed=i)
        elif family == "random_sparse":
            n = [50, 100, 200, 400][i % 4]
            yield ProblemSpec("random_sparse", n_v=n, n_p=n // 5, mu=mu, seed=i, density=min(0.05, 5 / n))
        else:
            yield ProblemSpec("diagonal", n=i + 1, mu=mu, n_u=1 + i % 2, n_y=1 + i % 3, seed=i)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--family", choices=("stokes2d", "random_sparse", "diagonal"), default="stokes2d")
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    args = p.parse_args()

    cfg = SolverConfig(tol_newton=args.tol, exact_start=True)
    worst = 0.0
    for spec in specs(args.family, args.count, args.mu):
        system = generate(spec)
        t0 = time.perf_counter()
        K0 = initial_feedback(system)
        ref = oracle.oracle_feedback(system, K0)
        res = newton_solve(system, K0, cfg)
        err = np.linalg.norm(res.K - ref.K) / np.linalg.norm(ref.K)
        worst = max(worst, err)
        max_re = oracle.pencil_eigenvalues(system, res.K).real.max()
        t = res.totals
        print(f"n_v={system.n_v:4d} n_p={system.n_p:4d} seed={spec.seed:2d}  err={err:.1e}  "
              f"maxRe={max_re:+.3e}  KN={t['n_kn']:2d} ADI={t['n_adi']:4d}  {time.perf_counter() - t0:.2f}s")
    print(f"worst relative feedback error {worst:.1e}")


if __name__ == "__main__":
    main()
