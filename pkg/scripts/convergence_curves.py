"""Relative Riccati residual per Newton step, with and without line search.

Reproduces the qualitative effect of a large output weight: the plain
inexact Newton step overshoots by orders of magnitude, the Armijo step
keeps every iterate below the previous one.

    python3 scripts/convergence_curves.py --alpha 1e4 --csv curves.csv
"""
import argparse
import csv

from dae2care.newton import SolverConfig, newton_solve
from dae2care.problems import ProblemSpec, generate, initial_feedback


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=1e4)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--csv", default=None)
    args = p.parse_args()

    system = generate(ProblemSpec("stokes2d", nx=args.nx, ny=args.nx, mu=args.mu, alpha=args.alpha))
    K0 = initial_feedback(system)
    curves = {}
    for rule in ("none", "armijo", "polymin"):
        res = newton_solve(system, K0, SolverConfig(line_search=rule, tol_newton=args.tol, max_newton=60))
        curves[rule] = (res.log.residuals, [1.0] + [r.xi_k for r in res.log.rows])
        print(f"{rule:8s} steps={len(res.log):3d} ADI={res.totals['n_adi']:4d}  "
              + " ".join(f"{x:.1e}" for x in res.log.residuals))

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rule", "k", "rel_residual", "xi"])
            for rule, (res, xis) in curves.items():
                for k, (r, xi) in enumerate(zip(res, xis)):
                    w.writerow([rule, k, repr(r), repr(xi)])


if __name__ == "__main__":
    main()
