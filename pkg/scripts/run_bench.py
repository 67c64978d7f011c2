"""Solver-variant ablation (setups i to v) on a generated problem.

    python3 scripts/run_bench.py --nx 8 --ny 8 --convection 1 --out bench.csv
"""
import argparse
import logging

from dae2care.bench import SETUPS, bench_csv, run_bench
from dae2care.newton import SolverConfig
from dae2care.problems import ProblemSpec, generate, initial_feedback


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--family", default="stokes2d")
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--ny", type=int, default=8)
    p.add_argument("--convection", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--n-v", type=int, default=100)
    p.add_argument("--n-p", type=int, default=20)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--setups", default=",".join(SETUPS))
    p.add_argument("--out", default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    spec = ProblemSpec(args.family, nx=args.nx, ny=args.ny, convection=args.convection, mu=args.mu,
                       n_v=args.n_v, n_p=args.n_p, alpha=args.alpha, seed=args.seed)
    system = generate(spec)
    K0 = initial_feedback(system)
    rows = run_bench(system, K0, args.setups.split(","), SolverConfig(tol_newton=args.tol, exact_start=True))
    text = bench_csv(rows)
    print(f"# {spec.family} n_v={system.n_v} n_p={system.n_p} {spec.stability} alpha={spec.alpha:g}")
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
