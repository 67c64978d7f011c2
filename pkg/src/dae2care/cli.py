"""Command-line driver: ``solve``, ``generate``, ``verify``, ``bench``.

Exit codes: 0 success, 1 any error, 2 not stabilizing. Errors are reported
on stderr as one JSON object ``{"error": ..., "message": ...}``.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from .errors import Dae2CareError, NotStabilizing
from .matrix_market import read_matrix_market, write_matrix_market
from .model import DaeSystem

EXIT_OK, EXIT_ERROR, EXIT_NOT_STABILIZING = 0, 1, 2
MATRICES = ("M", "A", "G", "B", "C")


def _add_config_flags(p):
    p.add_argument("--config", help="key = value configuration file")
    for key in cfgmod.KEYS:
        p.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE")


def _run_config(args):
    layers = []
    if args.config:
        layers.append(cfgmod.load_config_file(args.config))
    layers.append({k: getattr(args, k) for k in cfgmod.KEYS if getattr(args, k, None) is not None})
    return cfgmod.build_run_config(*layers)


def _relative_to(base, path):
    if path is None or os.path.isabs(path) or base is None:
        return path
    return os.path.join(os.path.dirname(os.path.abspath(base)), path)


def load_system(run: cfgmod.RunConfig, base=None) -> DaeSystem:
    run.require_inputs()
    mats = {}
    for name in MATRICES:
        path = _relative_to(base, getattr(run, name))
        mats[name] = read_matrix_market(path) if path else None
    B, C = mats["B"], mats["C"]
    B = B.toarray() if hasattr(B, "toarray") else B
    C = C.toarray() if hasattr(C, "toarray") else C
    return DaeSystem(M=mats["M"], A=mats["A"], G=mats["G"], B=B, C=C, alpha=run.alpha)


def _dense(x):
    return x.toarray() if hasattr(x, "toarray") else np.asarray(x)


def cmd_solve(args):
    from .model import validate
    from .newton import newton_solve

    run = _run_config(args)
    system = load_system(run, args.config)
    validate(system).raise_if_failed()
    if run.K0:
        K0 = _dense(read_matrix_market(_relative_to(args.config, run.K0)))
    else:
        K0 = None
    solver = run.solver
    if run.out_Z:
        solver = solver.replace(keep_solution=True)
    res = newton_solve(system, K0, solver)
    write_matrix_market(run.out_K, res.K)
    if run.out_Z and res.Z is not None:
        write_matrix_market(run.out_Z, res.Z)
    if run.log:
        res.log.write(run.log)
    summary = {"status": "converged", "rel_residual": res.rel_residual, **res.log.totals(),
               "timers": res.timers.as_dict(), "K": run.out_K}
    print(json.dumps(summary))
    return EXIT_OK


def _spec_from_args(args):
    from .problems import ProblemSpec

    defaults = {f.name: f.default for f in dataclasses.fields(ProblemSpec)}
    kw = {}
    for k, v in vars(args).items():
        if k in defaults and v is not None:
            d = defaults[k]
            kw[k] = type(d)(v) if isinstance(d, (int, float)) and isinstance(v, str) else v
    return ProblemSpec(**kw)


def cmd_generate(args):
    from .problems import generate, initial_feedback

    spec = _spec_from_args(args)
    system = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    comment = " ".join(f"{k}={v}" for k, v in spec.as_dict().items())
    for name in MATRICES:
        mat = getattr(system, name)
        write_matrix_market(os.path.join(args.out, f"{name}.mtx"), mat, comment)
    lines = [f"{name} = {name}.mtx" for name in MATRICES] + [f"alpha = {system.alpha!r}"]
    if args.with_k0:
        K0 = initial_feedback(system)
        write_matrix_market(os.path.join(args.out, "K0.mtx"), K0, comment)
        lines.append("K0 = K0.mtx")
    with open(os.path.join(args.out, "problem.cfg"), "w") as fh:
        fh.write(f"# {comment}\n" + "\n".join(lines) + "\n")
    print(json.dumps({"status": "ok", "out": args.out, "n_v": system.n_v, "n_p": system.n_p,
                      "n_u": system.n_u, "n_y": system.n_y}))
    return EXIT_OK


def verify_feedback(system, K):
    """Stability certificate plus the Riccati residual of the closed-loop Gramian."""
    from . import oracle

    lam = oracle.pencil_eigenvalues(system, K)
    max_re = float(lam.real.max()) if lam.size else float("-inf")
    report = {"max_real_eigenvalue": max_re, "n_finite": int(lam.size), "stabilizing": bool(max_re < 0)}
    if max_re < 0:
        proj = oracle.build_theta(system)
        Kp = proj.theta_r.T @ K
        X = oracle.dense_lyapunov(proj.A - proj.B @ Kp.T, proj.M, proj.C.T @ proj.C + Kp @ Kp.T)
        R = oracle.projected_riccati_residual(proj, X)
        scale = np.linalg.norm(proj.C.T @ proj.C, "fro")
        report["rel_riccati_residual"] = float(np.linalg.norm(R, "fro") / scale) if scale else float("nan")
    return report


def cmd_verify(args):
    run = _run_config(args)
    system = load_system(run, args.config)
    K = _dense(read_matrix_market(args.K)).reshape(system.n_v, system.n_u)
    report = verify_feedback(system, K)
    print(json.dumps(report))
    return EXIT_OK if report["stabilizing"] else EXIT_NOT_STABILIZING


def cmd_bench(args):
    from .bench import SETUPS, bench_csv, run_bench
    from .problems import generate, initial_feedback

    spec = _spec_from_args(args)
    system = generate(spec)
    K0 = initial_feedback(system)
    base = _run_config(args).solver
    setups = args.setups.split(",") if args.setups else SETUPS
    rows = run_bench(system, K0, setups, base)
    text = bench_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_ERROR


def _add_spec_flags(p, skip=()):
    p.add_argument("--family", default="stokes2d")
    for name, typ in (("nx", int), ("ny", int), ("viscosity", float), ("convection", float), ("n_v", int),
                      ("n_p", int), ("density", float), ("n", int), ("mu", float), ("n_u", int), ("n_y", int),
                      ("seed", int)):
        if name in skip:
            continue
        p.add_argument(f"--{name}", type=typ, default=None)


def build_parser():
    p = argparse.ArgumentParser(prog="dae2care", description="Riccati feedback for index-2 descriptor systems")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="compute the feedback K")
    _add_config_flags(s)
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("generate", help="export a test problem as Matrix Market files")
    _add_spec_flags(g)
    g.add_argument("--alpha", type=float, default=None)
    g.add_argument("--out", required=True)
    g.add_argument("--with-k0", action="store_true", help="also write a stabilizing initial feedback")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", help="check a feedback for stabilization (desk scale)")
    _add_config_flags(v)
    v.add_argument("--K", required=True, help="feedback matrix file")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run the solver-variant ablation on a generated problem")
    # --seed and --alpha are shared between the problem and the solver
    _add_spec_flags(b, skip=cfgmod.KEYS)
    _add_config_flags(b)
    b.add_argument("--setups", default=None, help="comma-separated subset of i,ii,iii,iv,v")
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NotStabilizing as exc:
        _report(exc)
        return EXIT_NOT_STABILIZING
    except (Dae2CareError, OSError, ValueError) as exc:
        _report(exc)
        return EXIT_ERROR


def _report(exc):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
