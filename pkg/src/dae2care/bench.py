"""Ablation over solver variants, from the naive baseline to the full method.

=====  ===========================================================
setup  configuration
=====  ===========================================================
i      complex-arithmetic ADI, heuristic shifts, fixed inner tolerance,
       dense explicit residuals
ii     as i, real-arithmetic pair updates
iii    as ii, low-rank residual norms
iv     as iii, adaptive shifts
v      as iv, forcing-term inner tolerance and Armijo line search
=====  ===========================================================

Setups ii and iii differ only in how the residual norms are evaluated, so
their Newton and ADI step counts must agree.
"""
from __future__ import annotations

import csv
import io
import time

import numpy as np

from .newton import SolverConfig, newton_solve

SETUPS = ("i", "ii", "iii", "iv", "v")
COLUMNS = (
    "setup", "n_kn", "n_adi", "n_lin_solve", "n_ls",
    "time_lin_solve", "time_shift", "time_proj_res", "time_total",
    "rel_residual", "status",
)


def setup_config(setup: str, base: SolverConfig | None = None) -> SolverConfig:
    base = base if base is not None else SolverConfig()
    common = dict(shift_strategy="heuristic", inner_tol_mode="fixed", line_search="none", adi_arithmetic="real",
                  residual_mode="lowrank")
    if setup == "i":
        return base.replace(**{**common, "adi_arithmetic": "complex", "residual_mode": "explicit"})
    if setup == "ii":
        return base.replace(**{**common, "residual_mode": "explicit"})
    if setup == "iii":
        return base.replace(**common)
    if setup == "iv":
        return base.replace(**{**common, "shift_strategy": "adaptive"})
    if setup == "v":
        return base.replace(shift_strategy="adaptive", inner_tol_mode="forcing",
                            line_search="armijo" if base.line_search == "none" else base.line_search,
                            adi_arithmetic="real", residual_mode="lowrank")
    raise ValueError(f"unknown setup {setup!r}; expected one of {SETUPS}")


def run_setup(system, K0, setup, base: SolverConfig | None = None):
    return newton_solve(system, K0, setup_config(setup, base))


def run_bench(system, K0, setups=SETUPS, base: SolverConfig | None = None):
    """One row per setup; failures are recorded in ``status`` rather than raised."""
    rows = []
    for s in setups:
        t0 = time.perf_counter()
        try:
            res = run_setup(system, K0, s, base)
        except Exception as exc:  # recorded per row; the table is still useful
            rows.append({"setup": s, "status": f"{type(exc).__name__}: {exc}",
                         "time_total": time.perf_counter() - t0, "result": None})
            continue
        tot = res.log.totals()
        rows.append({
            "setup": s,
            "n_kn": tot["n_kn"],
            "n_adi": tot["n_adi"],
            "n_lin_solve": tot["n_lin_solve"],
            "n_ls": tot["n_ls"],
            "time_lin_solve": res.timers.lin_solve,
            "time_shift": res.timers.shift,
            "time_proj_res": res.timers.proj_res,
            "time_total": res.timers.total,
            "rel_residual": res.rel_residual,
            "status": "ok",
            "result": res,
        })
    return rows


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in COLUMNS])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return "nan" if not np.isfinite(v) else f"{v:.6g}"
    return v
