"""Inexact low-rank Kleinman-Newton-ADI with line search.

The Riccati residual of the current iterate is carried as a signed factor
``U D U^T`` with ``U = [W_bar | dK]``; the iterate ``X`` itself is never
formed (the factor ``Z`` with ``X = Z Z^T`` is kept only on request).
Each Newton step runs ADI on the closed-loop Lyapunov equation with right
hand side ``Pi [alpha C^T, K]`` until its residual drops below the inner
tolerance, then picks a step size from the quartic residual polynomial.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .adi import AdiOperator, InnerTolerance, run_adi
from .convergence_log import ConvergenceLog, LogRow
from .errors import EmptyStableSet, MaxIterations, NoAdmissibleStep, NonConvergent, NotStabilizing
from .kernels import ShiftCache
from .lowrank import (
    LowRankFactor,
    SignedResidualFactor,
    build_line_search_poly,
    combine_after_step,
    concat_solution,
)
from .projector import ProjectorContext
from .shifts import adaptive_shifts, heuristic_shifts

log = logging.getLogger(__name__)

FORCING_RULES = ("quadratic", "constant")
LINE_SEARCH_RULES = ("armijo", "polymin", "none")
SHIFT_STRATEGIES = ("heuristic", "adaptive")
INNER_TOL_MODES = ("forcing", "fixed")
RESIDUAL_MODES = ("lowrank", "explicit")
ADI_ARITHMETIC = ("real", "complex")


@dataclass(frozen=True)
class SolverConfig:
    """Outer and inner iteration parameters.

    ``beta`` must satisfy ``beta < 1 - eta_bar`` so that a sufficiently
    small step always passes the decrease test. ``inner_tol_mode="fixed"``
    replaces the forcing rule by ``fixed_inner_tol`` relative to the initial
    Lyapunov residual. ``residual_mode="explicit"`` checks all residuals
    with dense matrices (desk scale only; forces ``keep_solution``).
    """

    tol_newton: float = 1e-8
    eta_bar: float = 0.1
    beta: float = 0.1
    forcing: str = "quadratic"
    line_search: str = "armijo"
    max_backtracks: int = 20
    shift_strategy: str = "heuristic"
    exact_start: bool = False
    exact_start_tol: float = 1e-2
    exact_start_switch: float = 0.5
    max_newton: int = 50
    inner_tol_mode: str = "forcing"
    fixed_inner_tol: float = 1e-10
    adi_max_steps: int = 300
    growth_cap: float = 1e6
    newton_norm: str = "frobenius"
    adi_norm: str = "spectral"
    adi_arithmetic: str = "real"
    residual_mode: str = "lowrank"
    keep_solution: bool = False
    compress: bool = False
    k_plus: int = 20
    k_minus: int = 10
    n_shifts: int = 10
    r_max: int = 15
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eta_bar < 1:
            raise ValueError(f"eta_bar must lie in (0, 1), got {self.eta_bar}")
        if not 0 < self.beta < 1 - self.eta_bar:
            raise ValueError(f"beta must lie in (0, 1 - eta_bar) = (0, {1 - self.eta_bar}), got {self.beta}")
        if self.tol_newton <= 0:
            raise ValueError("tol_newton must be positive")
        for name, allowed in (
            ("forcing", FORCING_RULES),
            ("line_search", LINE_SEARCH_RULES),
            ("shift_strategy", SHIFT_STRATEGIES),
            ("inner_tol_mode", INNER_TOL_MODES),
            ("residual_mode", RESIDUAL_MODES),
            ("adi_arithmetic", ADI_ARITHMETIC),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        for name in ("newton_norm", "adi_norm"):
            if getattr(self, name) not in ("frobenius", "spectral"):
                raise ValueError(f"{name} must be 'frobenius' or 'spectral'")
        if self.max_newton < 0 or self.adi_max_steps < 1 or self.max_backtracks < 0:
            raise ValueError("iteration limits must be nonnegative")

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class Timers:
    lin_solve: float = 0.0
    shift: float = 0.0
    proj_res: float = 0.0
    total: float = 0.0

    def as_dict(self):
        return {"lin_solve": self.lin_solve, "shift": self.shift, "proj_res": self.proj_res, "total": self.total}


@dataclass
class NewtonState:
    k: int
    K: np.ndarray
    residual: SignedResidualFactor
    residual_norm: float
    initial_norm: float
    Z: Optional[LowRankFactor] = None
    log: ConvergenceLog = field(default_factory=ConvergenceLog)

    @property
    def W_bar(self):
        return self.residual.positive

    @property
    def dK(self):
        return self.residual.negative

    @property
    def rel_residual(self):
        if self.initial_norm == 0:
            return 0.0
        return self.residual_norm / self.initial_norm


@dataclass
class NewtonResult:
    K: np.ndarray
    Z: Optional[np.ndarray]
    log: ConvergenceLog
    residual: SignedResidualFactor
    rel_residual: float
    timers: Timers
    converged: bool = True
    aborts: int = 0
    shift_sets: list = field(default_factory=list)

    @property
    def totals(self):
        return self.log.totals()


def newton_init(system, K0=None, ctx: ProjectorContext | None = None, norm: str = "frobenius") -> NewtonState:
    """``U0 = [Pi [alpha C^T, K0] | 0]`` and its norm as the relative-error denominator."""
    ctx = ctx if ctx is not None else ProjectorContext(system)
    K = np.zeros((system.n_v, system.n_u)) if K0 is None else np.array(K0, dtype=float).reshape(system.n_v, system.n_u)
    W0 = ctx.apply_pi(np.hstack([system.scaled_output().T, K]))
    R = SignedResidualFactor.from_parts(W0, np.zeros((system.n_v, 0)))
    nrm = R.norm(norm)
    return NewtonState(k=0, K=K, residual=R, residual_norm=nrm, initial_norm=nrm)


def forcing_parameter(config: SolverConfig, rel_residual: float) -> float:
    if config.forcing == "constant":
        return config.eta_bar
    return min(config.eta_bar, 0.9 * rel_residual)


def exact_start_controller(config: SolverConfig, k: int, rel_residual: float, residual_norm: float = 1.0,
                           switched: bool = False) -> InnerTolerance:
    """Inner ADI tolerance for Newton step ``k``.

    With ``exact_start`` the first two steps use ``exact_start_tol`` relative
    to the initial Lyapunov residual, unless the relative Riccati residual has
    already dropped below ``exact_start_switch`` (``switched``). Otherwise the
    forcing rule gives ``eta_k * ||R||``.
    """
    if config.inner_tol_mode == "fixed":
        return InnerTolerance(config.fixed_inner_tol, relative=True)
    if config.exact_start and k < 2 and not switched and rel_residual >= config.exact_start_switch:
        return InnerTolerance(config.exact_start_tol, relative=True)
    return InnerTolerance(forcing_parameter(config, rel_residual) * residual_norm)


def line_search(poly, beta: float, rule: str = "armijo", max_backtracks: int = 20) -> float:
    """Step size with ``sqrt(phi(xi)) <= (1 - xi beta) sqrt(phi(0))``.

    ``armijo`` tries ``1, 1/2, ..., 2^-max_backtracks``; ``polymin`` takes the
    minimizer of ``phi`` on ``(0, 1]`` and falls back to Armijo if that point
    fails the test. ``none`` returns 1.
    """
    if rule == "none":
        return 1.0
    root0 = np.sqrt(max(poly.phi0, 0.0))

    def ok(xi):
        return np.sqrt(poly(xi)) <= (1 - xi * beta) * root0

    if rule == "polymin":
        cand = [1.0] + [float(r) for r in poly.derivative_roots() if 0 < r < 1]
        xi = min(cand, key=lambda x: float(poly(x)))
        if ok(xi):
            return xi
    elif rule != "armijo":
        raise ValueError(f"unknown line-search rule {rule!r}")
    for j in range(max_backtracks + 1):
        xi = 0.5**j
        if ok(xi):
            return xi
    raise NoAdmissibleStep(
        f"no step in {{1, ..., 2^-{max_backtracks}}} satisfies the decrease test "
        f"(phi(0)={poly.phi0:.3e}, phi(2^-{max_backtracks})={float(poly(0.5 ** max_backtracks)):.3e})"
    )


class _DenseChecker:
    """Explicit residuals for the baseline setups (dense, desk scale)."""

    def __init__(self, system):
        from .oracle import dense_pi

        self.system = system
        self.Pi = dense_pi(system)

    def lyapunov(self, K, state, kind):
        from .oracle import dense_lyapunov_residual

        Z = state.Z
        X = np.real(Z @ Z.conj().T)
        L = dense_lyapunov_residual(self.system, K, X, Pi=self.Pi)
        return _dense_norm(L, kind)

    def riccati(self, Z, kind):
        from .oracle import dense_riccati_residual

        X = Z @ Z.T
        return _dense_norm(dense_riccati_residual(self.system, X, Pi=self.Pi), kind)


def _dense_norm(X, kind):
    if kind == "frobenius":
        return float(np.linalg.norm(X, "fro"))
    return float(np.linalg.norm(X, 2))


def _shift_provider(system, K, ctx, config, W0):
    """Initial shift set and the refresh callback for this Newton step."""

    def heuristic():
        return heuristic_shifts(system, K, ctx, config.k_plus, config.k_minus, config.n_shifts, config.seed)

    if config.shift_strategy == "heuristic":
        return heuristic(), None

    def adaptive(blocks):
        try:
            return adaptive_shifts(blocks, system, K, ctx, config.r_max)
        except EmptyStableSet as exc:
            log.info("adaptive shifts unavailable (%s); using heuristic shifts", exc)
            return heuristic()

    def refresh(pending):
        if not pending:
            return heuristic()
        return adaptive(np.hstack(pending))

    return adaptive(W0), refresh


def newton_solve(system, K0=None, config: SolverConfig | None = None, *, ctx: ProjectorContext | None = None,
                 callback: Optional[Callable] = None) -> NewtonResult:
    """Feedback ``K`` of the stabilizing projected Riccati solution.

    ``K0`` must be stabilizing (zero for a stable system). Raises
    :class:`MaxIterations` (with the partial result attached) when
    ``max_newton`` steps do not reach ``tol_newton`` and
    :class:`NotStabilizing` when the ADI divergence guard fires twice in a
    row or the truncated step admits no decrease.
    """
    config = config if config is not None else SolverConfig()
    t_start = time.perf_counter()
    timers = Timers()
    ctx = ctx if ctx is not None else ProjectorContext(system)
    explicit = config.residual_mode == "explicit"
    keep = config.keep_solution or explicit
    checker = _DenseChecker(system) if explicit else None

    state = newton_init(system, K0, ctx, config.newton_norm)
    if keep:
        state.Z = LowRankFactor.empty(system.n_v)
    norm0 = state.initial_norm
    state.log.initial_residual = 1.0
    C_scaled = system.scaled_output()
    shift_sets = []
    aborts = 0
    last_aborted = False
    switched = False

    def result(converged):
        timers.total = time.perf_counter() - t_start
        return NewtonResult(
            K=state.K,
            Z=state.Z.Z if state.Z is not None else None,
            log=state.log,
            residual=state.residual,
            rel_residual=state.rel_residual,
            timers=timers,
            converged=converged,
            aborts=aborts,
            shift_sets=shift_sets,
        )

    if norm0 == 0:
        return result(True)

    rel = 1.0
    while rel > config.tol_newton:
        if state.k >= config.max_newton:
            raise MaxIterations(
                f"{config.max_newton} Newton steps without reaching {config.tol_newton:.1e} (now {rel:.3e})",
                result=result(False),
            )
        t_step = time.perf_counter()
        res_norm = state.residual_norm
        if rel < config.exact_start_switch:
            switched = True
        eta = forcing_parameter(config, rel)
        inner = exact_start_controller(config, state.k, rel, res_norm, switched)

        K = state.K
        op = AdiOperator(system, K, ShiftCache(system, transpose=True))
        t0 = time.perf_counter()
        W0 = ctx.apply_pi(np.hstack([C_scaled.T, K]))
        shifts, refresh = _shift_provider(system, K, ctx, config, W0)
        timers.shift += time.perf_counter() - t0
        shift_sets.append(shifts)

        measure = None
        if explicit:
            measure = lambda s, K=K: checker.lyapunov(K, s, config.adi_norm)  # noqa: E731

        aborted = False
        try:
            adi = run_adi(
                op, ctx, C_scaled, shifts, inner,
                max_steps=config.adi_max_steps,
                growth_cap=config.growth_cap,
                norm=config.adi_norm,
                refresh=_timed(refresh, timers) if refresh is not None else None,
                residual_norm=measure,
                complex_arithmetic=config.adi_arithmetic == "complex",
            )
        except NonConvergent as exc:
            if exc.partial is None or last_aborted or exc.partial.state.rank == 0:
                raise NotStabilizing(f"Newton step {state.k}: {exc}") from exc
            log.warning("Newton step %d: ADI aborted (%s); truncating and line searching", state.k, exc.reason)
            adi = exc.partial
            aborted = True
            aborts += 1
        last_aborted = aborted
        timers.lin_solve += op.solve_time

        t0 = time.perf_counter()
        Wt = np.real(adi.W)
        dKt = np.real(adi.dK)
        Zt = np.real(adi.Z)
        if explicit:
            trial_norm = checker.riccati(Zt, config.newton_norm)
        else:
            trial_norm = SignedResidualFactor.from_parts(Wt, dKt).norm(config.newton_norm)
        xi = 1.0
        if aborted or trial_norm > (1 - config.beta) * res_norm:
            rule = config.line_search
            if aborted and rule == "none":
                rule = "armijo"
            if rule != "none":
                poly = build_line_search_poly(state.residual, Wt, dKt)
                try:
                    xi = line_search(poly, config.beta, rule, config.max_backtracks)
                except NoAdmissibleStep as exc:
                    if aborted:
                        raise NotStabilizing(f"Newton step {state.k}: truncated ADI step admits no decrease") from exc
                    raise

        R_new = combine_after_step(state.residual, Wt, dKt, xi)
        if config.compress and xi < 1:
            R_new = R_new.compress()
        K_new = K + xi * dKt
        Z_new = concat_solution(state.Z, LowRankFactor(Zt), xi) if keep else None
        if explicit and (xi == 1 or state.k > 0):
            new_norm = checker.riccati(Z_new.Z, config.newton_norm)
        else:
            new_norm = R_new.norm(config.newton_norm)
        timers.proj_res += time.perf_counter() - t0

        rel = new_norm / norm0
        row = LogRow(
            k=state.k,
            eta_k=eta,
            adi_steps=adi.steps,
            lin_solves=adi.solves,
            xi_k=xi,
            rel_riccati_resid=rel,
            seconds=time.perf_counter() - t_step,
        )
        state.log.append(row)
        log.info("Newton %d: eta=%.2e ADI=%d solves=%d xi=%.3g rel=%.3e", row.k, eta, row.adi_steps, row.lin_solves, xi, rel)
        state = replace(state, k=state.k + 1, K=K_new, residual=R_new, residual_norm=new_norm, Z=Z_new)
        if callback is not None:
            callback(state, adi)
        if not np.isfinite(rel):
            raise NotStabilizing(f"Newton step {row.k} produced a non-finite residual")
    return result(True)


def _timed(fn, timers):
    def wrapped(pending):
        t0 = time.perf_counter()
        try:
            return fn(pending)
        finally:
            timers.shift += time.perf_counter() - t0

    return wrapped
