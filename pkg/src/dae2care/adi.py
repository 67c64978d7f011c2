"""Low-rank residual ADI for the projected closed-loop Lyapunov equation.

Solves, for a fixed feedback ``K``,

    Pi (A - B K^T)^T X M Pi^T + Pi M X (A - B K^T) Pi^T = -W0 W0^T,
    W0 = Pi [alpha C^T, K],

working only with unprojected sparse matrices. Each step solves one saddle
system with ``A^T - K B^T + q M`` (Woodbury correction for ``K B^T``);
a complex conjugate pair costs a single complex solve and yields two real
solution columns blocks. Alongside the solution factor ``Z`` the driver
accumulates the Lyapunov residual factor ``W`` and the feedback change
``dK = M Z Z^T B - K``.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import FactorizationFailed, NonConvergent, SmwSingular
from .kernels import FeedbackSolver, ShiftCache
from .lowrank import lyapunov_norm

log = logging.getLogger(__name__)

# A shift close to an eigenvalue of the open-loop pencil makes A^T + qM
# (nearly) singular although the closed-loop matrix is fine; such shifts
# are moved slightly along their ray.
NUDGE_COND = 1e8
NUDGES = (0.0, 1e-3, 1e-2, 5e-2)


@dataclass(frozen=True)
class InnerTolerance:
    """Stopping threshold for ADI: ``value`` itself, or ``value * ||W0 W0^T||`` if ``relative``."""

    value: float
    relative: bool = False

    def threshold(self, norm0):
        return self.value * norm0 if self.relative else self.value


class AdiOperator:
    """Shifted closed-loop saddle solves for one feedback ``K``.

    Factorizations come from a :class:`ShiftCache`; the Woodbury pieces are
    built once per shift. ``solves`` counts the block solves (one per real
    shift, one per conjugate pair).
    """

    def __init__(self, system, K, cache: Optional[ShiftCache] = None):
        self.system = system
        self.K = np.asarray(K, dtype=float).reshape(system.n_v, system.n_u)
        self.cache = cache if cache is not None else ShiftCache(system, transpose=True)
        self._solvers = {}
        self.solves = 0
        self.solve_time = 0.0

    def resolve(self, q) -> complex:
        """Shift actually used for ``q`` (``q`` itself unless it had to be nudged)."""
        key = complex(q)
        if key in self._solvers:
            return self._solvers[key][0]
        last = None
        for nudge in NUDGES:
            qe = key * (1 + nudge)
            try:
                solver = FeedbackSolver(self.cache.get(qe), self.K, self.system.B)
            except (FactorizationFailed, SmwSingular) as exc:
                last = exc
                continue
            if solver.cond > NUDGE_COND and nudge != NUDGES[-1]:
                last = SmwSingular(f"capacitance condition {solver.cond:.2e} at q={qe}")
                continue
            if nudge:
                log.info("shift %s moved to %s (%s)", key, qe, last)
            self._solvers[key] = (qe, solver)
            return qe
        raise last

    def solve(self, q, rhs):
        """Solve with the resolved shift for ``q``; call :meth:`resolve` to learn it."""
        t0 = time.perf_counter()
        self.resolve(q)
        solver = self._solvers[complex(q)][1]
        out = solver.solve(rhs)
        self.solves += 1
        self.solve_time += time.perf_counter() - t0
        return out

    def reset(self):
        """Drop cached factorizations (after a shift refresh)."""
        self.cache.clear()
        self._solvers.clear()


@dataclass(frozen=True)
class AdiState:
    """Iteration state after ``step`` ADI steps (a complex pair counts two)."""

    W: np.ndarray
    dK: np.ndarray
    Z_blocks: tuple = ()
    step: int = 0
    solves: int = 0
    pending: tuple = ()
    norms: tuple = ()

    @property
    def Z(self):
        if not self.Z_blocks:
            return np.zeros((self.W.shape[0], 0))
        return np.hstack(self.Z_blocks)

    @property
    def rank(self):
        return sum(b.shape[1] for b in self.Z_blocks)


def adi_init(ctx, C_scaled, K) -> AdiState:
    """``W0 = Pi [alpha C^T, K]`` and ``dK0 = -K``."""
    K = np.asarray(K, dtype=float).reshape(ctx.system.n_v, -1)
    W0 = ctx.apply_pi(np.hstack([np.asarray(C_scaled, dtype=float).T, K]))
    return AdiState(W=W0, dK=-K.copy())


def adi_step(state: AdiState, q, op: AdiOperator) -> AdiState:
    """One real step, or one conjugate pair when ``Im(q) > 0``."""
    q = complex(q)
    if q.real >= 0:
        raise ValueError(f"shift {q} is not stable")
    M, B = op.system.M, op.system.B
    V = op.solve(q, state.W)
    q = op.resolve(q)
    if q.imag == 0:
        qr = q.real
        V = np.real(V)
        W = state.W - 2 * qr * (M @ V)
        Vt = np.sqrt(-2 * qr) * V
        steps = 1
        pending = (V,)
    elif q.imag > 0:
        g = 2 * np.sqrt(-q.real)
        d = q.real / q.imag
        Vr = V.real + d * V.imag
        W = state.W + g**2 * (M @ Vr)
        Vt = np.hstack([g * Vr, g * np.sqrt(d**2 + 1) * V.imag])
        steps = 2
        pending = (V.real, V.imag)
    else:
        raise ValueError("complex shifts must be passed with positive imaginary part")
    dK = state.dK + (M @ Vt) @ (Vt.T @ B)
    return AdiState(
        W=W,
        dK=dK,
        Z_blocks=state.Z_blocks + (Vt,),
        step=state.step + steps,
        solves=state.solves + 1,
        pending=state.pending + pending,
        norms=state.norms,
    )


def adi_step_complex(state: AdiState, q, op: AdiOperator) -> AdiState:
    """Classic complex-arithmetic step with a single shift (no pair coupling).

    Used only by the baseline benchmark setup; a conjugate pair costs two
    complex solves. ``W``, ``dK`` and ``Z`` may be complex between the two
    halves of a pair.
    """
    q = complex(q)
    M, B = op.system.M, op.system.B
    V = op.solve(q, state.W)
    q = op.resolve(q)
    if q.imag == 0:
        V = np.real(V)
    W = state.W - 2 * q.real * (M @ V)
    Vt = np.sqrt(-2 * q.real) * V
    dK = state.dK + (M @ Vt) @ (Vt.conj().T @ B)
    return AdiState(
        W=W,
        dK=dK,
        Z_blocks=state.Z_blocks + (Vt,),
        step=state.step + 1,
        solves=state.solves + 1,
        pending=state.pending + ((V.real, V.imag) if np.iscomplexobj(V) else (V,)),
        norms=state.norms,
    )


def _realify(state: AdiState) -> AdiState:
    """Real representation after completed pairs: ``Z Z^H = [Re Z, Im Z][Re Z, Im Z]^T``."""
    blocks = []
    for b in state.Z_blocks:
        if np.iscomplexobj(b):
            blocks.extend([b.real, b.imag])
        else:
            blocks.append(b)
    return replace(state, W=np.real(state.W), dK=np.real(state.dK), Z_blocks=tuple(blocks))


@dataclass
class AdiResult:
    state: AdiState
    norms: list
    threshold: float
    shifts_used: list = field(default_factory=list)
    refreshes: int = 0
    converged: bool = True

    @property
    def Z(self):
        return self.state.Z

    @property
    def W(self):
        return self.state.W

    @property
    def dK(self):
        return self.state.dK

    @property
    def steps(self):
        return self.state.step

    @property
    def solves(self):
        return self.state.solves


def run_adi(
    op: AdiOperator,
    ctx,
    C_scaled,
    shifts,
    tolerance: InnerTolerance,
    *,
    max_steps: int = 300,
    growth_cap: float = 1e6,
    norm: str = "spectral",
    refresh: Optional[Callable] = None,
    residual_norm: Optional[Callable] = None,
    complex_arithmetic: bool = False,
) -> AdiResult:
    """Iterate ADI until the Lyapunov residual norm drops to the threshold.

    When the shift list is exhausted, ``refresh(pending_blocks)`` supplies a
    new set (adaptive shifts) and the factorization cache is dropped;
    without a refresh callback the list is cycled.

    ``residual_norm(state)`` overrides the low-rank norm ``||W W^T||``
    (explicit dense residuals in the baseline benchmark setups).

    Raises :class:`NonConvergent` on the step limit, on residual growth
    beyond ``growth_cap`` times the initial norm, or on a singular Woodbury
    capacitance matrix. ``exc.partial`` then holds the result without the
    offending step (all completed steps for the step limit).
    """
    state = adi_init(ctx, C_scaled, op.K)
    measure = residual_norm if residual_norm is not None else (lambda s: lyapunov_norm(np.real(s.W), norm))
    norm0 = measure(state)
    threshold = tolerance.threshold(norm0)
    norms = [norm0]
    used = []
    refreshes = 0
    cursor = 0
    step_fn = adi_step_complex if complex_arithmetic else adi_step
    current = norm0

    def result(s, converged):
        final = _realify(s) if complex_arithmetic else s
        return AdiResult(final, list(norms), threshold, list(used), refreshes, converged)

    while current > threshold:
        if state.step >= max_steps:
            raise NonConvergent(
                f"ADI reached {state.step} steps, residual {current:.3e} > {threshold:.3e}",
                partial=result(state, False),
                reason="max_steps",
            )
        # one "unit": a real shift, a real-arithmetic pair, or both halves of a complex pair
        if cursor >= len(shifts):
            if refresh is not None:
                shifts = refresh(state.pending)
                state = replace(state, pending=())
                op.reset()
                refreshes += 1
            cursor = 0
        q = complex(shifts[cursor])
        units = [q] if (q.imag == 0 or not complex_arithmetic) else [q, np.conj(q)]
        cursor += 1 if q.imag == 0 else 2
        previous = state
        try:
            for s in units:
                state = step_fn(state, s, op)
        except SmwSingular as exc:
            raise NonConvergent(str(exc), partial=result(previous, False), reason="smw") from exc
        used.append(q)
        current = measure(state)
        norms.append(current)
        log.debug("ADI step %d shift %s residual %.3e", state.step, q, current)
        if not np.isfinite(current) or current > growth_cap * norm0:
            norms.pop()
            raise NonConvergent(
                f"ADI residual grew to {current:.3e} (initial {norm0:.3e})",
                partial=result(previous, False),
                reason="growth",
            )
    return result(state, True)
