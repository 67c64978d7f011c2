"""Implicit application of the discrete Leray projector and pressure recovery.

The projector ``Pi = I - G (G^T M^{-1} G)^{-1} G^T M^{-1}`` is never
assembled. Both ``Pi`` and ``Pi^T`` are applied through one cached
factorization of ``[M G; G^T 0]``:

    Pi W    = M * W_hat,   [M G; G^T 0][W_hat; *] = [W; 0]
    Pi^T v  = v_hat,       [M G; G^T 0][v_hat; *] = [M v; 0]
"""
from __future__ import annotations

import numpy as np

from .kernels import factor_saddle


class ProjectorContext:
    """Projector bound to one system; holds the mass-saddle factorization."""

    def __init__(self, system, factorization=None):
        self.system = system
        self.factorization = factorization if factorization is not None else factor_saddle(system, None)

    def mass_solve(self, rhs):
        return self.factorization.solve_velocity(rhs)

    def apply_pi(self, W):
        if self.system.n_p == 0:
            return np.array(W, dtype=float, copy=True)
        return self.system.M @ self.mass_solve(W)

    def apply_pi_transpose(self, v):
        if self.system.n_p == 0:
            return np.array(v, dtype=float, copy=True)
        return self.mass_solve(self.system.M @ v)


def apply_pi(ctx: ProjectorContext, W):
    return ctx.apply_pi(W)


def apply_pi_transpose(ctx: ProjectorContext, v):
    return ctx.apply_pi_transpose(v)


def recover_pressure(system, v, u, ctx: ProjectorContext | None = None):
    """Pressure ``p = -(G^T M^{-1} G)^{-1} G^T M^{-1} (A v + B u)``.

    Read off as the negated multiplier block of one mass-saddle solve, so
    the Schur complement ``G^T M^{-1} G`` is never formed.
    """
    if system.n_p == 0:
        return np.zeros(0)
    ctx = ctx if ctx is not None else ProjectorContext(system)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    rhs = system.A @ np.asarray(v, dtype=float) + system.B @ u
    _, y = ctx.factorization.solve(rhs)
    return -y
