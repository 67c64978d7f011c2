"""Deterministic desk-scale test problems.

``stokes2d``
    Staggered (MAC) grid on the unit square with no-slip walls. Velocity
    unknowns live on interior cell faces, pressures in cell centers. The
    mass matrix is lumped, ``M = h^2 I``; ``A = nu * h^2 Lap_h`` plus an
    optional skew-symmetric convection term; ``G = -h^2 grad_h``. One
    pressure column is dropped to remove the constant null vector of the
    discrete gradient, so ``G`` has full column rank.
``random_sparse``
    Random sparse SPD ``M``, ``A`` with negative definite symmetric part
    plus a skew part, and a full-rank sparse ``G``.
``diagonal``
    ``A = -diag(1, ..., n)``, ``M = I``, no constraint.

Any family can be made unstable by ``mu > 0``, which replaces ``A`` by
``A + mu M`` and moves every finite pencil eigenvalue right by ``mu``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidSpec
from .model import DaeSystem

FAMILIES = ("stokes2d", "random_sparse", "diagonal")


@dataclass(frozen=True)
class ProblemSpec:
    family: str = "stokes2d"
    nx: int = 8
    ny: int = 8
    viscosity: float = 0.02
    convection: float = 0.0
    n_v: int = 100
    n_p: int = 20
    density: float = 0.05
    n: int = 2
    mu: float = 0.0
    n_u: int = 2
    n_y: int = 3
    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n_u < 1 or self.n_y < 1:
            raise InvalidSpec("n_u and n_y must be positive")
        if self.alpha <= 0:
            raise InvalidSpec("alpha must be positive")
        if self.mu < 0:
            raise InvalidSpec("mu must be nonnegative")
        if self.family == "stokes2d":
            if self.nx < 2 or self.ny < 2:
                raise InvalidSpec("stokes2d needs nx, ny >= 2")
            if self.viscosity <= 0:
                raise InvalidSpec("viscosity must be positive")
        elif self.family == "random_sparse":
            if self.n_v < 2 or not 0 <= self.n_p < self.n_v:
                raise InvalidSpec(f"random_sparse needs n_v >= 2 and 0 <= n_p < n_v (got {self.n_v}, {self.n_p})")
            if not 0 < self.density <= 1:
                raise InvalidSpec("density must lie in (0, 1]")
        elif self.n < 1:
            raise InvalidSpec("diagonal needs n >= 1")

    @property
    def stability(self):
        return "stable" if self.mu == 0 else f"shifted-unstable({self.mu:g})"

    def as_dict(self):
        return asdict(self)


def _lap1d(m):
    """Dirichlet second difference ``tridiag(1, -2, 1)`` of size ``m``."""
    return sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="csr")


def _central1d(m):
    """Skew central difference ``tridiag(-1/2, 0, 1/2)``."""
    e = 0.5 * np.ones(m - 1)
    return sp.diags([-e, e], [-1, 1], format="csr")


def _select_columns(n, idx):
    B = np.zeros((n, len(idx)))
    B[idx, np.arange(len(idx))] = 1.0
    return B


def _spread(n_total, count, lo, hi):
    """``count`` distinct indices spread over ``[lo, hi)``."""
    hi = max(hi, lo + count)
    idx = np.unique(np.linspace(lo, hi - 1, count).round().astype(int))
    idx = np.clip(idx, 0, n_total - 1)
    if idx.size < count:
        rest = np.setdiff1d(np.arange(n_total), idx)[: count - idx.size]
        idx = np.sort(np.concatenate([idx, rest]))
    return idx


def stokes2d(spec: ProblemSpec) -> DaeSystem:
    nx, ny = spec.nx, spec.ny
    h = 1.0 / max(nx, ny)
    # u on vertical interior faces: (nx-1) x ny, index i + (nx-1) j
    # v on horizontal interior faces: nx x (ny-1), index i + nx j
    Iu_x, Iu_y = sp.identity(nx - 1), sp.identity(ny)
    Iv_x, Iv_y = sp.identity(nx), sp.identity(ny - 1)
    Lu = sp.kron(Iu_y, _lap1d(nx - 1)) + sp.kron(_lap1d(ny), Iu_x)
    Lv = sp.kron(Iv_y, _lap1d(nx)) + sp.kron(_lap1d(ny - 1), Iv_x)
    L = sp.block_diag([Lu, Lv], format="csr")
    A = spec.viscosity * L
    if spec.convection:
        Du = sp.kron(Iu_y, _central1d(nx - 1))
        Dv = sp.kron(Iv_y, _central1d(nx))
        A = A - spec.convection * h * sp.block_diag([Du, Dv], format="csr")
    n_u_dofs = (nx - 1) * ny
    n_v = n_u_dofs + nx * (ny - 1)
    M = (h * h) * sp.identity(n_v, format="csr")

    # G = -h^2 grad: face between cells a (left/below) and b gets (p_b - p_a)/h
    rows, cols, vals = [], [], []
    for j in range(ny):
        for i in range(nx - 1):
            r = i + (nx - 1) * j
            rows += [r, r]
            cols += [i + nx * j, (i + 1) + nx * j]
            vals += [h, -h]
    for j in range(ny - 1):
        for i in range(nx):
            r = n_u_dofs + i + nx * j
            rows += [r, r]
            cols += [i + nx * j, i + nx * (j + 1)]
            vals += [h, -h]
    G = sp.csr_matrix((vals, (rows, cols)), shape=(n_v, nx * ny))[:, : nx * ny - 1]

    # inputs act on horizontal velocity near the left wall, outputs sample
    # vertical velocity in the right half
    left = [(nx - 1) * j for j in range(ny)]
    b_idx = np.array(left)[_spread(len(left), spec.n_u, 0, len(left))]
    B = _select_columns(n_v, b_idx)
    right = [n_u_dofs + i + nx * j for j in range(ny - 1) for i in range(nx // 2, nx)]
    c_idx = np.array(right)[_spread(len(right), spec.n_y, 0, len(right))]
    C = _select_columns(n_v, c_idx).T
    return DaeSystem(M=M, A=A + spec.mu * M, G=G, B=B, C=C, alpha=spec.alpha)


def random_sparse(spec: ProblemSpec) -> DaeSystem:
    rng = np.random.default_rng(spec.seed)
    n, n_p = spec.n_v, spec.n_p

    def rand(m, k, dens):
        return sp.random(m, k, density=dens, random_state=rng, data_rvs=lambda s: rng.standard_normal(s), format="csr")

    R = rand(n, n, spec.density)
    S = 0.5 * (R + R.T)
    # off-diagonal part bounded by 0.4 in norm (Gershgorin); diagonal margins
    # spread linearly so a moderate mu destabilizes only a few modes
    S = S * (0.4 / max(float(abs(S).sum(axis=1).max()), 1e-300))
    margin = rng.permutation(0.5 + 0.5 * np.arange(n))
    S = S - sp.diags(margin)
    Q = rand(n, n, spec.density)
    A = S + 0.5 * (Q - Q.T)

    E = 0.1 * rand(n, n, spec.density)
    E = 0.5 * (E + E.T)
    M = E + sp.diags(np.asarray(abs(E).sum(axis=1)).ravel() + rng.uniform(0.5, 1.5, n))

    if n_p:
        perm = rng.permutation(n)[:n_p]
        P = sp.csr_matrix((np.ones(n_p), (perm, np.arange(n_p))), shape=(n, n_p))
        G = P + 0.3 * rand(n, n_p, spec.density)
        # full column rank check; the identity part makes this essentially certain
        if np.linalg.matrix_rank(G.toarray()) < n_p:
            raise InvalidSpec("generated G is rank deficient; try another seed")
    else:
        G = sp.csr_matrix((n, 0))
    B = rng.standard_normal((n, spec.n_u))
    C = rng.standard_normal((spec.n_y, n))
    return DaeSystem(M=M.tocsr(), A=(A + spec.mu * M).tocsr(), G=G, B=B, C=C, alpha=spec.alpha)


def diagonal(spec: ProblemSpec) -> DaeSystem:
    n = spec.n
    M = sp.identity(n, format="csr")
    A = sp.diags(-np.arange(1.0, n + 1)) + spec.mu * M
    B = np.ones((n, 1)) if spec.n_u == 1 else _select_columns(n, _spread(n, min(spec.n_u, n), 0, n)) + 1.0 / n
    C = np.ones((1, n)) if spec.n_y == 1 else _select_columns(n, _spread(n, min(spec.n_y, n), 0, n)).T + 1.0 / n
    return DaeSystem(M=M, A=A, G=None, B=B, C=C, alpha=spec.alpha)


def generate(spec: ProblemSpec) -> DaeSystem:
    """Build the system described by ``spec`` (deterministic in ``spec.seed``)."""
    return {"stokes2d": stokes2d, "random_sparse": random_sparse, "diagonal": diagonal}[spec.family](spec)


def initial_feedback(system, cap: int | None = None):
    """Stabilizing ``K0`` for desk-scale problems: zero if already stable."""
    from . import oracle

    cap = oracle.DENSE_CAP if cap is None else cap
    if system.n_v > cap:
        from .errors import TooLarge

        raise TooLarge(f"n_v={system.n_v} exceeds the dense cap {cap}; supply K0")
    zero = np.zeros((system.n_v, system.n_u))
    if oracle.is_stable(system, zero):
        return zero
    return oracle.bernoulli_feedback(system)
