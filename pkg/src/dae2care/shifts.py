"""ADI shift parameters: Ritz-value heuristic and adaptive projection shifts.

All operators act on the constraint manifold ``null(G^T)`` through saddle
solves, so the projected closed-loop matrix is never formed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ArnoldiBreakdown, EmptyStableSet
from .kernels import FeedbackSolver, factor_state

log = logging.getLogger(__name__)

PAIR_RTOL = 1e-12


@dataclass(frozen=True)
class ShiftSet:
    """Ordered stable shifts; complex pairs adjacent with positive imaginary part first."""

    shifts: np.ndarray
    provenance: str = "heuristic"
    paired: bool = field(default=True)

    def __post_init__(self):
        q = np.asarray(self.shifts, dtype=complex).ravel()
        if q.size == 0:
            raise ValueError("empty shift set")
        if not np.all(q.real < 0):
            raise ValueError(f"unstable shift in {q}")
        i = 0
        while i < q.size:
            if q[i].imag == 0:
                i += 1
                continue
            if q[i].imag < 0 or i + 1 >= q.size or q[i + 1] != np.conj(q[i]):
                raise ValueError(f"shift {q[i]} is not followed by its conjugate")
            i += 2
        object.__setattr__(self, "shifts", q)

    def __len__(self):
        return self.shifts.size

    def __iter__(self):
        return iter(self.shifts)

    def __getitem__(self, i):
        return self.shifts[i]

    @property
    def has_complex(self):
        return bool(np.any(self.shifts.imag != 0))


def _clean_pairs(values):
    """Snap near-real values to the real axis and close the set under conjugation."""
    out = []
    for z in np.asarray(values, dtype=complex).ravel():
        if not np.isfinite(z):
            continue
        if abs(z.imag) <= PAIR_RTOL * abs(z):
            z = complex(z.real, 0.0)
        out.append(z)
        if z.imag != 0:
            out.append(np.conj(z))
    uniq = []
    for z in out:
        if not any(abs(z - w) <= PAIR_RTOL * max(abs(z), 1.0) for w in uniq):
            uniq.append(z)
    return np.array(uniq, dtype=complex)


def _rho(p, lam):
    """``max_lam prod_j |(p_j - lam)/(p_j + lam)|`` with the maximizing index."""
    vals = np.ones(lam.size)
    for pj in p:
        vals *= np.abs(pj - lam) / np.abs(pj + lam)
    i = int(np.argmax(vals))
    return float(vals[i]), i


def _append(p, z):
    if z.imag == 0:
        return p + [complex(z.real, 0.0)]
    z = complex(z.real, abs(z.imag))
    return p + [z, np.conj(z)]


def lp_mnmx(candidates, r: int, provenance: str = "heuristic") -> ShiftSet:
    """Greedy min-max choice of ``r`` shifts from stable ``candidates``.

    The first shift minimizes the maximal ADI damping factor over the
    candidate set; every further shift is the candidate where the current
    damping factor is largest. Complex choices bring their conjugate along;
    a pair that would push the count past ``r`` ends the selection (unless
    it is the very first choice). Ties go to the smallest index.
    """
    cand = _clean_pairs(candidates)
    if cand.size == 0:
        raise ValueError("no candidates")
    if not np.all(cand.real < 0):
        raise ValueError("candidates must be strictly stable")
    best, p0 = np.inf, None
    for z in cand:
        val, _ = _rho([z], cand)
        if val < best:
            best, p0 = val, z
    p = _append([], p0)
    while len(p) < r:
        val, i = _rho(p, cand)
        if val == 0.0:
            break
        z = cand[i]
        if z.imag != 0 and len(p) + 2 > r:
            break
        p = _append(p, z)
    return ShiftSet(np.array(p), provenance)


def arnoldi(apply, v0, m: int):
    """Ritz values of ``apply`` from ``m`` Arnoldi steps started at ``v0``.

    Stops early on an invariant subspace (lucky breakdown).
    """
    n = v0.shape[0]
    m = min(m, n)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    beta = np.linalg.norm(v0)
    if beta == 0 or not np.isfinite(beta):
        raise ArnoldiBreakdown("zero start vector")
    V[:, 0] = v0 / beta
    k = m
    for j in range(m):
        w = apply(V[:, j])
        for _ in range(2):
            h = V[:, : j + 1].T @ w
            w = w - V[:, : j + 1] @ h
            H[: j + 1, j] += h
        H[j + 1, j] = np.linalg.norm(w)
        if H[j + 1, j] <= 1e-12 * max(np.linalg.norm(H[: j + 2, j]), 1e-300):
            k = j + 1
            break
        V[:, j + 1] = w / H[j + 1, j]
    return np.linalg.eigvals(H[:k, :k])


def _start_vector(ctx, rng):
    return ctx.apply_pi_transpose(rng.standard_normal(ctx.system.n_v))


def _arnoldi_restart(apply, ctx, m, rng):
    for attempt in range(2):
        v0 = _start_vector(ctx, rng)
        try:
            return arnoldi(apply, v0, m)
        except ArnoldiBreakdown:
            log.warning("Arnoldi breakdown on attempt %d, restarting", attempt + 1)
    raise ArnoldiBreakdown("Arnoldi start vector degenerate twice")


def ritz_candidates(system, K, ctx, k_plus=20, k_minus=10, seed=0):
    """Mirrored Ritz values of the closed-loop pencil on ``null(G^T)``.

    Large-magnitude values come from Arnoldi on ``x -> (M^-1 (A - B K^T)) x``,
    small-magnitude ones from Arnoldi on its inverse; both operators are
    realized with saddle solves.
    """
    rng = np.random.default_rng(seed)
    K = np.asarray(K, dtype=float).reshape(system.n_v, system.n_u)
    B = system.B
    A = system.A

    def forward(x):
        return ctx.mass_solve(A @ x - B @ (K.T @ x))

    inv_solver = FeedbackSolver(factor_state(system, transpose=False), K, B)

    def inverse(x):
        return inv_solver.solve(system.M @ x)

    dim = system.n_v - system.n_p
    rp = _arnoldi_restart(forward, ctx, min(k_plus, dim), rng) if k_plus > 0 else np.array([])
    rm = _arnoldi_restart(inverse, ctx, min(k_minus, dim), rng) if k_minus > 0 else np.array([])
    rm = rm[np.abs(rm) > 0]
    cand = np.concatenate([rp, 1.0 / rm])
    cand = cand[np.isfinite(cand)]
    # mirror into the open left half-plane
    cand = -np.abs(cand.real) + 1j * cand.imag
    cand = cand[cand.real < 0]
    return _clean_pairs(cand)


def heuristic_shifts(system, K, ctx, k_plus=20, k_minus=10, n_shifts=10, seed=0, pool_cap=30) -> ShiftSet:
    cand = ritz_candidates(system, K, ctx, k_plus, k_minus, seed)
    if cand.size == 0:
        raise ArnoldiBreakdown("no usable Ritz values")
    if cand.size > pool_cap:
        # keep the pool spread over magnitudes: extreme values first
        order = np.argsort(np.abs(cand))
        half = pool_cap // 2
        keep = np.concatenate([order[:half], order[-(pool_cap - half):]])
        cand = _clean_pairs(cand[np.sort(keep)])
    return lp_mnmx(cand, n_shifts, "heuristic")


def orthonormal_basis(X, rtol=1e-10):
    """Thin QR with column pivoting; numerically dependent columns are dropped."""
    if X.shape[1] == 0:
        return X
    Q, R, _ = sla.qr(X, mode="economic", pivoting=True, check_finite=False)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return Q[:, :0]
    rank = int(np.sum(d > rtol * d[0]))
    return Q[:, :rank]


def projected_ritz_values(basis, system, K):
    Q = basis
    AQ = system.A @ Q - system.B @ (np.asarray(K).T @ Q)
    At = Q.T @ AQ
    Mt = Q.T @ (system.M @ Q)
    return sla.eigvals(At, Mt)


def adaptive_shifts(basis_blocks, system, K, ctx, r_max: int = 15) -> ShiftSet:
    """Shifts from Ritz values of the closed-loop pencil projected onto ``basis_blocks``.

    The basis is moved into ``null(G^T)`` with ``Pi^T`` (a no-op for ADI
    blocks), orthonormalized, and the stable Ritz values are reduced with
    :func:`lp_mnmx` to ``min(r_max, rank)`` shifts. Unstable Ritz values are
    discarded.
    """
    X = np.asarray(basis_blocks)
    if X.ndim == 1:
        X = X[:, None]
    if np.iscomplexobj(X):
        X = np.hstack([X.real, X.imag])
    X = ctx.apply_pi_transpose(X)
    Q = orthonormal_basis(X)
    if Q.shape[1] == 0:
        raise EmptyStableSet("projection basis is empty")
    ritz = projected_ritz_values(Q, system, K)
    ritz = ritz[np.isfinite(ritz)]
    stable = ritz[ritz.real < 0]
    if stable.size == 0:
        raise EmptyStableSet(f"all {ritz.size} projected Ritz values are unstable")
    return lp_mnmx(stable, min(r_max, Q.shape[1]), "adaptive")
