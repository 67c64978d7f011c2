"""Dense brute-force reference quantities for desk-scale verification.

Nothing here is used by the sparse solver itself. The projected system is
built from an explicit factorization ``Pi = Theta_l Theta_r^T`` with
``Theta_r`` a Euclidean-orthonormal basis of ``null(G^T)`` and
``Theta_l = Pi Theta_r``. This is a valid choice: ``Pi^T Theta_r = Theta_r``
gives ``Theta_l^T Theta_r = Theta_r^T Theta_r = I``, and since
``null(Pi) = range(G) = null(Theta_r^T)`` we get
``Pi Theta_r Theta_r^T = Pi (I - P_G) = Pi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NotStabilizable, TooLarge

DENSE_CAP = 1000
KRON_CAP = 40


def _check_cap(system, cap):
    if system.n_v > cap:
        raise TooLarge(f"n_v={system.n_v} exceeds the dense cap {cap}")


def dense_pi(system) -> np.ndarray:
    """Explicit ``I - G (G^T M^-1 G)^-1 G^T M^-1``."""
    n = system.n_v
    if system.n_p == 0:
        return np.eye(n)
    M = system.M.toarray()
    G = system.G.toarray()
    MinvG = np.linalg.solve(M, G)
    S = G.T @ MinvG
    return np.eye(n) - G @ np.linalg.solve(S, MinvG.T)


@dataclass
class DenseProjectedSystem:
    theta_r: np.ndarray
    theta_l: np.ndarray
    M: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Pi: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.M.shape[0]


def build_theta(system, cap: int = DENSE_CAP) -> DenseProjectedSystem:
    _check_cap(system, cap)
    n = system.n_v
    if system.n_p == 0:
        theta_r = np.eye(n)
    else:
        theta_r = sla.null_space(system.G.toarray().T)
    Pi = dense_pi(system)
    theta_l = Pi @ theta_r
    Md = system.M.toarray()
    Ad = system.A.toarray()
    return DenseProjectedSystem(
        theta_r=theta_r,
        theta_l=theta_l,
        M=theta_r.T @ Md @ theta_r,
        A=theta_r.T @ Ad @ theta_r,
        B=theta_r.T @ system.B,
        C=system.scaled_output() @ theta_r,
        Pi=Pi,
    )


def lyapunov_kron(A, M, Q):
    """Solve ``A^T X M + M X A = -Q`` by one vectorized linear solve."""
    n = A.shape[0]
    I_op = np.kron(M.T, A.T) + np.kron(A.T, M)
    x = np.linalg.solve(I_op, -Q.reshape(-1, order="F"))
    X = x.reshape(n, n, order="F")
    return 0.5 * (X + X.T)


def lyapunov_schur(A, M, Q):
    """Same equation via Cholesky of ``M`` and a Bartels-Stewart solve."""
    L = np.linalg.cholesky(M)
    Ah = sla.solve_triangular(L, sla.solve_triangular(L, A.T, lower=True).T, lower=True)
    # Ah = L^-1 A L^-T
    Qh = sla.solve_triangular(L, sla.solve_triangular(L, Q, lower=True).T, lower=True)
    Y = sla.solve_continuous_lyapunov(Ah.T, -Qh)
    X = sla.solve_triangular(L.T, sla.solve_triangular(L.T, Y, lower=False).T, lower=False)
    return 0.5 * (X + X.T)


def dense_lyapunov(A, M, Q, method="auto"):
    if method == "kron" or (method == "auto" and A.shape[0] <= KRON_CAP):
        return lyapunov_kron(A, M, Q)
    return lyapunov_schur(A, M, Q)


def projected_riccati_residual(proj: DenseProjectedSystem, X):
    MX = proj.M @ X
    return proj.C.T @ proj.C + proj.A.T @ X @ proj.M + MX @ proj.A - MX @ proj.B @ proj.B.T @ MX.T


@dataclass
class CareSolution:
    X_proj: np.ndarray
    X: np.ndarray
    K: np.ndarray
    residual: float
    iterates: list
    feedbacks: list


def dense_care_solve(proj: DenseProjectedSystem, B, M, K0=None, tol=1e-12, maxit=100, method="auto"):
    """Exact Kleinman-Newton on the projected GCARE with dense Lyapunov solves.

    ``B`` and ``M`` are the unprojected input and mass matrices used to map
    the solution back to ``K = M X B`` with ``X = Theta_r X_proj Theta_r^T``.
    ``K0`` must be stabilizing. Iterates stop once the relative residual is
    below ``tol`` or stagnates.
    """
    n = proj.n
    nu = proj.B.shape[1]
    Kp = np.zeros((n, nu)) if K0 is None else proj.theta_r.T @ np.asarray(K0, dtype=float)
    CtC = proj.C.T @ proj.C
    scale = max(np.linalg.norm(CtC, "fro"), np.finfo(float).tiny)
    iterates, feedbacks = [], []
    best = np.inf
    stall = 0
    X = np.zeros((n, n))
    for _ in range(maxit):
        Ak = proj.A - proj.B @ Kp.T
        try:
            X = dense_lyapunov(Ak, proj.M, CtC + Kp @ Kp.T, method)
        except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
            raise NotStabilizable(f"Lyapunov solve failed: {exc}") from exc
        if not np.all(np.isfinite(X)):
            raise NotStabilizable("non-finite Lyapunov solution")
        iterates.append(X)
        Kp = proj.M @ X @ proj.B
        feedbacks.append(Kp)
        res = np.linalg.norm(projected_riccati_residual(proj, X), "fro") / scale
        if res <= tol:
            break
        if res < 0.5 * best:
            stall = 0
        else:
            stall += 1
            if stall >= 3:
                break
        best = min(best, res)
    res = np.linalg.norm(projected_riccati_residual(proj, X), "fro") / scale
    if not np.isfinite(res) or res > 1e-6:
        raise NotStabilizable(f"Kleinman-Newton did not converge (relative residual {res:.3e})")
    Xfull = proj.theta_r @ X @ proj.theta_r.T
    Md = M.toarray() if hasattr(M, "toarray") else np.asarray(M)
    K = Md @ Xfull @ B
    return CareSolution(X, Xfull, K, res, iterates, feedbacks)


def oracle_feedback(system, K0=None, tol=1e-12, cap=DENSE_CAP) -> CareSolution:
    proj = build_theta(system, cap)
    if K0 is None:
        K0 = bernoulli_feedback(system, proj) if not is_stable(system, np.zeros((system.n_v, system.n_u))) else None
    return dense_care_solve(proj, system.B, system.M, K0, tol)


def assembled_pencil(system, K=None):
    """Dense ``([A - B K^T, G; G^T, 0], [M, 0; 0, 0])``."""
    n_v, n_p = system.n_v, system.n_p
    A = system.A.toarray()
    if K is not None:
        A = A - system.B @ np.asarray(K, dtype=float).reshape(n_v, -1).T
    G = system.G.toarray()
    big_A = np.zeros((n_v + n_p, n_v + n_p))
    big_A[:n_v, :n_v] = A
    big_A[:n_v, n_v:] = G
    big_A[n_v:, :n_v] = G.T
    big_M = np.zeros_like(big_A)
    big_M[:n_v, :n_v] = system.M.toarray()
    return big_A, big_M


def pencil_eigenvalues(system, K=None, cap: int = DENSE_CAP):
    """Finite eigenvalues of the closed-loop pencil; infinite ones are filtered.

    Eigenvalues of magnitude above ``1/sqrt(eps)`` count as infinite (the
    nilpotent part of an index-2 pencil is only resolved to about that
    level). For full-rank ``G`` exactly ``n_v - n_p`` eigenvalues are
    finite, so at most that many (smallest in magnitude) are returned.
    """
    _check_cap(system, cap)
    big_A, big_M = assembled_pencil(system, K)
    alpha, beta = sla.eigvals(big_A, big_M, homogeneous_eigvals=True)
    limit = 1.0 / np.sqrt(np.finfo(float).eps)
    finite = np.abs(beta) * limit > np.abs(alpha)
    lam = alpha[finite] / beta[finite]
    lam = lam[np.isfinite(lam)]
    n_fin = system.n_v - system.n_p
    if lam.size > n_fin:
        lam = lam[np.argsort(np.abs(lam), kind="stable")[:n_fin]]
    return lam


def projected_eigenvalues(system, K=None):
    """Eigenvalues of ``(Theta_r^T (A - B K^T) Theta_r, Theta_r^T M Theta_r)``."""
    proj = build_theta(system)
    A = proj.A
    if K is not None:
        A = A - proj.B @ (proj.theta_r.T @ np.asarray(K, dtype=float).reshape(system.n_v, -1)).T
    return sla.eigvals(A, proj.M)


def is_stable(system, K=None) -> bool:
    lam = projected_eigenvalues(system, K)
    return bool(np.all(lam.real < 0))


def bernoulli_feedback(system, proj: DenseProjectedSystem | None = None):
    """Stabilizing feedback from the zero-output-weight projected Riccati equation.

    Solves ``A^T X M + M X A - M X B B^T X M = 0`` for its stabilizing
    solution; the closed loop mirrors the unstable eigenvalues into the
    left half-plane and leaves the stable ones alone.
    """
    proj = proj if proj is not None else build_theta(system)
    L = np.linalg.cholesky(proj.M)
    Ah = sla.solve_triangular(L, sla.solve_triangular(L, proj.A.T, lower=True).T, lower=True)
    Bh = sla.solve_triangular(L, proj.B, lower=True)
    # Ah = L^-1 A L^-T; the solution lives on the unstable invariant subspace
    # of Ah^T: Ah^T W = W S, Y = W P^-1 W^T with S^T P + P S = (W^T Bh)(W^T Bh)^T
    T, Q, r = sla.schur(Ah.T, output="real", sort="rhp")
    if r == 0:
        return np.zeros((system.n_v, system.n_u))
    W, S = Q[:, :r], T[:r, :r]
    Bt = W.T @ Bh
    P = sla.solve_continuous_lyapunov(S.T, Bt @ Bt.T)
    P = 0.5 * (P + P.T)
    try:
        Yh = W @ np.linalg.solve(P, W.T)
    except np.linalg.LinAlgError as exc:
        raise NotStabilizable(f"unstable modes not controllable: {exc}") from exc
    Yh = 0.5 * (Yh + Yh.T)
    Xp = sla.solve_triangular(L.T, sla.solve_triangular(L.T, Yh, lower=False).T, lower=False)
    Xfull = proj.theta_r @ Xp @ proj.theta_r.T
    K = system.M.toarray() @ Xfull @ system.B
    if not is_stable(system, K):
        raise NotStabilizable("Bernoulli feedback does not stabilize the pencil")
    return K


def dense_riccati_residual(system, X, Pi=None):
    """``Pi (C^T C + A^T X M + M X A - M X B B^T X M) Pi^T`` with the weighted output."""
    Pi = dense_pi(system) if Pi is None else Pi
    M = system.M.toarray()
    A = system.A.toarray()
    C = system.scaled_output()
    MXB = M @ X @ system.B
    R = C.T @ C + A.T @ X @ M + M @ X @ A - MXB @ MXB.T
    return Pi @ R @ Pi.T


def dense_lyapunov_residual(system, K, X, W0=None, Pi=None):
    """``Pi [(A - B K^T)^T X M + M X (A - B K^T) + W0 W0^T] Pi^T``.

    ``W0`` defaults to the unprojected ``[alpha C^T, K]``.
    """
    Pi = dense_pi(system) if Pi is None else Pi
    M = system.M.toarray()
    K = np.asarray(K, dtype=float).reshape(system.n_v, -1)
    Ak = system.A.toarray() - system.B @ K.T
    if W0 is None:
        W0 = np.hstack([system.scaled_output().T, K])
    L = Ak.T @ X @ M + M @ X @ Ak + W0 @ W0.T
    return Pi @ L @ Pi.T


def dense_saddle_solve(system, F11, rhs):
    n_v, n_p = system.n_v, system.n_p
    G = system.G.toarray()
    big = np.zeros((n_v + n_p, n_v + n_p), dtype=np.result_type(F11, complex if np.iscomplexobj(F11) else float))
    big[:n_v, :n_v] = F11
    big[:n_v, n_v:] = G
    big[n_v:, :n_v] = G.T
    full = np.zeros((n_v + n_p,) + rhs.shape[1:], dtype=np.result_type(big, rhs))
    full[:n_v] = rhs
    return np.linalg.solve(big, full)[:n_v]


def complex_adi_reference(system, K, shifts, W0):
    """Textbook complex low-rank ADI with one dense solve per shift.

    Returns ``(X, W)`` with ``X = sum_j Z_j Z_j^H`` and the final residual
    factor; used to check the real-arithmetic pair formulation.
    """
    M = system.M.toarray()
    K = np.asarray(K, dtype=float).reshape(system.n_v, -1)
    AkT = (system.A.toarray() - system.B @ K.T).T
    W = np.asarray(W0, dtype=complex)
    X = np.zeros((system.n_v, system.n_v), dtype=complex)
    for q in shifts:
        V = dense_saddle_solve(system, AkT + q * M, W)
        W = W - 2 * q.real * (M @ V)
        Zj = np.sqrt(-2 * q.real) * V
        X = X + Zj @ Zj.conj().T
    return X, W
