"""Low-rank symmetric factors and the quartic line-search polynomial.

Norms are computed from a thin QR of the factor: with ``U = Q R`` the
represented matrix ``U D U^T`` has the same nonzero spectrum as the small
``R D R^T``. This avoids the cancellation of forming ``U^T U`` when the
positive and negative parts nearly cancel, which is the normal situation
close to convergence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

NORM_KINDS = ("frobenius", "spectral")


def _block(X, n_rows=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if n_rows is not None and X.size == 0:
        return np.zeros((n_rows, 0))
    return X


def _small_core(U, signature):
    """``R D R^T`` for ``U = Q R``; at most ``r x r``."""
    if U.shape[1] == 0:
        return np.zeros((0, 0))
    R = sla.qr(U, mode="r", check_finite=False)[0]
    R = R[: min(U.shape), :]
    return (R * signature) @ R.T


def _norm_of_core(T, kind):
    if T.size == 0:
        return 0.0
    if kind == "frobenius":
        return float(np.linalg.norm(T, "fro"))
    if kind == "spectral":
        T = 0.5 * (T + T.T)
        return float(np.max(np.abs(np.linalg.eigvalsh(T))))
    raise ValueError(f"unknown norm kind {kind!r}")


@dataclass(frozen=True)
class LowRankFactor:
    """Tall block ``Z`` standing for ``Z Z^T``."""

    Z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Z", _block(self.Z))

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 0)))

    @property
    def rank(self):
        return self.Z.shape[1]

    def dense(self):
        return self.Z @ self.Z.T


@dataclass(frozen=True)
class SignedResidualFactor:
    """Pair ``(U, signature)`` standing for ``U diag(signature) U^T``.

    Columns are grouped positive first.
    """

    U: np.ndarray
    signature: np.ndarray

    def __post_init__(self):
        U = _block(self.U)
        sig = np.asarray(self.signature, dtype=float).ravel()
        if sig.shape[0] != U.shape[1]:
            raise ValueError(f"signature length {sig.shape[0]} != column count {U.shape[1]}")
        if not np.all(np.abs(sig) == 1):
            raise ValueError("signature entries must be +1 or -1")
        if sig.size and np.any(np.diff(sig) > 0):
            raise ValueError("columns must be grouped positive first")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "signature", sig)

    @classmethod
    def from_parts(cls, positive, negative):
        """``positive positive^T - negative negative^T``."""
        P = _block(positive)
        N = _block(negative, P.shape[0])
        U = np.hstack([P, N])
        sig = np.concatenate([np.ones(P.shape[1]), -np.ones(N.shape[1])])
        return cls(U, sig)

    @property
    def positive(self):
        return self.U[:, self.signature > 0]

    @property
    def negative(self):
        return self.U[:, self.signature < 0]

    @property
    def n_rows(self):
        return self.U.shape[0]

    def dense(self):
        return (self.U * self.signature) @ self.U.T

    def norm(self, kind="frobenius"):
        return gram_norm(self, kind)

    def compress(self, tol=1e-14):
        """Drop numerically irrelevant directions (QR plus small eigendecomposition)."""
        if self.U.shape[1] == 0:
            return self
        Q, R = sla.qr(self.U, mode="economic", check_finite=False)
        T = (R * self.signature) @ R.T
        lam, V = np.linalg.eigh(0.5 * (T + T.T))
        keep = np.abs(lam) > tol * max(np.max(np.abs(lam)), np.finfo(float).tiny)
        lam, V = lam[keep], V[:, keep]
        order = np.argsort(-np.sign(lam), kind="stable")
        lam, V = lam[order], V[:, order]
        U = (Q @ V) * np.sqrt(np.abs(lam))
        return SignedResidualFactor(U, np.sign(lam))


def gram_norm(factor: SignedResidualFactor, kind: str = "frobenius") -> float:
    """Frobenius or spectral norm of ``U D U^T`` from an ``r x r`` core."""
    return _norm_of_core(_small_core(factor.U, factor.signature), kind)


def lyapunov_norm(W, kind="spectral") -> float:
    """Norm of ``W W^T`` (all-positive signature)."""
    W = _block(W)
    return _norm_of_core(_small_core(W, np.ones(W.shape[1])), kind)


@dataclass(frozen=True)
class LineSearchPolynomial:
    """``phi(xi) = c0 + c1 xi + c2 xi^2 + c3 xi^3 + c4 xi^4``.

    ``phi(xi)`` is the squared Frobenius norm of the Riccati residual after
    a step of size ``xi``.
    """

    coeffs: np.ndarray

    def __call__(self, xi):
        c = self.coeffs
        xi = np.asarray(xi, dtype=float)
        val = c[0] + xi * (c[1] + xi * (c[2] + xi * (c[3] + xi * c[4])))
        return np.maximum(val, 0.0)

    @property
    def phi0(self):
        return float(self.coeffs[0])

    def derivative_roots(self):
        """Real roots of ``phi'`` (a cubic)."""
        c = self.coeffs
        d = np.array([4 * c[4], 3 * c[3], 2 * c[2], c[1]])
        nz = np.flatnonzero(np.abs(d) > 0)
        if nz.size == 0:
            return np.array([])
        roots = np.roots(d[nz[0] :])
        return np.real(roots[np.abs(roots.imag) <= 1e-12 * np.maximum(1.0, np.abs(roots))])


def build_line_search_poly(R: SignedResidualFactor, W_lyap, dK) -> LineSearchPolynomial:
    """Quartic ``|| (1-xi) N1 + xi N2 - xi^2 N3 ||_F^2``.

    ``N1 = U D U^T`` is the current Riccati residual, ``N2 = W W^T`` the
    Lyapunov residual of the preliminary iterate, ``N3 = dK dK^T`` the
    feedback change. All three share one QR of the stacked columns, so the
    pairwise trace inner products are sums over ``r x r`` cores.
    """
    W = _block(W_lyap, R.n_rows)
    D = _block(dK, R.n_rows)
    stacked = np.hstack([R.U, W, D])
    r1, r2 = R.U.shape[1], W.shape[1]
    if stacked.shape[1] == 0:
        return LineSearchPolynomial(np.zeros(5))
    Rf = sla.qr(stacked, mode="r", check_finite=False)[0]
    Rf = Rf[: min(stacked.shape), :]
    R1, R2, R3 = Rf[:, :r1], Rf[:, r1 : r1 + r2], Rf[:, r1 + r2 :]
    T1 = (R1 * R.signature) @ R1.T
    T2 = R2 @ R2.T
    T3 = R3 @ R3.T

    def ip(X, Y):
        return float(np.sum(X * Y))

    n11, n22, n33 = ip(T1, T1), ip(T2, T2), ip(T3, T3)
    n12, n13, n23 = ip(T1, T2), ip(T1, T3), ip(T2, T3)
    coeffs = np.array(
        [
            n11,
            -2 * n11 + 2 * n12,
            n11 - 2 * n12 + n22 - 2 * n13,
            2 * n13 - 2 * n23,
            n33,
        ]
    )
    return LineSearchPolynomial(coeffs)


def combine_after_step(R_old: SignedResidualFactor, W_lyap, dK_new, xi: float) -> SignedResidualFactor:
    """Residual factor after a step of size ``xi``.

    Positive part ``[sqrt(1-xi) W_old, sqrt(xi) W_lyap]``, negative part
    ``[sqrt(1-xi) dK_old, xi dK_new]``. At ``xi == 1`` the old columns are
    not emitted.
    """
    if not 0 < xi <= 1:
        raise ValueError(f"step size must lie in (0, 1], got {xi}")
    W = _block(W_lyap, R_old.n_rows)
    D = _block(dK_new, R_old.n_rows)
    if xi == 1:
        return SignedResidualFactor.from_parts(W, D)
    a = np.sqrt(1 - xi)
    pos = np.hstack([a * R_old.positive, np.sqrt(xi) * W])
    neg = np.hstack([a * R_old.negative, xi * D])
    return SignedResidualFactor.from_parts(pos, neg)


def concat_solution(Z_old: LowRankFactor | None, Z_new: LowRankFactor, xi: float) -> LowRankFactor:
    """Factor of ``(1-xi) Z_old Z_old^T + xi Z_new Z_new^T``."""
    if not 0 < xi <= 1:
        raise ValueError(f"step size must lie in (0, 1], got {xi}")
    if xi == 1 or Z_old is None:
        return LowRankFactor(np.sqrt(xi) * Z_new.Z)
    return LowRankFactor(np.hstack([np.sqrt(1 - xi) * Z_old.Z, np.sqrt(xi) * Z_new.Z]))
