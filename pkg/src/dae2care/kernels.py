"""Sparse saddle-point factorizations and the Woodbury feedback correction.

Every linear system in the package is solved here. The saddle matrices are

    [A^T + q M   G]          [A + q M   G]          [M    G]
    [G^T         0]   or     [G^T       0]   or     [G^T  0]

(transposed, non-transposed, mass-only) factored once by SuperLU and
reused for any number of right-hand sides. A low-rank feedback term
``K B^T`` (transposed) or ``B K^T`` is never added to the sparse matrix;
it is handled by the Sherman-Morrison-Woodbury formula instead.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationFailed, SmwSingular

CAPACITANCE_COND_MAX = 1e14


def _saddle_matrix(F11, G):
    n_p = G.shape[1]
    if n_p == 0:
        return sp.csc_matrix(F11)
    dtype = np.result_type(F11.dtype, G.dtype)
    Z = sp.csc_matrix((n_p, n_p), dtype=dtype)
    return sp.bmat([[F11, G], [G.T, Z]], format="csc", dtype=dtype)


class Factorization:
    """Reusable sparse LU of one saddle matrix.

    ``kind`` is ``"mass"`` for ``[M G; G^T 0]`` or ``"state"`` for the
    (possibly shifted) state matrix block; ``shift`` is ``None`` for an
    unshifted block; ``transpose`` tells whether the (1,1) block uses ``A^T``.
    """

    def __init__(self, system, F11, kind, shift=None, transpose=False):
        self.system = system
        self.kind = kind
        self.shift = shift
        self.transpose = transpose
        self.n_v = system.n_v
        self.n_p = system.n_p
        self.matrix = _saddle_matrix(sp.csc_matrix(F11), sp.csc_matrix(system.G))
        self.dtype = self.matrix.dtype
        try:
            # threshold partial pivoting on the unregularized indefinite matrix
            self._lu = spla.splu(self.matrix, permc_spec="COLAMD", diag_pivot_thresh=0.1)
        except RuntimeError as exc:
            raise FactorizationFailed(f"saddle factorization ({kind}, q={shift}): {exc}") from exc

    def solve_full(self, rhs):
        """Solve with a full-length right-hand side ``[f; g]``."""
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs) and not np.iscomplexobj(self.matrix.data):
            sol = self._lu.solve(np.ascontiguousarray(rhs.real)) + 1j * self._lu.solve(
                np.ascontiguousarray(rhs.imag)
            )
        else:
            dtype = np.result_type(rhs.dtype, self.dtype)
            sol = self._lu.solve(np.ascontiguousarray(rhs, dtype=dtype))
        if not np.all(np.isfinite(sol)):
            raise FactorizationFailed(f"non-finite solution from saddle factorization (q={self.shift})")
        return sol

    def solve(self, rhs):
        """Solve ``[F G; G^T 0][x; y] = [rhs; 0]`` and return ``(x, y)``."""
        rhs = np.asarray(rhs)
        vec = rhs.ndim == 1
        if vec:
            rhs = rhs[:, None]
        if rhs.shape[0] != self.n_v:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {self.n_v}")
        full = np.zeros((self.n_v + self.n_p, rhs.shape[1]), dtype=np.result_type(rhs.dtype, self.dtype))
        full[: self.n_v] = rhs
        sol = self.solve_full(full)
        x, y = sol[: self.n_v], sol[self.n_v :]
        if vec:
            return x[:, 0], y[:, 0]
        return x, y

    def solve_velocity(self, rhs):
        return self.solve(rhs)[0]

    def condest(self) -> float:
        """1-norm condition estimate of the saddle matrix."""
        n = self.matrix.shape[0]
        if n == 0:
            return 1.0
        inv = spla.LinearOperator(
            (n, n),
            matvec=lambda x: self._lu.solve(np.asarray(x, dtype=self.dtype).ravel()),
            rmatvec=lambda x: self._lu.solve(np.asarray(x, dtype=self.dtype).ravel(), trans="H"),
            dtype=self.dtype,
        )
        if n <= 4:
            dense = self.matrix.toarray()
            return float(np.linalg.cond(dense, 1))
        return float(spla.norm(self.matrix, 1) * spla.onenormest(inv))


def factor_saddle(system, q=None, transpose=False) -> Factorization:
    """Factor ``[A^T + qM, G; G^T, 0]`` (``transpose``) or ``[A + qM, G; G^T, 0]``.

    With ``q=None`` the mass-only matrix ``[M G; G^T 0]`` is factored.
    """
    if q is None:
        return Factorization(system, system.M, "mass")
    q = complex(q)
    if not q.real < 0:
        raise FactorizationFailed(f"shift {q} must have negative real part")
    if q.imag == 0:
        q = q.real
    A = system.A.T if transpose else system.A
    F11 = (A + q * system.M).tocsc()
    return Factorization(system, F11, "state", shift=q, transpose=transpose)


def factor_state(system, transpose=False) -> Factorization:
    """Factor the unshifted state saddle matrix ``[A G; G^T 0]`` (or with ``A^T``)."""
    A = system.A.T if transpose else system.A
    return Factorization(system, A.tocsc(), "state", shift=None, transpose=transpose)


class FeedbackSolver:
    """Woodbury solver for the saddle matrix with the feedback term subtracted.

    For a transposed factorization the (1,1) block is ``A^T + qM - K B^T``,
    otherwise ``A + qM - B K^T``. The ``n_u`` auxiliary solves and the
    capacitance matrix are computed once at construction.
    """

    def __init__(self, factorization: Factorization, K, B):
        self.factorization = factorization
        K = np.asarray(K, dtype=float)
        B = np.asarray(B, dtype=float)
        if K.ndim == 1:
            K = K[:, None]
        if B.ndim == 1:
            B = B[:, None]
        if K.shape != B.shape:
            raise ValueError(f"K has shape {K.shape} but B has shape {B.shape}")
        if factorization.transpose:
            left, right = K, B
        else:
            left, right = B, K
        self._right = right
        self.trivial = not np.any(left) or not np.any(right)
        self.cond = 1.0
        if self.trivial:
            return
        self._P = factorization.solve_velocity(left)
        cap = np.eye(left.shape[1]) - right.T @ self._P
        cond = np.linalg.cond(cap)
        self.cond = float(cond)
        if not np.isfinite(cond) or cond > CAPACITANCE_COND_MAX:
            raise SmwSingular(f"capacitance matrix singular (cond={cond:.3e}, q={factorization.shift})")
        self._cap = cap

    def solve(self, rhs):
        """Velocity block ``V`` of the corrected saddle solve; multipliers are discarded."""
        Y = self.factorization.solve_velocity(rhs)
        if self.trivial:
            return Y
        vec = Y.ndim == 1
        Y2 = Y[:, None] if vec else Y
        coef = np.linalg.solve(self._cap, self._right.T @ Y2)
        out = Y2 + self._P @ coef
        return out[:, 0] if vec else out


def solve_with_feedback(f: Factorization, K, B, rhs):
    return FeedbackSolver(f, K, B).solve(rhs)


def mass_saddle_solve(system, rhs, factorization: Factorization | None = None):
    """Solve ``[M G; G^T 0][W; *] = [rhs; 0]`` and return ``W``."""
    fac = factorization if factorization is not None else factor_saddle(system, None)
    return fac.solve_velocity(rhs)


class ShiftCache:
    """Factorizations keyed by shift, with a solve counter.

    Cleared by the ADI driver whenever the shift set is refreshed and by the
    Newton driver at the start of each step.
    """

    def __init__(self, system, transpose=True):
        self.system = system
        self.transpose = transpose
        self._store = {}
        self.factorizations = 0

    def get(self, q) -> Factorization:
        key = complex(q)
        fac = self._store.get(key)
        if fac is None:
            fac = factor_saddle(self.system, key, self.transpose)
            self._store[key] = fac
            self.factorizations += 1
        return fac

    def clear(self):
        self._store.clear()

    def __len__(self):
        return len(self._store)
