"""Problem instance of the index-2 descriptor LQR problem.

The system is

    M v' = A v + G p + B u,   0 = G^T v,   y = alpha * C v

with ``M`` symmetric positive definite and ``G`` of full column rank.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, NotSymmetric, SingularSaddlePoint

SYMMETRY_RTOL = 1e-12
DENSE_PD_CAP = 2000


def _as_csr(mat, name):
    if sp.issparse(mat):
        out = sp.csr_matrix(mat, dtype=float)
    else:
        arr = np.asarray(mat, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DimensionMismatch(f"{name} must be two-dimensional, got shape {arr.shape}")
        out = sp.csr_matrix(arr)
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


def _as_dense(mat, name, row=False):
    arr = mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if row else arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {arr.shape}")
    return np.array(arr, dtype=float)


def symmetry_defect(M) -> float:
    """Relative defect ``max|M - M^T| / max|M|``."""
    diff = abs(M - M.T)
    scale = abs(M).max() if M.nnz else 0.0
    dmax = diff.max() if diff.nnz else 0.0
    return float(dmax / scale) if scale > 0 else float(dmax)


@dataclass(frozen=True, eq=False)
class DaeSystem:
    """Sparse quintuple ``(M, A, G, B, C)`` plus the output weight ``alpha``.

    ``B`` and ``C`` are stored dense since they have few columns/rows.
    ``M`` is symmetrized by averaging when its defect is within
    ``SYMMETRY_RTOL``; the measured defect is kept in ``m_symmetry_defect``.
    """

    M: sp.csr_matrix
    A: sp.csr_matrix
    G: sp.csr_matrix
    B: np.ndarray
    C: np.ndarray
    alpha: float = 1.0
    m_symmetry_defect: float = field(init=False, default=0.0)

    def __post_init__(self):
        M = _as_csr(self.M, "M")
        A = _as_csr(self.A, "A")
        B = _as_dense(self.B, "B")
        C = _as_dense(self.C, "C", row=True)
        n_v = M.shape[0]
        G = self.G
        if G is None or (not sp.issparse(G) and np.size(G) == 0):
            G = sp.csr_matrix((n_v, 0))
        G = _as_csr(G, "G")
        self._check_dims(M, A, G, B, C)
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise DimensionMismatch(f"alpha must be a positive real, got {self.alpha}")
        defect = symmetry_defect(M)
        if defect <= SYMMETRY_RTOL:
            M = sp.csr_matrix(0.5 * (M + M.T))
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "m_symmetry_defect", defect)
        for arr in (B, C):
            arr.setflags(write=False)

    @staticmethod
    def _check_dims(M, A, G, B, C):
        n_v = M.shape[0]
        if M.shape != (n_v, n_v):
            raise DimensionMismatch(f"M must be square, got {M.shape}")
        if A.shape != (n_v, n_v):
            raise DimensionMismatch(f"A has shape {A.shape}, expected {(n_v, n_v)}")
        if G.shape[0] != n_v:
            raise DimensionMismatch(f"G has {G.shape[0]} rows, expected {n_v}")
        if B.shape[0] != n_v or B.shape[1] < 1:
            raise DimensionMismatch(f"B has shape {B.shape}, expected ({n_v}, n_u>=1)")
        if C.shape[1] != n_v or C.shape[0] < 1:
            raise DimensionMismatch(f"C has shape {C.shape}, expected (n_y>=1, {n_v})")

    @classmethod
    def from_triplets(cls, n_v, n_p, M, A, G, B, C, alpha=1.0):
        """Build from ``(rows, cols, values)`` triplets for the sparse blocks.

        Indices are zero-based. ``B`` and ``C`` may be triplets or dense arrays.
        """

        def build(trip, shape):
            if isinstance(trip, tuple) and len(trip) == 3:
                r, c, v = trip
                return sp.csr_matrix((v, (r, c)), shape=shape)
            return trip

        return cls(
            M=build(M, (n_v, n_v)),
            A=build(A, (n_v, n_v)),
            G=build(G, (n_v, n_p)),
            B=build(B, (n_v, _ncols(B))),
            C=build(C, (_nrows(C), n_v)),
            alpha=alpha,
        )

    @property
    def n_v(self) -> int:
        return self.M.shape[0]

    @property
    def n_p(self) -> int:
        return self.G.shape[1]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def scaled_output(self) -> np.ndarray:
        """Return ``alpha * C``; the stored ``C`` stays unweighted."""
        return self.alpha * self.C

    def with_alpha(self, alpha: float) -> "DaeSystem":
        return DaeSystem(self.M, self.A, self.G, self.B, self.C, alpha)

    def with_A(self, A) -> "DaeSystem":
        return DaeSystem(self.M, A, self.G, self.B, self.C, self.alpha)

    def pencil(self) -> "CompactPencil":
        return CompactPencil(self)


def _ncols(B):
    if isinstance(B, tuple) and len(B) == 3:
        return int(max(B[1]) + 1) if len(B[1]) else 1
    return np.shape(B)[1] if np.ndim(B) == 2 else 1


def _nrows(C):
    if isinstance(C, tuple) and len(C) == 3:
        return int(max(C[0]) + 1) if len(C[0]) else 1
    return np.shape(C)[0] if np.ndim(C) == 2 else 1


class CompactPencil:
    """Block view of the compact pencil; blocks reference the system's data.

    ``matrix_A`` is ``[A G; G^T 0]``, ``matrix_M`` is ``[M 0; 0 0]``,
    ``matrix_B`` is ``[B; 0]`` and ``matrix_C`` is ``[C 0]``. Assembly
    happens only on request via :meth:`assemble`.
    """

    def __init__(self, system: DaeSystem):
        self.system = system

    @property
    def size(self) -> int:
        return self.system.n_v + self.system.n_p

    def blocks_A(self):
        s = self.system
        return [[s.A, s.G], [s.G.T, None]]

    def blocks_M(self):
        s = self.system
        return [[s.M, None], [None, None]]

    def assemble(self):
        """Return assembled sparse ``(A, M)`` and dense ``(B, C)`` of the pencil."""
        s = self.system
        n_v, n_p = s.n_v, s.n_p
        if n_p == 0:
            return s.A.tocsr(), s.M.tocsr(), s.B.copy(), s.C.copy()
        Z = sp.csr_matrix((n_p, n_p))
        bigA = sp.bmat([[s.A, s.G], [s.G.T, Z]], format="csr")
        bigM = sp.bmat(
            [[s.M, sp.csr_matrix((n_v, n_p))], [sp.csr_matrix((n_p, n_v)), Z]], format="csr"
        )
        bigB = np.vstack([s.B, np.zeros((n_p, s.n_u))])
        bigC = np.hstack([s.C, np.zeros((s.n_y, n_p))])
        return bigA, bigM, bigB, bigC


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`, one entry per checked hypothesis."""

    n_v: int
    n_p: int
    n_u: int
    n_y: int
    symmetry_defect: float
    symmetric: bool
    positive_definite: bool
    saddle_factorized: bool
    saddle_residual: float
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.symmetric and self.positive_definite and self.saddle_factorized

    def checks(self):
        return [
            ("M symmetric", self.symmetric, f"defect={self.symmetry_defect:.3e}"),
            ("M positive definite", self.positive_definite, ""),
            ("saddle [M G; G^T 0] nonsingular", self.saddle_factorized,
             f"residual={self.saddle_residual:.3e}"),
        ]

    def raise_if_failed(self):
        if not self.symmetric:
            raise NotSymmetric(f"M symmetry defect {self.symmetry_defect:.3e} exceeds {SYMMETRY_RTOL}")
        if not self.positive_definite:
            raise SingularSaddlePoint("M is not positive definite")
        if not self.saddle_factorized:
            raise SingularSaddlePoint(
                "saddle point matrix [M G; G^T 0] is singular (rank-deficient G?)"
            )


def _positive_definite(M) -> bool:
    n = M.shape[0]
    if n <= DENSE_PD_CAP:
        try:
            np.linalg.cholesky(M.toarray())
            return True
        except np.linalg.LinAlgError:
            return False
    # symmetric ordering without pivoting: all pivots positive iff SPD
    try:
        lu = spla.splu(
            sp.csc_matrix(M),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError:
        return False
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return False
    return bool(np.all(lu.U.diagonal() > 0))


def validate(system: DaeSystem, seed: int = 0) -> ValidationReport:
    """Check the structural hypotheses on ``system`` and report measured values.

    Never raises for a failed hypothesis; call
    :meth:`ValidationReport.raise_if_failed` for that.
    """
    from .kernels import factor_saddle

    report = ValidationReport(
        n_v=system.n_v,
        n_p=system.n_p,
        n_u=system.n_u,
        n_y=system.n_y,
        symmetry_defect=system.m_symmetry_defect,
        symmetric=system.m_symmetry_defect <= SYMMETRY_RTOL,
        positive_definite=False,
        saddle_factorized=False,
        saddle_residual=np.inf,
    )
    if system.n_p >= system.n_v:
        report.messages.append(f"n_p={system.n_p} >= n_v={system.n_v}: G cannot have full column rank")
    report.positive_definite = _positive_definite(system.M)
    if not report.positive_definite:
        report.messages.append("Cholesky of M failed")
    if system.n_p < system.n_v:
        try:
            fac = factor_saddle(system, None)
            rng = np.random.default_rng(seed)
            rhs = rng.standard_normal(system.n_v + system.n_p)
            x = fac.solve_full(rhs)
            big = fac.matrix
            res = np.linalg.norm(big @ x - rhs) / (
                abs(big).max() * np.linalg.norm(x) + np.linalg.norm(rhs)
            )
            report.saddle_residual = float(res)
            cond = fac.condest()
            report.saddle_factorized = bool(np.isfinite(res) and res <= 1e-12 and cond < 1e14)
            if not report.saddle_factorized:
                report.messages.append(
                    f"saddle solve residual {res:.3e}, condition estimate {cond:.3e}"
                )
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            report.messages.append(f"saddle factorization failed: {exc}")
    return report
