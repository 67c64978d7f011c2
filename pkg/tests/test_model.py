import numpy as np
import pytest
import scipy.sparse as sp

from dae2care.errors import DimensionMismatch, NotSymmetric, SingularSaddlePoint
from dae2care.model import CompactPencil, DaeSystem, validate

from conftest import random_system


def identity_case():
    return DaeSystem(M=np.eye(2), A=np.eye(2), G=np.array([[1.0], [0.0]]), B=np.array([[1.0], [0.0]]),
                     C=np.array([[1.0, 0.0]]))


def test_identity_case_validates():
    rep = validate(identity_case())
    assert rep.ok
    assert rep.symmetric and rep.positive_definite and rep.saddle_factorized
    assert rep.saddle_residual <= 1e-12


def test_indefinite_mass_is_symmetric_but_not_pd():
    s = DaeSystem(M=np.diag([1.0, -1.0]), A=np.eye(2), G=np.array([[1.0], [0.0]]), B=np.ones((2, 1)),
                  C=np.ones((1, 2)))
    rep = validate(s)
    assert rep.symmetric
    assert not rep.positive_definite
    with pytest.raises(SingularSaddlePoint):
        rep.raise_if_failed()


def test_rank_deficient_constraint():
    s = DaeSystem(M=np.eye(3), A=np.eye(3), G=np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]),
                  B=np.ones((3, 1)), C=np.ones((1, 3)))
    rep = validate(s)
    assert not rep.saddle_factorized
    with pytest.raises(SingularSaddlePoint):
        rep.raise_if_failed()


def test_nonsymmetric_mass_reported():
    s = DaeSystem(M=np.array([[1.0, 0.5], [0.0, 1.0]]), A=np.eye(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 2)))
    rep = validate(s)
    assert not rep.symmetric
    with pytest.raises(NotSymmetric):
        rep.raise_if_failed()


def test_tiny_asymmetry_is_averaged():
    M = np.array([[2.0, 1.0], [1.0 + 1e-15, 3.0]])
    s = DaeSystem(M=M, A=np.eye(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 2)))
    assert (s.M != s.M.T).nnz == 0


@pytest.mark.parametrize(
    "alpha, C, expected",
    [(1.0, [[1.0, 0.0]], [[1.0, 0.0]]), (1e4, [[1.0, 0.0]], [[1e4, 0.0]]), (1e-2, [[2.0, 3.0]], [[0.02, 0.03]])],
)
def test_scaled_output(alpha, C, expected):
    s = DaeSystem(M=np.eye(2), A=-np.eye(2), G=None, B=np.ones((2, 1)), C=np.array(C), alpha=alpha)
    np.testing.assert_allclose(s.scaled_output(), expected, rtol=1e-15)
    # alpha is kept apart from C
    np.testing.assert_array_equal(s.C, C)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        DaeSystem(M=np.eye(3), A=np.eye(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 2)))
    with pytest.raises(DimensionMismatch):
        DaeSystem(M=np.eye(2), A=np.eye(2), G=np.ones((3, 1)), B=np.ones((2, 1)), C=np.ones((1, 2)))
    with pytest.raises(DimensionMismatch):
        DaeSystem(M=np.eye(2), A=np.eye(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 3)))


def test_nonpositive_alpha_rejected():
    with pytest.raises(DimensionMismatch):
        DaeSystem(M=np.eye(1), A=np.eye(1), G=None, B=np.ones((1, 1)), C=np.ones((1, 1)), alpha=0.0)


def test_from_triplets_matches_dense():
    s = DaeSystem.from_triplets(
        2, 1,
        M=([0, 1], [0, 1], [2.0, 1.0]),
        A=([0, 1, 0], [0, 1, 1], [-1.0, -2.0, 0.5]),
        G=([0, 1], [0, 0], [1.0, 1.0]),
        B=np.array([[1.0], [0.0]]),
        C=np.array([[0.0, 1.0]]),
    )
    np.testing.assert_array_equal(s.M.toarray(), np.diag([2.0, 1.0]))
    np.testing.assert_array_equal(s.A.toarray(), [[-1.0, 0.5], [0.0, -2.0]])
    np.testing.assert_array_equal(s.G.toarray(), [[1.0], [1.0]])
    assert (s.n_v, s.n_p, s.n_u, s.n_y) == (2, 1, 1, 1)


def test_empty_constraint_is_ode_case():
    s = DaeSystem(M=np.eye(2), A=-np.eye(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 2)))
    assert s.n_p == 0 and s.G.shape == (2, 0)
    assert validate(s).ok


def test_compact_pencil_blocks_agree(rng):
    s = random_system(rng, n_v=12, n_p=3)
    bigA, bigM, bigB, bigC = s.pencil().assemble()
    n = s.n_v
    np.testing.assert_array_equal(bigA[:n, :n].toarray(), s.A.toarray())
    np.testing.assert_array_equal(bigA[:n, n:].toarray(), s.G.toarray())
    np.testing.assert_array_equal(bigA[n:, :n].toarray(), s.G.T.toarray())
    assert bigA[n:, n:].nnz == 0
    np.testing.assert_array_equal(bigM[:n, :n].toarray(), s.M.toarray())
    assert bigM[n:, :].nnz == 0 and bigM[:, n:].nnz == 0
    assert isinstance(s.pencil(), CompactPencil)


def test_random_saddle_backward_error(rng):
    for seed in range(5):
        s = random_system(np.random.default_rng(seed), n_v=30, n_p=6)
        rep = validate(s, seed=seed)
        assert rep.ok, rep.messages
        assert rep.saddle_residual <= 1e-12


def test_systems_are_immutable():
    s = DaeSystem(M=sp.identity(2), A=-sp.identity(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 2)))
    with pytest.raises(Exception):
        s.alpha = 2.0
    with pytest.raises(ValueError):
        s.B[0, 0] = 5.0
