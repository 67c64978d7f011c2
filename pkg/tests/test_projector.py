import numpy as np
import pytest
from hypothesis import given, strategies as st

from dae2care.model import DaeSystem
from dae2care.oracle import dense_pi
from dae2care.projector import ProjectorContext, apply_pi, apply_pi_transpose, recover_pressure

from conftest import random_system, small_2x2


def _e2_system():
    return DaeSystem(M=np.eye(2), A=-np.eye(2), G=np.array([[1.0], [0.0]]), B=np.ones((2, 1)), C=np.ones((1, 2)))


def test_orthogonal_projection():
    ctx = ProjectorContext(_e2_system())
    np.testing.assert_allclose(apply_pi(ctx, np.array([1.0, 2.0])), [0.0, 2.0], atol=1e-15)
    np.testing.assert_allclose(apply_pi_transpose(ctx, np.array([0.0, 5.0])), [0.0, 5.0], atol=1e-15)


def test_weighted_projection():
    s = small_2x2()
    ctx = ProjectorContext(s)
    Pi = dense_pi(s)
    np.testing.assert_allclose(apply_pi(ctx, np.array([1.0, 0.0])), [2 / 3, -1 / 3], atol=1e-15)
    np.testing.assert_allclose(apply_pi_transpose(ctx, np.array([1.0, 0.0])), Pi.T @ [1.0, 0.0], atol=1e-15)
    # range(M^-1 G) is annihilated by Pi^T
    z = np.linalg.solve(s.M.toarray(), s.G.toarray()).ravel()
    np.testing.assert_allclose(apply_pi_transpose(ctx, z), 0.0, atol=1e-12)


def test_no_constraint_is_identity():
    s = DaeSystem(M=np.diag([2.0, 1.0]), A=-np.eye(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 2)))
    ctx = ProjectorContext(s)
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(apply_pi(ctx, W), W)
    np.testing.assert_array_equal(apply_pi_transpose(ctx, W), W)


def test_pressure_hand_value():
    s = DaeSystem(M=np.diag([2.0, 1.0]), A=np.eye(2), G=np.array([[1.0], [1.0]]), B=np.zeros((2, 1)),
                  C=np.ones((1, 2)))
    np.testing.assert_allclose(recover_pressure(s, np.array([1.0, -1.0]), np.zeros(1)), [1 / 3], rtol=1e-14)


def test_pressure_vanishes_and_empty():
    s = _e2_system()
    # A v + B u = [0, 1] lies in null(G^T M^-1)
    np.testing.assert_allclose(recover_pressure(s, np.array([0.0, -1.0]), np.array([0.0])), 0.0, atol=1e-15)
    s0 = DaeSystem(M=np.eye(2), A=-np.eye(2), G=None, B=np.ones((2, 1)), C=np.ones((1, 2)))
    assert recover_pressure(s0, np.zeros(2), np.zeros(1)).shape == (0,)


@given(seed=st.integers(0, 2**31 - 1), n_v=st.integers(4, 40), frac=st.floats(0.1, 0.5))
def test_pressure_makes_system_consistent(seed, n_v, frac):
    rng = np.random.default_rng(seed)
    n_p = max(1, int(frac * n_v))
    s = random_system(rng, n_v=n_v, n_p=n_p)
    ctx = ProjectorContext(s)
    v = apply_pi_transpose(ctx, rng.standard_normal(n_v))
    u = rng.standard_normal(s.n_u)
    p = recover_pressure(s, v, u, ctx)
    M, G = s.M.toarray(), s.G.toarray()
    r = G.T @ np.linalg.solve(M, s.A @ v + G @ p + s.B @ u)
    assert np.linalg.norm(r) <= 1e-10 * max(1.0, np.linalg.norm(s.A @ v + s.B @ u))


@given(seed=st.integers(0, 2**31 - 1), n_v=st.integers(3, 60), n_p=st.integers(1, 12), k=st.integers(1, 4))
def test_projector_identities(seed, n_v, n_p, k):
    n_p = min(n_p, n_v - 1)
    rng = np.random.default_rng(seed)
    s = random_system(rng, n_v=n_v, n_p=n_p)
    ctx = ProjectorContext(s)
    M, G = s.M.toarray(), s.G.toarray()
    W = rng.standard_normal((n_v, k))
    scale = np.linalg.norm(W)
    PW = apply_pi(ctx, W)
    assert np.linalg.norm(apply_pi(ctx, PW) - PW) <= 1e-10 * scale
    assert np.linalg.norm(apply_pi(ctx, M @ W) - M @ apply_pi_transpose(ctx, W)) <= 1e-10 * np.linalg.norm(M @ W)
    PtW = apply_pi_transpose(ctx, W)
    assert np.linalg.norm(G.T @ PtW) <= 1e-10 * scale
    assert np.linalg.norm(apply_pi_transpose(ctx, PtW) - PtW) <= 1e-10 * scale
    z = rng.standard_normal((n_p, 1))
    assert np.linalg.norm(apply_pi_transpose(ctx, np.linalg.solve(M, G @ z))) <= 1e-10 * np.linalg.norm(z)
    assert np.linalg.norm(PW - dense_pi(s) @ W) <= 1e-10 * scale
