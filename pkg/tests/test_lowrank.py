import numpy as np
import pytest
from hypothesis import given, strategies as st

from dae2care.lowrank import (
    LowRankFactor,
    SignedResidualFactor,
    build_line_search_poly,
    combine_after_step,
    concat_solution,
    gram_norm,
    lyapunov_norm,
)


def dense_quartic(R, W, D, xi):
    N = (1 - xi) * R.dense() + xi * W @ W.T - xi**2 * D @ D.T
    return np.linalg.norm(N, "fro") ** 2


def random_factor(rng, n, n_pos, n_neg):
    return SignedResidualFactor.from_parts(rng.standard_normal((n, n_pos)), rng.standard_normal((n, n_neg)))


def test_gram_norm_plus_minus():
    R = SignedResidualFactor(np.eye(2), [1, -1])
    assert gram_norm(R, "frobenius") == pytest.approx(np.sqrt(2), abs=1e-15)
    assert gram_norm(R, "spectral") == pytest.approx(1.0, abs=1e-15)


def test_gram_norm_rank_one():
    z = np.array([1.0, 2.0, 2.0])
    R = SignedResidualFactor(z, [1])
    assert gram_norm(R, "frobenius") == pytest.approx(9.0, rel=1e-14)
    assert gram_norm(R, "spectral") == pytest.approx(9.0, rel=1e-14)
    assert lyapunov_norm(z) == pytest.approx(9.0, rel=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_gram_norm_against_dense(seed):
    rng = np.random.default_rng(seed)
    R = random_factor(rng, 50, 4, 2)
    D = R.dense()
    assert gram_norm(R, "frobenius") == pytest.approx(np.linalg.norm(D, "fro"), rel=1e-12)
    assert gram_norm(R, "spectral") == pytest.approx(np.linalg.norm(D, 2), rel=1e-12)


def test_signature_validation():
    with pytest.raises(ValueError):
        SignedResidualFactor(np.eye(2), [-1, 1])
    with pytest.raises(ValueError):
        SignedResidualFactor(np.eye(2), [1, 0.5])
    with pytest.raises(ValueError):
        SignedResidualFactor(np.eye(2), [1])


def test_compress_keeps_matrix(rng):
    P = rng.standard_normal((20, 3))
    R = SignedResidualFactor.from_parts(np.hstack([P, P]), P[:, :1])
    C = R.compress()
    assert C.U.shape[1] <= 3
    np.testing.assert_allclose(C.dense(), R.dense(), atol=1e-12)


def test_quartic_without_update(rng):
    R = random_factor(rng, 10, 2, 1)
    poly = build_line_search_poly(R, np.zeros((10, 0)), np.zeros((10, 0)))
    for xi in np.linspace(0, 1, 5):
        assert poly(xi) == pytest.approx((1 - xi) ** 2 * poly.phi0, rel=1e-12, abs=1e-14)


def test_quartic_scalar():
    R = SignedResidualFactor(np.ones((1, 1)), [1])
    poly = build_line_search_poly(R, np.ones((1, 1)), np.ones((1, 1)))
    np.testing.assert_allclose(poly.coeffs, [1, 0, -2, 0, 1], atol=1e-14)
    for xi in (0.0, 0.3, 1.0):
        assert poly(xi) == pytest.approx((1 - xi**2) ** 2, abs=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_quartic_against_dense(seed):
    rng = np.random.default_rng(seed)
    R = random_factor(rng, 30, 3, 2)
    W, D = rng.standard_normal((30, 4)), rng.standard_normal((30, 2))
    poly = build_line_search_poly(R, W, D)
    assert poly(0.37) == pytest.approx(dense_quartic(R, W, D, 0.37), rel=1e-11)
    assert poly(0.0) == pytest.approx(np.linalg.norm(R.dense(), "fro") ** 2, rel=1e-12)
    assert poly(1.0) == pytest.approx(np.linalg.norm(W @ W.T - D @ D.T, "fro") ** 2, rel=1e-11)


def test_derivative_roots():
    R = SignedResidualFactor(np.ones((1, 1)), [1])
    poly = build_line_search_poly(R, np.ones((1, 1)), np.ones((1, 1)))
    # phi = (1 - xi^2)^2 has stationary points -1, 0, 1
    np.testing.assert_allclose(np.sort(poly.derivative_roots()), [-1, 0, 1], atol=1e-7)


def test_full_step_drops_old_columns(rng):
    R = random_factor(rng, 6, 2, 2)
    W, D = rng.standard_normal((6, 3)), rng.standard_normal((6, 1))
    out = combine_after_step(R, W, D, 1.0)
    np.testing.assert_array_equal(out.U, np.hstack([W, D]))
    np.testing.assert_array_equal(out.signature, [1, 1, 1, -1])


def test_small_step_keeps_old_residual(rng):
    R = random_factor(rng, 6, 2, 1)
    out = combine_after_step(R, rng.standard_normal((6, 2)), rng.standard_normal((6, 1)), 1e-12)
    np.testing.assert_allclose(out.dense(), R.dense(), atol=1e-5)


def test_half_step_scalar():
    R = SignedResidualFactor.from_parts(np.ones((1, 1)), np.zeros((1, 1)))
    W, D = np.array([[2.0]]), np.array([[3.0]])
    out = combine_after_step(R, W, D, 0.5)
    np.testing.assert_allclose(out.positive, [[np.sqrt(0.5), np.sqrt(0.5) * 2]])
    np.testing.assert_allclose(out.negative, [[0.0, 1.5]])
    poly = build_line_search_poly(R, W, D)
    assert gram_norm(out) ** 2 == pytest.approx(poly(0.5), rel=1e-14)


@given(seed=st.integers(0, 2**31 - 1), xi=st.floats(0.01, 1.0))
def test_combine_consistent_with_quartic(seed, xi):
    rng = np.random.default_rng(seed)
    R = random_factor(rng, 25, 3, 2)
    W, D = rng.standard_normal((25, 3)), rng.standard_normal((25, 2))
    poly = build_line_search_poly(R, W, D)
    assert gram_norm(combine_after_step(R, W, D, xi)) ** 2 == pytest.approx(float(poly(xi)), rel=1e-10)


def test_step_size_domain(rng):
    R = random_factor(rng, 4, 1, 1)
    for xi in (0.0, 1.5):
        with pytest.raises(ValueError):
            combine_after_step(R, np.ones((4, 1)), np.ones((4, 1)), xi)
        with pytest.raises(ValueError):
            concat_solution(None, LowRankFactor(np.ones((4, 1))), xi)


def test_concat_solution():
    Z = concat_solution(LowRankFactor(np.array([[1.0]])), LowRankFactor(np.array([[2.0]])), 0.5)
    assert Z.dense()[0, 0] == pytest.approx(2.5, rel=1e-15)
    new = LowRankFactor(np.arange(4.0).reshape(2, 2))
    np.testing.assert_array_equal(concat_solution(LowRankFactor(np.ones((2, 1))), new, 1.0).Z, new.Z)


def test_concat_dense(rng):
    Zo, Zn = LowRankFactor(rng.standard_normal((20, 3))), LowRankFactor(rng.standard_normal((20, 3)))
    out = concat_solution(Zo, Zn, 0.25)
    np.testing.assert_allclose(out.dense(), 0.75 * Zo.dense() + 0.25 * Zn.dense(), atol=1e-13)
