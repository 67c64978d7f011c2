import numpy as np
import pytest

from dae2care.errors import MaxIterations, NoAdmissibleStep
from dae2care.lowrank import LineSearchPolynomial
from dae2care.newton import (
    SolverConfig,
    exact_start_controller,
    forcing_parameter,
    line_search,
    newton_init,
    newton_solve,
)
from dae2care.oracle import build_theta, dense_care_solve, dense_lyapunov, pencil_eigenvalues
from dae2care.problems import ProblemSpec, generate, initial_feedback

from conftest import scalar

ROOT2 = 1 + np.sqrt(2)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(beta=0.95)
    with pytest.raises(ValueError):
        SolverConfig(line_search="bogus")
    c = SolverConfig().replace(tol_newton=1e-6)
    assert c.tol_newton == 1e-6


def test_init_norm_scalar():
    st = newton_init(scalar(), 2 * np.ones((1, 1)))
    np.testing.assert_array_equal(st.residual.U, [[1.0, 2.0]])
    assert st.residual_norm == pytest.approx(5.0)


def test_init_zero_feedback_projected():
    spec = ProblemSpec("stokes2d", nx=4, ny=4)
    s = generate(spec)
    st = newton_init(s)
    assert st.residual.negative.shape[1] == 0
    W = st.residual.positive
    assert st.residual_norm == pytest.approx(np.linalg.norm(W @ W.T, "fro"), rel=1e-12)


def test_scalar_iterates():
    ks = []
    cfg = SolverConfig(inner_tol_mode="fixed", fixed_inner_tol=1e-14, tol_newton=1e-12)
    res = newton_solve(scalar(), 2 * np.ones((1, 1)), cfg, callback=lambda st, adi: ks.append(st.K[0, 0]))
    # the first shift sits on the open-loop eigenvalue and is nudged, so K1 is only approximate
    assert ks[0] == pytest.approx(2.5, rel=1e-3)
    assert ks[1] == pytest.approx(29 / 12, rel=1e-3)
    assert res.K[0, 0] == pytest.approx(ROOT2, abs=1e-10)
    assert len(ks) <= 5


def test_single_step_matches_dense_lyapunov():
    s = generate(ProblemSpec("stokes2d", nx=4, ny=4))
    cfg = SolverConfig(inner_tol_mode="fixed", fixed_inner_tol=1e-13, max_newton=1)
    with pytest.raises(MaxIterations) as info:
        newton_solve(s, None, cfg.replace(tol_newton=1e-300))
    K1 = info.value.result.K
    proj = build_theta(s)
    X = dense_lyapunov(proj.A, proj.M, proj.C.T @ proj.C)
    K_ref = s.M @ (proj.theta_r @ X @ proj.theta_r.T) @ s.B
    assert np.linalg.norm(K1 - K_ref) <= 1e-8 * np.linalg.norm(K_ref)


def test_zero_residual_returns_immediately():
    s = scalar(a=-1.0)
    s0 = type(s)(M=s.M, A=s.A, G=None, B=s.B, C=np.zeros((1, 1)))
    res = newton_solve(s0, None)
    assert len(res.log) == 0 and res.converged
    np.testing.assert_array_equal(res.K, 0.0)


def test_forcing_and_controller():
    cfg = SolverConfig()
    assert forcing_parameter(cfg, 2.0) == 0.1
    assert forcing_parameter(cfg, 0.01) == pytest.approx(0.009)
    tol = exact_start_controller(cfg, 0, 2.0, residual_norm=7.0)
    assert not tol.relative and tol.value == pytest.approx(0.7)
    es = cfg.replace(exact_start=True)
    t0 = exact_start_controller(es, 0, 1.0)
    assert t0.relative and t0.value == 1e-2
    t2 = exact_start_controller(es, 2, 0.3, residual_norm=1.0)
    assert not t2.relative and t2.value == pytest.approx(0.1)
    t1 = exact_start_controller(es, 1, 0.3, residual_norm=1.0)
    assert not t1.relative


def test_line_search_full_step_cases():
    assert line_search(LineSearchPolynomial(np.array([4.0, -8.0, 4.0, 0.0, 0.0])), 0.1) == 1.0
    assert line_search(LineSearchPolynomial(np.array([1.0, 0.0, -2.0, 0.0, 1.0])), 0.1) == 1.0


def test_line_search_halves():
    p = np.polynomial.Polynomial([1.0, -1.2, 1.5]) ** 2
    poly = LineSearchPolynomial(p.coef)
    # sqrt(phi(1)) = 1.3 fails, sqrt(phi(0.5)) = 0.775 <= 0.95 passes
    assert line_search(poly, 0.1) == 0.5


def test_line_search_polymin_and_none():
    poly = LineSearchPolynomial((np.polynomial.Polynomial([1.0, -1.2, 1.5]) ** 2).coef)
    xi = line_search(poly, 0.1, "polymin")
    assert 0 < xi < 1 and float(poly(xi)) <= float(poly(0.5))
    assert line_search(poly, 0.1, "none") == 1.0


def test_line_search_gives_up():
    poly = LineSearchPolynomial(np.array([1.0, 1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(NoAdmissibleStep):
        line_search(poly, 0.1, max_backtracks=5)


def test_max_iterations_carries_result():
    s = generate(ProblemSpec("stokes2d", nx=4, ny=4))
    with pytest.raises(MaxIterations) as info:
        newton_solve(s, None, SolverConfig(max_newton=1, tol_newton=1e-14))
    assert info.value.result is not None and len(info.value.result.log) == 1


@pytest.mark.parametrize("mode", ["lowrank", "explicit"])
def test_residual_modes_agree(mode):
    s = generate(ProblemSpec("stokes2d", nx=5, ny=5, convection=1.0))
    res = newton_solve(s, None, SolverConfig(residual_mode=mode, tol_newton=1e-9))
    proj = build_theta(s)
    ref = dense_care_solve(proj, s.B, s.M)
    assert np.linalg.norm(res.K - ref.K) <= 1e-6 * np.linalg.norm(ref.K)


def test_unstable_instance_converges_and_stabilizes():
    s = generate(ProblemSpec("random_sparse", n_v=60, n_p=12, mu=3.0, seed=2))
    K0 = initial_feedback(s)
    res = newton_solve(s, K0, SolverConfig(tol_newton=1e-10, exact_start=True))
    assert res.converged
    assert pencil_eigenvalues(s, res.K).real.max() < 0


def test_log_totals_consistent():
    s = generate(ProblemSpec("stokes2d", nx=5, ny=5))
    res = newton_solve(s, None, SolverConfig(keep_solution=True))
    t = res.totals
    assert t["n_kn"] == len(res.log)
    assert t["n_adi"] == sum(r.adi_steps for r in res.log.rows)
    assert t["n_lin_solve"] <= t["n_adi"]
    assert res.Z is not None and res.Z.shape[0] == s.n_v
