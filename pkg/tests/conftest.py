import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, settings

from dae2care.model import DaeSystem

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_system(rng, n_v=8, n_p=2, n_u=2, n_y=2, alpha=1.0, stable=True):
    """Small dense-ish random system with SPD M and full-rank G."""
    Q = rng.standard_normal((n_v, n_v))
    M = Q @ Q.T / n_v + np.eye(n_v)
    S = rng.standard_normal((n_v, n_v))
    A = -(S @ S.T / n_v + 0.5 * np.eye(n_v)) + 0.3 * (S - S.T) if stable else rng.standard_normal((n_v, n_v))
    G = rng.standard_normal((n_v, n_p))
    B = rng.standard_normal((n_v, n_u))
    C = rng.standard_normal((n_y, n_v))
    return DaeSystem(M=sp.csr_matrix(M), A=sp.csr_matrix(A), G=sp.csr_matrix(G), B=B, C=C, alpha=alpha)


def small_2x2():
    """M = diag(2,1), G = [1;1], A = 0 (used by several hand examples)."""
    return DaeSystem(M=np.diag([2.0, 1.0]), A=np.zeros((2, 2)), G=np.array([[1.0], [1.0]]),
                     B=np.array([[1.0], [0.0]]), C=np.array([[1.0, 0.0]]))


def scalar(a=1.0, alpha=1.0):
    return DaeSystem(M=np.eye(1), A=a * np.eye(1), G=None, B=np.ones((1, 1)), C=np.ones((1, 1)), alpha=alpha)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
