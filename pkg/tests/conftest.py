import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from funclustvb.basis import basis_matrix
from funclustvb.core import FunctionalDataset, PriorConfig, VariationalState

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_spd(rng, M):
    W = rng.normal(size=(M, M))
    return W @ W.T / M + 0.1 * np.eye(M)


def tiny_instance(seed, K=None, N=None, n=None, M=None):
    """Random data, basis, priors and a valid (not fitted) variational state."""
    rng = np.random.default_rng(seed)
    K = K or int(rng.integers(1, 4))
    N = N or int(rng.integers(max(K, 3), 10))
    n = n or int(rng.integers(5, 10))
    M = M or int(rng.integers(4, min(n, 6) + 1))
    grid = np.sort(rng.uniform(0, 1, n))
    grid[0], grid[-1] = 0.0, 1.0
    B = basis_matrix(0.0, 1.0, M, grid)
    Y = rng.normal(size=(N, n)) * rng.uniform(0.2, 2.0) + rng.normal(size=(N, 1))
    priors = PriorConfig(K=K, d0=rng.uniform(0.2, 2.0, K), m0=rng.normal(size=(K, M)),
                         v0=rng.uniform(0.1, 10.0), shape_tau=rng.uniform(0.5, 3.0),
                         rate_tau=rng.uniform(0.5, 3.0), alpha0=rng.uniform(0.5, 3.0),
                         beta0=rng.uniform(0.5, 3.0))
    p = rng.dirichlet(np.ones(K), size=N)
    state = VariationalState(
        p_star=p,
        d_star=priors.d0 + p.sum(axis=0),
        m_star=rng.normal(size=(K, M)),
        Sigma_star=np.stack([random_spd(rng, M) for _ in range(K)]),
        A_star=rng.uniform(1.0, 20.0, K),
        R_star=rng.uniform(0.5, 10.0, K),
        mu_a=rng.normal(size=N),
        sigma2_a=rng.uniform(0.05, 1.0, N),
        alpha_star=priors.alpha0 + N / 2,
        beta_star=float(rng.uniform(1.0, 5.0)),
    )
    return FunctionalDataset(Y, grid), B, priors, state


@pytest.fixture
def instance():
    return tiny_instance(12345)


# one line per acceptance criterion, printed after the run regardless of capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
