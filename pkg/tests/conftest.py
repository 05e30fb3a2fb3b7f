import numpy as np
import pytest
from scipy.stats import ortho_group


def random_orthonormal(p, r, rng):
    """``p x r`` matrix with orthonormal columns."""
    if p == 1:
        return np.ones((1, 1))[:, :r]
    return ortho_group.rvs(p, random_state=rng)[:, :r]


def ar_factors(n, r1, r2, rng, lo=0.5, hi=0.9, burn=100):
    """Independent scalar AR(1) processes in every factor cell."""
    phi = rng.uniform(lo, hi, (r1, r2))
    X = np.zeros((n + burn, r1, r2))
    for t in range(1, n + burn):
        X[t] = phi * X[t - 1] + rng.standard_normal((r1, r2))
    return X[burn:]


def noiseless(n, p1, p2, r1, r2, seed=0):
    """``Y_t = A X_t P'`` with orthonormal loadings; returns ``(Y, A, P, X)``."""
    rng = np.random.default_rng(seed)
    A = random_orthonormal(p1, r1, rng)
    P = random_orthonormal(p2, r2, rng)
    X = ar_factors(n, r1, r2, rng)
    return np.einsum("ab,tbc,dc->tad", A, X, P), A, P, X


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, shown even when output is captured
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
