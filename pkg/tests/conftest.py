import numpy as np
import pytest


def dense_car_covariance(n, order, a, sigma2):
    """sigma2 (I - M)^-1 built entry by entry from the neighbour weights."""
    M = np.zeros((n, n))
    if order == 1:
        weights = {1: a}
    else:
        d = 2 * a * a + 1
        weights = {1: 2 * a / d, 2: -a * a / d}
    for i in range(n):
        for dist, w in weights.items():
            M[i, (i + dist) % n] += w
            M[i, (i - dist) % n] += w
    return sigma2 * np.linalg.inv(np.eye(n) - M)


def dense_gaussian_logpdf(cov, x):
    n = len(x)
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0
    return -0.5 * (n * np.log(2 * np.pi) + logdet + x @ np.linalg.solve(cov, x))


def mp_gaussian_logpdf(cov, x, dps=60):
    """Same density in high precision; the float matrix entries are taken as exact."""
    import mpmath

    with mpmath.workdps(dps):
        c = mpmath.matrix(np.asarray(cov).tolist())
        v = mpmath.matrix(np.asarray(x).tolist())
        chol = mpmath.cholesky(c)
        logdet = 2 * sum(mpmath.log(chol[i, i]) for i in range(len(x)))
        quad = (v.T * mpmath.cholesky_solve(c, v))[0]
        return float(-0.5 * (len(x) * mpmath.log(2 * mpmath.pi) + logdet + quad))


def condition_number(curve):
    lam = curve.eigenvalues()
    return lam.max() / lam.min()


def central_diff(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
