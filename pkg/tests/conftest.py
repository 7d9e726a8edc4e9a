import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stapcov.cncml import solve_cncml
from stapcov.core import complex_gaussian, sample_covariance

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_sample_cov(rng, n, k, scale=None):
    """Sample covariance of K coloured complex Gaussian snapshots."""
    g = complex_gaussian(rng, (n, k))
    if scale is not None:
        g = np.sqrt(np.asarray(scale))[:, None] * g
    a = complex_gaussian(rng, (n, n))
    q, _ = np.linalg.qr(a)
    return sample_covariance(q @ g)


def random_hermitian(rng, n):
    a = complex_gaussian(rng, (n, n))
    return 0.5 * (a + a.conj().T)


def random_spd(rng, n, floor=0.1):
    a = complex_gaussian(rng, (n, n))
    return a @ a.conj().T / n + floor * np.eye(n)


def dft_matrix(n):
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def case_instance(rng, case, n=6):
    """Whitened spectrum (descending) and kmax landing in the requested case."""
    if case == "identity":
        return np.sort(rng.uniform(0.05, 1.0, n))[::-1], float(rng.uniform(1, 50))
    if case == "fml":
        d = np.sort(rng.uniform(0.05, 8.0, n))[::-1]
        d[0] = max(d[0], 1.5)
        d[-1] = min(d[-1], 0.9)  # some eigenvalue at or below the noise floor
        return d, float(d[0] * rng.uniform(1.0, 3.0))
    while True:
        d = np.sort(np.concatenate([rng.uniform(5, 200, 2), rng.uniform(0.05, 3, n - 3),
                                    [rng.uniform(0.05, 0.9)]]))[::-1]
        k = float(rng.uniform(1.2, d[0] * 0.9))
        if solve_cncml(d, k).case_tag == case:
            return d, k


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
