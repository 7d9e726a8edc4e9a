import numpy as np
import pytest
from hypothesis import given, strategies as st

from stapcov.core import (ATOL, RTOL, EigenSystem, close, eig_hermitian, psd_sqrt, reconstruct,
                          sample_covariance, steering_matrix, steering_vector, toeplitz_average,
                          toeplitz_deviation, trial_rng)
from conftest import random_hermitian


def scan_deviation(m):
    # per-diagonal brute force
    n = m.shape[0]
    worst = 0.0
    for off in range(-(n - 1), n):
        diag = np.array([m[i, i + off] for i in range(n) if 0 <= i + off < n])
        worst = max(worst, np.max(np.abs(diag - diag.mean())))
    return worst


def test_sample_covariance_rank_one():
    assert np.allclose(sample_covariance(np.array([[1.0], [0.0]])), [[1, 0], [0, 0]])


def test_sample_covariance_identity():
    k = 5
    assert np.allclose(sample_covariance(np.sqrt(k) * np.eye(k)), np.eye(k))


def test_sample_covariance_matches_loop(rng):
    z = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
    ref = np.zeros((4, 4), complex)
    for k in range(8):
        ref += np.outer(z[:, k], z[:, k].conj())
    assert np.allclose(sample_covariance(z), ref / 8, atol=1e-14)


def test_sample_covariance_empty():
    with pytest.raises(ValueError):
        sample_covariance(np.zeros((3, 0)))


def test_sample_covariance_psd_and_hermitian(rng):
    z = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    s = sample_covariance(z)
    assert np.array_equal(s, s.conj().T)
    assert np.all(np.diag(s).imag == 0)
    w = np.linalg.eigvalsh(s)
    assert w.min() >= -1e-10 * w.max()
    assert np.linalg.matrix_rank(s) <= 3


def test_eig_diagonal():
    es = eig_hermitian(np.diag([1.0, 3.0, 2.0]))
    assert np.allclose(es.values, [3, 2, 1])
    assert np.allclose(np.abs(es.vectors), [[0, 0, 1], [1, 0, 0], [0, 1, 0]])


def test_eig_degenerate():
    es = eig_hermitian(2.5 * np.eye(4))
    assert np.allclose(es.values, 2.5)
    assert np.allclose(es.reconstruct(), 2.5 * np.eye(4))


def test_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[1.0, 1.0], [0.0, 1.0]]))


@given(st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_eig_roundtrip_and_conventions(n, seed):
    m = random_hermitian(np.random.default_rng(seed), n)
    es = eig_hermitian(m)
    assert np.linalg.norm(reconstruct(es.vectors, es.values) - m) <= 1e-9 * max(np.linalg.norm(m), 1)
    assert np.allclose(es.vectors.conj().T @ es.vectors, np.eye(n), atol=1e-10)
    assert np.all(np.diff(es.values) <= 0)
    for col in es.vectors.T:
        lead = col[np.argmax(np.abs(col) > 1e-12)]
        assert abs(lead.imag) < 1e-12 and lead.real > 0


def test_reconstruct_dimension_mismatch():
    with pytest.raises(ValueError):
        reconstruct(np.eye(3), [1.0, 2.0])


def test_reconstruct_hermitian(rng):
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
    m = reconstruct(q, rng.standard_normal(5))
    assert np.array_equal(m, m.conj().T)


def test_toeplitz_deviation_examples():
    assert toeplitz_deviation(np.array([[7.0]])) == 0.0
    assert toeplitz_deviation(np.array([[1.0, 0.0], [0.0, 2.0]])) == pytest.approx(0.5)
    from scipy.linalg import toeplitz
    t = toeplitz([1, 2 + 1j, 3], [1, 2 - 1j, 5])
    assert toeplitz_deviation(t) == 0.0


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_toeplitz_deviation_scan_oracle(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    assert toeplitz_deviation(m) == pytest.approx(scan_deviation(m), abs=1e-13)
    from scipy.linalg import toeplitz
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    t = toeplitz(c, c.conj())
    assert toeplitz_deviation(t) < 1e-14
    assert toeplitz_deviation(m + t) == pytest.approx(scan_deviation(m + t), abs=1e-12)
    assert toeplitz_deviation(toeplitz_average(m)) < 1e-14


def test_steering_examples():
    assert np.allclose(steering_vector(0.0, 0.0, 1000.0, 3, 4), np.ones(12))
    assert np.allclose(steering_vector(0.0, 500.0, 1000.0, 1, 2), [1, -1])


def test_steering_scalar_oracle():
    az, fd, prf, d = 0.37, 123.0, 1000.0, 0.5
    s = steering_vector(az, fd, prf, 2, 2, d)
    ref = [np.exp(2j * np.pi * (p * fd / prf + j * d * np.sin(az))) for p in range(2) for j in range(2)]
    assert np.allclose(s, ref)
    assert np.allclose(np.abs(s), 1)
    m = steering_matrix([0.1, 0.37], fd, prf, 2, 2, d)
    assert np.allclose(m[:, 1], s)


def test_close_tolerances():
    assert ATOL == 1e-10 and RTOL == 1e-8
    assert close(1.0 + 5e-9, 1.0)
    assert not close(1.0 + 1e-7, 1.0)


def test_psd_sqrt_floors_negative(rng):
    a = rng.standard_normal((4, 2))
    m = a @ a.T - 1e-14 * np.eye(4)
    r = psd_sqrt(m)
    assert np.allclose(r @ r, a @ a.T, atol=1e-10)


def test_trial_rng_streams_independent_of_order():
    a = trial_rng(3, 1, 2).standard_normal(3)
    trial_rng(3, 0).standard_normal(10)
    assert np.array_equal(a, trial_rng(3, 1, 2).standard_normal(3))
    assert not np.array_equal(a, trial_rng(3, 2, 1).standard_normal(3))


def test_eigensystem_reconstruct():
    es = EigenSystem(np.eye(2, dtype=complex), np.array([2.0, 1.0]))
    assert es.dim == 2
    assert np.allclose(es.reconstruct([5, 1]), np.diag([5, 1]))
