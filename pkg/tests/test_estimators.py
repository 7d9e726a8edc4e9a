import numpy as np
import pytest
from hypothesis import given, strategies as st

from stapcov.core import eig_hermitian, reconstruct, sample_covariance, toeplitz_deviation
from stapcov.estimators import (LOOC_GRID, CovarianceEstimate, eigencanceler, fml, inverse_of,
                                itam, looc, rcml, rcml_eigenvalues, rcml_lb, smi, wax_kailath)
from conftest import random_sample_cov
from oracles import lb_objective, loo_scores, rcml_program_min


def spectrum(est):
    return np.sort(np.linalg.eigvalsh(est.matrix))[::-1]


def diag_cov(d):
    return np.diag(np.asarray(d, dtype=complex))


def test_smi_passthrough(rng):
    s = random_sample_cov(rng, 5, 3)
    est = smi(s)
    assert est.estimator_tag == "SMI"
    assert np.array_equal(est.matrix, s)
    assert np.array_equal(smi(np.eye(3)).matrix, np.eye(3))


def test_fml_examples():
    est = fml(diag_cov([5, 3, 0.5]), 1.0)
    assert np.allclose(spectrum(est), [5, 3, 1])
    assert est.rank_used == 2
    est = fml(2.0 * np.eye(4), 2.0)
    assert np.allclose(est.matrix, 2 * np.eye(4)) and est.rank_used == 0
    with pytest.raises(ValueError):
        fml(np.eye(2), 0.0)


def test_rcml_examples():
    assert np.allclose(spectrum(rcml(diag_cov([4, 3, 0.5, 0.2]), 1.0, 2)), [4, 3, 1, 1])
    assert np.allclose(rcml(diag_cov([0.5, 0.4]), 1.0, 2).matrix, np.eye(2))
    with pytest.raises(ValueError):
        rcml(np.eye(3), 1.0, 4)
    with pytest.raises(ValueError):
        rcml(np.eye(3), -1.0, 1)


def test_rcml_matches_x_domain_form():
    # R-domain clamp equals the inverse of min(1, 1/d_bar) in the X domain
    d = np.array([7.0, 2.5, 0.8, 0.3])
    sigma2 = 0.9
    lam = np.ones(4)
    lam[:2] = np.minimum(1.0, sigma2 / d[:2])
    assert np.allclose(rcml_eigenvalues(d, sigma2, 2), sigma2 / lam)


@pytest.mark.parametrize("seed", range(10))
def test_rcml_convex_solver_oracle(seed):
    rng = np.random.default_rng(seed)
    s = random_sample_cov(rng, 8, 16, scale=np.geomspace(30, 1, 8))
    est = rcml(s, 1.0, 3)
    d = eig_hermitian(s).values
    obj_cf = float(np.sum(d / est.eigenvalues) + np.sum(np.log(est.eigenvalues)))
    obj_num, lam = rcml_program_min(d, 3)
    assert obj_cf <= obj_num + 1e-6
    assert np.allclose(1.0 / lam, est.eigenvalues, atol=1e-6 * max(1, d[0]))


@given(st.integers(2, 10), st.integers(0, 2**32 - 1), st.floats(0.05, 5.0))
def test_fml_equals_rcml(n, seed, sigma2):
    s = random_sample_cov(np.random.default_rng(seed), n, n + 3)
    f = fml(s, sigma2)
    r = rcml(s, sigma2, int(np.sum(eig_hermitian(s).values > sigma2)))
    assert np.allclose(f.matrix, r.matrix, atol=1e-10, rtol=0)


@given(st.integers(2, 10), st.integers(0, 2**32 - 1), st.floats(0.05, 5.0), st.data())
def test_clamp_invariants(n, seed, sigma2, data):
    s = random_sample_cov(np.random.default_rng(seed), n, n + 2)
    rank = data.draw(st.integers(0, n - 1))
    for est in (fml(s, sigma2), rcml(s, sigma2, rank), rcml_lb(s, sigma2, rank)):
        e = est.eigenvalues
        assert np.all(e >= est.noise_used * (1 - 1e-12))
        assert np.all(np.diff(e) <= 1e-12 * e[0])
        assert np.all(spectrum(est) >= est.noise_used * (1 - 1e-9))
        if est.estimator_tag == "RCML":
            assert np.sum(spectrum(est) > est.noise_used * (1 + 1e-9)) <= est.rank_used


def test_rcml_lb_examples():
    est = rcml_lb(diag_cov([10, 2, 4]), 1.0, 1)
    assert est.noise_used == pytest.approx(3.0)
    assert np.allclose(spectrum(est), [10, 3, 3])
    est = rcml_lb(diag_cov([10, 2, 4]), 5.0, 1)
    assert est.noise_used == 5.0
    assert np.allclose(spectrum(est), [10, 5, 5])
    with pytest.raises(ValueError):
        rcml_lb(np.eye(3), 1.0, 3)


@pytest.mark.parametrize("seed", range(10))
def test_rcml_lb_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    s = random_sample_cov(rng, 6, 8, scale=np.geomspace(20, 0.5, 6))
    d = eig_hermitian(s).values
    c_hat = float(rng.uniform(0, 1.5))
    rank = int(rng.integers(0, 6))
    est = rcml_lb(s, c_hat, rank)
    grid = np.arange(c_hat, 2 * d[0] + 1, 1e-4)
    c_grid = grid[np.argmin(lb_objective(d, rank, grid))]
    assert abs(est.noise_used - c_grid) <= 1e-4 + 1e-12


def test_wax_kailath_examples():
    assert np.allclose(spectrum(wax_kailath(diag_cov([10, 2, 4]), 1)), [10, 3, 3])
    assert np.allclose(spectrum(wax_kailath(diag_cov([3, 3, 2.5]), 2)), [3, 3, 2.5])
    assert wax_kailath(diag_cov([10, 2, 4]), 1).estimator_tag == "WAX_KAILATH"


@given(st.integers(3, 10), st.integers(0, 2**32 - 1), st.data())
def test_wax_kailath_vs_rcml_lb(n, seed, data):
    s = random_sample_cov(np.random.default_rng(seed), n, n)
    rank = data.draw(st.integers(1, n - 1))
    w = wax_kailath(s, rank).eigenvalues
    lb = rcml_lb(s, 0.0, rank).eigenvalues
    d = eig_hermitian(s).values
    tail = np.mean(d[rank:])
    differ = np.abs(w - lb) > 1e-12
    expected = np.zeros(n, bool)
    expected[:rank] = d[:rank] < tail
    assert np.array_equal(differ, expected)


def test_looc_independent_oracle(rng):
    z = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    est = looc(z)
    ref = loo_scores(z, LOOC_GRID)
    ok = [(v, b) for v, b in zip(ref, LOOC_GRID) if v is not None]
    best = max(v for v, _ in ok)
    beta = next(b for v, b in ok if v == best)
    assert est.annotations["beta"] == pytest.approx(beta)
    for b, v in zip(LOOC_GRID, ref):
        got = est.annotations["scores"][float(b)]
        assert (got is None) == (v is None)
        if v is not None:
            assert got == pytest.approx(v, rel=1e-10)
    s = sample_covariance(z)
    b = est.annotations["beta"]
    assert np.allclose(est.matrix, b * np.diag(np.diag(s)) + (1 - b) * s)


def test_looc_identical_samples_first_max():
    z = np.array([[1.0, 1.0], [0.5j, 0.5j]])
    est = looc(z)
    scores = [est.annotations["scores"][float(b)] for b in LOOC_GRID]
    valid = [v for v in scores if v is not None]
    first = next(b for b, v in zip(LOOC_GRID, scores) if v is not None and v == max(valid))
    assert est.annotations["beta"] == first


def test_looc_errors():
    with pytest.raises(ValueError):
        looc(np.ones((3, 1)))
    with pytest.raises(np.linalg.LinAlgError):
        looc(np.zeros((3, 4)))


def test_eigencanceler_examples():
    est = eigencanceler(diag_cov([5.0, 3.0, 1.0]), 1.0, 2)
    assert np.allclose(est.inverse, np.diag([0, 0, 1]))
    assert est.inverse_available and inverse_of(est) is est.inverse
    s = 2.0 * np.eye(3)
    est = eigencanceler(s, 2.0, 1)
    v1 = eig_hermitian(s).vectors[:, 0]
    assert np.allclose(est.inverse, (np.eye(3) - np.outer(v1, v1.conj())) / 2.0)
    with pytest.raises(ValueError):
        eigencanceler(s, 2.0, 3)


def test_eigencanceler_matrix_field(rng):
    s = random_sample_cov(rng, 6, 10, scale=[50, 20, 1, 1, 1, 1])
    est = eigencanceler(s, 1.0, 2)
    es = eig_hermitian(s)
    ref = reconstruct(es.vectors, np.concatenate([np.maximum(es.values[:2], 1.0), np.ones(4)]))
    assert np.allclose(est.matrix, ref)


def test_itam_toeplitz_fixed_point():
    n = np.arange(6)
    lag = n[:, None] - n[None, :]
    clutter = 10 * np.exp(0.7j * lag) + 4 * np.exp(-1.3j * lag)
    m = clutter + 1.0 * np.eye(6)
    est = itam(m, 2)
    assert est.annotations["iterations"] == 1 and est.annotations["converged"]
    assert np.allclose(est.matrix, m, atol=1e-9)


def test_itam_one_exponential(rng):
    n = np.arange(4)
    lag = n[:, None] - n[None, :]
    truth = 20 * np.exp(0.9j * lag) + np.eye(4)
    z = np.linalg.cholesky(truth) @ (rng.standard_normal((4, 12)) + 1j * rng.standard_normal((4, 12))) / np.sqrt(2)
    est = itam(sample_covariance(z), 1, tol=1e-8)
    clutter = est.matrix - est.noise_used * np.eye(4)
    assert est.annotations["converged"]
    assert np.linalg.matrix_rank(clutter, tol=1e-8 * np.abs(clutter).max()) <= 1
    assert toeplitz_deviation(clutter) < 1e-8


def test_itam_identity():
    est = itam(np.eye(5), 1)
    assert np.allclose(est.matrix - est.noise_used * np.eye(5), 0, atol=1e-12)
    assert est.noise_used == pytest.approx(1.0)


def test_itam_nonconvergence_is_reported(rng):
    s = random_sample_cov(rng, 6, 8)
    est = itam(s, 2, max_iters=1, tol=0.0)
    assert est.annotations == {**est.annotations, "iterations": 1, "converged": False}


def test_inverse_of_smi_pseudo_inverse(rng):
    s = random_sample_cov(rng, 6, 3)
    inv = inverse_of(smi(s))
    assert np.allclose(inv, np.linalg.pinv(s, rcond=1e-10, hermitian=True))


def test_inverse_of_spectral_and_plain(rng):
    s = random_sample_cov(rng, 5, 9)
    est = rcml(s, 0.5, 2)
    assert np.allclose(inverse_of(est) @ est.matrix, np.eye(5), atol=1e-10)
    plain = CovarianceEstimate(matrix=2 * np.eye(3), estimator_tag="X")
    assert np.allclose(inverse_of(plain), 0.5 * np.eye(3))
