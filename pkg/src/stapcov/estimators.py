"""Covariance estimators that act on the sample covariance spectrum.

Every estimator returns a :class:`CovarianceEstimate`. The spectral ones
(FML, RCML, RCML_LB, Wax-Kailath, eigencanceler) keep the sample
eigenvectors and only rewrite eigenvalues, so they also expose the
eigenvalues they produced in ``eigenvalues`` and the basis in ``vectors``.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import (as_samples, eig_hermitian, reconstruct, sample_covariance,
                   spectrum, toeplitz_average, toeplitz_deviation)

LOOC_GRID = np.array([0.01] + [round(0.05 * i, 2) for i in range(1, 20)] + [0.99])


@dataclass
class CovarianceEstimate:
    """Output of an estimator.

    Attributes
    ----------
    matrix : ndarray, shape (N, N)
        The estimate itself.
    estimator_tag : str
    inverse : ndarray or None
        Explicit inverse when the estimator's natural output is one.
    rank_used, noise_used, condition_number_used : optional
        Constraint values that were actually applied.
    eigenvalues, vectors : ndarray or None
        Spectrum of ``matrix`` in the sample eigenbasis (descending).
    annotations : dict
        Estimator-specific diagnostics.
    """

    matrix: np.ndarray
    estimator_tag: str
    inverse: np.ndarray = None
    rank_used: int = None
    noise_used: float = None
    condition_number_used: float = None
    eigenvalues: np.ndarray = None
    vectors: np.ndarray = None
    annotations: dict = field(default_factory=dict)

    @property
    def inverse_available(self):
        return self.inverse is not None

    @property
    def dim(self):
        return self.matrix.shape[0]


def _check_noise(noise):
    if not noise > 0:
        raise ValueError(f"noise power must be positive, got {noise}")


def _check_rank(rank, n, upper_open=False, lower=0):
    hi = n - 1 if upper_open else n
    if not (lower <= rank <= hi):
        raise ValueError(f"rank must lie in [{lower}, {hi}], got {rank}")


def _spectral(tag, es, values, **kw):
    values = np.asarray(values, dtype=float)
    return CovarianceEstimate(matrix=reconstruct(es.vectors, values),
                              estimator_tag=tag, eigenvalues=values,
                              vectors=es.vectors, **kw)


def smi(s):
    """Sample matrix pass-through, tagged ``SMI``."""
    s = np.asarray(s, dtype=complex)
    return CovarianceEstimate(matrix=s.copy(), estimator_tag="SMI")


def rcml_eigenvalues(d, noise, rank):
    """Eigenvalues of the rank-constrained ML estimate for spectrum ``d``."""
    d = np.asarray(d, dtype=float)
    e = np.full_like(d, noise)
    e[:rank] = np.maximum(d[:rank], noise)
    return e


def fml(s, noise):
    """Fast maximum likelihood: clamp sample eigenvalues from below at ``noise``."""
    _check_noise(noise)
    es = spectrum(s)
    d = es.values
    return _spectral("FML", es, np.maximum(d, noise),
                     rank_used=int(np.count_nonzero(d > noise)), noise_used=noise)


def rcml(s, noise, rank):
    """Rank-constrained maximum likelihood estimate.

    The top ``rank`` sample eigenvalues are clamped below at ``noise`` and
    the remainder set to ``noise``.

    Parameters
    ----------
    s : ndarray or EigenSystem
        Sample covariance (or its decomposition).
    noise : float
        Known noise power sigma^2 > 0.
    rank : int
        Clutter rank, 0 <= rank <= N.
    """
    _check_noise(noise)
    es = spectrum(s)
    _check_rank(rank, es.dim)
    return _spectral("RCML", es, rcml_eigenvalues(es.values, noise, rank),
                     rank_used=int(rank), noise_used=noise)


def rcml_lb(s, noise_lower_bound, rank):
    """RCML when only a lower bound on the noise power is known.

    The noise level becomes ``max(lower_bound, mean of the N - rank smallest
    eigenvalues)``.
    """
    if noise_lower_bound < 0:
        raise ValueError("noise lower bound must be non-negative")
    es = spectrum(s)
    _check_rank(rank, es.dim, upper_open=True)
    d = es.values
    c = max(float(noise_lower_bound), float(np.mean(d[rank:])))
    if not c > 0:
        raise ValueError("noise estimate is zero; supply a positive lower bound")
    e = rcml_eigenvalues(d, c, rank)
    return _spectral("RCML_LB", es, e, rank_used=int(rank), noise_used=c,
                     annotations={"tail_mean": float(np.mean(d[rank:]))})


def wax_kailath(s, rank):
    """Keep the top ``rank`` eigenvalues, replace the rest by their mean."""
    es = spectrum(s)
    _check_rank(rank, es.dim, upper_open=True)
    d = es.values
    sigma2 = float(np.mean(d[rank:]))
    e = d.copy()
    e[rank:] = sigma2
    return _spectral("WAX_KAILATH", es, e, rank_used=int(rank), noise_used=sigma2)


def _loo_loglik(z, beta):
    # summed held-out Gaussian log-likelihood, None if any fold is singular
    n, k = z.shape
    s_full = z @ z.conj().T
    total = 0.0
    for j in range(k):
        zj = z[:, j]
        s = (s_full - np.outer(zj, zj.conj())) / (k - 1)
        sigma = beta * np.diag(np.diag(s).real) + (1 - beta) * s
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            return None
        w = np.linalg.solve(chol, zj)
        logdet = 2.0 * np.sum(np.log(np.diag(chol).real))
        total += -n * np.log(np.pi) - logdet - float(np.vdot(w, w).real)
    return total


def looc(z, grid=None):
    """Leave-one-out shrinkage toward the diagonal.

    Returns ``beta diag(S) + (1 - beta) S`` where ``beta`` maximizes the
    summed log-likelihood of each held-out snapshot under the estimate
    built from the remaining ones. Ties go to the first grid point.

    Parameters
    ----------
    z : array_like, shape (N, K)
        Training snapshots, K >= 2.
    grid : sequence of float, optional
        Candidate shrinkage weights (defaults to 21 points in [0.01, 0.99]).
    """
    z = as_samples(z)
    if z.shape[1] < 2:
        raise ValueError("LOOC needs at least two snapshots")
    grid = LOOC_GRID if grid is None else np.asarray(grid, dtype=float)
    best, best_ll, scores = None, -np.inf, {}
    for beta in grid:
        ll = _loo_loglik(z, float(beta))
        scores[float(beta)] = ll
        if ll is not None and ll > best_ll:
            best, best_ll = float(beta), ll
    if best is None:
        raise np.linalg.LinAlgError("every LOOC candidate was singular")
    s = sample_covariance(z)
    m = best * np.diag(np.diag(s).real) + (1 - best) * s
    return CovarianceEstimate(matrix=m, estimator_tag="LOOC",
                              annotations={"beta": best, "scores": scores})


def eigencanceler(s, noise, rank):
    """Eigencanceler with inverse ``(I - P) / noise``.

    ``P`` projects onto the top ``rank`` sample eigenvectors. The ``matrix``
    field holds ``noise (I - P) + sum_i max(d_i, noise) v_i v_i^H``; the
    evaluation code uses ``inverse`` directly.
    """
    _check_noise(noise)
    es = spectrum(s)
    _check_rank(rank, es.dim, upper_open=True, lower=1)
    vr = es.vectors[:, :rank]
    proj = vr @ vr.conj().T
    n = es.dim
    inv = (np.eye(n) - proj) / noise
    inv = 0.5 * (inv + inv.conj().T)
    e = rcml_eigenvalues(es.values, noise, rank)
    est = _spectral("EIGC", es, e, rank_used=int(rank), noise_used=noise)
    est.inverse = inv
    return est


def itam(s, rank, max_iters=200, tol=1e-8):
    """Iterated Toeplitz approximation.

    The noise level ``lam_av`` is the mean of the ``N - rank`` trailing
    eigenvalues of ``s``; the clutter part ``U1 (S1 - lam_av I) U1^H`` is
    then alternately averaged along its diagonals and cut back to rank
    ``rank`` (largest eigenvalues, floored at zero). Stops when the rank
    reduced iterate is Toeplitz to ``tol`` or after ``max_iters``.
    Non-convergence is reported in the annotations, not raised.
    """
    es = spectrum(s)
    n = es.dim
    _check_rank(rank, n, upper_open=True, lower=1)
    lam_av = float(np.mean(es.values[rank:]))
    clutter = reconstruct(es.vectors[:, :rank], np.maximum(es.values[:rank] - lam_av, 0.0))
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        if toeplitz_deviation(clutter) < tol:
            converged = True
            break
        t = eig_hermitian(toeplitz_average(clutter))
        clutter = reconstruct(t.vectors[:, :rank], np.maximum(t.values[:rank], 0.0))
    m = clutter + lam_av * np.eye(n)
    return CovarianceEstimate(matrix=m, estimator_tag="ITAM", rank_used=int(rank),
                              noise_used=lam_av,
                              annotations={"iterations": it, "converged": converged,
                                           "toeplitz_deviation": toeplitz_deviation(clutter)})


def inverse_of(estimate, pinv_rcond=1e-10):
    """Inverse used by the figures of merit.

    Explicit inverses are returned as-is. SMI is pseudo-inverted with a
    ``pinv_rcond * sigma_max`` cutoff. Spectral estimates invert their
    eigenvalues; anything else goes through ``numpy.linalg.inv``.
    """
    if isinstance(estimate, CovarianceEstimate):
        if estimate.inverse is not None:
            return estimate.inverse
        if estimate.estimator_tag == "SMI":
            return np.linalg.pinv(estimate.matrix, rcond=pinv_rcond, hermitian=True)
        if estimate.eigenvalues is not None:
            if np.any(estimate.eigenvalues <= 0):
                raise np.linalg.LinAlgError("estimate is singular")
            return reconstruct(estimate.vectors, 1.0 / estimate.eigenvalues)
        m = estimate.matrix
    else:
        m = np.asarray(estimate)
    return np.linalg.inv(m)
