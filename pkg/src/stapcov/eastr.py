"""Toeplitz-consistent eigenvalue projection on top of RCML.

The sample eigenvectors are held fixed. Requiring the clutter part
``V_r diag(lam) V_r^H`` to be Toeplitz gives a homogeneous linear system
``Psi lam = 0``. When that system has a nontrivial nullspace the RCML
clutter eigenvalues are projected onto it. Otherwise the nearest
rank-deficient system (Eckart-Young) is used instead.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import reconstruct, spectrum
from .estimators import CovarianceEstimate

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ToeplitzConstraintSystem:
    """Real-valued Toeplitz constraint rows.

    Attributes
    ----------
    coefficients : ndarray, shape (N(N-1), r)
        Real parts of the N(N-1)/2 complex rows stacked above their
        imaginary parts.
    numeric_rank : int
    tolerance_used : float
        Singular values at or below this count as zero.
    """

    coefficients: np.ndarray
    numeric_rank: int
    tolerance_used: float

    @property
    def rank_deficient(self):
        return self.numeric_rank < self.coefficients.shape[1]


def _pair_indices(n):
    # lower-triangle entries (i, j) compared with (i + 1, j + 1), one offset at a time
    ii, jj = [], []
    for k in range(n - 1):
        i = np.arange(k, n - 1)
        ii.append(i)
        jj.append(i - k)
    return np.concatenate(ii), np.concatenate(jj)


def _tolerance(sv, rtol):
    # entries of Psi are bounded by 1, so floor the scale at 1 to keep an
    # all-roundoff system (circulant eigenvectors) from registering rank
    top = sv[0] if sv.size else 0.0
    return rtol * max(top, 1.0)


def _system(psi, rtol):
    sv = np.linalg.svd(psi, compute_uv=False)
    tol = _tolerance(sv, rtol)
    return ToeplitzConstraintSystem(coefficients=psi,
                                    numeric_rank=int(np.count_nonzero(sv > tol)),
                                    tolerance_used=float(tol))


def build_toeplitz_constraints(v, rank, rtol=RANK_RTOL):
    """Constraint rows for ``(R_c)_{i,j} = (R_c)_{i+1,j+1}`` on the lower triangle.

    Parameters
    ----------
    v : ndarray, shape (N, N)
        Unitary eigenvector matrix; only the first ``rank`` columns are used.
    rank : int
        Number of clutter eigenvalues, 1 <= rank <= N.
    rtol : float
        Relative singular-value cutoff for the numeric rank.

    Returns
    -------
    ToeplitzConstraintSystem
    """
    v = np.asarray(v)
    n = v.shape[0]
    if not 1 <= rank <= n:
        raise ValueError(f"rank must lie in [1, {n}], got {rank}")
    vr = v[:, :rank]
    i, j = _pair_indices(n)
    rows = vr[i] * vr[j].conj() - vr[i + 1] * vr[j + 1].conj()
    psi = np.vstack([rows.real, rows.imag])
    return _system(psi, rtol)


def reduce_rank_eckart_young(c, rtol=RANK_RTOL):
    """Zero the smallest singular value of a full-column-rank system.

    Rank-deficient input is returned unchanged.
    """
    r = c.coefficients.shape[1]
    if c.numeric_rank < r:
        return c
    u, sv, wt = np.linalg.svd(c.coefficients, full_matrices=False)
    sv = sv.copy()
    sv[-1] = 0.0
    psi = (u * sv) @ wt
    tol = c.tolerance_used
    return ToeplitzConstraintSystem(coefficients=psi,
                                    numeric_rank=int(np.count_nonzero(sv > tol)),
                                    tolerance_used=tol)


def independent_rows(c):
    """Select ``numeric_rank`` independent rows by column-pivoted QR of ``Psi^T``."""
    k = c.numeric_rank
    if k == 0:
        return c.coefficients[:0]
    _, _, piv = scipy.linalg.qr(c.coefficients.T, mode="economic", pivoting=True)
    return c.coefficients[np.sort(piv[:k])]


def project_eigenvalues(lambda_rcml, c):
    """Euclidean projection of ``lambda_rcml`` onto ``{lam : Psi lam = 0}``.

    Computes ``(I - Pc^T (Pc Pc^T)^{-1} Pc) lambda_rcml`` with ``Pc`` the
    independent rows of the system. The Gram inverse is applied through an
    orthonormal basis of the row space, which is algebraically identical.

    Raises
    ------
    ValueError
        If the system still has full column rank.
    numpy.linalg.LinAlgError
        If the selected rows are numerically dependent.
    """
    lam = np.asarray(lambda_rcml, dtype=float)
    r = c.coefficients.shape[1]
    if lam.shape != (r,):
        raise ValueError(f"expected {r} eigenvalues, got shape {lam.shape}")
    if c.numeric_rank >= r:
        raise ValueError("constraint system has full column rank; reduce it first")
    rows = independent_rows(c)
    if rows.shape[0] == 0:
        return lam.copy()
    q, tri = np.linalg.qr(rows.T)
    diag = np.abs(np.diag(tri))
    if diag.min() <= c.tolerance_used:
        raise np.linalg.LinAlgError("selected constraint rows are numerically dependent")
    return lam - q @ (q.T @ lam)


def eastr(s, noise, rank, rtol=RANK_RTOL):
    """Rank-preserving Toeplitz approximation of the RCML estimate.

    Parameters
    ----------
    s : ndarray or EigenSystem
        Sample covariance.
    noise : float
        Known noise power sigma^2 > 0.
    rank : int
        Clutter rank, 1 <= rank < N.

    Returns
    -------
    CovarianceEstimate
        ``sigma^2 I + V_r diag(lam*) V_r^H``. The annotations record the
        branch taken, the pre-clipping projection and the constraint
        residual left after clipping negative entries to zero.
    """
    if not noise > 0:
        raise ValueError(f"noise power must be positive, got {noise}")
    es = spectrum(s)
    n = es.dim
    if not 1 <= rank < n:
        raise ValueError(f"rank must lie in [1, {n - 1}], got {rank}")
    lam_rcml = np.maximum(es.values[:rank] - noise, 0.0)
    system = build_toeplitz_constraints(es.vectors, rank, rtol)
    branch = "exact" if system.rank_deficient else "approximate"
    used = system if system.rank_deficient else reduce_rank_eckart_young(system, rtol)
    projected = project_eigenvalues(lam_rcml, used)
    clipped = np.maximum(projected, 0.0)
    rows = independent_rows(used)
    scale = float(np.linalg.norm(lam_rcml))
    values = np.full(n, float(noise))
    values[:rank] += clipped
    est = CovarianceEstimate(matrix=reconstruct(es.vectors, values), estimator_tag="EASTR",
                             rank_used=int(np.count_nonzero(clipped > 0)), noise_used=noise,
                             eigenvalues=values, vectors=es.vectors)
    est.annotations.update(
        branch=branch,
        numeric_rank=system.numeric_rank,
        lambda_rcml=lam_rcml,
        lambda_projected=projected,
        residual=float(np.linalg.norm(rows @ projected)) if rows.size else 0.0,
        clip_violation=float(np.linalg.norm(rows @ clipped)) if rows.size else 0.0,
        lambda_norm=scale,
    )
    return est


def clutter_part(estimate):
    """``R_hat - sigma^2 I`` for an estimate carrying ``noise_used``."""
    n = estimate.matrix.shape[0]
    return estimate.matrix - estimate.noise_used * np.eye(n)
