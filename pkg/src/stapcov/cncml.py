"""Condition-number-constrained ML covariance estimation.

Works in the whitened domain: with ``d_bar = d / sigma^2`` the estimate's
inverse eigenvalues ``lam_i = sigma^2 / e_i`` are confined to ``[u, kmax u]``
and capped at 1. For fixed ``u`` the optimal ``lam_i`` is a clip, so the
whole problem reduces to a one-dimensional convex search over ``u``.
"""

from dataclasses import dataclass

import numpy as np

from .core import reconstruct, spectrum
from .estimators import CovarianceEstimate

# relative guard band used when classifying boundary cases
CASE_GUARD = 1e-12

CASES = ("identity", "fml", "kmax_clamp", "interior")


@dataclass(frozen=True)
class ConditionNumberSolution:
    """Closed-form solution in the whitened domain.

    Attributes
    ----------
    u_star : float
        Lower bound on the inverse eigenvalues, in (0, 1].
    case_tag : str
        One of ``identity``, ``fml``, ``kmax_clamp``, ``interior``.
    eigenvalues : ndarray
        Estimate eigenvalues divided by sigma^2, descending.
    """

    u_star: float
    case_tag: str
    eigenvalues: np.ndarray

    @property
    def condition_number(self):
        return float(self.eigenvalues[0] / self.eigenvalues[-1])


def inverse_eigenvalues(d_bar, kmax, u):
    """``lam_i(u) = min(min(kmax u, 1), max(u, 1 / d_bar_i))``."""
    d_bar = np.asarray(d_bar, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(d_bar > 0, 1.0 / d_bar, np.inf)
    return np.minimum(min(kmax * u, 1.0), np.maximum(u, inv))


def objective(d_bar, kmax, u):
    """``sum_i G_i(u) = sum_i d_bar_i lam_i(u) - log lam_i(u)``."""
    lam = inverse_eigenvalues(d_bar, kmax, u)
    return float(np.sum(np.asarray(d_bar) * lam - np.log(lam)))


def _breakpoints(d_bar, kmax):
    pts = {1.0 / kmax, 1.0}
    for d in d_bar:
        if d > 1:
            pts.add(1.0 / (kmax * d))
            pts.add(1.0 / d)
    return sorted(p for p in pts if 0 < p <= 1)


def _slope_terms(d_bar, kmax, a, b):
    # on (a, b) each lam_i is constant, u or kmax*u; G' = c - m / u
    mid = 0.5 * (a + b)
    m = 0
    c = 0.0
    for d in d_bar:
        inv = 1.0 / d if d > 0 else np.inf
        cap = min(kmax * mid, 1.0)
        low = max(mid, inv)
        if low < cap:
            if mid >= inv:
                m += 1
                c += d
        elif kmax * mid < 1.0:
            m += 1
            c += kmax * d
    return m, c


def solve_u(d_bar, kmax):
    """Minimize ``sum_i G_i(u)`` over ``0 < u <= 1``.

    The derivative is ``c - m / u`` on every interval between breakpoints
    and is non-decreasing, so the first interval where it reaches zero
    holds the minimizer ``u = m / c``. Flat stretches resolve to their
    left end.

    Parameters
    ----------
    d_bar : array_like
        Positive whitened sample eigenvalues, descending.
    kmax : float
        Condition-number bound, at least 1.
    """
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax}")
    d_bar = np.asarray(d_bar, dtype=float)
    a = 0.0
    for b in _breakpoints(d_bar, kmax):
        m, c = _slope_terms(d_bar, kmax, a, b)
        if m == 0:
            return a if a > 0 else b
        if c > 0:
            u = m / c
            if u <= b:
                return max(u, a)
        a = b
    return 1.0


def solve_cncml(d_bar, kmax):
    """Case analysis of the whitened problem.

    Returns the :class:`ConditionNumberSolution`; eigenvalues are in units
    of sigma^2.
    """
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax}")
    d_bar = np.asarray(d_bar, dtype=float)
    n = d_bar.size
    d1 = d_bar[0]
    if d1 <= 1.0 + CASE_GUARD:
        return ConditionNumberSolution(1.0, "identity", np.ones(n))
    if d1 <= kmax * (1.0 + CASE_GUARD):
        return ConditionNumberSolution(1.0 / kmax, "fml", np.maximum(d_bar, 1.0))
    # clamp case iff the derivative just below u = 1/kmax is non-positive:
    # sum_{i<=p} (d_i - kmax) <= kmax * sum_{d_i<1} (1 - d_i), p = #{d_i > kmax}
    top = d_bar[d_bar > kmax]
    low = d_bar[d_bar < 1.0]
    if np.sum(top - kmax) <= kmax * np.sum(1.0 - low):
        e = np.clip(d_bar, 1.0, kmax)
        return ConditionNumberSolution(1.0 / kmax, "kmax_clamp", e)
    u = solve_u(d_bar, kmax)
    e = np.clip(d_bar, 1.0 / (kmax * u), 1.0 / u)
    return ConditionNumberSolution(u, "interior", e)


def cncml(s, noise, kmax):
    """Condition-number-constrained ML estimate.

    Parameters
    ----------
    s : ndarray or EigenSystem
        Sample covariance.
    noise : float
        Noise power sigma^2 > 0 (lower bound of the spectrum).
    kmax : float
        Largest admissible condition number, >= 1.

    Returns
    -------
    CovarianceEstimate
        Shares eigenvectors with ``s``. ``annotations`` carries the case tag,
        ``u_star`` and the achieved condition number.
    """
    if not noise > 0:
        raise ValueError(f"noise power must be positive, got {noise}")
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax}")
    es = spectrum(s)
    sol = solve_cncml(es.values / noise, kmax)
    values = noise * sol.eigenvalues
    return CovarianceEstimate(matrix=reconstruct(es.vectors, values), estimator_tag="CNCML",
                              noise_used=noise, condition_number_used=float(kmax),
                              eigenvalues=values, vectors=es.vectors,
                              annotations={"case": sol.case_tag, "u_star": sol.u_star,
                                           "condition_number": sol.condition_number})
