"""Expected-likelihood selection of rank, noise power and condition number.

The likelihood ratio of an estimate ``R`` against training data with sample
covariance ``S`` is, in logs,

    log LR = sum_i log g_i + N - sum_i g_i,   g = eig(R^{-1} S),

which is at most 0 and equals 0 only at ``R = S``. Its distribution under
the true covariance does not depend on that covariance, so a Monte Carlo
median ``log_lr0`` computed at ``R = I`` serves as the target an estimate
should reach. Everything is kept in the log domain.
"""

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .cncml import cncml
from .core import (EigenSystem, complex_gaussian, psd_sqrt, sample_covariance, spectrum,
                   trial_rng)
from .estimators import CovarianceEstimate, rcml_eigenvalues

CACHE_ENV = "STAPCOV_CACHE_DIR"
CACHE_VERSION = "stapcov-lr0/1"
DEFAULT_TRIALS = 5000


@dataclass
class LikelihoodRatioReference:
    """Calibrated median log-LR for a given (N, K)."""

    dim: int
    samples: int
    log_lr0: float
    trials: int
    seed: int
    quantiles: list = field(default_factory=list)

    def to_dict(self):
        out = asdict(self)
        out["version"] = CACHE_VERSION
        return out

    @classmethod
    def from_dict(cls, data):
        if data.get("version") != CACHE_VERSION:
            raise ValueError(f"unsupported reference version {data.get('version')!r}")
        return cls(dim=int(data["dim"]), samples=int(data["samples"]),
                   log_lr0=float(data["log_lr0"]), trials=int(data["trials"]),
                   seed=int(data["seed"]),
                   quantiles=[(float(p), float(q)) for p, q in data["quantiles"]])


@dataclass
class ElSelection:
    """Result of an expected-likelihood search."""

    log_lr_achieved: float
    rank: int = None
    noise: float = None
    condition_number: float = None
    candidates_considered: list = field(default_factory=list)


def log_lr_from_ratios(g):
    """``sum log g + N - sum g`` for whitened eigenvalues ``g``."""
    g = np.asarray(g, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(g)) + g.size - np.sum(g))


def log_lr_spectral(d, e):
    """Log-LR when the estimate shares eigenvectors with ``S``.

    ``d`` and ``e`` are the matched eigenvalues of ``S`` and of the estimate.
    """
    return log_lr_from_ratios(np.asarray(d, dtype=float) / np.asarray(e, dtype=float))


def whitened_eigenvalues(r, s):
    """Eigenvalues of ``R^{-1} S`` through a Cholesky whitening of ``R``."""
    r = np.asarray(r, dtype=complex)
    try:
        chol = np.linalg.cholesky(0.5 * (r + r.conj().T))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("estimate is singular or indefinite") from exc
    w = np.linalg.solve(chol, np.asarray(s, dtype=complex))
    w = np.linalg.solve(chol, w.conj().T).conj().T
    return np.linalg.eigvalsh(0.5 * (w + w.conj().T))


def likelihood_ratio_log(estimate, s):
    """Log likelihood ratio of ``estimate`` for sample covariance ``s``.

    Parameters
    ----------
    estimate : CovarianceEstimate or ndarray
        Invertible covariance estimate. An explicit ``inverse`` is used when
        present.
    s : ndarray
        Sample covariance of the same data.
    """
    s = np.asarray(s, dtype=complex)
    if isinstance(estimate, CovarianceEstimate):
        if estimate.inverse is not None:
            inv = estimate.inverse
            w = np.linalg.eigvalsh(inv)
            if w.min() <= 1e-12 * max(abs(w).max(), 1e-300):
                raise np.linalg.LinAlgError("explicit inverse is singular")
            root = psd_sqrt(s)
            return log_lr_from_ratios(np.linalg.eigvalsh(root @ inv @ root))
        estimate = estimate.matrix
    return log_lr_from_ratios(whitened_eigenvalues(estimate, s))


# -- calibration -------------------------------------------------------------

def _trial_log_lr(dim, samples, seed, trial, truth, root):
    rng = trial_rng(seed, trial)
    g = complex_gaussian(rng, (dim, samples))
    if truth is None:
        s = sample_covariance(g)
        return log_lr_from_ratios(np.linalg.eigvalsh(s))
    s = sample_covariance(root @ g)
    return log_lr_from_ratios(whitened_eigenvalues(truth, s))


def log_lr_draws(dim, samples, trials, seed, workers=1, truth=None):
    """Per-trial log-LR of the true covariance, in trial order.

    Trial ``t`` always uses the stream ``SeedSequence([seed, t])``, so the
    result does not depend on ``workers``.
    """
    root = None if truth is None else psd_sqrt(truth)
    run = lambda t: _trial_log_lr(dim, samples, seed, t, truth, root)
    if workers is None or workers <= 1:
        return np.array([run(t) for t in range(trials)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(run, range(trials))))


def calibrate_lr0(dim, samples, trials=DEFAULT_TRIALS, seed=0, workers=1, truth=None):
    """Monte Carlo median of the log-LR of the true covariance.

    Parameters
    ----------
    dim, samples : int
        N and K, with K >= N.
    trials : int
        Number of draws, at least 100.
    seed : int
    workers : int
        Thread count; results are bit-identical for any value.
    truth : ndarray, optional
        True covariance used to colour the draws (identity by default).

    Returns
    -------
    LikelihoodRatioReference
    """
    if samples < dim:
        raise ValueError(f"calibration needs K >= N (got N={dim}, K={samples})")
    if trials < 100:
        raise ValueError("calibration needs at least 100 trials")
    draws = log_lr_draws(dim, samples, trials, seed, workers, truth)
    probs = [round(0.1 * i, 1) for i in range(1, 10)]
    qs = np.quantile(draws, probs)
    return LikelihoodRatioReference(dim=dim, samples=samples, log_lr0=float(np.median(draws)),
                                    trials=trials, seed=seed,
                                    quantiles=[(p, float(q)) for p, q in zip(probs, qs)])


def cache_dir(explicit=None):
    """Cache directory: explicit argument, then the environment, then ``~/.cache``."""
    if explicit:
        return explicit
    env = os.environ.get(CACHE_ENV)
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "stapcov")


def cache_path(directory, dim, samples, trials, seed):
    return os.path.join(directory, f"lr0_N{dim}_K{samples}_T{trials}_S{seed}.json")


def load_reference(directory, dim, samples, trials, seed):
    """Cached reference or ``None`` when absent."""
    path = cache_path(directory, dim, samples, trials, seed)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return LikelihoodRatioReference.from_dict(json.load(fh))


def save_reference(directory, ref):
    """Write ``ref`` atomically into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    path = cache_path(directory, ref.dim, ref.samples, ref.trials, ref.seed)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".lr0-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(ref.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def get_reference(dim, samples, trials=DEFAULT_TRIALS, seed=0, directory=None,
                  workers=1, calibrate=True):
    """Load a cached reference, calibrating and caching it on a miss.

    Returns ``(reference, hit)``. With ``calibrate=False`` a miss raises
    ``FileNotFoundError``.
    """
    directory = cache_dir(directory)
    ref = load_reference(directory, dim, samples, trials, seed)
    if ref is not None:
        return ref, True
    if not calibrate:
        raise FileNotFoundError(cache_path(directory, dim, samples, trials, seed))
    ref = calibrate_lr0(dim, samples, trials, seed, workers)
    save_reference(directory, ref)
    return ref, False


# -- Lambert W ------------------------------------------------------------------

_INV_E = math.exp(-1.0)


def lambert_w(x, branch=0):
    """Real Lambert W, ``w exp(w) = x``, by Halley iteration.

    Parameters
    ----------
    x : float
    branch : {0, -1, 'principal', 'minus_one'}
        Principal branch (``x >= -1/e``, ``w >= -1``) or the lower branch
        (``-1/e <= x < 0``, ``w <= -1``).
    """
    branch = {"principal": 0, "minus_one": -1}.get(branch, branch)
    x = float(x)
    if branch not in (0, -1):
        raise ValueError(f"unknown branch {branch!r}")
    if x < -_INV_E:
        # tolerate roundoff right at the branch point
        if x < -_INV_E * (1 + 1e-15):
            raise ValueError(f"x = {x} is below -1/e")
        x = -_INV_E
    if branch == -1 and x >= 0:
        raise ValueError("the -1 branch needs -1/e <= x < 0")
    if x == 0.0:
        return 0.0
    p2 = 2.0 * (math.e * x + 1.0)
    if p2 <= 0.0:
        return -1.0
    p = math.sqrt(p2)
    if branch == 0:
        if x < -0.25:
            w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
        elif x < 3.0:
            w = math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
        else:
            lx = math.log(x)
            w = lx - math.log(lx)
    else:
        if x < -0.25:
            w = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p ** 3
        else:
            l1 = math.log(-x)
            w = l1 - math.log(-l1)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if abs(w_new - w) <= 1e-15 * (1.0 + abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


# -- rank selection -------------------------------------------------------------

def d_system(d):
    """Diagonal eigen-system so spectrum-only callers can reuse the estimators."""
    d = np.asarray(d, dtype=float)
    return EigenSystem(vectors=np.eye(d.size, dtype=complex), values=d)


def _values(s):
    return spectrum(s).values


def rcml_log_lr(d, noise, rank):
    """Log-LR of ``rcml(S, noise, rank)`` from the sample spectrum ``d``."""
    return log_lr_spectral(d, rcml_eigenvalues(d, noise, rank))


def _walk(score, start, lo, hi, downhill):
    # Algorithm-1 style +-1 walk toward a smaller score; ties are crossed
    # so a flat stretch of the log-LR does not stall the walk
    r = start
    path = [r]
    step = -1 if downhill else 1
    while lo <= r + step <= hi and score(r + step) <= score(r):
        r += step
        path.append(r)
    best = min(path, key=score)
    return best, path[:path.index(best) + 1]


def select_rank_el(s, noise, rank_init, ref):
    """Rank whose RCML log-LR is closest to the reference median.

    Starts at ``rank_init`` and moves one step at a time toward
    ``log_lr0`` (down when the log-LR is above it), crossing ties, and
    keeps the best rank seen. The log-LR is non-decreasing in the rank,
    so this is the global minimum.
    """
    d = _values(s)
    n = d.size
    if not 1 <= rank_init <= n:
        raise ValueError(f"rank_init must lie in [1, {n}]")
    lr0 = ref.log_lr0 if isinstance(ref, LikelihoodRatioReference) else float(ref)
    cache = {}

    def score(r):
        if r not in cache:
            cache[r] = abs(rcml_log_lr(d, noise, r) - lr0)
        return cache[r]

    # the log-LR is non-decreasing in r: go down when it overshoots log_lr0
    downhill = rcml_log_lr(d, noise, rank_init) > lr0
    r, path = _walk(score, rank_init, 0, n, downhill)
    return ElSelection(log_lr_achieved=rcml_log_lr(d, noise, r), rank=r, noise=noise,
                       candidates_considered=[(q, rcml_log_lr(d, noise, q)) for q in path])


# -- noise selection ------------------------------------------------------------

def noise_log_lr(d, rank, noise):
    """Log-LR as a function of noise power with the top ``rank`` matched.

    The top eigenvalues contribute nothing (ratio 1); the tail contributes
    ``sum log(d_i / noise) + (N - rank) - sum d_i / noise``. This equals the
    RCML log-LR whenever ``d_rank >= noise``.
    """
    tail = np.asarray(d, dtype=float)[rank:]
    return log_lr_from_ratios(tail / noise)


def noise_el_candidates(d, rank, ref):
    """Noise powers whose log-LR equals ``log_lr0``, via Lambert W.

    Returns a sorted list of 0, 1 or 2 values.
    """
    d = np.asarray(d, dtype=float)
    n = d.size
    if not 0 <= rank < n:
        raise ValueError(f"rank must lie in [0, {n - 1}]")
    lr0 = ref.log_lr0 if isinstance(ref, LikelihoodRatioReference) else float(ref)
    tail = d[rank:]
    if np.any(tail <= 0):
        return []
    a = rank - n
    b = float(np.sum(tail))
    c = lr0 - float(np.sum(np.log(tail))) + a
    # W's argument is -exp(log_mag); log form avoids overflow of exp(-c/a)
    log_mag = math.log(b / -a) - c / a
    if log_mag > -1.0 + 1e-12:
        return []
    arg = -_INV_E if log_mag > -1.0 else -math.exp(log_mag)
    out = []
    for k in (-1, 0):
        try:
            w = lambert_w(arg, k)
        except ValueError:
            continue
        out.append(math.exp(w + c / a))
    out = sorted(out)
    if len(out) == 2 and abs(out[1] - out[0]) <= 1e-12 * out[1]:
        out = [out[0]]
    return out


def _default_choice(options, lr0):
    # smallest distance to lr0; near-ties keep the earlier option (ML first)
    best = None
    for name, sigma2, lr in options:
        dist = abs(lr - lr0)
        if best is None or dist < best[0] - 1e-9 * max(1.0, abs(lr0)):
            best = (dist, name, sigma2, lr)
    return best[1]


def select_rank_noise_el(s, rank_init, ref, tie_breaker=None):
    """Joint rank and noise-power selection.

    Raises the rank until some noise power reaches ``log_lr0``, then
    alternates the tail-mean noise estimate with the rank walk until the
    rank settles. The final noise power is picked among the tail mean and
    the Lambert-W candidates by ``tie_breaker(options, lr0)``, which
    receives ``(name, sigma2, log_lr)`` tuples and returns a name. The
    default takes the option closest to ``log_lr0``, preferring the tail
    mean on ties.
    """
    d = _values(s)
    n = d.size
    if not 1 <= rank_init < n:
        raise ValueError(f"rank_init must lie in [1, {n - 1}]")
    lr0 = ref.log_lr0 if isinstance(ref, LikelihoodRatioReference) else float(ref)
    r = rank_init
    while not noise_el_candidates(d, r, lr0):
        r += 1
        if r >= n:
            raise RuntimeError("no noise power reaches the reference likelihood")
    visited = [r]
    for _ in range(n):
        sigma2 = float(np.mean(d[r:]))
        sel = select_rank_el(d_system(d), sigma2, r, lr0)
        r_new = min(max(sel.rank, 1), n - 1)
        if r_new == r:
            break
        if r_new in visited:
            visited.append(r_new)
            break
        r = r_new
        visited.append(r)
    else:
        raise RuntimeError("rank iteration did not converge")
    sigma_ml = float(np.mean(d[r:]))
    options = [("ML", sigma_ml, noise_log_lr(d, r, sigma_ml))]
    for i, c in enumerate(noise_el_candidates(d, r, lr0), start=1):
        options.append((f"EL{i}", c, noise_log_lr(d, r, c)))
    choose = tie_breaker or _default_choice
    name = choose(options, lr0)
    chosen = {o[0]: o for o in options}[name]
    return ElSelection(log_lr_achieved=chosen[2], rank=r, noise=chosen[1],
                       candidates_considered=[("ranks", visited)] + options)


# -- condition number selection -------------------------------------------------

def cncml_log_lr(d, noise, kmax):
    d = np.asarray(d, dtype=float)
    est = cncml(d_system(d), noise, kmax)
    return log_lr_spectral(d, est.eigenvalues)


def select_condition_number_el(s, noise, ref, min_step=1e-4):
    """Condition number whose CNCML log-LR is closest to ``log_lr0``.

    Starts from the unconstrained value ``d_1 / noise`` with step
    ``kmax / 100``. Each round probes both neighbours, walks in the
    improving direction until that stops paying off, then shrinks the
    step tenfold, until it drops below ``min_step``.
    """
    if not noise > 0:
        raise ValueError(f"noise power must be positive, got {noise}")
    d = _values(s)
    lr0 = ref.log_lr0 if isinstance(ref, LikelihoodRatioReference) else float(ref)
    k_ml = float(d[0] / noise)
    if k_ml <= 1.0:
        # estimate is noise * I whatever the bound
        return ElSelection(log_lr_achieved=cncml_log_lr(d, noise, 1.0), condition_number=1.0,
                           noise=noise)
    f = lambda k: abs(cncml_log_lr(d, noise, k) - lr0)
    k = k_ml
    best = f(k)
    step = k_ml / 100.0
    trail = [(k, best)]
    while step >= min_step:
        # evaluate both neighbours, then walk in the improving direction
        for direction in (1.0, -1.0):
            cand = max(k + direction * step, 1.0)
            val = f(cand)
            if val < best:
                break
        while val < best:
            k, best = cand, val
            trail.append((k, val))
            cand = max(k + direction * step, 1.0)
            val = f(cand)
        step /= 10.0
    return ElSelection(log_lr_achieved=cncml_log_lr(d, noise, k), condition_number=k,
                       noise=noise, candidates_considered=trail)
