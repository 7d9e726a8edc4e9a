"""Figures of merit and the Monte Carlo benchmark loop."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators as _est
from . import expected_likelihood as _el
from .cncml import cncml as _cncml
from .eastr import eastr as _eastr
from .core import (complex_gaussian, eig_hermitian, psd_sqrt, sample_covariance,
                   steering_matrix, trial_rng)
from .simulation import SyntheticClutterScenario, truth_covariance

DETECTORS = ("NMF", "AMF", "GLRT")


@dataclass
class BenchmarkResult:
    """Aggregated Monte Carlo values for one (scenario, estimator, K, metric).

    ``values`` has one row per trial; when a grid is present it has one
    column per grid point and ``mean``/``stderr`` are per grid point.
    ``grid`` maps coordinate names (``azimuth_deg``, ``doppler_hz``,
    ``snr_db``) to arrays of the grid-point coordinates.
    """

    scenario: str
    estimator: str
    samples: int
    metric: str
    values: np.ndarray
    mean: object
    stderr: object
    trials: int
    seed: int
    grid: dict = None
    failures: int = 0


def _quad(a, m, b):
    # column-wise a_k^H M b_k
    return np.einsum("ik,ik->k", a.conj(), m @ b)


def _columns(s):
    s = np.asarray(s, dtype=complex)
    return (s[:, None], True) if s.ndim == 1 else (s, False)


def normalized_sinr_db(estimate, truth, s):
    """Normalized SINR loss in dB.

    ``eta = |s^H Ri s|^2 / (|s^H Ri R Ri s| |s^H R^{-1} s|)`` with ``Ri`` the
    inverse of the estimate (pseudo-inverse for SMI).

    Parameters
    ----------
    estimate : CovarianceEstimate or ndarray
    truth : ndarray, shape (N, N)
        Non-singular true covariance.
    s : ndarray, shape (N,) or (N, M)
        One steering vector or M of them as columns.

    Returns
    -------
    float or ndarray of shape (M,)
    """
    ri = _est.inverse_of(estimate)
    truth = np.asarray(truth, dtype=complex)
    cols, single = _columns(s)
    try:
        chol = np.linalg.cholesky(truth)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("true covariance is singular") from exc
    w = np.linalg.solve(chol, cols)
    opt = np.einsum("ik,ik->k", w.conj(), w).real
    ris = ri @ cols
    num = np.abs(np.einsum("ik,ik->k", cols.conj(), ris)) ** 2
    den = np.abs(np.einsum("ik,ik->k", ris.conj(), truth @ ris)) * np.abs(opt)
    out = 10.0 * np.log10(num / den)
    return float(out[0]) if single else out


def trd(estimate, truth):
    """Trace deviation ``|tr(R Ri) / N - 1|``."""
    ri = _est.inverse_of(estimate)
    truth = np.asarray(truth)
    return float(abs(np.trace(truth @ ri).real / truth.shape[0] - 1.0))


def detector_statistic(kind, s, estimate, e, sample_count=None):
    """NMF, AMF or GLRT statistic for observations ``e``.

    Parameters
    ----------
    kind : {'NMF', 'AMF', 'GLRT'}
    s : ndarray, shape (N,)
        Steering vector.
    estimate : CovarianceEstimate or ndarray
    e : ndarray, shape (N,) or (N, T)
        Cell(s) under test.
    sample_count : int, optional
        K, required for the GLRT.
    """
    kind = kind.upper()
    if kind not in DETECTORS:
        raise ValueError(f"unknown detector {kind!r}")
    ri = _est.inverse_of(estimate)
    s = np.asarray(s, dtype=complex)
    cols, single = _columns(e)
    rs = ri @ s
    ss = float(np.vdot(s, rs).real)
    if ss <= 0:
        raise ZeroDivisionError("degenerate steering vector")
    cross = np.abs(rs.conj() @ cols) ** 2
    if kind == "AMF":
        out = cross / ss
    else:
        ee = np.einsum("ik,ik->k", cols.conj(), ri @ cols).real
        if kind == "NMF":
            out = cross / (ss * ee)
        else:
            if not sample_count:
                raise ValueError("GLRT needs the training sample count")
            out = cross / (ss * (1.0 + ee / sample_count))
    return float(out[0]) if single else out


def _h0_draws(truth, trials, rng, root=None):
    root = psd_sqrt(truth) if root is None else root
    return root @ complex_gaussian(rng, (root.shape[0], trials))


def _quantile(stats, pfa):
    return float(np.quantile(stats, 1.0 - pfa, method="inverted_cdf"))


def calibrate_threshold(kind, s, estimate, truth, pfa, trials, seed, sample_count=None):
    """Empirical ``1 - pfa`` quantile of the statistic under noise only.

    Requires ``trials * pfa >= 50`` so that the tail quantile is resolved.
    """
    if trials * pfa < 50:
        raise ValueError(f"trials * pfa = {trials * pfa:g} < 50; add trials")
    e = _h0_draws(truth, trials, trial_rng(seed, 0))
    return _quantile(detector_statistic(kind, s, estimate, e, sample_count), pfa)


def snr_amplitude(s, truth, snr_db):
    """Amplitude ``alpha`` with ``alpha^2 s^H R^{-1} s = 10^(snr/10)``."""
    w = np.linalg.solve(np.asarray(truth, dtype=complex), np.asarray(s, dtype=complex))
    white = float(np.vdot(s, w).real)
    return np.sqrt(10.0 ** (np.asarray(snr_db, dtype=float) / 10.0) / white)


def probability_of_detection(kind, s, estimate, truth, snr_grid_db, pfa, trials, seed,
                             calibration_trials=None, sample_count=None, threshold=None,
                             label="", estimator=None):
    """Detection probability over an SNR grid.

    The same disturbance draws and target phases are reused at every SNR
    (common random numbers), so the curve is monotone up to threshold
    ties. The threshold comes from ``calibrate_threshold`` unless given.
    """
    if threshold is None:
        threshold = calibrate_threshold(kind, s, estimate, truth, pfa,
                                        calibration_trials or trials, seed, sample_count)
    rng = trial_rng(seed, 1)
    root = psd_sqrt(truth)
    d = _h0_draws(truth, trials, rng, root)
    phase = np.exp(2j * np.pi * rng.random(trials))
    alphas = snr_amplitude(s, truth, snr_grid_db)
    s = np.asarray(s, dtype=complex)
    hits = np.empty((trials, len(alphas)))
    for i, a in enumerate(alphas):
        e = d + a * np.outer(s, phase)
        hits[:, i] = detector_statistic(kind, s, estimate, e, sample_count) > threshold
    mean = hits.mean(axis=0)
    tag = estimator or getattr(estimate, "estimator_tag", "matrix")
    return BenchmarkResult(scenario=label, estimator=tag, samples=sample_count or 0,
                           metric=f"pd_{kind.lower()}", values=hits, mean=mean,
                           stderr=np.sqrt(mean * (1 - mean) / trials), trials=trials,
                           seed=seed, grid={"snr_db": np.asarray(snr_grid_db, dtype=float)})


# -- estimator registry ---------------------------------------------------------

@dataclass
class EstimatorContext:
    """What an estimator may know besides the training data."""

    scenario: object
    truth: np.ndarray
    reference: object = None  # callable (N, K) -> LikelihoodRatioReference


def _param(params, ctx, key, fallback):
    if key in params and params[key] is not None:
        return params[key]
    value = fallback(ctx)
    if value is None:
        raise ValueError(f"estimator {params.get('tag')!r} needs parameter {key!r}")
    return value


def _noise(p, c):
    return float(_param(p, c, "noise", lambda c: c.scenario.noise_power))


def _rank(p, c):
    return int(_param(p, c, "rank", lambda c: getattr(c.scenario, "rank", None)))


def _ref(ctx, n, k):
    if ctx.reference is None:
        raise ValueError("expected-likelihood estimators need a reference provider")
    return ctx.reference(n, k)


def _rcml_el(s, z, p, c):
    es = eig_hermitian(s)
    sel = _el.select_rank_el(es, _noise(p, c),
                             int(p.get("rank_init", _rank(p, c))), _ref(c, *z.shape))
    est = _est.rcml(es, sel.noise, sel.rank)
    est.estimator_tag = "RCML_EL"
    est.annotations["log_lr"] = sel.log_lr_achieved
    return est


def _rcml_el_noise(s, z, p, c):
    es = eig_hermitian(s)
    sel = _el.select_rank_noise_el(es, int(p.get("rank_init", _rank(p, c))), _ref(c, *z.shape))
    est = _est.rcml(es, sel.noise, sel.rank)
    est.estimator_tag = "RCML_EL2"
    est.annotations["log_lr"] = sel.log_lr_achieved
    return est


def _cncml_el(s, z, p, c):
    es = eig_hermitian(s)
    noise = _noise(p, c)
    sel = _el.select_condition_number_el(es, noise, _ref(c, *z.shape))
    est = _cncml(es, noise, sel.condition_number)
    est.estimator_tag = "CNCML_EL"
    return est


def _truth(s, z, p, c):
    return _est.CovarianceEstimate(matrix=np.asarray(c.truth, dtype=complex),
                                   estimator_tag="TRUTH")


ESTIMATORS = {
    "smi": lambda s, z, p, c: _est.smi(s),
    "fml": lambda s, z, p, c: _est.fml(s, _noise(p, c)),
    "rcml": lambda s, z, p, c: _est.rcml(s, _noise(p, c), _rank(p, c)),
    "rcml_lb": lambda s, z, p, c: _est.rcml_lb(s, float(p.get("noise_lower_bound", 0.0)),
                                               _rank(p, c)),
    "wax_kailath": lambda s, z, p, c: _est.wax_kailath(s, _rank(p, c)),
    "looc": lambda s, z, p, c: _est.looc(z, p.get("grid")),
    "eigencanceler": lambda s, z, p, c: _est.eigencanceler(s, _noise(p, c), _rank(p, c)),
    "itam": lambda s, z, p, c: _est.itam(s, _rank(p, c), int(p.get("max_iters", 200)),
                                         float(p.get("tol", 1e-8))),
    "eastr": lambda s, z, p, c: _eastr(s, _noise(p, c), _rank(p, c)),
    "cncml": lambda s, z, p, c: _cncml(s, _noise(p, c), float(_param(
        p, c, "kmax", lambda c: None))),
    "rcml_el": _rcml_el,
    "rcml_el_noise": _rcml_el_noise,
    "cncml_el": _cncml_el,
    "truth": _truth,
}

EL_TAGS = ("rcml_el", "rcml_el_noise", "cncml_el")


def estimator_label(params):
    return params.get("label") or params["tag"]


def make_estimate(params, z, ctx, s=None):
    """Run the estimator described by ``params`` (a mapping with ``tag``)."""
    tag = params.get("tag")
    if tag not in ESTIMATORS:
        raise ValueError(f"unknown estimator tag {tag!r}; known: {sorted(ESTIMATORS)}")
    s = sample_covariance(z) if s is None else s
    return ESTIMATORS[tag](s, z, params, ctx)


def validate_estimator(params, scenario):
    """Raise ``ValueError`` naming the missing key for an incomplete parameter set."""
    ctx = EstimatorContext(scenario=scenario, truth=None, reference=lambda n, k: None)
    tag = params.get("tag")
    if tag not in ESTIMATORS:
        raise ValueError(f"unknown estimator tag {tag!r}; known: {sorted(ESTIMATORS)}")
    if tag in ("fml", "rcml", "eigencanceler", "eastr", "cncml", "rcml_el", "cncml_el"):
        _noise(params, ctx)
    if tag in ("rcml", "rcml_lb", "wax_kailath", "eigencanceler", "itam", "eastr"):
        _rank(params, ctx)
    if tag in ("rcml_el", "rcml_el_noise") and "rank_init" not in params:
        _rank(params, ctx)
    if tag == "cncml":
        _param(params, ctx, "kmax", lambda c: None)


# -- steering grids -------------------------------------------------------------

def steering_grid(scenario, angles=32, dopplers=32):
    """Steering vectors for a uniform look grid.

    Array-only scenarios use ``angles`` azimuths in [-90, 90) degrees with
    one pulse. Space-time scenarios (channels and pulses set) use the
    ``angles x dopplers`` product grid with Doppler in [-prf/2, prf/2).

    Returns
    -------
    steer : ndarray, shape (N, M)
    coords : dict
        Coordinate arrays of length M keyed by name.
    """
    if isinstance(angles, int):
        angles_deg = np.linspace(-90.0, 90.0, angles, endpoint=False)
    else:
        angles_deg = np.atleast_1d(np.asarray(angles, dtype=float))
    az = np.deg2rad(angles_deg)
    ch = getattr(scenario, "channels", None)
    pu = getattr(scenario, "pulses", None)
    if isinstance(scenario, SyntheticClutterScenario) and ch and pu:
        prf = scenario.prf or 1.0
        if isinstance(dopplers, int):
            dop = np.linspace(-prf / 2, prf / 2, dopplers, endpoint=False)
        else:
            dop = np.atleast_1d(np.asarray(dopplers, dtype=float))
        steer = np.concatenate([steering_matrix(az, f, prf, ch, pu) for f in dop], axis=1)
        return steer, {"azimuth_deg": np.tile(angles_deg, dop.size),
                       "doppler_hz": np.repeat(dop, angles_deg.size)}
    return steering_matrix(az, 0.0, 1.0, scenario.dim, 1), {"azimuth_deg": angles_deg}


# -- benchmark ------------------------------------------------------------------

def _stats(values):
    ok = values[~np.isnan(values).any(axis=tuple(range(1, values.ndim)))] \
        if values.ndim > 1 else values[~np.isnan(values)]
    n = ok.shape[0]
    if n == 0:
        nan = np.full(values.shape[1:], np.nan) if values.ndim > 1 else np.nan
        return nan, nan
    mean = ok.mean(axis=0)
    se = ok.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def _run_trial(scenario, truth, root, estimators, k, rng, metrics, steer, ctx):
    z = root @ complex_gaussian(rng, (truth.shape[0], k))
    s = sample_covariance(z)
    out = []
    for params in estimators:
        row = {}
        try:
            est = make_estimate(params, z, ctx, s)
            if "sinr" in metrics:
                row["sinr"] = float(np.mean(normalized_sinr_db(est, truth, steer)))
            if "sinr_angle" in metrics:
                row["sinr_angle"] = normalized_sinr_db(est, truth, steer)
            if "trd" in metrics:
                row["trd"] = trd(est, truth)
            if "log_lr" in metrics:
                row["log_lr"] = _el.likelihood_ratio_log(est, s)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError):
            row = None
        out.append(row)
    return out


def run_benchmark(plan, reference=None, workers=1):
    """Full factorial Monte Carlo over scenarios, estimators, K and trials.

    Parameters
    ----------
    plan : dict
        Keys: ``scenarios`` (list of scenario objects), ``estimators``
        (list of parameter mappings with ``tag``), ``sample_counts``,
        ``trials``, ``seed``, ``metrics`` (subset of ``sinr``,
        ``sinr_angle``, ``trd``, ``log_lr``) and optionally ``angles``.
    reference : callable, optional
        ``(N, K) -> LikelihoodRatioReference`` for EL estimators.
    workers : int
        Trials run on a thread pool; results do not depend on this.

    Returns
    -------
    list of BenchmarkResult
        Trial ``t`` of cell ``(scenario i, K j)`` draws its training data
        from ``SeedSequence([seed, i, j, t])``, so all estimators in a cell
        see the same data.
    """
    metrics = list(plan.get("metrics", ["sinr"]))
    trials = int(plan["trials"])
    seed = int(plan.get("seed", 0))
    angles = plan.get("angles", 32)
    for params in plan["estimators"]:
        if params.get("tag") not in ESTIMATORS:
            raise ValueError(f"unknown estimator tag {params.get('tag')!r}; "
                             f"known: {sorted(ESTIMATORS)}")
    results = []
    for i, scenario in enumerate(plan["scenarios"]):
        truth = truth_covariance(scenario)
        root = psd_sqrt(truth)
        steer, coords = steering_grid(scenario, angles, plan.get("dopplers", 32))
        ctx = EstimatorContext(scenario=scenario, truth=truth, reference=reference)
        for j, k in enumerate(plan["sample_counts"]):
            run = lambda t: _run_trial(scenario, truth, root, plan["estimators"], int(k),
                                       trial_rng(seed, i, j, t), metrics, steer, ctx)
            if workers and workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    rows = list(pool.map(run, range(trials)))
            else:
                rows = [run(t) for t in range(trials)]
            for e_idx, params in enumerate(plan["estimators"]):
                cells = [r[e_idx] for r in rows]
                failures = sum(c is None for c in cells)
                for metric in metrics:
                    width = steer.shape[1] if metric == "sinr_angle" else None
                    blank = np.full(width, np.nan) if width else np.nan
                    vals = np.array([blank if c is None else c[metric] for c in cells],
                                    dtype=float)
                    mean, se = _stats(vals)
                    results.append(BenchmarkResult(
                        scenario=scenario.label, estimator=estimator_label(params),
                        samples=int(k), metric=metric, values=vals, mean=mean, stderr=se,
                        trials=trials, seed=seed, failures=failures,
                        grid=coords if width else None))
    return results


def pd_curves(scenario, estimators, samples, snr_grid_db, pfa=1e-2, trials=10_000,
              calibration_trials=100_000, seed=0, kind="NMF", azimuth_deg=0.0,
              doppler_hz=0.0, reference=None):
    """P_d versus SNR for several estimators built from one training set.

    Estimators share the training draw, the threshold noise draws and the
    detection draws, so their curves are directly comparable.
    """
    truth = truth_covariance(scenario)
    z = psd_sqrt(truth) @ complex_gaussian(trial_rng(seed, 2), (scenario.dim, samples))
    s_cov = sample_covariance(z)
    steer, _ = steering_grid(scenario, [azimuth_deg], [doppler_hz])
    s = steer[:, 0]
    ctx = EstimatorContext(scenario=scenario, truth=truth, reference=reference)
    out = []
    for params in estimators:
        est = make_estimate(params, z, ctx, s_cov)
        res = probability_of_detection(kind, s, est, truth, snr_grid_db, pfa, trials, seed,
                                       calibration_trials=calibration_trials,
                                       sample_count=samples, label=scenario.label,
                                       estimator=estimator_label(params))
        out.append(res)
    return out
