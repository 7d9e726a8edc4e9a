"""Command-line interface.

Subcommands ``calibrate``, ``estimate``, ``benchmark``, ``pd-curve`` and
``sinr-curve`` read a JSON configuration and write plain-text outputs into
the ``--output`` directory. Exit status is 0 on success, 1 for a bad
configuration, 2 for a numerical failure and 3 for an I/O problem.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import evaluation as ev
from . import expected_likelihood as el
from .core import as_samples, sample_covariance, trial_rng
from .simulation import (SyntheticClutterScenario, sample_training, scenario_from_dict,
                         truth_covariance)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class ConfigError(Exception):
    """Malformed or incomplete configuration."""


class MissingCacheError(Exception):
    """An LR reference is needed but calibration was disabled."""


# -- matrix text format ---------------------------------------------------------

def write_matrix(path, m):
    """Write ``m`` as a header line then one ``re im`` pair per entry, row-major."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    with open(path, "w") as fh:
        fh.write(f"complex128 {m.shape[0]} {m.shape[1]}\n")
        for x in m.ravel():
            fh.write(f"{float(x.real)!r} {float(x.imag)!r}\n")


def read_matrix(path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 3 or head[0] != "complex128":
            raise ConfigError(f"{path}: expected header 'complex128 ROWS COLS'")
        rows, cols = int(head[1]), int(head[2])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows * cols, 2):
        raise ConfigError(f"{path}: expected {rows * cols} 're im' lines, got {data.shape[0]}")
    return (data[:, 0] + 1j * data[:, 1]).reshape(rows, cols)


# -- configuration --------------------------------------------------------------

def load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _get(cfg, key, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing configuration key {key!r}")
    return default


def _scenarios(cfg):
    raw = cfg.get("scenarios")
    if raw is None:
        raw = [_get(cfg, "scenario", required=True)]
    try:
        return [scenario_from_dict(r) for r in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario definition: {exc}") from None


def _estimators(cfg, scenarios, key="estimators"):
    raw = _get(cfg, key, required=True)
    if isinstance(raw, dict):
        raw = [raw]
    if not raw:
        raise ConfigError(f"{key!r} must list at least one estimator")
    out = []
    for i, params in enumerate(raw):
        if isinstance(params, str):
            params = {"tag": params}
        if "tag" not in params:
            raise ConfigError(f"{key}[{i}]: missing key 'tag'")
        for sc in scenarios:
            try:
                ev.validate_estimator(params, sc)
            except ValueError as exc:
                raise ConfigError(f"{key}[{i}] on scenario {sc.label!r}: {exc}") from None
        out.append(dict(params))
    return out


def _int_list(cfg, key):
    val = _get(cfg, key, required=True)
    vals = val if isinstance(val, list) else [val]
    try:
        return [int(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"{key!r} must be an integer or list of integers") from None


def _reference_provider(cfg, args):
    lr = cfg.get("lr0", {})
    trials = int(lr.get("trials", el.DEFAULT_TRIALS))
    seed = int(lr.get("seed", 0))
    directory = el.cache_dir(args.cache_dir or cfg.get("cache_dir"))
    memo = {}

    def provide(n, k):
        if (n, k) not in memo:
            try:
                memo[n, k] = el.get_reference(n, k, trials, seed, directory, _workers(args),
                                              calibrate=not args.no_calibrate)[0]
            except FileNotFoundError as exc:
                raise MissingCacheError(
                    f"no LR reference cached for N={n}, K={k} ({exc}); run "
                    f"'stapcov calibrate --dim {n} --samples {k} --trials {trials} "
                    f"--seed {seed} --cache-dir {directory}' first") from None
        return memo[n, k]
    return provide


def _workers(args):
    return args.workers if args.workers else (os.cpu_count() or 1)


def _output_dir(args, cfg):
    out = args.output or cfg.get("output")
    if not out:
        raise ConfigError("no output directory: pass --output or set key 'output'")
    os.makedirs(out, exist_ok=True)
    return out


# -- CSV ------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_results_csv(path, results):
    """One row per (result, grid point); grid columns are named by coordinate."""
    grid_names = []
    for r in results:
        for name in (r.grid or {}):
            if name not in grid_names:
                grid_names.append(name)
    header = ["scenario", "estimator", "K", "metric", *grid_names,
              "mean", "stderr", "trials", "seed", "failures"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in results:
            lead = [r.scenario, r.estimator, r.samples, r.metric]
            tail = [r.trials, r.seed, r.failures]
            if r.grid:
                mean, se = np.atleast_1d(r.mean), np.atleast_1d(r.stderr)
                for p in range(mean.size):
                    coords = [r.grid[g][p] if g in r.grid else "" for g in grid_names]
                    w.writerow([_fmt(x) for x in lead + coords + [mean[p], se[p]] + tail])
            else:
                w.writerow([_fmt(x) for x in
                            lead + [""] * len(grid_names) + [r.mean, r.stderr] + tail])


# -- commands -------------------------------------------------------------------

def cmd_calibrate(args):
    cfg = load_config(args.config)
    cal = cfg.get("calibrate", cfg)
    dims = [args.dim] if args.dim else _int_list(cal, "dim")
    samples = args.samples or _int_list(cal, "samples")
    trials = args.trials or int(cal.get("trials", el.DEFAULT_TRIALS))
    seed = args.seed if args.seed is not None else int(cal.get("seed", 0))
    directory = el.cache_dir(args.cache_dir or cfg.get("cache_dir"))
    for n in dims:
        for k in samples:
            ref, hit = el.get_reference(n, k, trials, seed, directory, _workers(args))
            state = "cached" if hit else "calibrated"
            print(f"N={n} K={k} trials={trials} seed={seed} log_lr0={ref.log_lr0!r} ({state})")
    return EXIT_OK


def cmd_estimate(args):
    cfg = load_config(args.config)
    out = _output_dir(args, cfg)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    training = args.input or cfg.get("training_file")
    scenario = _scenarios(cfg)[0] if ("scenario" in cfg or "scenarios" in cfg) else None
    if training:
        z = as_samples(read_matrix(training))
        truth = truth_covariance(scenario) if scenario is not None else None
    else:
        if scenario is None:
            raise ConfigError("missing configuration key 'scenario' (or a training file)")
        k = int(_get(cfg, "samples", required=True))
        truth = truth_covariance(scenario)
        z = sample_training(truth, k, trial_rng(seed, 0))
    if scenario is None:
        scenario = SyntheticClutterScenario(dim=z.shape[0], label="input")
    params = _estimators(cfg, [scenario], key="estimator")[0]
    ctx = ev.EstimatorContext(scenario=scenario, truth=truth,
                              reference=_reference_provider(cfg, args))
    s = sample_covariance(z)
    est = ev.make_estimate(params, z, ctx, s)
    write_matrix(os.path.join(out, "estimate.txt"), est.matrix)
    meta = {
        "estimator": est.estimator_tag,
        "scenario": scenario.label,
        "dim": int(z.shape[0]),
        "samples": int(z.shape[1]),
        "seed": seed,
        "rank_used": est.rank_used,
        "noise_used": est.noise_used,
        "condition_number_used": est.condition_number_used,
        "log_lr": el.likelihood_ratio_log(est, s) if z.shape[1] >= z.shape[0] else None,
        "annotations": _jsonable(est.annotations),
    }
    with open(os.path.join(out, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {os.path.join(out, 'estimate.txt')}")
    return EXIT_OK


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _plan(cfg, args, metrics):
    scenarios = _scenarios(cfg)
    return {
        "scenarios": scenarios,
        "estimators": _estimators(cfg, scenarios),
        "sample_counts": _int_list(cfg, "sample_counts"),
        "trials": args.trials or int(_get(cfg, "trials", required=True)),
        "seed": args.seed if args.seed is not None else int(cfg.get("seed", 0)),
        "metrics": metrics,
        "angles": cfg.get("angles", 32),
        "dopplers": cfg.get("dopplers", 32),
    }


def cmd_benchmark(args):
    cfg = load_config(args.config)
    metrics = cfg.get("metrics", ["sinr"])
    unknown = set(metrics) - {"sinr", "trd", "log_lr"}
    if unknown:
        raise ConfigError(f"'metrics': unknown metric(s) {sorted(unknown)}")
    plan = _plan(cfg, args, metrics)
    out = _output_dir(args, cfg)
    results = ev.run_benchmark(plan, _reference_provider(cfg, args), _workers(args))
    for metric in metrics:
        path = os.path.join(out, f"benchmark_{metric}.csv")
        write_results_csv(path, [r for r in results if r.metric == metric])
        print(f"wrote {path}")
    return EXIT_OK


def cmd_sinr_curve(args):
    cfg = load_config(args.config)
    plan = _plan(cfg, args, ["sinr_angle"])
    out = _output_dir(args, cfg)
    results = ev.run_benchmark(plan, _reference_provider(cfg, args), _workers(args))
    path = os.path.join(out, "sinr_curve.csv")
    write_results_csv(path, results)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_pd_curve(args):
    cfg = load_config(args.config)
    scenario = _scenarios(cfg)[0]
    estimators = _estimators(cfg, [scenario])
    pd = cfg.get("pd", {})
    kind = str(pd.get("detector", "NMF")).upper()
    if kind not in ev.DETECTORS:
        raise ConfigError(f"'pd.detector': unknown detector {kind!r}")
    snr = pd.get("snr_db", list(range(-10, 21, 2)))
    out = _output_dir(args, cfg)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    results = ev.pd_curves(scenario, estimators, int(_get(cfg, "samples", required=True)),
                           snr, pfa=float(pd.get("pfa", 1e-2)),
                           trials=args.trials or int(pd.get("trials", 10_000)),
                           calibration_trials=int(pd.get("calibration_trials", 100_000)),
                           seed=seed, kind=kind,
                           azimuth_deg=float(pd.get("azimuth_deg", 0.0)),
                           doppler_hz=float(pd.get("doppler_hz", 0.0)),
                           reference=_reference_provider(cfg, args))
    path = os.path.join(out, "pd_curve.csv")
    write_results_csv(path, results)
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "estimate": cmd_estimate,
    "benchmark": cmd_benchmark,
    "pd-curve": cmd_pd_curve,
    "sinr-curve": cmd_sinr_curve,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="stapcov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--trials", type=int, help="Monte Carlo trials (overrides the config)")
        p.add_argument("--workers", type=int, default=None,
                       help="thread count (default: number of processors)")
        p.add_argument("--cache-dir", help=f"LR reference cache (default: ${el.CACHE_ENV} "
                                           "or ~/.cache/stapcov)")
        p.add_argument("--output", help="output directory")
        p.add_argument("--no-calibrate", action="store_true",
                       help="fail instead of calibrating a missing LR reference")
        if name == "calibrate":
            p.add_argument("--dim", type=int, help="dimension N")
            p.add_argument("--samples", type=int, nargs="+", help="sample count(s) K")
        if name == "estimate":
            p.add_argument("--input", help="training matrix file (N x K, matrix text format)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingCacheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
