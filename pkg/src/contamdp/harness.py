"""Experiment drivers and CSV persistence.

Each driver resolves a JSON config against a per-kind schema (unknown keys
rejected), runs the experiment with seeds derived from a master seed, and
writes a comma-separated CSV whose comment header records the config digest,
code version, and every resolved setting.  Given the same config and master
seed the output bytes are identical across reruns.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .analysis import decay_fit, fisher_information, mse_stats
from .baselines import (
    bayes_mean_draw,
    clipped_mean,
    coinpress_mean,
    gaussian_mechanism_mean,
)
from .errors import BatchQualityError, ConfigurationError, ContamDPError
from .inference import GaussianPrior
from .models import (
    BernoulliHalfContamination,
    CauchyRegressionModel,
    CauchyScaleContamination,
    ContaminatedModel,
    GaussianLinearModel,
    LogisticModel,
    StudentTContamination,
    TruncatedNormalMeanModel,
    TruncatedStudentTContamination,
    contaminate,
    sample_dataset,
)
from .privacy import (
    EstimationSetup,
    estimate_epsilon,
    verify_decomposition_per_trial,
)

# ---------------------------------------------------------------------------
# Configuration

_PAPER_TABLE1_EPSILONS = {
    100: 2.85, 1000: 0.94, 2000: 0.72, 5000: 0.46,
    10000: 0.32, 20000: 0.26, 50000: 0.18,
}

_SCHEMAS = {
    "table1": {
        "n_grid": [100, 1000, 10000],
        "p_exponent": 0.125,
        "delta_factor": 10.0,
        "m": 2000,
        "K": 200,
        "q": 99.0,
        "theta_star": 30.0,
        "sigma": 8.0,
        "bounds": [-270.0, 330.0],
        "contamination_df": 5.0,
        "prior_mean": 40.0,
        "prior_sd": 40.0,
        "seed": 2026,
        "out_dir": ".",
    },
    "mean-bench": {
        "n_grid": [1000, 5000, 20000, 50000],
        "methods": ["bayes", "coinpress3", "coinpress10", "clipped", "gaussian"],
        "repeats": 200,
        "epsilon_by_n": None,  # defaults to the published decay values
        "p_exponent": 0.125,
        "delta_factor": 10.0,
        "theta_star": 30.0,
        "sigma": 8.0,
        "bounds": [-270.0, 330.0],
        "contamination_df": 5.0,
        "prior_mean": 40.0,
        "prior_sd": 40.0,
        "initial_ball": [30.0, 300.0],
        "coinpress_beta": 0.01,
        # The iterative mean estimator's concentration slacks assume unit
        # data scale, following the published algorithm it reproduces.
        "coinpress_sigma": 1.0,
        "clip_quantiles": [0.05, 0.95],
        "burn_in": 1000,
        "seed": 2026,
        "out_dir": ".",
    },
    "regression-decay": {
        "models": ["linear", "logistic", "cauchy"],
        "dims": [5],
        "contaminated": [True],
        "n_grid": [1000, 5000, 20000],
        "p_exponent": 0.125,
        "delta_factor": 10.0,
        "m": 2000,
        "K": 20,
        "q": 90.0,
        "prior_sd": 10.0,
        "lambda_t": 5.0,
        "lambda_cauchy": 5.0,
        "extrapolation_targets": [100000.0, 1000000.0, 10000000.0],
        "seed": 2026,
        "out_dir": ".",
    },
    "fisher-check": {
        "p_grid": [0.5, 0.1, 0.01],
        "sigma": 1.0,
        "theta_star": 0.0,
        "lambda_t": 5.0,
        "contamination_df": 5.0,
        "seed": 2026,
        "out_dir": ".",
    },
    "verify-prop1": {
        "n": 20,
        "trials": 100,
        "sets_per_trial": 200,
        "grid_resolution": 401,
        "p": 0.1,
        "sigma": 1.0,
        "theta_star": 0.0,
        "lambda_t": 5.0,
        "contamination_df": 5.0,
        "prior_mean": 0.0,
        "prior_sd": 1.0,
        "seed": 2026,
        "out_dir": ".",
    },
}


def resolve_config(source) -> dict:
    """Resolve a config dict or JSON file path against its kind's schema.

    Unknown keys are rejected; missing keys take the documented defaults;
    the returned dict is fully resolved (no silent defaults downstream).
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    kind = raw.get("kind")
    if kind not in _SCHEMAS:
        raise ConfigurationError(
            f"unknown experiment kind {kind!r}; expected one of {sorted(_SCHEMAS)}"
        )
    schema = _SCHEMAS[kind]
    unknown = set(raw) - set(schema) - {"kind"}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    resolved = {"kind": kind}
    for key, default in schema.items():
        resolved[key] = raw.get(key, default)
    _validate_config(resolved)
    return resolved


def _validate_config(cfg: dict):
    kind = cfg["kind"]
    for grid_key in ("n_grid", "p_grid", "models", "dims", "contaminated",
                     "methods"):
        if grid_key in cfg and len(cfg[grid_key]) == 0:
            raise ConfigurationError(f"{grid_key} must be nonempty")
    if "n_grid" in cfg and "p_exponent" in cfg:
        a = cfg["p_exponent"]
        for n in cfg["n_grid"]:
            if n < 2 or not 0.0 < float(n) ** (-a) < 1.0:
                raise ConfigurationError(
                    f"p rule n^(-{a}) must give p in (0,1); violated at n={n}"
                )
    if "delta_factor" in cfg and cfg["delta_factor"] <= 0:
        raise ConfigurationError("delta_factor must be positive")
    if kind == "regression-decay":
        bad = set(cfg["models"]) - {"linear", "logistic", "cauchy"}
        if bad:
            raise ConfigurationError(f"unknown regression models: {sorted(bad)}")
        if any(d < 1 for d in cfg["dims"]):
            raise ConfigurationError("dims must be >= 1")
    if kind == "mean-bench":
        bad = set(cfg["methods"]) - {"bayes", "coinpress3", "coinpress10",
                                     "clipped", "gaussian"}
        if bad:
            raise ConfigurationError(f"unknown methods: {sorted(bad)}")
        if cfg["repeats"] < 2:
            raise ConfigurationError("mean-bench needs repeats >= 2")
    if kind == "verify-prop1":
        if cfg["trials"] < 1 or cfg["n"] < 2:
            raise ConfigurationError("verify-prop1 needs trials >= 1 and n >= 2")


def config_digest(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# CSV writing

def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.10g}"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def write_csv(path, columns, rows, cfg: dict, notes=()):
    """Write rows with a comment header carrying the full resolved config."""
    lines = [
        f"# config_digest: {config_digest(cfg)}",
        f"# version: contamdp {__version__}",
    ]
    for key in sorted(cfg):
        lines.append(f"# {key}: {json.dumps(cfg[key], sort_keys=True)}")
    for note in notes:
        lines.append(f"# {note}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """(columns, rows-of-strings) for a harness CSV, skipping comments."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ConfigurationError(f"{path} has no header row")
    columns = lines[0].split(",")
    return columns, [ln.split(",") for ln in lines[1:]]


# ---------------------------------------------------------------------------
# Table 1 driver

def _table1_setup(cfg: dict, n: int) -> EstimationSetup:
    lo, hi = cfg["bounds"]
    base = TruncatedNormalMeanModel(sigma=cfg["sigma"], lower=lo, upper=hi)
    g = TruncatedStudentTContamination(
        df=cfg["contamination_df"], scale=cfg["sigma"], lower=lo, upper=hi
    )
    prior = GaussianPrior(mean=[cfg["prior_mean"]], sds=[cfg["prior_sd"]])
    return EstimationSetup(
        base=base, g=g, prior=prior, theta_star=[cfg["theta_star"]],
        n=n, p=float(n) ** (-cfg["p_exponent"]),
        delta=1.0 / (cfg["delta_factor"] * n), m=cfg["m"],
    )


def run_table1(config, out_dir=None, workers: int = 1) -> str:
    """Epsilon estimates across the n grid; returns the CSV path."""
    cfg = resolve_config(config)
    if cfg["kind"] != "table1":
        raise ConfigurationError("run_table1 requires kind = table1")
    out_dir = out_dir or cfg["out_dir"]
    ss = np.random.SeedSequence(cfg["seed"])
    children = ss.spawn(len(cfg["n_grid"]))
    rows, first_error = [], None
    for n, child in zip(cfg["n_grid"], children):
        setup = _table1_setup(cfg, n)
        try:
            est = estimate_epsilon(setup, K=cfg["K"], q=cfg["q"], seed=child,
                                   workers=workers)
            rows.append((n, setup.p, setup.delta, est.epsilon_hat,
                         est.repeats, float(np.median(est.phis)),
                         cfg["seed"], "ok"))
        except ContamDPError as exc:
            first_error = first_error or exc
            rows.append((n, setup.p, setup.delta, float("nan"), 0,
                         float("nan"), cfg["seed"],
                         f"{type(exc).__name__}: {exc}"))
    path = write_csv(
        os.path.join(out_dir, "table1.csv"),
        ["n", "p", "delta", "epsilon_hat_q99", "repeats_valid",
         "phi_median", "seed", "status"],
        rows, cfg,
    )
    if first_error is not None:
        raise first_error
    return path


# ---------------------------------------------------------------------------
# Mean-estimation benchmark driver

def _mean_bench_repeat(args):
    cfg, n, rho, seed = args
    ss = np.random.SeedSequence(seed) if not isinstance(
        seed, np.random.SeedSequence) else seed
    s_data, s_cont, s_bayes, s_cp3, s_cp10, s_clip, s_gauss = ss.spawn(7)
    lo, hi = cfg["bounds"]
    base = TruncatedNormalMeanModel(sigma=cfg["sigma"], lower=lo, upper=hi)
    theta_star = cfg["theta_star"]
    data = sample_dataset(base, [theta_star], None, n, s_data)
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for method in cfg["methods"]:
            if method == "bayes":
                p_n = float(n) ** (-cfg["p_exponent"])
                g = TruncatedStudentTContamination(
                    df=cfg["contamination_df"], scale=cfg["sigma"],
                    lower=lo, upper=hi,
                )
                model = ContaminatedModel(base=base, g=g, p=p_n,
                                          theta_star=[theta_star])
                prior = GaussianPrior(mean=[cfg["prior_mean"]],
                                      sds=[cfg["prior_sd"]])
                cont = contaminate(data, model, s_cont)
                out[method] = bayes_mean_draw(model, prior, cont, s_bayes,
                                              burn_in=cfg["burn_in"])
            elif method in ("coinpress3", "coinpress10"):
                t = 3 if method == "coinpress3" else 10
                s = s_cp3 if t == 3 else s_cp10
                out[method] = coinpress_mean(
                    data, rho, t, cfg["initial_ball"], s,
                    sigma=cfg["coinpress_sigma"], beta=cfg["coinpress_beta"],
                ).estimate
            elif method == "clipped":
                out[method] = clipped_mean(
                    data, rho, s_clip, bounds=tuple(cfg["bounds"]),
                    quantiles=tuple(cfg["clip_quantiles"]),
                ).estimate
            elif method == "gaussian":
                out[method] = gaussian_mechanism_mean(
                    data, rho, tuple(cfg["bounds"]), s_gauss
                ).estimate
    return out


def _epsilon_for_n(cfg: dict, n: int) -> float:
    table = cfg["epsilon_by_n"]
    if table is None:
        table = _PAPER_TABLE1_EPSILONS
    else:
        table = {int(k): float(v) for k, v in table.items()}
    if n not in table:
        raise ConfigurationError(f"no epsilon configured for n={n}")
    return float(table[n])


def run_mean_bench(config, out_dir=None, workers: int = 1) -> str:
    """Bias/variance/MSE of each private mean estimator per sample size."""
    cfg = resolve_config(config)
    if cfg["kind"] != "mean-bench":
        raise ConfigurationError("run_mean_bench requires kind = mean-bench")
    out_dir = out_dir or cfg["out_dir"]
    ss = np.random.SeedSequence(cfg["seed"])
    rows, first_error = [], None
    for n, child in zip(cfg["n_grid"], ss.spawn(len(cfg["n_grid"]))):
        eps = _epsilon_for_n(cfg, n)
        delta = 1.0 / (cfg["delta_factor"] * n)
        rho = eps**2 / (2.0 * math.log(1.0 / delta))
        jobs = [(cfg, n, rho, s) for s in child.spawn(cfg["repeats"])]
        try:
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_mean_bench_repeat, jobs,
                                            chunksize=1))
            else:
                results = [_mean_bench_repeat(job) for job in jobs]
            for method in cfg["methods"]:
                ests = [r[method] for r in results]
                bias, var, mse = mse_stats(ests, cfg["theta_star"])
                rows.append((n, method, rho, bias, var, mse,
                             cfg["repeats"], "ok"))
        except ContamDPError as exc:
            first_error = first_error or exc
            for method in cfg["methods"]:
                rows.append((n, method, rho, float("nan"), float("nan"),
                             float("nan"), 0, f"{type(exc).__name__}: {exc}"))
    path = write_csv(
        os.path.join(out_dir, "mean_bench.csv"),
        ["n", "method", "rho", "bias", "variance", "mse", "repeats", "status"],
        rows, cfg,
        notes=["coinpress budget split: last round 3/4, earlier rounds "
               "share 1/4 equally",
               "clipped budget split: rho/4 per private quantile, rho/2 mean"],
    )
    if first_error is not None:
        raise first_error
    return path


# ---------------------------------------------------------------------------
# Regression decay driver

def default_regression_theta(dim: int) -> np.ndarray:
    """Fixed true parameter: all-ones (intercept first)."""
    return np.ones(dim, dtype=float)


def _regression_setup(cfg: dict, model_name: str, dim: int, cont: bool,
                      n: int) -> EstimationSetup:
    if model_name == "linear":
        base = GaussianLinearModel(dim=dim, sigma=1.0)
        g = StudentTContamination(df=5.0, scale=cfg["lambda_t"])
    elif model_name == "logistic":
        base = LogisticModel(dim=dim)
        g = BernoulliHalfContamination()
    else:
        base = CauchyRegressionModel(dim=dim, scale=1.0)
        g = CauchyScaleContamination(scale=cfg["lambda_cauchy"])
    theta_star = default_regression_theta(dim)
    prior = GaussianPrior(mean=np.zeros(dim),
                          sds=np.full(dim, cfg["prior_sd"]))
    p = float(n) ** (-cfg["p_exponent"]) if cont else 0.0
    return EstimationSetup(
        base=base, g=g, prior=prior, theta_star=theta_star, n=n, p=p,
        delta=1.0 / (cfg["delta_factor"] * n), m=cfg["m"],
        with_covariates=True,
    )


def run_regression_decay(config, out_dir=None, workers: int = 1):
    """Epsilon decay across n for the regression models; returns CSV paths.

    Writes regression_decay.csv plus a companion decay_fit.csv of log-log
    slopes and extrapolated epsilons for every series with >= 3 valid points.
    """
    cfg = resolve_config(config)
    if cfg["kind"] != "regression-decay":
        raise ConfigurationError(
            "run_regression_decay requires kind = regression-decay"
        )
    out_dir = out_dir or cfg["out_dir"]
    ss = np.random.SeedSequence(cfg["seed"])
    combos = [
        (mn, d, c)
        for mn in cfg["models"] for d in cfg["dims"] for c in cfg["contaminated"]
    ]
    rows, fit_rows, first_error = [], [], None
    for (model_name, dim, cont), series_seed in zip(combos, ss.spawn(len(combos))):
        series = []
        for n, child in zip(cfg["n_grid"], series_seed.spawn(len(cfg["n_grid"]))):
            setup = _regression_setup(cfg, model_name, dim, cont, n)
            try:
                est = estimate_epsilon(setup, K=cfg["K"], q=cfg["q"],
                                       seed=child, workers=workers)
                rows.append((model_name, dim, cont, n, est.epsilon_hat, "ok"))
                series.append((n, est.epsilon_hat))
            except ContamDPError as exc:
                first_error = first_error or exc
                rows.append((model_name, dim, cont, n, float("nan"),
                             f"{type(exc).__name__}: {exc}"))
        if len(series) >= 3 and all(e > 0 for _, e in series):
            fit, extrap = decay_fit(series, cfg["extrapolation_targets"])
            for target, value in zip(cfg["extrapolation_targets"], extrap):
                fit_rows.append((model_name, dim, cont, fit.slope,
                                 fit.intercept, fit.residual_rms,
                                 float(target), float(value)))
    path = write_csv(
        os.path.join(out_dir, "regression_decay.csv"),
        ["model", "dim", "contaminated", "n", "epsilon_hat", "status"],
        rows, cfg,
    )
    fit_path = write_csv(
        os.path.join(out_dir, "decay_fit.csv"),
        ["model", "dim", "contaminated", "slope", "intercept",
         "residual_rms", "extrapolation_n", "epsilon_extrapolated"],
        fit_rows, cfg,
    )
    if first_error is not None:
        raise first_error
    return path, fit_path


# ---------------------------------------------------------------------------
# Fisher-information and decomposition-oracle drivers

def run_fisher_check(config, out_dir=None, workers: int = 1) -> str:
    """Max-entry gap |I_p - I_0| of the 1-D Gaussian mean model per p."""
    cfg = resolve_config(config)
    if cfg["kind"] != "fisher-check":
        raise ConfigurationError("run_fisher_check requires kind = fisher-check")
    out_dir = out_dir or cfg["out_dir"]
    base = GaussianLinearModel(dim=1, sigma=cfg["sigma"])
    g = StudentTContamination(df=cfg["contamination_df"], scale=cfg["lambda_t"])
    theta_star = [cfg["theta_star"]]
    clean = ContaminatedModel(base=base, g=g, p=0.0, theta_star=theta_star)
    info_clean = fisher_information(clean, theta_star)
    rows = []
    for p in cfg["p_grid"]:
        model = ContaminatedModel(base=base, g=g, p=p, theta_star=theta_star)
        info = fisher_information(model, theta_star)
        gap = float(np.max(np.abs(info - info_clean)))
        rows.append((float(p), gap, "ok"))
    return write_csv(
        os.path.join(out_dir, "fisher_check.csv"),
        ["p", "max_entry_gap", "status"],
        rows, cfg,
    )


def run_verify_prop1(config, out_dir=None, workers: int = 1) -> str:
    """Per-trial violation counts of the posterior decomposition bound."""
    cfg = resolve_config(config)
    if cfg["kind"] != "verify-prop1":
        raise ConfigurationError("run_verify_prop1 requires kind = verify-prop1")
    out_dir = out_dir or cfg["out_dir"]
    base = GaussianLinearModel(dim=1, sigma=cfg["sigma"])
    g = StudentTContamination(df=cfg["contamination_df"], scale=cfg["lambda_t"])
    model = ContaminatedModel(base=base, g=g, p=cfg["p"],
                              theta_star=[cfg["theta_star"]])
    prior = GaussianPrior(mean=[cfg["prior_mean"]], sds=[cfg["prior_sd"]])
    counts = verify_decomposition_per_trial(
        model, prior, n=cfg["n"], grid_resolution=cfg["grid_resolution"],
        trials=cfg["trials"], seed=cfg["seed"],
        sets_per_trial=cfg["sets_per_trial"],
    )
    rows = [(int(t), int(v), "ok") for t, v in enumerate(counts)]
    return write_csv(
        os.path.join(out_dir, "verify_prop1.csv"),
        ["trial", "violations", "status"],
        rows, cfg,
    )


RUNNERS = {
    "table1": run_table1,
    "mean-bench": run_mean_bench,
    "regression-decay": run_regression_decay,
    "fisher-check": run_fisher_check,
    "verify-prop1": run_verify_prop1,
}
