"""Numerical verifiers: Hellinger distance, Fisher information of the
contaminated likelihood, Gaussian prior-mass lower bounds, decay-rate
fitting, and estimator error statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigurationError
from .inference import GaussianPrior
from .models import ContaminatedModel
from .quadrature import adaptive_quad, adaptive_quad_infinite


def hellinger(p, q, lo=-np.inf, hi=np.inf, tol=1e-8) -> float:
    """Hellinger distance with the 1/2 normalization: h^2 = 0.5 ||sqrt(p)-sqrt(q)||^2."""

    def integrand(x):
        return (np.sqrt(np.maximum(p(x), 0.0)) - np.sqrt(np.maximum(q(x), 0.0))) ** 2

    if np.isfinite(lo) and np.isfinite(hi):
        h2 = 0.5 * adaptive_quad(integrand, lo, hi, tol=tol)
    else:
        h2 = 0.5 * adaptive_quad_infinite(integrand, lo, hi, tol=tol)
    return math.sqrt(min(max(h2, 0.0), 1.0))


def hellinger_between_parameters(model: ContaminatedModel, theta1, theta2,
                                 w=None, tol=1e-8) -> float:
    """Hellinger distance between contaminated densities at two parameters."""
    w_arr = np.ones(model.dim) if w is None else np.asarray(w, dtype=float)
    s1 = float(np.atleast_1d(theta1) @ w_arr)
    s2 = float(np.atleast_1d(theta2) @ w_arr)
    s_star = float(model.theta_star @ w_arr)
    dom = model.base.domain
    if dom[0] == "discrete":
        xs = np.asarray(dom[1], dtype=float)
        p = np.exp(model.log_kp_from_predictors(xs, s1, s_star))
        q = np.exp(model.log_kp_from_predictors(xs, s2, s_star))
        return math.sqrt(0.5 * float(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)))
    lo, hi = model.base.domain_bounds()
    if dom[0] == "real":
        lo, hi = -np.inf, np.inf

    def density(s):
        return lambda x: np.exp(model.log_kp_from_predictors(x, s, s_star))

    return hellinger(density(s1), density(s2), lo, hi, tol=tol)


def fisher_information(model: ContaminatedModel, theta, w=None, tol=1e-9
                       ) -> np.ndarray:
    """Fisher information of a single observation under the contaminated density.

    The score of the mixture is (1-p) f' / k_p along the linear predictor;
    the matrix is the predictor-direction information times the covariate
    outer product.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    w_arr = np.ones(model.dim) if w is None else np.asarray(w, dtype=float)
    s = float(theta @ w_arr)
    s_star = float(model.theta_star @ w_arr)

    def score_sq_density(x):
        log_f = model.base.log_pdf(x, s)
        log_k = model.log_kp_from_predictors(x, s, s_star)
        if model.p == 1.0:
            r = 0.0
        elif model.p > 0:
            r = np.exp(math.log1p(-model.p) + log_f - log_k)
        else:
            r = 1.0
        score = r * model.base.dlogpdf_ds(x, s)
        return score**2 * np.exp(log_k)

    dom = model.base.domain
    if dom[0] == "discrete":
        xs = np.asarray(dom[1], dtype=float)
        info_s = float(np.sum(score_sq_density(xs)))
    elif dom[0] == "interval":
        info_s = adaptive_quad(score_sq_density, dom[1], dom[2], tol=tol)
    else:
        info_s = adaptive_quad_infinite(score_sq_density, tol=tol)
    return info_s * np.outer(w_arr, w_arr)


@dataclass
class PriorMassBounds:
    small_r: float
    large_r: float | None
    mc_estimate: float
    mc_se: float


def prior_mass_bounds(theta_star, r: float, mc_draws: int = 1_000_000,
                      seed=0) -> PriorMassBounds:
    """Lower bounds on the standard-Gaussian mass of the L2 ball around theta*.

    small_r: exp(-||theta*||^2 / 2) * P(chi2_d <= r^2);
    large_r: P(chi2_d <= (r - ||theta*||)^2), defined only for r > ||theta*||.
    Both use the regularized lower incomplete gamma; a Monte Carlo estimate
    of the true ball mass is returned for comparison.
    """
    if r <= 0:
        raise ConfigurationError("radius must be positive")
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
    d = theta_star.shape[0]
    lam = float(theta_star @ theta_star)
    small = math.exp(-lam / 2.0) * float(special.gammainc(d / 2.0, r * r / 2.0))
    norm = math.sqrt(lam)
    large = None
    if r > norm:
        big_r = r - norm
        large = float(special.gammainc(d / 2.0, big_r * big_r / 2.0))
    rng = np.random.default_rng(seed)
    hits = 0
    block = 200_000
    remaining = mc_draws
    while remaining > 0:
        k = min(block, remaining)
        draws = rng.standard_normal((k, d))
        dist = np.linalg.norm(draws - theta_star[None, :], axis=1)
        hits += int(np.sum(dist <= r))
        remaining -= k
    mc = hits / mc_draws
    se = math.sqrt(max(mc * (1.0 - mc), 1e-12) / mc_draws)
    return PriorMassBounds(small_r=small, large_r=large, mc_estimate=mc, mc_se=se)


@dataclass
class DecayFit:
    ns: np.ndarray
    epsilons: np.ndarray
    slope: float
    intercept: float
    residual_rms: float

    def extrapolate(self, n):
        n = np.asarray(n, dtype=float)
        return np.exp(self.intercept + self.slope * np.log(n))


def decay_fit(pairs, extrapolation_targets=()) -> tuple[DecayFit, np.ndarray]:
    """Least-squares fit of log eps on log n, plus extrapolated values."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ConfigurationError("decay_fit needs at least 3 (n, eps) pairs")
    ns = np.array([p[0] for p in pairs], dtype=float)
    eps = np.array([p[1] for p in pairs], dtype=float)
    if np.any(ns <= 0) or np.any(eps <= 0):
        raise ConfigurationError("decay_fit requires positive n and eps")
    log_n, log_e = np.log(ns), np.log(eps)
    slope, intercept = np.polyfit(log_n, log_e, 1)
    resid = log_e - (intercept + slope * log_n)
    fit = DecayFit(
        ns=ns,
        epsilons=eps,
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )
    targets = np.asarray(list(extrapolation_targets), dtype=float)
    return fit, fit.extrapolate(targets) if targets.size else np.array([])


def mse_stats(estimates, truth: float):
    """(bias, unbiased variance, population MSE) of a set of estimates."""
    estimates = np.asarray(estimates, dtype=float)
    m = estimates.shape[0]
    if m < 2:
        raise ConfigurationError("mse_stats needs at least 2 estimates")
    bias = float(np.mean(estimates) - truth)
    var = float(np.var(estimates, ddof=1))
    mse = bias * bias + var * (m - 1) / m
    return bias, var, mse
