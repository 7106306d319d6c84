"""Posterior machinery for the contaminated model.

Log posterior, MAP optimization, finite-difference Hessian / Laplace
approximation, importance sampling against the Laplace proposal,
leave-one-out reweighting, and a random-walk Metropolis sampler.  All weight
arithmetic happens in log space so it survives n = 50,000.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (
    ConfigurationError,
    CurvatureError,
    DegeneracyError,
    NonConvergenceError,
)
from .models import ContaminatedModel, Dataset

_LOG_2PI = math.log(2.0 * math.pi)

# Cap on entries of the (particles x data) matrices built at once.
_CHUNK_BUDGET = 4_000_000


class TuningWarning(UserWarning):
    """Sampler diagnostics outside their recommended range."""


class DegeneracyWarning(UserWarning):
    """Importance-sampling effective sample size below the floor."""


@dataclass(frozen=True)
class GaussianPrior:
    """Diagonal Gaussian prior."""

    mean: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        sds = np.atleast_1d(np.asarray(self.sds, dtype=float))
        if sds.shape != mean.shape:
            raise ConfigurationError("prior mean and sds must share a shape")
        if np.any(sds <= 0):
            raise ConfigurationError("prior standard deviations must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sds", sds)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        z = (theta - self.mean) / self.sds
        return -0.5 * np.sum(z * z, axis=-1) - np.sum(
            np.log(self.sds)
        ) - 0.5 * self.dim * _LOG_2PI

    def grad_log_pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        return -(theta - self.mean) / self.sds**2


@dataclass(frozen=True)
class LaplaceApproximation:
    """MAP point with the curvature of -log posterior at it."""

    theta_map: np.ndarray
    hessian: np.ndarray
    cov_factor: np.ndarray  # lower-triangular, cov_factor @ cov_factor.T = H^-1

    @property
    def dim(self) -> int:
        return self.theta_map.shape[0]

    def sample(self, m: int, rng) -> np.ndarray:
        z = rng.standard_normal((m, self.dim))
        return self.theta_map[None, :] + z @ self.cov_factor.T

    def log_pdf(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        diff = thetas - self.theta_map[None, :]
        quad = np.einsum("ij,jk,ik->i", diff, self.hessian, diff)
        sign, logdet = np.linalg.slogdet(self.hessian)
        return 0.5 * logdet - 0.5 * self.dim * _LOG_2PI - 0.5 * quad


@dataclass
class ParticleCloud:
    """Weighted posterior samples; target is 'pi_n' or 'pi_{n-1}'."""

    particles: np.ndarray
    weights: np.ndarray
    target: str
    degenerate: bool = False

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        total = self.weights.sum()
        if not np.isclose(total, 1.0, atol=1e-12, rtol=0):
            raise ConfigurationError("particle weights must be normalized")

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles


# ---------------------------------------------------------------------------
# Log posterior


def _predictor_pieces(model: ContaminatedModel, data: Dataset):
    """Precompute per-datum quantities that do not depend on theta."""
    x = data.observations
    W = data.covariates
    if W is None:
        s_star = np.full(data.n, model.theta_star[0])
    else:
        s_star = W @ model.theta_star
    log_g = model.log_g(x, s_star) if model.p > 0 else None
    return x, W, s_star, log_g


def _log_lik_many(model: ContaminatedModel, data: Dataset, thetas: np.ndarray):
    """Sum_i log k_p(x_i; theta, w_i) for a batch of parameter vectors."""
    thetas = np.atleast_2d(thetas)
    x, W, _, log_g = _predictor_pieces(model, data)
    if data.n == 0:
        return np.zeros(thetas.shape[0])
    out = np.empty(thetas.shape[0])
    chunk = max(1, _CHUNK_BUDGET // max(data.n, 1))
    for start in range(0, thetas.shape[0], chunk):
        block = thetas[start : start + chunk]
        if W is None:
            s = block[:, 0][:, None]  # (b, 1) broadcast against (n,)
        else:
            s = block @ W.T  # (b, n)
        log_f = model.base.log_pdf(x[None, :], s)
        if model.p == 0.0:
            log_k = log_f
        elif model.p == 1.0:
            log_k = np.broadcast_to(log_g[None, :], log_f.shape)
        else:
            log_k = np.logaddexp(
                math.log1p(-model.p) + log_f, math.log(model.p) + log_g[None, :]
            )
        out[start : start + chunk] = log_k.sum(axis=1)
    return out


def log_posterior(model: ContaminatedModel, prior: GaussianPrior, data: Dataset, theta):
    """Unnormalized log posterior at a single parameter vector."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return float(_log_lik_many(model, data, theta[None, :])[0] + prior.log_pdf(theta))


def log_posterior_many(model, prior, data, thetas):
    """Unnormalized log posterior for a batch of parameter vectors."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    return _log_lik_many(model, data, thetas) + prior.log_pdf(thetas)


def grad_log_posterior(model: ContaminatedModel, prior: GaussianPrior, data: Dataset, theta):
    """Analytic gradient of the log posterior."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    x, W, _, log_g = _predictor_pieces(model, data)
    grad = prior.grad_log_pdf(theta)
    if data.n == 0:
        return grad
    if W is None:
        s = np.full(data.n, theta[0])
    else:
        s = W @ theta
    log_f = model.base.log_pdf(x, s)
    if model.p == 0.0:
        r = np.ones_like(log_f)
    elif model.p == 1.0:
        r = np.zeros_like(log_f)
    else:
        log_k = np.logaddexp(
            math.log1p(-model.p) + log_f, math.log(model.p) + log_g
        )
        r = np.exp(math.log1p(-model.p) + log_f - log_k)
    score_s = r * model.base.dlogpdf_ds(x, s)
    if W is None:
        grad = grad + np.array([score_s.sum()])
    else:
        grad = grad + score_s @ W
    return grad


# ---------------------------------------------------------------------------
# MAP and Laplace


def map_estimate(model, prior, data, init, tol=1e-6, max_iter=500):
    """MAP by quasi-Newton ascent with analytic gradients."""
    init = np.atleast_1d(np.asarray(init, dtype=float))
    if not np.all(np.isfinite(init)):
        raise ConfigurationError("MAP init must be finite")

    def neg(theta):
        return -log_posterior(model, prior, data, theta)

    def neg_grad(theta):
        return -grad_log_posterior(model, prior, data, theta)

    res = optimize.minimize(
        neg,
        init,
        jac=neg_grad,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 1e-15},
    )
    theta = np.atleast_1d(res.x)
    # Damped Newton polish until the sup-norm gradient test is met: the step
    # is backtracked until the objective does not decrease, which keeps the
    # polish stable on flat likelihood tails.
    value = -neg(theta)
    for _ in range(50):
        grad = grad_log_posterior(model, prior, data, theta)
        if np.max(np.abs(grad)) < tol:
            return theta
        hess = _fd_hessian(model, prior, data, theta)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        for _ in range(30):
            candidate = theta - scale * step
            cand_value = -neg(candidate)
            if np.isfinite(cand_value) and cand_value >= value - 1e-12 * (
                1.0 + abs(value)
            ):
                break
            scale *= 0.5
        else:
            break
        theta, value = candidate, cand_value
    grad = grad_log_posterior(model, prior, data, theta)
    if np.max(np.abs(grad)) < tol:
        return theta
    raise NonConvergenceError(
        f"MAP gradient sup-norm {np.max(np.abs(grad)):.3e} above tol {tol:g}",
        last_iterate=theta,
        grad_norm=float(np.max(np.abs(grad))),
    )


def _fd_hessian(model, prior, data, theta):
    """Log-posterior Hessian by central differences of the analytic gradient."""
    d = theta.shape[0]
    eps = float(np.finfo(float).eps)
    out = np.empty((d, d))
    for j in range(d):
        h = eps ** (1.0 / 3.0) * (1.0 + abs(theta[j]))
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        gu = grad_log_posterior(model, prior, data, up)
        gd = grad_log_posterior(model, prior, data, dn)
        out[:, j] = (gu - gd) / (2.0 * h)
    return 0.5 * (out + out.T)


def laplace_approximation(model, prior, data, theta_map, tol=1e-6):
    """Gaussian N(theta_MAP, H^-1) matching the posterior curvature."""
    theta_map = np.atleast_1d(np.asarray(theta_map, dtype=float))
    grad = grad_log_posterior(model, prior, data, theta_map)
    if np.max(np.abs(grad)) >= tol:
        raise ConfigurationError(
            f"theta_map fails the gradient test ({np.max(np.abs(grad)):.3e} >= {tol:g})"
        )
    hess = -_fd_hessian(model, prior, data, theta_map)
    for k in range(7):
        jitter = 0.0 if k == 0 else 1e-8 * 10.0 ** (k - 1)
        try:
            trial = hess + jitter * np.eye(hess.shape[0])
            cov = np.linalg.inv(trial)
            factor = np.linalg.cholesky(0.5 * (cov + cov.T))
            return LaplaceApproximation(
                theta_map=theta_map, hessian=trial, cov_factor=factor
            )
        except np.linalg.LinAlgError:
            continue
    raise CurvatureError("posterior Hessian not positive definite after jitter ladder")


# ---------------------------------------------------------------------------
# Importance sampling


def normalized_weights_from_log(log_w):
    log_w = np.asarray(log_w, dtype=float)
    finite = np.isfinite(log_w)
    if not finite.any():
        raise DegeneracyError("all importance weights vanished")
    shifted = np.where(finite, log_w - log_w[finite].max(), -np.inf)
    w = np.exp(shifted)
    total = w.sum()
    w = w / total
    # Kill the last-ulp drift so the sum-to-one invariant holds exactly.
    return w / w.sum()


def importance_sample(model, prior, data, approx: LaplaceApproximation, m, seed,
                      ess_floor_fraction=0.01):
    """Particle cloud for pi_n using the Laplace approximation as proposal."""
    if m < 100:
        raise ConfigurationError("importance sampling needs m >= 100")
    rng = np.random.default_rng(seed)
    thetas = approx.sample(m, rng)
    log_w = log_posterior_many(model, prior, data, thetas) - approx.log_pdf(thetas)
    w = normalized_weights_from_log(log_w)
    cloud = ParticleCloud(particles=thetas, weights=w, target="pi_n")
    if cloud.ess < ess_floor_fraction * m:
        cloud.degenerate = True
        warnings.warn(
            f"degenerate particle cloud: ESS {cloud.ess:.1f} below floor "
            f"{ess_floor_fraction * m:.1f}",
            DegeneracyWarning,
        )
    return cloud


def reweight_drop_last(cloud: ParticleCloud, model: ContaminatedModel, dropped):
    """Reweight a pi_n cloud to target pi_{n-1} after removing one datum."""
    if cloud.target != "pi_n":
        raise ConfigurationError("reweight_drop_last expects a pi_n cloud")
    x, w_row = dropped
    data1 = Dataset(
        observations=np.array([x], dtype=float),
        covariates=None if w_row is None else np.asarray(w_row, dtype=float)[None, :],
    )
    log_k = _log_lik_many(model, data1, cloud.particles)
    with np.errstate(divide="ignore"):
        log_w = np.log(cloud.weights) - log_k
    w = normalized_weights_from_log(log_w)
    return ParticleCloud(particles=cloud.particles, weights=w, target="pi_{n-1}",
                         degenerate=cloud.degenerate)


# ---------------------------------------------------------------------------
# Random-walk Metropolis


def rwm_sample(model, prior, data, init, steps, step_scale=None, seed=None,
               burn_in=0):
    """Markov chain targeting pi_n; returns (chain, acceptance_rate).

    The default step scale follows the 2.38/sqrt(d) rule applied to the
    Laplace standard deviations when none is supplied.
    """
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    init = np.atleast_1d(np.asarray(init, dtype=float))
    d = init.shape[0]
    if step_scale is None:
        approx = laplace_approximation(model, prior, data, init)
        step_scale = np.sqrt(np.diag(approx.cov_factor @ approx.cov_factor.T))
        step_scale = step_scale * 2.38 / math.sqrt(d)
    step_scale = np.broadcast_to(np.asarray(step_scale, dtype=float), (d,))
    if np.any(step_scale <= 0):
        raise ConfigurationError("step scale must be positive")
    rng = np.random.default_rng(seed)
    chain = np.empty((steps, d))
    theta = init.copy()
    # Precompute the theta-free pieces once; the chain is sequential and
    # would otherwise pay for the contamination log-density every step.
    x, W, _, log_g = _predictor_pieces(model, data)

    def logpost(th):
        s = np.full(data.n, th[0]) if W is None else W @ th
        log_f = model.base.log_pdf(x, s)
        if model.p == 0.0:
            log_k = log_f
        elif model.p == 1.0:
            log_k = log_g
        else:
            log_k = np.logaddexp(
                math.log1p(-model.p) + log_f, math.log(model.p) + log_g
            )
        return float(log_k.sum() + prior.log_pdf(th))

    log_p = logpost(theta)
    accepts = 0
    for t in range(steps):
        prop = theta + step_scale * rng.standard_normal(d)
        log_q = logpost(prop)
        if math.log(rng.uniform()) < log_q - log_p:
            theta, log_p = prop, log_q
            accepts += 1
        chain[t] = theta
    rate = accepts / steps
    post = chain[burn_in:]
    if not 0.05 <= rate <= 0.7:
        warnings.warn(
            f"RWM acceptance rate {rate:.3f} outside [0.05, 0.7]", TuningWarning
        )
    return post, rate
