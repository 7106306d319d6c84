"""Likelihood models, contamination densities, and the contaminated mixture.

All four likelihoods are single-index models: the density of an observation
x depends on the parameter only through the linear predictor s = theta @ w
(for the scalar mean model, s = theta itself).  Contamination densities may
be located at the true predictor s* = theta_star @ w or be global.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigurationError, DomainError, SamplerError

# Numeric stand-in for an unbounded observation space; every quadrature and
# x-search over a "real" domain reads these bounds.
REAL_DOMAIN_BOUND = 1e6

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Dataset


@dataclass(frozen=True)
class Dataset:
    """Observations with optional covariate rows (one row per observation)."""

    observations: np.ndarray
    covariates: np.ndarray | None = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        object.__setattr__(self, "observations", obs)
        if obs.ndim != 1:
            raise ConfigurationError("observations must be a 1-D array")
        if self.covariates is not None:
            cov = np.asarray(self.covariates, dtype=float)
            object.__setattr__(self, "covariates", cov)
            if cov.ndim != 2 or cov.shape[0] != obs.shape[0]:
                raise ConfigurationError(
                    "covariates must have exactly one row per observation"
                )
            if cov.size:
                if np.max(np.abs(cov)) > 1.0 + 1e-12:
                    raise ConfigurationError(
                        "covariate entries must satisfy |w| <= 1"
                    )
                if not np.allclose(cov[:, 0], 1.0):
                    raise ConfigurationError(
                        "first covariate column must be all ones"
                    )

    @property
    def n(self) -> int:
        return self.observations.shape[0]


def make_covariates(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Intercept column of ones plus i.i.d. uniform[-1, 1] entries."""
    w = rng.uniform(-1.0, 1.0, size=(n, dim))
    w[:, 0] = 1.0
    return w


# ---------------------------------------------------------------------------
# Likelihood models


class LikelihoodModel:
    """Base likelihood f(x; s) parameterized by the linear predictor s.

    Subclasses define `kind`, an observation `domain` of the form
    ("real",), ("interval", l, u) or ("discrete", values), plus the density,
    its s-derivative, and sampling.
    """

    kind: str
    dim: int

    def log_pdf(self, x, s):
        raise NotImplementedError

    def dlogpdf_ds(self, x, s):
        raise NotImplementedError

    def sample(self, s, rng):
        raise NotImplementedError

    @property
    def domain(self):
        raise NotImplementedError

    def domain_bounds(self):
        """Numeric (lo, hi) search/quadrature bounds of the observation space."""
        dom = self.domain
        if dom[0] == "real":
            return -REAL_DOMAIN_BOUND, REAL_DOMAIN_BOUND
        if dom[0] == "interval":
            return dom[1], dom[2]
        vals = dom[1]
        return min(vals), max(vals)

    def contains(self, x) -> np.ndarray:
        dom = self.domain
        x = np.asarray(x, dtype=float)
        if dom[0] == "real":
            return np.isfinite(x)
        if dom[0] == "interval":
            return (x >= dom[1]) & (x <= dom[2])
        return np.isin(x, np.asarray(dom[1], dtype=float))


@dataclass(frozen=True)
class GaussianLinearModel(LikelihoodModel):
    """x = s + e, e ~ N(0, sigma^2)."""

    dim: int = 1
    sigma: float = 1.0
    kind: str = field(default="gaussian-linear", init=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError("sigma must be positive")

    @property
    def domain(self):
        return ("real",)

    def log_pdf(self, x, s):
        z = (np.asarray(x) - s) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - _LOG_SQRT_2PI

    def dlogpdf_ds(self, x, s):
        return (np.asarray(x) - s) / self.sigma**2

    def sample(self, s, rng):
        s = np.asarray(s, dtype=float)
        return s + self.sigma * rng.standard_normal(s.shape)


@dataclass(frozen=True)
class LogisticModel(LikelihoodModel):
    """x ~ Bernoulli(sigmoid(s)), x in {0, 1}."""

    dim: int = 1
    kind: str = field(default="logistic", init=False)

    @property
    def domain(self):
        return ("discrete", (0.0, 1.0))

    def log_pdf(self, x, s):
        x = np.asarray(x, dtype=float)
        # log sigmoid(s) = -log(1+e^-s);  log(1-sigmoid(s)) = -log(1+e^s)
        return -x * np.logaddexp(0.0, -s) - (1.0 - x) * np.logaddexp(0.0, s)

    def dlogpdf_ds(self, x, s):
        return np.asarray(x, dtype=float) - 1.0 / (1.0 + np.exp(-s))

    def sample(self, s, rng):
        s = np.asarray(s, dtype=float)
        p1 = 1.0 / (1.0 + np.exp(-s))
        return (rng.uniform(size=s.shape) < p1).astype(float)


@dataclass(frozen=True)
class CauchyRegressionModel(LikelihoodModel):
    """x = s + e, e ~ Cauchy(0, scale)."""

    dim: int = 1
    scale: float = 1.0
    kind: str = field(default="cauchy-regression", init=False)

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigurationError("scale must be positive")

    @property
    def domain(self):
        return ("real",)

    def log_pdf(self, x, s):
        z = (np.asarray(x) - s) / self.scale
        return -np.log1p(z * z) - math.log(math.pi * self.scale)

    def dlogpdf_ds(self, x, s):
        z = (np.asarray(x) - s) / self.scale
        return 2.0 * z / (self.scale * (1.0 + z * z))

    def sample(self, s, rng):
        s = np.asarray(s, dtype=float)
        return s + self.scale * rng.standard_cauchy(s.shape)


@dataclass(frozen=True)
class TruncatedNormalMeanModel(LikelihoodModel):
    """Scalar mean model: x ~ N(theta, sigma^2) truncated to [lower, upper]."""

    sigma: float = 8.0
    lower: float = -270.0
    upper: float = 330.0
    dim: int = field(default=1, init=False)
    kind: str = field(default="truncated-normal-mean", init=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError("sigma must be positive")
        if self.lower >= self.upper:
            raise ConfigurationError("truncation bounds require lower < upper")

    @property
    def domain(self):
        return ("interval", self.lower, self.upper)

    def _log_z(self, s):
        a = (self.lower - s) / self.sigma
        b = (self.upper - s) / self.sigma
        # log(Phi(b) - Phi(a)); the bounds used here keep Z extremely close
        # to 1, but compute it properly so other configurations stay correct.
        return np.log(stats.norm.cdf(b) - stats.norm.cdf(a))

    def log_pdf(self, x, s):
        x = np.asarray(x, dtype=float)
        z = (x - s) / self.sigma
        out = -0.5 * z * z - math.log(self.sigma) - _LOG_SQRT_2PI - self._log_z(s)
        return np.where((x >= self.lower) & (x <= self.upper), out, -np.inf)

    def dlogpdf_ds(self, x, s):
        a = (self.lower - s) / self.sigma
        b = (self.upper - s) / self.sigma
        zmass = stats.norm.cdf(b) - stats.norm.cdf(a)
        corr = (stats.norm.pdf(b) - stats.norm.pdf(a)) / (self.sigma * zmass)
        return (np.asarray(x) - s) / self.sigma**2 + corr

    def sample(self, s, rng):
        s = np.asarray(s, dtype=float)
        a = (self.lower - s) / self.sigma
        b = (self.upper - s) / self.sigma
        u = rng.uniform(stats.norm.cdf(a), stats.norm.cdf(b), size=s.shape)
        return s + self.sigma * stats.norm.ppf(u)


# ---------------------------------------------------------------------------
# Contamination densities


class ContaminationDensity:
    """Base contamination density g(x), possibly located at s* = theta* @ w."""

    kind: str
    covariate_located: bool = False

    def log_pdf(self, x, s_star):
        raise NotImplementedError

    def sample(self, s_star, rng):
        raise NotImplementedError


@dataclass(frozen=True)
class StudentTContamination(ContaminationDensity):
    """Scaled-and-translated Student t located at the true predictor."""

    df: float = 5.0
    scale: float = 5.0
    kind: str = field(default="student-t", init=False)
    covariate_located: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.df <= 0 or self.scale <= 0:
            raise ConfigurationError("df and scale must be positive")

    def log_pdf(self, x, s_star):
        z = (np.asarray(x) - s_star) / self.scale
        c = (
            math.lgamma((self.df + 1) / 2)
            - math.lgamma(self.df / 2)
            - 0.5 * math.log(self.df * math.pi)
            - math.log(self.scale)
        )
        return c - (self.df + 1) / 2 * np.log1p(z * z / self.df)

    def sample(self, s_star, rng):
        s_star = np.asarray(s_star, dtype=float)
        return s_star + self.scale * rng.standard_t(self.df, size=s_star.shape)


@dataclass(frozen=True)
class TruncatedStudentTContamination(ContaminationDensity):
    """Student t located at the true mean, truncated to [lower, upper].

    Sampling is rejection from the untruncated t with a bounded retry
    budget; at the default bounds the acceptance probability exceeds 0.99.
    """

    df: float = 5.0
    scale: float = 8.0
    lower: float = -270.0
    upper: float = 330.0
    max_attempts: int = 10_000
    kind: str = field(default="truncated-student-t", init=False)
    covariate_located: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.df <= 0 or self.scale <= 0:
            raise ConfigurationError("df and scale must be positive")
        if self.lower >= self.upper:
            raise ConfigurationError("truncation bounds require lower < upper")

    def _log_z(self, s_star):
        t = stats.t(self.df, loc=s_star, scale=self.scale)
        return np.log(t.cdf(self.upper) - t.cdf(self.lower))

    def log_pdf(self, x, s_star):
        x = np.asarray(x, dtype=float)
        base = stats.t.logpdf(x, self.df, loc=s_star, scale=self.scale)
        out = base - self._log_z(s_star)
        return np.where((x >= self.lower) & (x <= self.upper), out, -np.inf)

    def sample(self, s_star, rng):
        s_star = np.asarray(s_star, dtype=float)
        out = np.empty(s_star.shape)
        pending = np.ones(s_star.shape, dtype=bool)
        for _ in range(self.max_attempts):
            if not pending.any():
                return out
            draw = s_star[pending] + self.scale * rng.standard_t(
                self.df, size=int(pending.sum())
            )
            ok = (draw >= self.lower) & (draw <= self.upper)
            idx = np.flatnonzero(pending)
            out[idx[ok]] = draw[ok]
            pending[idx[ok]] = False
        raise SamplerError(
            "truncated-t rejection sampler exhausted its retry budget; "
            "check the truncation bounds"
        )


@dataclass(frozen=True)
class CauchyScaleContamination(ContaminationDensity):
    """Global Cauchy contamination centred at zero with its own scale."""

    scale: float = 5.0
    kind: str = field(default="cauchy-scale", init=False)

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigurationError("scale must be positive")

    def log_pdf(self, x, s_star):
        z = np.asarray(x, dtype=float) / self.scale
        out = -np.log1p(z * z) - math.log(math.pi * self.scale)
        return out + np.zeros_like(np.asarray(s_star, dtype=float))

    def sample(self, s_star, rng):
        s_star = np.asarray(s_star, dtype=float)
        return self.scale * rng.standard_cauchy(s_star.shape)


@dataclass(frozen=True)
class BernoulliHalfContamination(ContaminationDensity):
    """Fair-coin replacement for binary observations."""

    kind: str = field(default="bernoulli-half", init=False)

    def log_pdf(self, x, s_star):
        x = np.asarray(x, dtype=float)
        out = np.full(np.broadcast(x, np.asarray(s_star)).shape, math.log(0.5))
        return np.where(np.isin(x, (0.0, 1.0)), out, -np.inf)

    def sample(self, s_star, rng):
        s_star = np.asarray(s_star, dtype=float)
        return (rng.uniform(size=s_star.shape) < 0.5).astype(float)


# ---------------------------------------------------------------------------
# Contaminated mixture


@dataclass(frozen=True)
class ContaminatedModel:
    """k_p(x; theta, w) = (1-p) f(x; theta, w) + p g(x; w)."""

    base: LikelihoodModel
    g: ContaminationDensity
    p: float
    theta_star: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError("contamination rate p must lie in [0, 1]")
        ts = np.atleast_1d(np.asarray(self.theta_star, dtype=float))
        if ts.shape != (self.base.dim,):
            raise ConfigurationError("theta_star must have the model dimension")
        object.__setattr__(self, "theta_star", ts)

    @property
    def dim(self) -> int:
        return self.base.dim

    def predict(self, theta, W):
        """Linear predictors theta @ w for each covariate row (or theta itself)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if W is None:
            return np.full(1, theta[0]) if theta.ndim == 1 else theta[:, 0]
        return np.asarray(W, dtype=float) @ theta

    def log_kp_from_predictors(self, x, s, s_star):
        """log k_p given observations and precomputed predictors (broadcastable)."""
        logf = self.base.log_pdf(x, s)
        if self.p == 0.0:
            return logf
        logg = self.g.log_pdf(x, s_star)
        if self.p == 1.0:
            # g is theta-free; broadcast across the predictor axis anyway so
            # callers get the same shape for every p.
            return logg + np.zeros_like(np.asarray(s, dtype=float))
        return np.logaddexp(
            math.log1p(-self.p) + logf, math.log(self.p) + logg
        )

    def log_g(self, x, s_star):
        return self.g.log_pdf(x, s_star)


def log_density(model: ContaminatedModel, x, w, theta) -> float:
    """log k_p(x; theta, w) for a single observation."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (model.dim,):
        raise ConfigurationError("theta must have the model dimension")
    if not bool(np.all(model.base.contains(x))):
        raise DomainError(f"observation {x!r} outside the model domain")
    w_arr = None if w is None else np.asarray(w, dtype=float)[None, :]
    s = model.predict(theta, w_arr)[0]
    s_star = model.predict(model.theta_star, w_arr)[0]
    return float(model.log_kp_from_predictors(x, s, s_star))


def likelihood_ratio(model: ContaminatedModel, x, w, theta, theta_ref) -> float:
    """d(x; theta) = k_p(x; theta) / k_p(x; theta_ref); strictly positive."""
    return math.exp(
        log_density(model, x, w, theta) - log_density(model, x, w, theta_ref)
    )


def sample_dataset(
    model: LikelihoodModel,
    theta_star,
    covariates,
    n: int,
    seed,
) -> Dataset:
    """n i.i.d. draws from f(.; theta_star, w_i)."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    rng = np.random.default_rng(seed)
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
    if covariates is None:
        s = np.full(n, theta_star[0])
    else:
        covariates = np.asarray(covariates, dtype=float)
        s = covariates @ theta_star
    x = model.sample(s, rng)
    return Dataset(observations=x, covariates=covariates)


def contaminate(data: Dataset, model: ContaminatedModel, seed) -> Dataset:
    """Replace each observation with probability p by a draw from g."""
    rng = np.random.default_rng(seed)
    if model.p == 0.0:
        return data
    replace = rng.uniform(size=data.n) < model.p
    x = data.observations.copy()
    if replace.any():
        if data.covariates is None:
            s_star = np.full(int(replace.sum()), model.theta_star[0])
        else:
            s_star = data.covariates[replace] @ model.theta_star
        x[replace] = model.g.sample(s_star, rng)
    return Dataset(observations=x, covariates=data.covariates)
