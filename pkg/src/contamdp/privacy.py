"""Empirical (epsilon, delta) estimation for contaminated posterior sampling.

Implements the end-to-end estimation pipeline: neighbourhood selection from
particle tail weights, the sup/inf likelihood-ratio bound over the
neighbourhood, the leave-one-out ratio of posterior expectations, repeat
aggregation into a quantile, zCDP conversions, and a quadrature oracle for
the posterior-decomposition inequality on 1-D models.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BatchQualityError,
    ConfigurationError,
    ContamDPError,
    DegeneracyError,
    NumericalError,
)
from .inference import (
    GaussianPrior,
    ParticleCloud,
    importance_sample,
    laplace_approximation,
    map_estimate,
    reweight_drop_last,
)
from .models import (
    ContaminatedModel,
    ContaminationDensity,
    Dataset,
    LikelihoodModel,
    contaminate,
    make_covariates,
    sample_dataset,
)
from .quadrature import _panel_rule

LOG_RATIO_ESCALATION = 50.0


class BoundaryWitnessWarning(UserWarning):
    """An x-search witness landed on the search-interval boundary."""


# ---------------------------------------------------------------------------
# Budget types


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class ZcdpBudget:
    rho: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigurationError("rho must be positive")


def zcdp_from_dp(budget: PrivacyBudget) -> ZcdpBudget:
    """rho such that rho-zCDP implies (epsilon, delta)-DP."""
    return ZcdpBudget(rho=budget.epsilon**2 / (2.0 * math.log(1.0 / budget.delta)))


def dp_from_zcdp(rho: ZcdpBudget, delta: float) -> PrivacyBudget:
    """epsilon implied at the given delta by a rho-zCDP guarantee."""
    if not 0.0 < delta < 1.0:
        raise ConfigurationError("delta must lie in (0, 1)")
    return PrivacyBudget(
        epsilon=math.sqrt(2.0 * rho.rho * math.log(1.0 / delta)), delta=delta
    )


# ---------------------------------------------------------------------------
# Neighbourhood selection


@dataclass(frozen=True)
class NeighbourhoodBox:
    """L-infinity hypercube of half-width phi around the center."""

    center: np.ndarray
    phi: float

    def __post_init__(self):
        object.__setattr__(
            self, "center", np.atleast_1d(np.asarray(self.center, dtype=float))
        )
        if self.phi < 0:
            raise ConfigurationError("phi must be nonnegative")

    @property
    def dim(self) -> int:
        return self.center.shape[0]


def choose_phi(cloud: ParticleCloud, center, delta: float):
    """Minimal radius whose outside-weight is at most delta.

    Returns (phi, delta_hat) where delta_hat is the realized tail weight
    strictly beyond phi.
    """
    if not 0.0 < delta < 1.0:
        raise ConfigurationError("delta must lie in (0, 1)")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dists = np.max(np.abs(cloud.particles - center[None, :]), axis=1)
    order = np.argsort(dists)
    d_sorted = dists[order]
    w_sorted = cloud.weights[order]
    # tail[i] = weight strictly beyond d_sorted[i]
    suffix = np.concatenate([np.cumsum(w_sorted[::-1])[::-1], [0.0]])[1:]
    tail = suffix.copy()
    # Collapse ties so equal distances share the same tail weight.
    for i in range(len(d_sorted) - 2, -1, -1):
        if d_sorted[i] == d_sorted[i + 1]:
            tail[i] = tail[i + 1]
    ok = tail <= delta
    idx = int(np.argmax(ok))  # first index whose tail fits under delta
    return float(d_sorted[idx]), float(tail[idx])


# ---------------------------------------------------------------------------
# x-search helpers


def _golden_section(f, lo, hi, maximize, tol=1e-10, max_iter=200):
    """Golden-section refinement of a scalar objective on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    sign = 1.0 if maximize else -1.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = sign * f(c), sign * f(d)
    for _ in range(max_iter):
        if b - a < tol * (1.0 + abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = sign * f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = sign * f(d)
    xs = [a, b, c, d]
    vals = [f(v) for v in xs]
    best = int(np.argmax(vals)) if maximize else int(np.argmin(vals))
    return xs[best], vals[best]


def _scale_equiv(model: ContaminatedModel) -> float:
    base = model.base
    s = getattr(base, "sigma", None) or getattr(base, "scale", None) or 1.0
    g_scale = getattr(model.g, "scale", 0.0)
    return float(max(s, g_scale))


def _x_search_interval(model: ContaminatedModel, pred_lo: float, pred_hi: float,
                       widen: float = 20.0):
    dom = model.base.domain
    if dom[0] == "interval":
        return dom[1], dom[2]
    pad = widen * _scale_equiv(model)
    return pred_lo - pad, pred_hi + pad


def _covariate_corners(dim: int, max_free_dims: int = 10) -> np.ndarray:
    """Corners of [-1, 1]^dim with the intercept coordinate fixed at one."""
    if dim == 1:
        return np.ones((1, 1))
    free = dim - 1
    if free > max_free_dims:
        raise ConfigurationError(
            f"covariate corner enumeration capped at {max_free_dims} free dims"
        )
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=free)))
    return np.hstack([np.ones((corners.shape[0], 1)), corners])


def _check_escalation(model: ContaminatedModel, log_d_values):
    if model.p > 0 and np.max(np.abs(log_d_values)) > LOG_RATIO_ESCALATION:
        raise NumericalError(
            "likelihood ratio escalation: |log d| exceeded "
            f"{LOG_RATIO_ESCALATION:g}; the contamination rate is too small "
            "for the configured search domain"
        )


def _warn_if_boundary(x, lo, hi, what):
    span = hi - lo
    if span > 0 and (x - lo < 1e-9 * span or hi - x < 1e-9 * span):
        warnings.warn(
            f"{what} witness lies on the x-search boundary; widen the domain",
            BoundaryWitnessWarning,
        )


# ---------------------------------------------------------------------------
# eta bound (Algorithm step: sup/inf of d over the neighbourhood)


def _log_ratio_fn(model: ContaminatedModel, s_star: float):
    """log d(x; s) with predictors s, reference predictor s_star."""

    def log_d(x, s):
        num = model.log_kp_from_predictors(x, s, s_star)
        den = model.log_kp_from_predictors(x, s_star, s_star)
        return num - den

    return log_d


def eta_bound(model: ContaminatedModel, box: NeighbourhoodBox,
              x_grid_points: int = 512, s_grid_points: int = 65,
              covariate_corners: np.ndarray | None = None):
    """(sup, inf, eta) of the likelihood ratio over the neighbourhood box.

    The ratio depends on theta only through the linear predictor, so the
    theta-search over the L-infinity box reduces to an interval search over
    the predictor; corner seeds plus a dense interior grid plus golden
    refinement cover it.
    """
    if covariate_corners is None:
        covariate_corners = _covariate_corners(box.dim)
    sup_val, inf_val = -np.inf, np.inf
    for w in covariate_corners:
        s_star = float(model.theta_star @ w)
        s_center = float(box.center @ w)
        half = box.phi * float(np.sum(np.abs(w)))
        s_lo, s_hi = s_center - half, s_center + half
        log_d = _log_ratio_fn(model, s_star)
        dom = model.base.domain
        if dom[0] == "discrete":
            xs = np.asarray(dom[1], dtype=float)
            s_grid = np.linspace(s_lo, s_hi, s_grid_points)
            mat = log_d(xs[:, None], s_grid[None, :])
            _check_escalation(model, mat)
            for k, x in enumerate(xs):
                row = mat[k]
                for maximize in (True, False):
                    j = int(np.argmax(row)) if maximize else int(np.argmin(row))
                    a = s_grid[max(j - 1, 0)]
                    b = s_grid[min(j + 1, len(s_grid) - 1)]
                    if a == b:
                        val = row[j]
                    else:
                        _, val = _golden_section(
                            lambda s: float(log_d(x, s)), a, b, maximize
                        )
                    sup_val = max(sup_val, val)
                    inf_val = min(inf_val, val)
        else:
            x_lo, x_hi = _x_search_interval(model, s_lo, s_hi)
            x_grid = np.linspace(x_lo, x_hi, x_grid_points)
            s_grid = np.linspace(s_lo, s_hi, s_grid_points)
            mat = log_d(x_grid[:, None], s_grid[None, :])
            _check_escalation(model, mat)
            for maximize in (True, False):
                flat = int(np.argmax(mat)) if maximize else int(np.argmin(mat))
                i, j = np.unravel_index(flat, mat.shape)
                x_best, s_best = x_grid[i], s_grid[j]
                # Coordinate-wise golden refinement around the best cell.
                for _ in range(3):
                    a = x_grid[max(i - 1, 0)]
                    b = x_grid[min(i + 1, len(x_grid) - 1)]
                    x_best, _ = _golden_section(
                        lambda x: float(log_d(x, s_best)), a, b, maximize
                    )
                    if s_lo < s_hi:
                        s_best, _ = _golden_section(
                            lambda s: float(log_d(x_best, s)), s_lo, s_hi, maximize
                        )
                val = float(log_d(x_best, s_best))
                if maximize:
                    sup_val = max(sup_val, val)
                    _warn_if_boundary(x_best, x_lo, x_hi, "eta sup")
                else:
                    inf_val = min(inf_val, val)
                    _warn_if_boundary(x_best, x_lo, x_hi, "eta inf")
    sup_d = math.exp(sup_val)
    inf_d = math.exp(inf_val)
    # The reference parameter attains ratio 1, so sup >= 1 >= inf whenever it
    # lies in the box; clamp out sub-ulp optimizer noise.
    sup_d = max(sup_d, inf_d)
    return sup_d, inf_d, sup_d / inf_d


# ---------------------------------------------------------------------------
# Ratio of posterior expectations (alpha, beta)


def expectation_ratio(cloud: ParticleCloud, model: ContaminatedModel,
                      x_grid_points: int = 512,
                      covariate_corners: np.ndarray | None = None,
                      pred_margin: float | None = None):
    """(alpha, beta): sup/inf over x of the weighted mean of d(x; theta_i)."""
    if cloud.degenerate:
        raise DegeneracyError("expectation_ratio requires a nondegenerate cloud")
    dim = cloud.particles.shape[1]
    if covariate_corners is None:
        covariate_corners = _covariate_corners(dim)
    alpha, beta = -np.inf, np.inf
    for w in covariate_corners:
        s_star = float(model.theta_star @ w)
        s_i = cloud.particles @ w  # (m,)

        def objective(x):
            x_arr = np.asarray(x, dtype=float)
            scalar = x_arr.ndim == 0
            x_col = np.atleast_1d(x_arr)[:, None]
            log_num = model.log_kp_from_predictors(x_col, s_i[None, :], s_star)
            log_den = model.log_kp_from_predictors(x_col, s_star, s_star)
            log_d = log_num - log_den
            _check_escalation(model, log_d)
            vals = np.exp(log_d) @ cloud.weights
            return float(vals[0]) if scalar else vals

        dom = model.base.domain
        if dom[0] == "discrete":
            vals = objective(np.asarray(dom[1], dtype=float))
            alpha = max(alpha, float(np.max(vals)))
            beta = min(beta, float(np.min(vals)))
            continue
        pred_lo = float(min(s_i.min(), s_star))
        pred_hi = float(max(s_i.max(), s_star))
        if pred_margin is not None:
            pred_lo -= pred_margin
            pred_hi += pred_margin
        x_lo, x_hi = _x_search_interval(model, pred_lo, pred_hi)
        x_grid = np.linspace(x_lo, x_hi, x_grid_points)
        vals = objective(x_grid)
        for maximize in (True, False):
            i = int(np.argmax(vals)) if maximize else int(np.argmin(vals))
            a = x_grid[max(i - 1, 0)]
            b = x_grid[min(i + 1, len(x_grid) - 1)]
            x_best, val = _golden_section(objective, a, b, maximize)
            if maximize:
                alpha = max(alpha, val)
                _warn_if_boundary(x_best, x_lo, x_hi, "alpha")
            else:
                beta = min(beta, val)
                _warn_if_boundary(x_best, x_lo, x_hi, "beta")
    if beta <= 0:
        raise NumericalError("expectation ratio lower bound vanished")
    alpha = max(alpha, beta)
    return alpha, beta


# ---------------------------------------------------------------------------
# Single-repeat and batch epsilon estimation


@dataclass(frozen=True)
class EstimationSetup:
    """Model and algorithm settings for one epsilon-estimation problem."""

    base: LikelihoodModel
    g: ContaminationDensity
    prior: GaussianPrior
    theta_star: np.ndarray
    n: int
    p: float
    delta: float
    m: int = 2000
    with_covariates: bool = False
    map_tol: float = 1e-6
    x_grid_points: int = 512
    s_grid_points: int = 65

    def __post_init__(self):
        object.__setattr__(
            self, "theta_star", np.atleast_1d(np.asarray(self.theta_star, dtype=float))
        )
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if not 0.0 <= self.p < 1.0:
            raise ConfigurationError("estimation requires p in [0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")

    def model(self) -> ContaminatedModel:
        return ContaminatedModel(
            base=self.base, g=self.g, p=self.p, theta_star=self.theta_star
        )


@dataclass
class RepeatDiagnostics:
    ess: float
    ess_dropped: float
    phi: float
    delta_hat: float
    eta: float
    alpha: float
    beta: float
    degenerate: bool


def estimate_epsilon_once(setup: EstimationSetup, seed, data: Dataset | None = None):
    """One repeat of the estimation procedure; returns (eps, phi, delta_hat, diag)."""
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    seeds = ss.spawn(4)
    model = setup.model()
    if data is None:
        covariates = None
        if setup.with_covariates:
            rng = np.random.default_rng(seeds[0])
            covariates = make_covariates(setup.n, setup.base.dim, rng)
        data = sample_dataset(setup.base, setup.theta_star, covariates, setup.n, seeds[0])
    contaminated = contaminate(data, model, seeds[1])

    theta_map = map_estimate(model, setup.prior, contaminated, setup.theta_star,
                             tol=setup.map_tol)
    approx = laplace_approximation(model, setup.prior, contaminated, theta_map,
                                   tol=setup.map_tol)
    cloud = importance_sample(model, setup.prior, contaminated, approx, setup.m,
                              seeds[2])

    center = setup.theta_star  # an estimate would do when theta* is unknown
    phi, delta_hat = choose_phi(cloud, center, setup.delta)
    box = NeighbourhoodBox(center=center, phi=phi)
    corners = _covariate_corners(setup.base.dim)
    _, _, eta = eta_bound(model, box, x_grid_points=setup.x_grid_points,
                          s_grid_points=setup.s_grid_points,
                          covariate_corners=corners)

    last_x = float(contaminated.observations[-1])
    last_w = None if contaminated.covariates is None else contaminated.covariates[-1]
    dropped_cloud = reweight_drop_last(cloud, model, (last_x, last_w))
    alpha, beta = expectation_ratio(dropped_cloud, model,
                                    x_grid_points=setup.x_grid_points,
                                    covariate_corners=corners,
                                    pred_margin=phi * setup.base.dim)

    eps = math.log(eta) + math.log(alpha) - math.log(beta)
    diag = RepeatDiagnostics(
        ess=cloud.ess, ess_dropped=dropped_cloud.ess, phi=phi,
        delta_hat=delta_hat, eta=eta, alpha=alpha, beta=beta,
        degenerate=cloud.degenerate or dropped_cloud.degenerate,
    )
    return eps, phi, delta_hat, diag


@dataclass
class EpsilonEstimate:
    """Aggregated per-repeat estimates with the reported quantile."""

    values: np.ndarray
    q: float
    epsilon_hat: float
    delta: float
    p: float
    phis: np.ndarray
    n: int
    invalid: int = 0

    @property
    def repeats(self) -> int:
        return self.values.shape[0]


def nearest_rank_percentile(values, q: float) -> float:
    """q-th percentile by the nearest-rank rule on sorted values."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ConfigurationError("no values to take a percentile of")
    rank = max(1, math.ceil(q / 100.0 * values.size))
    return float(values[rank - 1])


def _run_repeat(args):
    setup, seed = args
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eps, phi, delta_hat, diag = estimate_epsilon_once(setup, seed)
        if diag.degenerate:
            return None
        return eps, phi
    except ContamDPError:
        return None


def estimate_epsilon(setup: EstimationSetup, K: int, q: float, seed,
                     workers: int = 1, max_invalid_fraction: float = 0.1):
    """K independent repeats aggregated into the nearest-rank q-th percentile."""
    if K < 10:
        raise ConfigurationError("estimate_epsilon requires K >= 10")
    if not 0.0 < q < 100.0:
        raise ConfigurationError("q must lie in (0, 100)")
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    repeat_seeds = ss.spawn(K)
    jobs = [(setup, s) for s in repeat_seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_repeat, jobs, chunksize=1))
    else:
        results = [_run_repeat(job) for job in jobs]
    valid = [r for r in results if r is not None]
    invalid = K - len(valid)
    if invalid > max_invalid_fraction * K:
        raise BatchQualityError(
            f"{invalid}/{K} repeats invalid (limit {max_invalid_fraction:.0%})"
        )
    eps_values = np.array([r[0] for r in valid])
    phis = np.array([r[1] for r in valid])
    return EpsilonEstimate(
        values=eps_values,
        q=q,
        epsilon_hat=nearest_rank_percentile(eps_values, q),
        delta=setup.delta,
        p=setup.p,
        phis=phis,
        n=setup.n,
        invalid=invalid,
    )


# ---------------------------------------------------------------------------
# Quadrature oracle for the posterior decomposition inequality


class _MassLine:
    """Dense Gauss-Kronrod prefix masses of exp(logpost - shift) on a line."""

    def __init__(self, logpost, lo, hi, panels=2048, tol=1e-10):
        self.lo, self.hi = lo, hi
        scan = np.linspace(lo, hi, 4001)
        self.shift = float(np.max(logpost(scan)))

        def integrand(t):
            return np.exp(logpost(t) - self.shift)

        self._f = integrand
        edges = np.linspace(lo, hi, panels + 1)
        vals, errs = _panel_rule(integrand, edges[:-1], edges[1:])
        total = float(vals.sum())
        if errs.sum() > max(tol, 1e-13 * abs(total)):
            raise NumericalError("mass-line quadrature failed to converge")
        self.edges = edges
        self.prefix = np.concatenate([[0.0], np.cumsum(vals)])

    def _cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.lo, self.hi)
        i = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0,
                    len(self.edges) - 2)
        lo_edge = self.edges[i]
        partial, _ = _panel_rule(self._f, lo_edge, t)
        return self.prefix[i] + partial

    def mass(self, a, b):
        """Shifted mass over [a, b] (vectorized over interval arrays)."""
        return np.maximum(self._cdf(b) - self._cdf(a), 0.0)

    def log_mass(self, a, b):
        m = self.mass(np.atleast_1d(a), np.atleast_1d(b))
        with np.errstate(divide="ignore"):
            return np.log(m) + self.shift


def verify_decomposition(model: ContaminatedModel, prior: GaussianPrior, n: int,
                         grid_resolution: int = 401, trials: int = 100,
                         seed=0, sets_per_trial: int = 200,
                         phi_range=(0.3, 1.5)) -> int:
    """Count violations of the posterior decomposition bound (expected 0)."""
    return int(
        verify_decomposition_per_trial(
            model, prior, n, grid_resolution=grid_resolution, trials=trials,
            seed=seed, sets_per_trial=sets_per_trial, phi_range=phi_range
        ).sum()
    )


def verify_decomposition_per_trial(model: ContaminatedModel, prior: GaussianPrior,
                                   n: int, grid_resolution: int = 401,
                                   trials: int = 100, seed=0,
                                   sets_per_trial: int = 200,
                                   phi_range=(0.3, 1.5)) -> np.ndarray:
    """Per-trial violation counts of the posterior decomposition bound.

    For each trial a neighbouring pair of 1-D datasets is generated, all
    posterior masses are computed by dense Gauss-Kronrod quadrature, eta is
    taken from a dense grid over the neighbourhood and the observation
    domain, and the bound is checked on random interval sets.
    """
    if model.dim != 1:
        raise ConfigurationError("verify_decomposition requires a 1-D model")
    if n > 50:
        raise ConfigurationError("quadrature oracle is limited to n <= 50")
    theta_star = float(model.theta_star[0])
    ss = np.random.SeedSequence(seed)
    x_lo, x_hi = model.base.domain_bounds()
    # Restrict the data domain so eta stays finite even without contamination.
    x_lo = max(x_lo, theta_star - 5.0)
    x_hi = min(x_hi, theta_star + 5.0)
    t_lo = float(prior.mean[0] - 8.0 * prior.sds[0])
    t_hi = float(prior.mean[0] + 8.0 * prior.sds[0])

    counts = []
    for trial_seed in ss.spawn(trials):
        rng = np.random.default_rng(trial_seed)
        common = np.clip(
            model.base.sample(np.full(n - 1, theta_star), rng), x_lo, x_hi
        )
        x_new = rng.uniform(x_lo, x_hi)
        z_new = rng.uniform(x_lo, x_hi)
        phi = rng.uniform(*phi_range) / math.sqrt(n)
        a_lo, a_hi = theta_star - phi, theta_star + phi

        def make_logpost(dataset):
            def logpost(theta):
                theta = np.asarray(theta, dtype=float)
                s = theta[..., None]
                log_k = model.log_kp_from_predictors(dataset[None, :], s, theta_star)
                log_ref = model.log_kp_from_predictors(
                    dataset, np.full_like(dataset, theta_star), theta_star
                )
                return (log_k - log_ref[None, :]).sum(axis=-1) + prior.log_pdf(
                    theta[..., None]
                )
            return logpost

    # masses for X = common + {x_new} and Z = common + {z_new}
        line_x = _MassLine(make_logpost(np.append(common, x_new)), t_lo, t_hi)
        line_z = _MassLine(make_logpost(np.append(common, z_new)), t_lo, t_hi)

        log_omega_x = line_x.log_mass(t_lo, t_hi)[0]
        log_omega_z = line_z.log_mass(t_lo, t_hi)[0]
        anc_x = np.exp(
            np.logaddexp(*line_x.log_mass([t_lo, a_hi], [a_lo, t_hi])) - log_omega_x
        )
        anc_z_over_x = np.exp(
            np.logaddexp(*line_z.log_mass([t_lo, a_hi], [a_lo, t_hi])) - log_omega_x
        )

        # eta over a dense grid; include the actual differing pair in the grid.
        theta_grid = np.linspace(a_lo, a_hi, grid_resolution)
        x_grid = np.sort(
            np.concatenate([np.linspace(x_lo, x_hi, grid_resolution), [x_new, z_new]])
        )
        log_d = model.log_kp_from_predictors(
            x_grid[None, :], theta_grid[:, None], theta_star
        ) - model.log_kp_from_predictors(
            x_grid[None, :], np.full((grid_resolution, 1), theta_star), theta_star
        )
        eta = float(np.exp(np.max(log_d.max(axis=1) - log_d.min(axis=1))))

        sets_a = rng.uniform(t_lo, t_hi, size=sets_per_trial)
        sets_b = rng.uniform(t_lo, t_hi, size=sets_per_trial)
        s_lo_arr = np.minimum(sets_a, sets_b)
        s_hi_arr = np.maximum(sets_a, sets_b)
        p_s_x = np.exp(line_x.log_mass(s_lo_arr, s_hi_arr) - log_omega_x)
        p_s_z = np.exp(line_z.log_mass(s_lo_arr, s_hi_arr) - log_omega_z)

        rhs = eta * (eta + anc_z_over_x) * p_s_z + anc_x
        counts.append(int(np.sum(p_s_x > rhs + 1e-6)))
    return np.asarray(counts, dtype=int)
