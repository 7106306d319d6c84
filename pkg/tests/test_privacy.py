"""Epsilon estimation pipeline, zCDP conversions, and the decomposition oracle."""

import itertools
import math
import warnings

import numpy as np
import pytest

from contamdp import (
    BatchQualityError,
    ConfigurationError,
    ContaminatedModel,
    EstimationSetup,
    GaussianLinearModel,
    GaussianPrior,
    LogisticModel,
    NeighbourhoodBox,
    ParticleCloud,
    PrivacyBudget,
    StudentTContamination,
    TruncatedNormalMeanModel,
    TruncatedStudentTContamination,
    ZcdpBudget,
    choose_phi,
    dp_from_zcdp,
    estimate_epsilon,
    estimate_epsilon_once,
    eta_bound,
    expectation_ratio,
    nearest_rank_percentile,
    verify_decomposition,
    zcdp_from_dp,
)
from contamdp.models import BernoulliHalfContamination


def logistic_model(p, theta_star=0.0):
    return ContaminatedModel(base=LogisticModel(dim=1),
                             g=BernoulliHalfContamination(), p=p,
                             theta_star=[theta_star])


def cloud_from(particles, weights):
    particles = np.asarray(particles, dtype=float)
    if particles.ndim == 1:
        particles = particles[:, None]
    return ParticleCloud(particles=particles,
                         weights=np.asarray(weights, dtype=float),
                         target="pi_n")


class TestBudgets:
    def test_zcdp_from_dp_table_value(self):
        # rho = 0.94^2 / (2 ln(1e4)) computed independently.
        expect = 0.94**2 / (2.0 * math.log(1e4))
        got = zcdp_from_dp(PrivacyBudget(epsilon=0.94, delta=1e-4)).rho
        assert got == pytest.approx(expect, rel=1e-12)
        assert got == pytest.approx(0.04797, abs=5e-5)

    def test_quadratic_homogeneity(self):
        a = zcdp_from_dp(PrivacyBudget(epsilon=0.3, delta=1e-3)).rho
        b = zcdp_from_dp(PrivacyBudget(epsilon=0.6, delta=1e-3)).rho
        assert b == pytest.approx(4.0 * a, rel=1e-12)

    def test_round_trip(self):
        for eps, delta in [(0.94, 1e-4), (2.85, 1e-3), (0.18, 2e-6)]:
            rho = zcdp_from_dp(PrivacyBudget(epsilon=eps, delta=delta))
            back = dp_from_zcdp(rho, delta)
            assert back.epsilon == pytest.approx(eps, abs=1e-12)

    def test_unit_epsilon_case(self):
        got = dp_from_zcdp(ZcdpBudget(rho=0.5), math.exp(-1.0))
        assert got.epsilon == pytest.approx(1.0, abs=1e-12)

    def test_invalid_delta(self):
        with pytest.raises(ConfigurationError):
            PrivacyBudget(epsilon=1.0, delta=1.0)
        with pytest.raises(ConfigurationError):
            dp_from_zcdp(ZcdpBudget(rho=0.1), 0.0)


class TestChoosePhi:
    def test_all_inside_radius(self):
        cloud = cloud_from([0.05, -0.08, 0.02], [0.4, 0.4, 0.2])
        phi, delta_hat = choose_phi(cloud, [0.0], 0.5)
        assert phi <= 0.08 + 1e-15
        assert delta_hat <= 0.5

    def test_three_particle_hand_case(self):
        cloud = cloud_from([0.1, 0.2, 0.3], [0.5, 0.3, 0.2])
        phi, delta_hat = choose_phi(cloud, [0.0], 0.25)
        assert phi == pytest.approx(0.2)
        assert delta_hat == pytest.approx(0.2)

    def test_loose_delta_takes_smallest_distance(self):
        cloud = cloud_from([0.1, 0.2, 0.3], [0.5, 0.3, 0.2])
        phi, delta_hat = choose_phi(cloud, [0.0], 0.999)
        assert phi == pytest.approx(0.1)
        assert delta_hat == pytest.approx(0.5)

    def test_brute_force_on_random_clouds(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            m = int(rng.integers(3, 12))
            dists = rng.uniform(0, 1, m)
            w = rng.dirichlet(np.ones(m))
            delta = float(rng.uniform(0.01, 0.9))
            cloud = cloud_from(dists, w)
            phi, delta_hat = choose_phi(cloud, [0.0], delta)
            # Oracle: smallest candidate radius whose strict tail fits.
            best = None
            for r in sorted(dists):
                tail = float(np.sum(w[dists > r]))
                if tail <= delta:
                    best = (r, tail)
                    break
            assert phi == pytest.approx(best[0], abs=1e-12)
            assert delta_hat == pytest.approx(best[1], abs=1e-12)
            assert delta_hat <= delta

    def test_phi_weakly_decreasing_in_delta(self):
        rng = np.random.default_rng(1)
        cloud = cloud_from(rng.normal(size=40), rng.dirichlet(np.ones(40)))
        phis = [choose_phi(cloud, [0.0], d)[0]
                for d in (0.01, 0.05, 0.2, 0.5, 0.9)]
        assert all(a >= b - 1e-15 for a, b in zip(phis, phis[1:]))


class TestEtaBound:
    def test_full_contamination_gives_unity(self):
        model = logistic_model(1.0)
        sup, inf, eta = eta_bound(model, NeighbourhoodBox([0.0], 0.7))
        assert sup == pytest.approx(1.0, abs=1e-12)
        assert inf == pytest.approx(1.0, abs=1e-12)
        assert eta == pytest.approx(1.0, abs=1e-12)

    def test_zero_width_box_at_reference(self):
        model = logistic_model(0.3)
        sup, inf, eta = eta_bound(model, NeighbourhoodBox([0.0], 0.0))
        assert eta == pytest.approx(1.0, abs=1e-12)

    def test_logistic_brute_force_corners(self):
        # d is monotone in the predictor for fixed x, so the 4-point corner
        # enumeration is exact for this model.
        p, phi = 0.5, 0.5
        model = logistic_model(p)

        def kp(x, s):
            sig = 1.0 / (1.0 + math.exp(-s))
            f = sig if x == 1.0 else 1.0 - sig
            return (1 - p) * f + p * 0.5

        ratios = [kp(x, t) / kp(x, 0.0)
                  for x in (0.0, 1.0) for t in (-phi, phi)]
        sup, inf, eta = eta_bound(model, NeighbourhoodBox([0.0], phi))
        assert sup == pytest.approx(max(ratios), abs=1e-9)
        assert inf == pytest.approx(min(ratios), abs=1e-9)
        assert eta == pytest.approx(max(ratios) / min(ratios), abs=1e-9)

    def test_sup_and_inf_bracket_one(self):
        base = TruncatedNormalMeanModel()
        model = ContaminatedModel(base=base,
                                  g=TruncatedStudentTContamination(),
                                  p=0.4, theta_star=[30.0])
        sup, inf, eta = eta_bound(model, NeighbourhoodBox([30.0], 1.0))
        assert inf <= 1.0 + 1e-12 <= sup + 1e-12
        assert eta >= 1.0

    def test_grid_oracle_truncated_normal(self):
        # Dense brute force over (x, theta) as an independent optimizer check.
        base = TruncatedNormalMeanModel()
        model = ContaminatedModel(base=base,
                                  g=TruncatedStudentTContamination(),
                                  p=0.4, theta_star=[30.0])
        phi = 0.8
        thetas = np.linspace(30.0 - phi, 30.0 + phi, 201)
        xs = np.linspace(-270.0, 330.0, 6001)
        log_d = model.log_kp_from_predictors(
            xs[:, None], thetas[None, :], 30.0
        ) - model.log_kp_from_predictors(xs[:, None], 30.0, 30.0)
        sup, inf, _ = eta_bound(model, NeighbourhoodBox([30.0], phi))
        assert sup >= math.exp(float(log_d.max())) - 1e-6
        assert inf <= math.exp(float(log_d.min())) + 1e-6


class TestExpectationRatio:
    def test_full_contamination_unity(self):
        model = logistic_model(1.0)
        cloud = cloud_from([-0.4, 0.2, 0.9], [0.2, 0.5, 0.3])
        alpha, beta = expectation_ratio(cloud, model)
        assert alpha == pytest.approx(1.0, abs=1e-12)
        assert beta == pytest.approx(1.0, abs=1e-12)

    def test_single_particle_matches_point_eta(self):
        model = logistic_model(0.5)
        cloud = cloud_from([0.6], [1.0])

        def d(x, t):
            sig = lambda s: 1.0 / (1.0 + math.exp(-s))
            f = lambda s: sig(s) if x == 1.0 else 1.0 - sig(s)
            return (0.5 * f(t) + 0.25) / (0.5 * f(0.0) + 0.25)

        alpha, beta = expectation_ratio(cloud, model)
        vals = [d(x, 0.6) for x in (0.0, 1.0)]
        assert alpha == pytest.approx(max(vals), abs=1e-12)
        assert beta == pytest.approx(min(vals), abs=1e-12)

    def test_two_particle_hand_computation(self):
        model = logistic_model(0.5)
        cloud = cloud_from([-0.3, 0.8], [0.5, 0.5])

        def d(x, t):
            sig = lambda s: 1.0 / (1.0 + math.exp(-s))
            f = lambda s: sig(s) if x == 1.0 else 1.0 - sig(s)
            return (0.5 * f(t) + 0.25) / (0.5 * f(0.0) + 0.25)

        vals = [0.5 * d(x, -0.3) + 0.5 * d(x, 0.8) for x in (0.0, 1.0)]
        alpha, beta = expectation_ratio(cloud, model)
        assert alpha == pytest.approx(max(vals), abs=1e-12)
        assert beta == pytest.approx(min(vals), abs=1e-12)


class TestNearestRankPercentile:
    def test_hand_cases(self):
        vals = [3.0, 1.0, 2.0, 4.0]
        # ceil(0.5 * 4) = 2nd smallest
        assert nearest_rank_percentile(vals, 50) == 2.0
        # ceil(0.99 * 4) = 4th smallest
        assert nearest_rank_percentile(vals, 99) == 4.0
        assert nearest_rank_percentile(vals, 10) == 1.0

    def test_matches_reference_rule_on_random_input(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            vals = rng.normal(size=int(rng.integers(1, 40)))
            q = float(rng.uniform(1, 99))
            rank = max(1, math.ceil(q / 100.0 * len(vals)))
            expect = float(np.sort(vals)[rank - 1])
            assert nearest_rank_percentile(vals, q) == expect

    def test_monotone_in_q(self):
        vals = np.random.default_rng(1).normal(size=25)
        qs = [10, 25, 50, 75, 90, 99]
        got = [nearest_rank_percentile(vals, q) for q in qs]
        assert all(a <= b for a, b in zip(got, got[1:]))


def section42_setup(n, m=2000, p=None, delta=None):
    return EstimationSetup(
        base=TruncatedNormalMeanModel(sigma=8.0, lower=-270.0, upper=330.0),
        g=TruncatedStudentTContamination(df=5.0, scale=8.0, lower=-270.0,
                                         upper=330.0),
        prior=GaussianPrior(mean=[40.0], sds=[40.0]),
        theta_star=[30.0],
        n=n,
        p=n ** (-0.125) if p is None else p,
        delta=1.0 / (10.0 * n) if delta is None else delta,
        m=m,
    )


class TestEstimateEpsilonOnce:
    def test_near_full_contamination_gives_near_zero(self):
        setup = section42_setup(50, m=500, p=1.0 - 1e-12)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eps, phi, delta_hat, diag = estimate_epsilon_once(setup, 0)
        assert abs(eps) < 1e-6
        assert diag.eta == pytest.approx(1.0, abs=1e-9)

    def test_single_repeat_sanity_envelope(self):
        setup = section42_setup(1000)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eps, phi, delta_hat, _ = estimate_epsilon_once(setup, 1)
        assert 0.0 < eps < 5.0
        assert phi > 0
        assert delta_hat <= setup.delta

    def test_loose_delta_reduces_to_alpha_beta(self):
        setup = section42_setup(200, m=500, delta=1.0 - 1e-9)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eps, phi, _, diag = estimate_epsilon_once(setup, 2)
        assert phi == pytest.approx(0.0, abs=1e-12) or diag.eta >= 1.0
        if phi == 0.0:
            assert eps == pytest.approx(
                math.log(diag.alpha) - math.log(diag.beta), abs=1e-12
            )

    def test_epsilon_nonnegative_across_seeds(self):
        setup = section42_setup(300, m=800)
        for seed in range(5):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                eps, _, _, _ = estimate_epsilon_once(setup, seed)
            assert eps >= -1e-9

    def test_contamination_monotone_on_fixed_data(self):
        # More contamination cannot cost privacy on the same data and seed.
        from contamdp import Dataset, sample_dataset
        base = LogisticModel(dim=1)
        data = sample_dataset(base, [0.0], np.ones((400, 1)), 400, 123)
        eps_by_p = []
        for p in (0.2, 0.45, 0.7):
            setup = EstimationSetup(
                base=base, g=BernoulliHalfContamination(),
                prior=GaussianPrior(mean=[0.0], sds=[10.0]),
                theta_star=[0.0], n=400, p=p, delta=1e-3, m=800,
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                eps, _, _, _ = estimate_epsilon_once(setup, 99, data=data)
            eps_by_p.append(eps)
        assert eps_by_p[0] >= eps_by_p[1] >= eps_by_p[2]


class TestEstimateEpsilon:
    def test_requires_minimum_repeats_and_valid_q(self):
        setup = section42_setup(100, m=500)
        with pytest.raises(ConfigurationError):
            estimate_epsilon(setup, K=5, q=99, seed=0)
        with pytest.raises(ConfigurationError):
            estimate_epsilon(setup, K=10, q=0.0, seed=0)

    def test_percentile_monotone_in_q(self):
        setup = section42_setup(100, m=500)
        est_lo = estimate_epsilon(setup, K=12, q=50, seed=5)
        est_hi = estimate_epsilon(setup, K=12, q=99, seed=5)
        np.testing.assert_allclose(est_lo.values, est_hi.values)
        assert est_lo.epsilon_hat <= est_hi.epsilon_hat

    def test_values_nonnegative_and_quantile_consistent(self):
        setup = section42_setup(100, m=500)
        est = estimate_epsilon(setup, K=12, q=75, seed=6)
        assert np.all(est.values >= -1e-9)
        assert est.epsilon_hat == nearest_rank_percentile(est.values, 75)
        assert est.invalid == 0


class TestVerifyDecomposition:
    def test_conjugate_gaussian_trials_clean(self):
        model = ContaminatedModel(
            base=GaussianLinearModel(dim=1, sigma=1.0),
            g=StudentTContamination(df=5.0, scale=5.0),
            p=0.1, theta_star=[0.0],
        )
        prior = GaussianPrior(mean=[0.0], sds=[1.0])
        violations = verify_decomposition(model, prior, n=20, trials=10,
                                          seed=17)
        assert violations == 0

    def test_dimension_and_size_guards(self):
        model2 = ContaminatedModel(
            base=GaussianLinearModel(dim=2, sigma=1.0),
            g=StudentTContamination(), p=0.1, theta_star=[0.0, 0.0],
        )
        prior2 = GaussianPrior(mean=[0.0, 0.0], sds=[1.0, 1.0])
        with pytest.raises(ConfigurationError):
            verify_decomposition(model2, prior2, n=10)
        model1 = ContaminatedModel(
            base=GaussianLinearModel(dim=1, sigma=1.0),
            g=StudentTContamination(), p=0.1, theta_star=[0.0],
        )
        prior1 = GaussianPrior(mean=[0.0], sds=[1.0])
        with pytest.raises(ConfigurationError):
            verify_decomposition(model1, prior1, n=100)


class TestMassLine:
    def test_masses_match_scipy_for_gaussian(self):
        from scipy import stats
        from contamdp.privacy import _MassLine
        mu, sd = 0.3, 0.7

        def logpost(t):
            return stats.norm.logpdf(np.asarray(t, dtype=float), mu, sd)

        line = _MassLine(logpost, -8.0, 8.0)
        for a, b in [(-8.0, 8.0), (-1.0, 1.0), (0.3, 2.0), (-0.2, -0.1)]:
            expect = stats.norm.cdf(b, mu, sd) - stats.norm.cdf(a, mu, sd)
            got = float(np.exp(line.log_mass(a, b)[0]))
            assert got == pytest.approx(expect, rel=1e-9, abs=1e-12)
