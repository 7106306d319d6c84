"""Numerical verifiers: Hellinger, Fisher information, prior mass, decay fit."""

import math

import numpy as np
import pytest
from scipy import stats

from contamdp import (
    ConfigurationError,
    ContaminatedModel,
    GaussianLinearModel,
    StudentTContamination,
    TruncatedNormalMeanModel,
    TruncatedStudentTContamination,
    decay_fit,
    fisher_information,
    hellinger,
    hellinger_between_parameters,
    mse_stats,
    prior_mass_bounds,
)

PAPER_TABLE1 = [(100, 2.85), (1000, 0.94), (2000, 0.72), (5000, 0.46),
                (10000, 0.32), (20000, 0.26), (50000, 0.18)]


def normal_pdf(mu, sd=1.0):
    return lambda x: stats.norm.pdf(np.asarray(x, dtype=float), mu, sd)


class TestHellinger:
    def test_identical_densities(self):
        assert hellinger(normal_pdf(0.0), normal_pdf(0.0)) < 1e-8

    def test_gaussian_closed_form(self):
        # h^2 = 1 - exp(-(mu1-mu2)^2/8) for unit-variance Gaussians.
        got = hellinger(normal_pdf(0.0), normal_pdf(1.0))
        expect = math.sqrt(1.0 - math.exp(-1.0 / 8.0))
        assert got == pytest.approx(expect, abs=1e-6)
        assert got**2 == pytest.approx(0.117503, abs=1e-6)

    def test_disjoint_supports(self):
        def trunc(lo, hi):
            a, b = (lo - 0.0), (hi - 0.0)
            return lambda x: stats.truncnorm.pdf(
                np.asarray(x, dtype=float), a, b
            )

        got = hellinger(trunc(-3.0, -1.0), trunc(1.0, 3.0), lo=-5.0, hi=5.0)
        assert got**2 == pytest.approx(1.0, abs=1e-8)

    def test_symmetry(self):
        a = hellinger(normal_pdf(0.0), normal_pdf(0.7, 1.3))
        b = hellinger(normal_pdf(0.7, 1.3), normal_pdf(0.0))
        assert a == pytest.approx(b, abs=1e-10)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            mus = rng.uniform(-2, 2, 3)
            sds = rng.uniform(0.5, 2.0, 3)
            h01 = hellinger(normal_pdf(mus[0], sds[0]), normal_pdf(mus[1], sds[1]))
            h12 = hellinger(normal_pdf(mus[1], sds[1]), normal_pdf(mus[2], sds[2]))
            h02 = hellinger(normal_pdf(mus[0], sds[0]), normal_pdf(mus[2], sds[2]))
            assert h02 <= h01 + h12 + 1e-8

    def test_local_l2_equivalence(self):
        # Near theta*, h is bounded below by a stable multiple of |theta - theta*|.
        base = GaussianLinearModel(dim=1, sigma=1.0)
        model = ContaminatedModel(base=base, g=StudentTContamination(),
                                  p=0.2, theta_star=[0.0])
        rng = np.random.default_rng(1)
        ratios = []
        for _ in range(100):
            d = float(rng.uniform(0.01, 0.1)) * float(rng.choice([-1.0, 1.0]))
            h = hellinger_between_parameters(model, [d], [0.0], tol=1e-10)
            ratios.append(h / abs(d))
        c = min(ratios)
        assert c > 0
        assert max(ratios) <= 2.0 * c


class TestFisherInformation:
    def test_standard_gaussian_uncontaminated(self):
        model = ContaminatedModel(base=GaussianLinearModel(dim=1, sigma=1.0),
                                  g=StudentTContamination(), p=0.0,
                                  theta_star=[0.0])
        info = fisher_information(model, [0.0])
        assert info[0, 0] == pytest.approx(1.0, abs=1e-6)

    def test_full_contamination_zero_information(self):
        model = ContaminatedModel(base=GaussianLinearModel(dim=1, sigma=1.0),
                                  g=StudentTContamination(), p=1.0,
                                  theta_star=[0.0])
        info = fisher_information(model, [0.0])
        assert abs(info[0, 0]) < 1e-10

    def test_gap_decreasing_in_p_and_small_at_001(self):
        base = GaussianLinearModel(dim=1, sigma=1.0)
        g = StudentTContamination(df=5.0, scale=5.0)
        i0 = fisher_information(
            ContaminatedModel(base=base, g=g, p=0.0, theta_star=[0.0]), [0.0]
        )
        gaps = []
        for p in (0.5, 0.1, 0.01):
            ip = fisher_information(
                ContaminatedModel(base=base, g=g, p=p, theta_star=[0.0]), [0.0]
            )
            gaps.append(float(np.max(np.abs(ip - i0))))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.05

    def test_symmetric_psd_with_covariates(self):
        base = GaussianLinearModel(dim=3, sigma=1.0)
        model = ContaminatedModel(base=base, g=StudentTContamination(),
                                  p=0.3, theta_star=[0.5, -0.2, 0.1])
        info = fisher_information(model, [0.5, -0.2, 0.1], w=[1.0, 0.4, -0.7])
        np.testing.assert_allclose(info, info.T, atol=1e-12)
        assert float(np.min(np.linalg.eigvalsh(info))) >= -1e-10

    def test_truncated_normal_quadrature_matches_mc(self):
        base = TruncatedNormalMeanModel()
        model = ContaminatedModel(base=base,
                                  g=TruncatedStudentTContamination(),
                                  p=0.3, theta_star=[30.0])
        info = fisher_information(model, [30.0])
        # Monte Carlo oracle for E[score^2].
        rng = np.random.default_rng(2)
        n = 200_000
        keep = rng.uniform(size=n) >= 0.3
        x = np.where(
            keep,
            base.sample(np.full(n, 30.0), rng),
            model.g.sample(np.full(n, 30.0), rng),
        )
        log_f = base.log_pdf(x, 30.0)
        log_k = model.log_kp_from_predictors(x, 30.0, 30.0)
        r = np.exp(math.log1p(-0.3) + log_f - log_k)
        score = r * base.dlogpdf_ds(x, 30.0)
        mc = float(np.mean(score**2))
        se = float(np.std(score**2)) / math.sqrt(n)
        assert abs(info[0, 0] - mc) < 5 * se


class TestPriorMassBounds:
    def test_d2_centered_matches_chi2(self):
        for r in (0.5, 1.0, 2.0):
            res = prior_mass_bounds([0.0, 0.0], r, mc_draws=200_000, seed=0)
            expect = 1.0 - math.exp(-r * r / 2.0)
            assert res.small_r == pytest.approx(expect, abs=1e-12)

    def test_d1_centered_matches_erf(self):
        for r in (0.3, 1.0, 2.5):
            res = prior_mass_bounds([0.0], r, mc_draws=100_000, seed=1)
            assert res.small_r == pytest.approx(math.erf(r / math.sqrt(2.0)),
                                                abs=1e-10)

    def test_large_r_limits(self):
        res = prior_mass_bounds([1.0, 0.5], 50.0, mc_draws=100_000, seed=2)
        assert res.large_r == pytest.approx(1.0, abs=1e-10)
        absent = prior_mass_bounds([1.0, 0.5], 0.5, mc_draws=10_000, seed=3)
        assert absent.large_r is None

    def test_bounds_below_mc_mass(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            d = int(rng.integers(1, 5))
            theta = rng.uniform(-1.5, 1.5, d)
            r = float(rng.uniform(0.5, 3.0))
            res = prior_mass_bounds(theta, r, mc_draws=400_000,
                                    seed=int(rng.integers(1 << 31)))
            limit = res.mc_estimate + 4.0 * res.mc_se
            assert res.small_r <= limit
            if res.large_r is not None:
                assert res.large_r <= limit


class TestDecayFit:
    def test_exact_power_law(self):
        pairs = [(n, 10.0 * n**-0.5) for n in (100, 1000, 10000)]
        fit, extrap = decay_fit(pairs, extrapolation_targets=[1e6])
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.residual_rms == pytest.approx(0.0, abs=1e-12)
        assert extrap[0] == pytest.approx(10.0 * 1e-3, rel=1e-10)

    def test_paper_values_slope_band(self):
        fit, _ = decay_fit(PAPER_TABLE1)
        assert -0.60 <= fit.slope <= -0.30

    def test_scale_invariance_of_slope(self):
        pairs = [(100, 2.0), (1000, 0.8), (10000, 0.5)]
        scaled = [(n, 7.3 * e) for n, e in pairs]
        f1, _ = decay_fit(pairs)
        f2, _ = decay_fit(scaled)
        assert f1.slope == pytest.approx(f2.slope, abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(ConfigurationError):
            decay_fit([(100, 1.0), (1000, 0.5)])
        with pytest.raises(ConfigurationError):
            decay_fit([(100, 1.0), (1000, -0.5), (10000, 0.2)])


class TestMseStats:
    def test_all_equal_truth(self):
        assert mse_stats([30.0, 30.0, 30.0], 30.0) == (0.0, 0.0, 0.0)

    def test_hand_case(self):
        bias, var, mse = mse_stats([29.0, 31.0], 30.0)
        assert bias == pytest.approx(0.0, abs=1e-15)
        assert var == pytest.approx(2.0, abs=1e-12)
        assert mse == pytest.approx(1.0, abs=1e-12)

    def test_mse_identity_on_random_inputs(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            est = rng.normal(3.0, 2.0, int(rng.integers(2, 50)))
            truth = float(rng.normal())
            _, _, mse = mse_stats(est, truth)
            direct = float(np.mean((est - truth) ** 2))
            assert mse == pytest.approx(direct, rel=1e-12, abs=1e-12)
