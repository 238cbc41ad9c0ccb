import math

import numpy as np
import pytest
from scipy import integrate, stats

from ridgelab.general import (
    GaussianProblem,
    RegularizerSpec,
    adaptive_regularizer,
    adaptive_risk,
    coupled_reduction_risks,
    estimate_GH,
    estimate_GH_pair,
    gh_sample,
    mc_risk_general,
    mc_risk_sweep,
    null_risk_general,
    reduce_to_isotropic,
    risk_from_GH,
)
from ridgelab.spectrum import expected_risk_iso, optimal_lambda_iso


def random_pd(rng, d, ridge=0.3):
    a = rng.standard_normal((d, d))
    return a @ a.T + ridge * np.eye(d)


class TestRegularizerSpec:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            RegularizerSpec(np.array([[1.0, 0.2], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="PSD"):
            RegularizerSpec(np.diag([1.0, -0.5]))

    def test_factories(self):
        assert RegularizerSpec.identity(3).kind == "identity"
        cov = np.diag([4.0, 1.0])
        inv = RegularizerSpec.inverse_covariance(cov)
        assert np.allclose(inv.matrix, np.diag([0.25, 1.0]))
        assert inv.kind == "inverse-covariance"


class TestMcRiskGeneral:
    def test_isotropic_reduction_matches_spectrum_formula(self):
        prob = GaussianProblem.isotropic(d=6, beta_norm=1.0, sigma=0.5)
        a = mc_risk_general(prob, n=10, lam=1.5, regularizer=RegularizerSpec.identity(6),
                            trials=6000, seed=90)
        b = expected_risk_iso(n=10, lam=1.5, d=6, beta_norm=1.0, sigma=0.5,
                              trials=6000, seed=91)
        assert abs(a.mean - b.mean) <= 3 * math.hypot(a.std_error, b.std_error)

    def test_huge_lambda_gives_covariance_weighted_null(self):
        rng = np.random.default_rng(92)
        cov = random_pd(rng, 4)
        beta = rng.standard_normal(4)
        prob = GaussianProblem(d=4, covariance=cov, beta_star=beta, sigma=0.5)
        est = mc_risk_general(prob, n=6, lam=1e12,
                              regularizer=RegularizerSpec.identity(4),
                              trials=300, seed=93)
        assert est.mean == pytest.approx(null_risk_general(prob), rel=1e-6)

    def test_pseudoinverse_limit_flagged(self):
        prob = GaussianProblem.isotropic(d=8, beta_norm=1.0, sigma=0.5)
        est = mc_risk_general(prob, n=3, lam=0.0,
                              regularizer=RegularizerSpec.identity(8),
                              trials=100, seed=94)
        assert "pseudoinverse-limit" in est.flags

    def test_train_error_interpolates_below_threshold(self):
        prob = GaussianProblem.isotropic(d=10, beta_norm=1.0, sigma=0.5)
        risks, trains = mc_risk_sweep(
            prob, [4], [0.0, 1e6], RegularizerSpec.identity(10),
            trials=300, seed=95, include_train=True,
        )
        assert trains[4][0].mean < 1e-18  # lam -> 0+, n < d: exact fit
        assert trains[4][1].mean > 0.1    # huge lam: fits nothing

    def test_parallel_serial_identical(self):
        prob = GaussianProblem.isotropic(d=5, beta_norm=1.0, sigma=0.5)
        reg = RegularizerSpec.identity(5)
        a = mc_risk_general(prob, 7, 0.8, reg, trials=4000, seed=96, workers=1)
        b = mc_risk_general(prob, 7, 0.8, reg, trials=4000, seed=96, workers=4)
        assert a.mean == b.mean and a.std_error == b.std_error


class TestEstimateGH:
    def test_vanishing_lambda_kills_G_overdetermined(self):
        gh = estimate_GH(n=10, Q=np.ones(2), lam=1e-8, trials=4000, seed=100)
        assert np.abs(gh.G).max() < 1e-12
        # H -> E[tr((X^T X)^{-1})] = d / (n - d - 1) for n > d + 1
        expected = 2 / (10 - 2 - 1)
        assert abs(gh.H - expected) <= 3 * gh.se_H

    def test_rejects_non_positive_lambda(self):
        with pytest.raises(ValueError, match="lambda"):
            estimate_GH(5, np.ones(3), 0.0, 100, 0)

    def test_one_dimensional_quadrature_pin(self):
        # d=1, scalar q: G = lam^2 q^2 E[1/(chi^2_n + lam q)^2]
        n, q, lam = 4, 2.5, 0.8
        expected = lam**2 * q**2 * integrate.quad(
            lambda x: stats.chi2.pdf(x, n) / (x + lam * q) ** 2, 0, np.inf, limit=200
        )[0]
        gh = estimate_GH(n=n, Q=np.array([q]), lam=lam, trials=60_000, seed=101)
        assert abs(gh.G[0, 0] - expected) <= 3 * gh.se_G[0, 0]

    def test_general_q_rotates_to_diagonal_and_back(self):
        rng = np.random.default_rng(102)
        q_full = random_pd(rng, 3, ridge=0.5)
        gh = estimate_GH(n=5, Q=q_full, lam=1.0, trials=3000, seed=103)
        asym = np.abs(gh.G - gh.G.T).max()
        assert asym < 1e-10 * max(np.abs(gh.G).max(), 1.0)
        assert np.linalg.eigvalsh(gh.G)[0] >= -3 * np.sqrt(np.sum(gh.se_G**2))

    def test_G_symmetric_and_psd_within_error(self):
        gh = estimate_GH(n=6, Q=np.array([0.5, 1.0, 2.0]), lam=0.7, trials=5000, seed=104)
        assert np.abs(gh.G - gh.G.T).max() < 1e-10
        assert np.linalg.eigvalsh(gh.G)[0] >= -3 * np.sqrt(np.sum(gh.se_G**2))
        assert gh.H >= 0
        assert gh.dH <= 3 * gh.se_dH  # H non-increasing in lambda

    def test_H_non_increasing_in_lambda_with_common_draws(self):
        q = np.array([0.5, 1.5])
        lo = estimate_GH(n=6, Q=q, lam=0.5, trials=4000, seed=105)
        hi = estimate_GH(n=6, Q=q, lam=2.5, trials=4000, seed=105)
        assert lo.H >= hi.H - 3 * math.hypot(lo.se_H, hi.se_H)


class TestDerivativeFormulas:
    def test_analytic_derivatives_match_finite_differences_per_sample(self):
        rng = np.random.default_rng(110)
        for _ in range(8):
            d = int(rng.integers(1, 6))
            n = int(rng.integers(1, 9))
            q = np.diag(np.exp(rng.uniform(-1, 1, d)))
            lam = float(np.exp(rng.uniform(-1.5, 1.5)))
            x = rng.standard_normal((n, d))
            h = 1e-4 * lam
            _, _, dg, dh = gh_sample(x, q, lam)
            gp, hp, _, _ = gh_sample(x, q, lam + h)
            gm, hm, _, _ = gh_sample(x, q, lam - h)
            fd_g = (gp - gm) / (2 * h)
            fd_h = (hp - hm) / (2 * h)
            denom = max(np.abs(dg).max(), 1e-300)
            assert np.abs(dg - fd_g).max() / denom < 1e-4
            assert abs(dh - fd_h) / max(abs(dh), 1e-300) < 1e-4


class TestRiskFromGH:
    def test_zero_signal_leaves_variance_term(self):
        gh = estimate_GH(n=5, Q=np.ones(3), lam=1.0, trials=2000, seed=120)
        est = risk_from_GH(gh, np.zeros(3), sigma=0.5)
        assert est.mean == pytest.approx(0.25 * gh.H + 0.25, rel=1e-12)

    def test_noiseless_interpolation_vanishes(self):
        gh = estimate_GH(n=12, Q=np.ones(3), lam=1e-8, trials=2000, seed=121)
        est = risk_from_GH(gh, np.array([1.0, -2.0, 0.5]), sigma=0.0)
        assert est.mean < 1e-10

    def test_matches_direct_simulation_for_random_diagonal_Q(self):
        rng = np.random.default_rng(122)
        for k in range(4):
            d = int(rng.integers(2, 6))
            n = int(rng.integers(2, 10))
            q = np.exp(rng.uniform(np.log(0.1), np.log(10), d))
            lam = float(np.exp(rng.uniform(-1, 2)))
            beta = rng.standard_normal(d)
            sigma = float(rng.uniform(0.1, 1.0))
            gh = estimate_GH(n, q, lam, trials=8000, seed=123 + k)
            a = risk_from_GH(gh, beta, sigma)
            prob = GaussianProblem(d=d, covariance=np.eye(d), beta_star=beta, sigma=sigma)
            b = mc_risk_general(prob, n, lam, RegularizerSpec(np.diag(q)),
                                trials=8000, seed=200 + k)
            assert abs(a.mean - b.mean) <= 3 * math.hypot(a.std_error, b.std_error)


class TestReduction:
    def test_identity_covariance_is_identity_transform(self):
        prob = GaussianProblem.isotropic(d=4, beta_norm=1.0, sigma=0.5)
        reg = RegularizerSpec.identity(4)
        iso_prob, iso_reg = reduce_to_isotropic(prob, reg)
        assert np.allclose(iso_prob.beta_star, prob.beta_star)
        assert np.allclose(iso_reg.matrix, np.eye(4))

    def test_covariance_penalty_becomes_plain_ridge(self):
        rng = np.random.default_rng(130)
        cov = random_pd(rng, 5)
        prob = GaussianProblem(d=5, covariance=cov, beta_star=rng.standard_normal(5),
                               sigma=0.3)
        iso_prob, iso_reg = reduce_to_isotropic(prob, adaptive_regularizer(prob))
        assert np.allclose(iso_reg.matrix, np.eye(5), atol=1e-10)
        assert iso_reg.kind == "identity"
        # transformed truth is Sigma^{1/2} beta*
        w, v = np.linalg.eigh(cov)
        root = (v * np.sqrt(w)) @ v.T
        assert np.allclose(iso_prob.beta_star, root @ prob.beta_star)

    def test_plain_ridge_becomes_inverse_covariance(self):
        rng = np.random.default_rng(131)
        cov = random_pd(rng, 3)
        prob = GaussianProblem(d=3, covariance=cov, beta_star=rng.standard_normal(3),
                               sigma=0.3)
        _, iso_reg = reduce_to_isotropic(prob, RegularizerSpec.identity(3))
        assert np.allclose(iso_reg.matrix, np.linalg.inv(cov), atol=1e-8)
        assert iso_reg.kind == "inverse-covariance"

    def test_per_draw_equivalence_random_instances(self):
        rng = np.random.default_rng(132)
        for k in range(20):
            d = int(rng.integers(2, 9))
            n = int(rng.integers(1, 12))
            cov = random_pd(rng, d)
            m = random_pd(rng, d)
            prob = GaussianProblem(d=d, covariance=cov,
                                   beta_star=rng.standard_normal(d),
                                   sigma=float(rng.uniform(0, 1)))
            lam = float(np.exp(rng.uniform(-2, 2)))
            a, b = coupled_reduction_risks(prob, RegularizerSpec(m), n, lam, seed=k)
            assert abs(a - b) / abs(a) < 1e-8


class TestAdaptiveRisk:
    def test_isotropic_case_equals_plain_ridge(self):
        prob = GaussianProblem.isotropic(d=4, beta_norm=1.0, sigma=0.5)
        a = adaptive_risk(prob, n=6, lam=1.0, trials=500, seed=140)
        b = mc_risk_general(prob, 6, 1.0, RegularizerSpec.identity(4),
                            trials=500, seed=140)
        assert a.mean == pytest.approx(b.mean, rel=1e-12)

    def test_tuned_lambda_matches_reduced_isotropic_formula(self):
        # after reduction the problem is isotropic ridge with truth
        # Sigma^{1/2} beta*, so the tuned lambda is d sigma^2 / |S beta*|^2
        cov = np.diag([6.0, 2.0, 1.0, 0.5])
        beta = np.array([0.3, -0.2, 0.8, 1.0])
        sigma = 0.5
        prob = GaussianProblem(d=4, covariance=cov, beta_star=beta, sigma=sigma)
        lam_expected = 4 * sigma**2 / float(beta @ cov @ beta)
        grid = np.geomspace(lam_expected / 6, lam_expected * 6, 40)
        risks, _ = mc_risk_sweep(
            prob, [8], list(grid), adaptive_regularizer(prob),
            trials=8000, seed=141, include_train=True,
        )
        means = [e.mean for e in risks[8]]
        best = grid[int(np.argmin(means))]
        step = math.log(grid[1] / grid[0])
        assert abs(math.log(best / lam_expected)) <= 2 * step

    def test_tuned_sweep_monotone_in_samples(self):
        cov = np.diag([10.0, 10.0, 1.0, 1.0])
        beta = np.array([0.1, 0.0, 0.0, 1.0])
        prob = GaussianProblem(d=4, covariance=cov, beta_star=beta, sigma=0.5)
        ns = [1, 2, 3, 4, 5, 6, 8, 10, 13]
        grid = [0.0] + list(np.geomspace(1e-3, 1e3, 25))
        risks = mc_risk_sweep(prob, ns, grid, adaptive_regularizer(prob),
                              trials=4000, seed=142)
        env_mean, env_se = [], []
        for n in ns:
            best = min(risks[n], key=lambda e: e.mean)
            env_mean.append(best.mean)
            env_se.append(best.std_error)
        inc = np.diff(env_mean)
        thr = 2 * np.sqrt(np.array(env_se[1:]) ** 2 + np.array(env_se[:-1]) ** 2)
        assert np.all(inc <= thr)
