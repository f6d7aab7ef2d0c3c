import math

import numpy as np
import pytest

from _instances import random_instance
from misslogit.datagen import IdentityTransform, NonlinearTransform, Scenario, ScenarioConfig, gen_dataset, gen_mixture
from misslogit.gaussian_core import GaussianParams, Pattern, std_normal_cdf
from misslogit.illustration import exponential_curve, gaussian_curve
from misslogit.oracle import (
    Link,
    PatternProbit,
    bayes_prob_logistic,
    bayes_prob_mc,
    bayes_prob_probit,
    bayes_probs_closed,
    bayes_probs_mc,
    epsilon,
    epsilon_sup,
    pattern_probit_params,
    row_stream,
)


def test_independent_case_matches_closed_display():
    var = np.array([0.5, 2.0, 1.5, 3.0])
    mu = np.array([0.3, -0.2, 1.0, 0.5])
    beta = np.array([1.0, -2.0, 0.5, 0.7])
    params = GaussianParams(mu, np.diag(var))
    pattern = Pattern.from_key("0101")
    pp = pattern_probit_params(0.4, beta, params, pattern)
    # independent covariates: the missing means only shift the intercept
    assert pp.alpha0 == pytest.approx(0.4 + beta[1] * mu[1] + beta[3] * mu[3])
    np.testing.assert_allclose(pp.alpha, beta[[0, 2]])
    assert pp.sigma_tilde2 == pytest.approx(var[1] * beta[1] ** 2 + var[3] * beta[3] ** 2)


def test_irrelevant_missing_features_recover_probit():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4))
    params = GaussianParams(np.zeros(4), a @ a.T + np.eye(4))
    beta = np.array([1.0, 0.0, -0.5, 0.0])
    pp = pattern_probit_params(0.2, beta, params, Pattern.from_key("0101"))
    assert pp.alpha0 == pytest.approx(0.2)
    np.testing.assert_allclose(pp.alpha, [1.0, -0.5])
    assert pp.sigma_tilde2 == 0.0


def test_fully_observed_pattern():
    beta = np.array([1.0, 2.0, 3.0])
    pp = pattern_probit_params(-0.3, beta, GaussianParams(np.ones(3), np.eye(3)), Pattern.complete(3))
    assert (pp.alpha0, pp.sigma_tilde2) == (-0.3, 0.0)
    np.testing.assert_array_equal(pp.alpha, beta)


def test_general_case_against_explicit_inverse():
    beta0, beta, params, pattern, x = random_instance(np.random.default_rng(5), d=5)
    obs, mis = list(pattern.obs), list(pattern.mis)
    s = params.sigma
    inv = np.linalg.inv(s[np.ix_(obs, obs)])
    b_mis = beta[mis]
    alpha0 = beta0 + b_mis @ params.mu[mis] - b_mis @ s[np.ix_(mis, obs)] @ inv @ params.mu[obs]
    alpha = beta[obs] + inv @ s[np.ix_(obs, mis)] @ b_mis
    schur = s[np.ix_(mis, mis)] - s[np.ix_(mis, obs)] @ inv @ s[np.ix_(obs, mis)]
    pp = pattern_probit_params(beta0, beta, params, pattern)
    assert pp.alpha0 == pytest.approx(alpha0, abs=1e-10)
    np.testing.assert_allclose(pp.alpha, alpha, atol=1e-10)
    assert pp.sigma_tilde2 == pytest.approx(b_mis @ schur @ b_mis, abs=1e-10)


def test_probit_trivial_values():
    pp = PatternProbit(0.0, np.zeros(2), 1.3)
    assert bayes_prob_probit(np.array([5.0, -3.0]), pp) == 0.5
    params = GaussianParams(np.zeros(2), np.eye(2))
    pp = pattern_probit_params(0.0, np.ones(2), params, Pattern.from_key("01"))
    assert bayes_prob_probit(np.array([0.0]), pp) == pytest.approx(std_normal_cdf(0 / math.sqrt(2)))
    with pytest.raises(ValueError):
        bayes_prob_probit(np.zeros(2), pp)


def test_logistic_trivial_values():
    pp = PatternProbit(0.3, np.array([1.0, -1.0]), 0.0)
    x = np.array([0.2, 0.7])
    assert bayes_prob_logistic(x, pp) == pytest.approx(1 / (1 + math.exp(-(0.3 + 0.2 - 0.7))))
    pp = PatternProbit(-1.0, np.array([1.0]), 4.0)
    assert bayes_prob_logistic(np.array([1.0]), pp) == 0.5


def test_probit_closed_form_matches_mc():
    beta0, beta, params, pattern, x = random_instance(np.random.default_rng(11), d=3)
    pp = pattern_probit_params(beta0, beta, params, pattern)
    est = bayes_prob_mc(x, pattern, params, beta0, beta, 200_000, Link.PROBIT, rng=np.random.default_rng(1))
    assert abs(bayes_prob_probit(x, pp) - est.value) <= 0.005


def test_logistic_approximation_matches_mc():
    eps, _ = epsilon_sup()
    rng = np.random.default_rng(12)
    for _ in range(5):
        beta0, beta, params, pattern, x = random_instance(rng)
        pp = pattern_probit_params(beta0, beta, params, pattern)
        est = bayes_prob_mc(x, pattern, params, beta0, beta, 200_000, "LOGISTIC", rng=rng)
        assert abs(bayes_prob_logistic(x, pp) - est.value) <= 2 * eps + 3 * est.se
        assert abs(bayes_prob_logistic(x, pp) - est.value) <= 0.036 + 3 * est.se


def test_mc_without_missing_is_exact():
    params = GaussianParams(np.zeros(3), np.eye(3))
    beta = np.array([0.5, -1.0, 2.0])
    x = np.array([0.1, 0.2, 0.3])
    est = bayes_prob_mc(x, Pattern.complete(3), params, 0.1, beta, 10, Link.LOGISTIC, rng=np.random.default_rng())
    assert est.se == 0.0
    assert est.value == pytest.approx(1 / (1 + math.exp(-(0.1 + beta @ x))))


def test_identity_transform_path_matches_linear_path():
    rng = np.random.default_rng(3)
    for _ in range(10):
        beta0, beta, params, pattern, x = random_instance(rng)
        lin = bayes_prob_mc(x, pattern, params, beta0, beta, 5000, rng=np.random.default_rng(9))
        ident = bayes_prob_mc(x, pattern, params, beta0, beta, 5000, transform=IdentityTransform(), rng=np.random.default_rng(9))
        assert abs(lin.value - ident.value) <= 1e-12


def test_nonlinear_oracle_matches_brute_force_conditioning():
    # condition on z_obs by mapping back to the latent scale: compare with an explicit computation
    cfg = ScenarioConfig(Scenario.NONLINEAR, seed=1).with_beta()
    params = gen_mixture(cfg, np.random.default_rng(0)).shared
    pattern = Pattern.from_key("00101")
    z_full = NonlinearTransform().forward(np.array([0.3, -0.2, 0.5, 0.1, -0.4]))
    obs, mis = list(pattern.obs), list(pattern.mis)
    est = bayes_prob_mc(z_full[obs], pattern, params, 0.0, cfg.beta, 100_000, transform=NonlinearTransform(), rng=np.random.default_rng(2))
    x_obs = np.array([0.3, -0.2, 0.1])
    s = params.sigma
    coef = s[np.ix_(mis, obs)] @ np.linalg.inv(s[np.ix_(obs, obs)])
    cmean = coef @ x_obs
    ccov = s[np.ix_(mis, mis)] - coef @ s[np.ix_(obs, mis)]
    draws = np.random.default_rng(4).multivariate_normal(cmean, ccov, size=100_000)
    z = np.tile(z_full, (100_000, 1))
    full_x = np.tile(np.array([0.3, -0.2, 0.0, 0.1, 0.0]), (100_000, 1))
    full_x[:, mis] = draws
    z[:, mis] = NonlinearTransform().forward(full_x)[:, mis]
    brute = np.mean(1 / (1 + np.exp(-(z @ cfg.beta))))
    assert abs(est.value - brute) < 4 * est.se * math.sqrt(2)


def test_monotone_in_observed_coordinates():
    rng = np.random.default_rng(8)
    for _ in range(20):
        beta0, beta, params, pattern, x = random_instance(rng)
        pp = pattern_probit_params(beta0, beta, params, pattern)
        base = bayes_prob_probit(x, pp)
        for j, a in enumerate(pp.alpha):
            bumped = x.copy()
            bumped[j] += 0.5
            diff = bayes_prob_probit(bumped, pp) - base
            assert diff * np.sign(a) >= -1e-15


def test_epsilon_sup():
    assert epsilon(0.0) == 0.0
    t = np.linspace(0, 10, 1001)
    np.testing.assert_allclose(epsilon(-t), -epsilon(t), atol=1e-15)
    value, arg = epsilon_sup()
    assert 0.0175 <= value <= 0.0185
    assert abs(abs(float(epsilon(arg))) - value) < 1e-15


def test_batch_mc_is_partition_independent():
    cfg = ScenarioConfig(Scenario.MNAR, seed=2).with_beta()
    mix = gen_mixture(cfg, np.random.default_rng(1))
    data = gen_dataset(cfg, mix, 60, np.random.default_rng(2))
    full, se = bayes_probs_mc(data.z_observed, data.mask, mix, 0.0, cfg.beta, 500, seed=77)
    tail, _ = bayes_probs_mc(data.z_observed[30:], data.mask[30:], mix, 0.0, cfg.beta, 500, seed=77)
    # a row's value depends only on (seed, row index), so recomputing it alone reproduces it
    for i in (0, 17, 45):
        p = Pattern.from_mask(data.mask[i])
        est = bayes_prob_mc(data.z_observed[i, list(p.obs)], p, mix.params_for(p), 0.0, cfg.beta, 500, rng=row_stream(77, i))
        assert est.value == full[i]
    closed = bayes_probs_closed(data.z_observed, data.mask, mix, 0.0, cfg.beta)
    assert np.all(np.abs(closed - full) <= 2 * epsilon_sup()[0] + 3 * se + 1e-12)
    assert tail.shape == (30,)


def test_two_dimensional_illustration():
    x1 = np.linspace(-8, 8, 81)
    gauss = gaussian_curve(x1, k=50_000)
    expo = exponential_curve(x1, k=50_000)
    assert gauss.max_deviation <= 0.02
    assert expo.max_deviation > 0.02
    # the plug-in curve sigmoid(x1 + E[X2]) is visibly off in the Gaussian case
    assert np.max(np.abs(gauss.plugin - gauss.bayes)) > 0.05
