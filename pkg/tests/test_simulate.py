import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr
from scipy.stats import norm

from selmod import families as F
from selmod import mechanisms as M
from selmod import normalizer as N
from selmod.simulate import EsnCheck, SimConfig, esn_density_check, pi_monte_carlo, simulate


def _config(**kw):
    base = dict(
        n=1000, family=F.bernoulli(), mechanism=M.mechanism("probit-std"),
        beta_true=[0.3, 0.5], gamma_true=[0.2, -0.4], alpha_true=0.8, seed=123,
    )
    base.update(kw)
    return SimConfig(**base)


class TestSimulate:
    def test_same_seed_bit_identical(self):
        a = simulate(_config())
        b = simulate(_config())
        assert np.array_equal(a.d, b.d)
        assert np.array_equal(a.y, b.y, equal_nan=True)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.W, b.W)

    def test_different_seed_differs(self):
        a = simulate(_config())
        b = simulate(_config(seed=124))
        assert not np.array_equal(a.d, b.d)

    def test_censoring_pattern(self):
        data = simulate(_config())
        assert np.all(np.isnan(data.y[data.d == 0]))
        assert np.all(np.isfinite(data.y[data.d == 1]))

    def test_independence_at_alpha_zero(self):
        data, y_full, _ = simulate(_config(alpha_true=0.0, n=40_000), return_latent=True)
        corr = np.corrcoef(data.d, y_full)[0, 1]
        assert abs(corr) < 4.0 / math.sqrt(40_000)

    @pytest.mark.parametrize("famkey", ["bernoulli", "poisson", "negbin", "normal"])
    def test_selection_rate_matches_normalizer(self, famkey):
        family = {"bernoulli": F.bernoulli(), "poisson": F.poisson(),
                  "negbin": F.negbin(1.8), "normal": F.normal()}[famkey]
        mkey = "probit-linear" if famkey == "normal" else "probit-std"
        beta = [0.3, 0.5] if famkey == "bernoulli" else [0.7, 0.3]
        cfg = _config(family=family, mechanism=M.mechanism(mkey), n=20_000,
                      beta_true=beta, alpha_true=0.6, psi_true=1.2)
        data = simulate(cfg)
        mech = cfg.mechanism.with_alpha(0.6)
        mu = F.mean_from_eta(family, data.X @ np.asarray(beta))
        tau = data.W @ np.asarray(cfg.gamma_true)
        pi = N.selection_probability(mech, family, mu, tau, psi=1.2).pi
        se = math.sqrt(float(np.sum(pi * (1 - pi)))) / cfg.n
        assert abs(data.d.mean() - pi.mean()) < 4 * se

    def test_conditional_acceptance_follows_g(self):
        # bin the latent responses: acceptance frequency must track G(y)
        cfg = _config(family=F.poisson(), mechanism=M.mechanism("logit-std"),
                      beta_true=[0.9], gamma_true=[0.1], alpha_true=-0.7,
                      n=30_000, seed=7)
        data, y_full, _ = simulate(cfg, return_latent=True)
        mech = cfg.mechanism.with_alpha(-0.7)
        mu = float(np.exp(0.9))
        for k in range(6):
            mask = y_full == k
            n_k = int(mask.sum())
            if n_k < 200:
                continue
            g = float(M.g_eval(mech, float(k), 0.1, mu))
            se = math.sqrt(g * (1 - g) / n_k)
            assert abs(data.d[mask].mean() - g) <= 4 * se

    def test_user_matrix_law(self):
        X = np.column_stack([np.ones(50), np.linspace(-1, 1, 50)])
        W = np.ones((50, 1))
        cfg = _config(n=50, covariate_law="user-matrix", X=X, W=W,
                      gamma_true=[0.2], seed=5)
        data = simulate(cfg)
        assert np.array_equal(data.X, X) and np.array_equal(data.W, W)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            SimConfig(n=10, family=F.bernoulli(), mechanism=M.mechanism("probit-std"),
                      beta_true=[0.1, 0.2], gamma_true=[0.1],
                      alpha_true=0.0, covariate_law="user-matrix",
                      X=np.ones((10, 1)), W=np.ones((10, 1)))


class TestPiMonteCarlo:
    def test_binary_closed_form(self):
        mech = M.mechanism("probit-linear", 1.0)
        est, se = pi_monte_carlo(F.bernoulli(), mech, 0.5, 0.0, reps=1_000_000, seed=1)
        exact = 0.25 + 0.5 * ndtr(1.0)
        assert se == pytest.approx(0.0005, abs=2e-4)
        assert abs(est - exact) < 4 * se

    def test_poisson_series_oracle(self):
        mech = M.mechanism("gumbel-std", 0.45)
        est, se = pi_monte_carlo(F.poisson(), mech, 2.3, -0.2, reps=400_000, seed=2)
        exact = float(N.pi_count(mech, F.poisson(), 2.3, -0.2, 300).pi[0])
        assert abs(est - exact) < 4 * se

    def test_independence(self):
        mech = M.mechanism("probit-linear", 0.0)
        est, se = pi_monte_carlo(F.poisson(), mech, 1.0, 0.0, reps=200_000, seed=3)
        assert abs(est - 0.5) < 4 * se

    @pytest.mark.parametrize("key", list(M.MECHANISM_KEYS))
    def test_every_mechanism_vs_normalizer(self, key):
        alpha = 0.4 if key == "expn-mgf" else -0.4
        mech = M.mechanism(key, alpha)
        mu, tau = 1.8, 0.25
        est, se = pi_monte_carlo(F.poisson(), mech, mu, tau, reps=200_000,
                                 seed=hash(key) % (1 << 31))
        exact = float(N.selection_probability(
            mech, F.poisson(), np.array([mu]), np.array([tau])).pi[0])
        assert abs(est - exact) < 4 * se

    def test_minimum_replicates(self):
        with pytest.raises(ValueError):
            pi_monte_carlo(F.poisson(), M.mechanism("probit-linear"), 1.0, 0.0, reps=10)


class TestEsnCheck:
    def test_no_selection_effect(self):
        # rho = 0 collapses the conditional density to the baseline normal
        grid = np.linspace(-5, 7, 301)
        chk = esn_density_check(1.0, 1.5, 0.0, 0.4, grid)
        assert chk.max_abs_deviation < 1e-12
        assert chk.pi == pytest.approx(ndtr(0.4), abs=1e-9)

    def test_matches_closed_form(self):
        mu, sigma, rho, tau = 0.5, 2.0, 0.6, 0.3
        grid = np.linspace(mu - 6 * sigma, mu + 6 * sigma, 401)
        chk = esn_density_check(mu, sigma, rho, tau, grid)
        assert chk.max_abs_deviation < 1e-8
        assert chk.pi == pytest.approx(chk.pi_expected, abs=1e-8)

    def test_density_integrates_to_one(self):
        mu, sigma, rho, tau = 0.5, 2.0, 0.6, 0.3
        a_shape = rho / math.sqrt(1 - rho**2)
        slope, intercept = a_shape / sigma, tau / math.sqrt(1 - rho**2) - a_shape * mu / sigma
        pi = float(N.pi_normal(
            M.SelectionMechanism(M.STDNORMAL, M.LINEAR, slope),
            np.array([mu]), sigma**2, np.array([intercept])).pi[0])
        val, _ = quad(
            lambda y: norm.pdf(y, mu, sigma) * ndtr(intercept + slope * y) / pi,
            mu - 12 * sigma, mu + 12 * sigma, epsabs=1e-12)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            esn_density_check(0.0, 1.0, 1.2, 0.0, np.array([0.0]))
