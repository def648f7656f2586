import math

import numpy as np
import pytest

from selmod import families as F
from selmod import glm
from selmod import likelihood as L
from selmod.simulate import SimConfig, simulate
from selmod import mechanisms as M
from conftest import spec_for


class TestInterceptOnly:
    def test_bernoulli_logit(self):
        y = np.array([1.0] * 4 + [0.0] * 6)  # ybar = 0.4
        fit = glm.fit_glm(y, np.ones((10, 1)), F.bernoulli())
        assert fit.converged
        assert fit.coef[0] == pytest.approx(math.log(0.4 / 0.6), abs=1e-9)

    def test_poisson_log(self):
        y = np.array([1.0, 3.0, 2.0, 2.0])  # ybar = 2
        fit = glm.fit_glm(y, np.ones((4, 1)), F.poisson())
        assert fit.coef[0] == pytest.approx(math.log(2.0), abs=1e-9)

    def test_probit_half(self):
        d = np.array([0.0, 1.0] * 10)
        fit = glm.fit_selection_glm(d, np.ones((20, 1)), "stdnormal")
        assert fit.coef[0] == pytest.approx(0.0, abs=1e-9)

    def test_cloglog_inversion(self):
        rng = np.random.default_rng(0)
        d = (rng.uniform(size=500) < 1 - math.exp(-1.0)).astype(float)
        fit = glm.fit_selection_glm(d, np.ones((500, 1)), "unitexp")
        # intercept-only MLE inverts the complementary log-log at the mean
        assert fit.coef[0] == pytest.approx(math.log(-math.log(1 - d.mean())), abs=1e-9)

    def test_normal_identity(self):
        y = np.array([1.0, 2.0, 3.0, 6.0])
        fit = glm.fit_glm(y, np.ones((4, 1)), F.normal())
        assert fit.coef[0] == pytest.approx(3.0, abs=1e-12)
        assert fit.dispersion == pytest.approx(np.var(y), rel=1e-12)


class TestRecovery:
    def test_logit_monte_carlo(self):
        # simulated logit data with known coefficients: >= 90% of coordinates
        # within 3 reported standard errors across 50 replicates
        beta = np.array([0.4, -0.7, 0.9])
        hits = total = 0
        for rep in range(50):
            rng = np.random.default_rng(1000 + rep)
            X = np.column_stack([np.ones(500), rng.standard_normal((500, 2))])
            p = 1.0 / (1.0 + np.exp(-X @ beta))
            y = (rng.uniform(size=500) < p).astype(float)
            fit = glm.fit_glm(y, X, F.bernoulli())
            assert fit.converged
            hits += int(np.sum(np.abs(fit.coef - beta) < 3 * fit.std_err))
            total += beta.size
        assert hits / total >= 0.90


class TestIrlsContract:
    @pytest.mark.parametrize("famkey,g0", [("bernoulli", None), ("poisson", None),
                                           (None, "stdnormal"), (None, "unitexp")])
    def test_score_at_fixed_point(self, famkey, g0):
        rng = np.random.default_rng(7)
        n = 300
        X = np.column_stack([np.ones(n), rng.standard_normal(n)])
        if famkey == "bernoulli":
            y = (rng.uniform(size=n) < 1 / (1 + np.exp(-X @ [0.2, 0.5]))).astype(float)
            fit = glm.fit_glm(y, X, F.bernoulli())
            mu = 1 / (1 + np.exp(-X @ fit.coef))
            score = X.T @ (y - mu)
        elif famkey == "poisson":
            y = rng.poisson(np.exp(X @ [0.4, 0.3])).astype(float)
            fit = glm.fit_glm(y, X, F.poisson())
            score = X.T @ (y - np.exp(X @ fit.coef))
        else:
            from scipy.special import ndtr

            d = (rng.uniform(size=n) < ndtr(X @ [0.1, 0.6])).astype(float)
            fit = glm.fit_selection_glm(d, X, g0)
            if g0 == "stdnormal":
                p = ndtr(X @ fit.coef)
                md = np.exp(-0.5 * (X @ fit.coef) ** 2) / np.sqrt(2 * np.pi)
            else:
                eta = X @ fit.coef
                p = -np.expm1(-np.exp(eta))
                md = np.exp(eta - np.exp(eta))
            score = X.T @ ((d - p) * md / (p * (1 - p)))
        assert fit.converged
        assert np.max(np.abs(score)) < 1e-8

    def test_loglik_monotone_across_iterations(self):
        rng = np.random.default_rng(8)
        n = 200
        X = np.column_stack([np.ones(n), rng.standard_normal(n)])
        y = rng.poisson(np.exp(X @ [0.2, 0.8])).astype(float)
        lls = [glm.fit_glm(y, X, F.poisson(), max_iter=k).loglik for k in range(1, 7)]
        assert all(b >= a - 1e-12 for a, b in zip(lls, lls[1:]))

    def test_rank_deficiency_raises(self):
        X = np.column_stack([np.ones(20), np.ones(20)])
        with pytest.raises(ValueError, match="rank deficient"):
            glm.fit_glm(np.ones(20), X, F.poisson())

    def test_divergence_reported_as_nonconvergence(self):
        # a coefficient past the divergence bound flags the fit
        y = np.full(50, 2.0e6) + np.linspace(0, 1, 50)
        fit = glm.fit_glm(y, np.ones((50, 1)), F.normal())
        assert not fit.converged


class TestDecouplingIdentity:
    @pytest.mark.parametrize("famkey,mkey,g0", [
        ("bernoulli", "probit-std", "stdnormal"),
        ("poisson", "gumbel-std", "unitexp"),
        ("poisson", "logit-linear", "logistic"),
        ("normal", "probit-linear", "stdnormal"),
    ])
    def test_sum_equals_joint_loglik_at_alpha_zero(self, famkey, mkey, g0):
        family = {"bernoulli": F.bernoulli(), "poisson": F.poisson(),
                  "normal": F.normal()}[famkey]
        cfg = SimConfig(n=300, family=family, mechanism=M.mechanism(mkey),
                        beta_true=[0.4, 0.3], gamma_true=[0.2, -0.5],
                        alpha_true=0.6, psi_true=1.4, seed=77)
        data = simulate(cfg)
        sel = data.d == 1
        gy = glm.fit_glm(data.y[sel], data.X[sel], family)
        gd = glm.fit_selection_glm(data.d, data.W, g0)
        params = L.ParamVector(0.0, gy.coef, gd.coef, psi=gy.dispersion)
        joint = L.loglik(data, spec_for(famkey, mkey), params)
        assert joint == pytest.approx(gy.loglik + gd.loglik, abs=1e-8)
