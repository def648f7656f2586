"""Decoupled baseline fits at alpha = 0.

With alpha = 0 the model factorizes into an ordinary GLM of y on X over the
selected rows and a binary regression of d on W whose success probability is
G0 applied to the selection predictor (probit for the standard normal base,
logit for the logistic, complementary log-log for the unit exponential with
exp-composed index).  Both fits run Fisher-scoring IRLS with step halving
and provide the starting values for the profile search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import families as fam
from .mechanisms import LOGISTIC, STDNORMAL, UNITEXP

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: coefficient magnitude treated as divergence (separation)
DIVERGENCE_BOUND = 1e6


@dataclass
class GlmFit:
    coef: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    std_err: np.ndarray
    dispersion: float | None = None


def _irls(y, X, mean_fn, dmean_fn, var_fn, loglik_fn, eta0,
          tol: float = 1e-8, max_iter: int = 100):
    n, p = X.shape
    if np.linalg.matrix_rank(X) < p:
        raise ValueError("design matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(X, eta0, rcond=None)
    eta = X @ beta
    ll = loglik_fn(mean_fn(eta))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = mean_fn(eta)
        md = dmean_fn(eta)
        V = var_fn(mu)
        resid = (y - mu) * md / V
        grad = X.T @ resid
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        w = md**2 / V
        XtWX = X.T @ (X * w[:, None])
        try:
            delta = np.linalg.solve(XtWX, grad)
        except np.linalg.LinAlgError:
            break
        if np.max(np.abs(grad)) < 1e-5:
            # quadratic convergence zone: the ascent test is dominated by
            # floating-point noise, take the full Fisher step
            cand = beta + delta
            ll_cand = loglik_fn(mean_fn(X @ cand))
            if not np.isfinite(ll_cand):
                break
        else:
            step = 1.0
            for _ in range(30):
                cand = beta + step * delta
                ll_cand = loglik_fn(mean_fn(X @ cand))
                if np.isfinite(ll_cand) and ll_cand >= ll:
                    break
                step *= 0.5
            else:
                break  # no ascent step found
        beta = cand
        eta = X @ beta
        ll = ll_cand
        if np.max(np.abs(beta)) > DIVERGENCE_BOUND:
            converged = False
            break
    mu = mean_fn(eta)
    md = dmean_fn(eta)
    w = md**2 / var_fn(mu)
    XtWX = X.T @ (X * w[:, None])
    se = np.sqrt(np.diag(np.linalg.inv(XtWX)))
    return beta, ll, it, converged, se


def fit_glm(y, X, family: fam.ResponseFamily, max_iter: int = 100) -> GlmFit:
    """IRLS fit of the response GLM (selected rows only)."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    link = family.link

    if link == fam.LOGIT:
        mean_fn, dmean_fn = special.expit, lambda e: special.expit(e) * special.expit(-e)
    elif link == fam.PROBIT:
        mean_fn = special.ndtr
        dmean_fn = lambda e: _INV_SQRT_2PI * np.exp(-0.5 * e**2)
    elif link == fam.LOG:
        mean_fn = dmean_fn = np.exp
    else:
        mean_fn = lambda e: e
        dmean_fn = lambda e: np.ones_like(e)

    def clamp(mu):
        if family.kind == fam.BERNOULLI:
            return np.clip(mu, fam.MEAN_EPS, 1.0 - fam.MEAN_EPS)
        if family.kind in (fam.POISSON, fam.NEGBIN):
            return np.maximum(mu, fam.MEAN_EPS)
        return mu

    if family.kind == fam.NORMAL:
        var_fn = lambda mu: np.ones_like(mu)

        def loglik_fn(mu):
            psi = max(float(np.mean((y - mu) ** 2)), 1e-300)
            return -0.5 * y.size * (np.log(2.0 * np.pi * psi) + 1.0)
    else:
        var_fn = lambda mu: fam.variance_b23(family, clamp(mu))[0]

        def loglik_fn(mu):
            return float(np.sum(fam.log_pf(family, y, clamp(mu))))

    mu0 = clamp((y + np.mean(y)) / 2.0)
    eta0 = np.asarray(fam.link_derivs(link, mu0)[0], dtype=float)
    beta, ll, it, conv, se = _irls(
        y, X, lambda e: clamp(mean_fn(e)), dmean_fn, var_fn, loglik_fn, eta0,
        max_iter=max_iter,
    )

    if family.kind == fam.NORMAL:
        res = y - X @ beta
        psi = max(float(np.mean(res**2)), 1e-300)
        ll = float(np.sum(fam.log_pf(family, y, X @ beta, psi)))
        se = se * math.sqrt(psi)
        return GlmFit(beta, ll, it, conv, se, dispersion=psi)
    return GlmFit(beta, ll, it, conv, se)


def fit_selection_glm(d, W, g0_kind: str, max_iter: int = 100) -> GlmFit:
    """Binary IRLS fit of the selection indicator with inverse link G0.

    The unit exponential base (with its exp-composed index) corresponds to
    the complementary log-log link.
    """
    d = np.asarray(d, dtype=float)
    W = np.asarray(W, dtype=float)
    if not np.all((d == 0.0) | (d == 1.0)):
        raise ValueError("selection indicator must be 0/1")

    if g0_kind == STDNORMAL:
        mean_fn = special.ndtr
        dmean_fn = lambda e: _INV_SQRT_2PI * np.exp(-0.5 * e**2)
        inv0 = special.ndtri
    elif g0_kind == LOGISTIC:
        mean_fn = special.expit
        dmean_fn = lambda e: special.expit(e) * special.expit(-e)
        inv0 = lambda p: np.log(p / (1.0 - p))
    elif g0_kind == UNITEXP:
        mean_fn = lambda e: -np.expm1(-np.exp(e))
        dmean_fn = lambda e: np.exp(e - np.exp(e))
        inv0 = lambda p: np.log(-np.log1p(-p))
    else:
        raise ValueError(f"unknown base distribution {g0_kind!r}")

    def clamp(p):
        return np.clip(p, fam.MEAN_EPS, 1.0 - fam.MEAN_EPS)

    def loglik_fn(p):
        p = clamp(p)
        return float(np.sum(special.xlogy(d, p) + special.xlog1py(1.0 - d, -p)))

    var_fn = lambda p: clamp(p) * (1.0 - clamp(p))
    p0 = (d + np.mean(d)) / 2.0
    eta0 = np.asarray(inv0(p0), dtype=float)
    beta, ll, it, conv, se = _irls(
        d, W, lambda e: clamp(mean_fn(e)), dmean_fn, var_fn, loglik_fn, eta0,
        max_iter=max_iter,
    )
    return GlmFit(beta, ll, it, conv, se)
