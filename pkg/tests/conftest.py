"""Shared fixtures and finite-difference oracles.

The FD helpers here are the independent check against every analytic
derivative in the package; they only touch public evaluation entry points.
"""

import numpy as np
import pytest

from selmod import families as F
from selmod import likelihood as L
from selmod import mechanisms as M
from selmod.modelspec import ModelSpec
from selmod.simulate import SimConfig, simulate

ALL_MECHANISMS = list(M.MECHANISM_KEYS)

#: every valid family x mechanism pair (normal excludes mechanisms that
#: need a positive mean)
VALID_PAIRS = [
    (famkey, mkey)
    for famkey in ("bernoulli", "poisson", "negbin")
    for mkey in ALL_MECHANISMS
] + [("normal", mkey) for mkey in ("probit-linear", "logit-linear", "gumbel-linear")]

NEGBIN_KAPPA = 1.6


def family_for(famkey):
    return {
        "bernoulli": F.bernoulli(),
        "poisson": F.poisson(),
        "negbin": F.negbin(NEGBIN_KAPPA),
        "normal": F.normal(),
    }[famkey]


def spec_for(famkey, mkey, **kw):
    kw.setdefault("kappa", NEGBIN_KAPPA if famkey == "negbin" else None)
    return ModelSpec(family=famkey, mechanism=mkey, **kw)


def draw_instance(rng, famkey, mkey, n=30, p=2, q=2, alpha=None):
    """A random dataset plus a random (feasible) parameter point."""
    if alpha is None:
        alpha = float(rng.uniform(0.05, 0.7)) if mkey == "expn-mgf" \
            else float(rng.uniform(-0.6, 0.6))
    family = family_for(famkey)
    beta = rng.uniform(-0.4, 0.4, p)
    gamma = rng.uniform(-0.4, 0.4, q)
    if famkey in ("poisson", "negbin"):
        beta[0] = rng.uniform(0.3, 0.9)
    cfg = SimConfig(
        n=n, family=family, mechanism=M.mechanism(mkey), beta_true=beta,
        gamma_true=gamma, alpha_true=alpha, psi_true=1.3,
        seed=int(rng.integers(1 << 31)),
    )
    data = simulate(cfg)
    params = L.ParamVector(
        alpha,
        beta + rng.uniform(-0.05, 0.05, p),
        gamma + rng.uniform(-0.05, 0.05, q),
        1.1 if famkey == "normal" else None,
    )
    return data, params


def fd_gradient(f, x, scale=1e-6):
    """Central differences with per-coordinate step scale*max(1, |x_j|)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for j in range(x.size):
        h = scale * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        out[j] = (f(xp) - f(xm)) / (2.0 * h)
    return out


def fd_jacobian(g, x, scale=1e-6):
    """Central differences of a vector function; columns index coordinates."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = scale * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((g(xp) - g(xm)) / (2.0 * h))
    return np.column_stack(cols)


def rel_err(a, b):
    """Max deviation normalized by max(1, scale of the reference)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def score_hessian_fd_errors(data, spec, params):
    """(score error vs FD of loglik, hessian error vs FD of score)."""
    sh = L.evaluate(data, spec, params, order=2)
    assert np.isfinite(sh.loglik)
    p, q = params.beta.size, params.gamma.size
    has_psi = params.psi is not None

    def pv(theta):
        return L.ParamVector.from_theta(params.alpha, theta, p, q, has_psi)

    th = params.theta()
    fd_s = fd_gradient(lambda t: L.loglik(data, spec, pv(t)), th)
    fd_h = fd_jacobian(lambda t: L.evaluate(data, spec, pv(t), order=1).score, th)
    return rel_err(sh.score, fd_s), rel_err(sh.hessian, 0.5 * (fd_h + fd_h.T))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
