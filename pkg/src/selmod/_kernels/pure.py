"""NumPy fallback for the truncated-series selection-probability kernel.

Mirrors ``_series.pyx`` term for term; the compiled module is preferred at
import time when available.  The series runs over the integer support
points k = 0..K_i of a count response with probability function p_k(mu_i):

    pi_i = sum_k p_k(mu_i) * G0{h(k; tau_i, mu_i)}

and the six accumulated outputs are pi and its first and second partial
derivatives in (mu, tau), obtained by termwise differentiation.
"""

import numpy as np
from scipy import special

COMPILED = False

# family codes
FAM_POISSON = 0
FAM_NEGBIN = 1
# base distribution codes
G0_STDNORMAL = 0
G0_LOGISTIC = 1
G0_UNITEXP = 2
# index function codes
H_LINEAR = 0
H_STANDARDIZED = 1
H_EXPLINEAR = 2
H_EXPSTANDARDIZED = 3
H_MGFLINEAR = 4

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _g0_triple(code, t):
    if code == G0_STDNORMAL:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * t * t)
        return special.ndtr(t), pdf, -t * pdf
    if code == G0_LOGISTIC:
        cdf = special.expit(t)
        pdf = cdf * (1.0 - cdf)
        return cdf, pdf, pdf * (1.0 - 2.0 * cdf)
    pdf = np.exp(-t)
    return -np.expm1(-t), pdf, -pdf


def _h_partials(code, alpha, k, tau, mu):
    zero = np.zeros(np.broadcast_shapes(k.shape, tau.shape, mu.shape))
    one = 1.0 + zero
    if code == H_LINEAR:
        return tau + alpha * k + zero, zero, one, zero, zero, zero
    if code == H_STANDARDIZED:
        return (
            tau + alpha * k / mu + zero,
            -alpha * k / mu**2 + zero,
            one,
            2.0 * alpha * k / mu**3 + zero,
            zero,
            zero,
        )
    if code == H_EXPLINEAR:
        e = np.exp(tau + alpha * k) + zero
        return e, zero, e, zero, e, zero
    if code == H_EXPSTANDARDIZED:
        u_mu = -alpha * k / mu**2
        e = np.exp(tau + alpha * k / mu) + zero
        return e, e * u_mu, e, e * (u_mu**2 + 2.0 * alpha * k / mu**3), e, e * u_mu
    lam = np.exp(tau) + zero
    return (
        lam + alpha * k / mu,
        -alpha * k / mu**2 + zero,
        lam,
        2.0 * alpha * k / mu**3 + zero,
        lam,
        zero,
    )


def count_series_batch(mu, tau, kmax, fam_code, kappa, g0_code, h_code, alpha):
    """Series pi and (mu, tau) partials for a batch of observations.

    Returns an (n, 6) array with columns
    (pi, dpi/dmu, dpi/dtau, d2pi/dmu2, d2pi/dtau2, d2pi/dmu dtau).
    """
    mu = np.ascontiguousarray(mu, dtype=float)
    tau = np.ascontiguousarray(tau, dtype=float)
    kmax = np.ascontiguousarray(kmax, dtype=np.int64)
    n = mu.shape[0]
    K = int(kmax.max()) if n else 0
    k = np.arange(K + 1, dtype=float)[None, :]
    MU = mu[:, None]
    TAU = tau[:, None]

    if fam_code == FAM_POISSON:
        logp = special.xlogy(k, MU) - MU - special.gammaln(k + 1.0)
        l1 = k / MU - 1.0
        l2 = -k / MU**2
    else:
        logp = (
            special.gammaln(k + kappa)
            - special.gammaln(kappa)
            - special.gammaln(k + 1.0)
            + kappa * np.log(kappa / (kappa + MU))
            + special.xlogy(k, MU / (MU + kappa))
        )
        l1 = k / MU - (k + kappa) / (MU + kappa)
        l2 = -k / MU**2 + (k + kappa) / (MU + kappa) ** 2

    p = np.exp(logp)
    p[k > kmax[:, None]] = 0.0

    h, h_mu, h_tau, h_mu2, h_tau2, h_mutau = _h_partials(h_code, alpha, k, TAU, MU)
    C, c1, c2 = _g0_triple(g0_code, h)

    C_mu = c1 * h_mu
    C_tau = c1 * h_tau
    C_mumu = c2 * h_mu**2 + c1 * h_mu2
    C_tautau = c2 * h_tau**2 + c1 * h_tau2
    C_mutau = c2 * h_mu * h_tau + c1 * h_mutau

    out = np.empty((n, 6))
    out[:, 0] = (p * C).sum(axis=1)
    out[:, 1] = (p * (l1 * C + C_mu)).sum(axis=1)
    out[:, 2] = (p * C_tau).sum(axis=1)
    out[:, 3] = (p * ((l1**2 + l2) * C + 2.0 * l1 * C_mu + C_mumu)).sum(axis=1)
    out[:, 4] = (p * C_tautau).sum(axis=1)
    out[:, 5] = (p * (l1 * C_tau + C_mutau)).sum(axis=1)
    return out
