"""Exponential-family response distributions and link functions.

Every response distribution is handled through the triple (a, b, d) of the
density exp{[y*theta - b(theta)]/a(psi) + d(y, psi)}, where theta is the
canonical parameter with mean b'(theta) and variance a(psi)*b''(theta).
The likelihood code consumes b and its first three derivatives, the link
g(mu) with its first two derivatives, the dispersion function a(psi), the
carrier d(y, psi), and the moment generating function, all closed form for
the four families implemented here:

* Bernoulli (logit or probit link), known dispersion a = 1
* Poisson (log link), known dispersion a = 1
* Negative Binomial with fixed size kappa (log link), variance mu*(1+mu/kappa)
* Normal (identity link) with free dispersion psi = sigma^2

All operations are pure functions of their arguments and accept scalars or
NumPy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, SupportError

BERNOULLI = "bernoulli"
POISSON = "poisson"
NEGBIN = "negbin"
NORMAL = "normal"

LOGIT = "logit"
PROBIT = "probit"
LOG = "log"
IDENTITY = "identity"

#: links accepted per family; the first entry is canonical
_ALLOWED_LINKS = {
    BERNOULLI: (LOGIT, PROBIT),
    POISSON: (LOG,),
    NEGBIN: (LOG,),
    NORMAL: (IDENTITY,),
}

#: clamp width applied to means computed from a linear predictor, keeping
#: log densities finite during line searches
MEAN_EPS = 1e-12

_LOG_2PI = math.log(2.0 * math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ResponseFamily:
    """A response distribution paired with a link function.

    ``kappa`` is the fixed Negative Binomial size parameter and must be
    supplied for that family only.  ``dispersion_known`` is True except for
    the Normal family, whose variance psi is estimated.
    """

    kind: str
    link: str
    dispersion_known: bool = True
    kappa: float | None = None

    def __post_init__(self):
        if self.kind not in _ALLOWED_LINKS:
            raise ValueError(f"unknown family {self.kind!r}")
        if self.link not in _ALLOWED_LINKS[self.kind]:
            raise ValueError(f"link {self.link!r} is not supported for {self.kind}")
        if self.kind == NEGBIN:
            if self.kappa is None or not self.kappa > 0:
                raise ValueError("negbin requires a positive size parameter kappa")
        elif self.kappa is not None:
            raise ValueError("kappa is only meaningful for the negbin family")
        if self.kind == NORMAL and self.dispersion_known:
            raise ValueError("the normal family has unknown dispersion")
        if self.kind != NORMAL and not self.dispersion_known:
            raise ValueError(f"{self.kind} has known dispersion")

    @property
    def nonnegative_support(self) -> bool:
        return self.kind != NORMAL

    @property
    def is_discrete(self) -> bool:
        return self.kind != NORMAL


def bernoulli(link: str = LOGIT) -> ResponseFamily:
    return ResponseFamily(BERNOULLI, link)


def poisson() -> ResponseFamily:
    return ResponseFamily(POISSON, LOG)


def negbin(kappa: float) -> ResponseFamily:
    return ResponseFamily(NEGBIN, LOG, kappa=float(kappa))


def normal() -> ResponseFamily:
    return ResponseFamily(NORMAL, IDENTITY, dispersion_known=False)


def _check_mean_domain(family, mu):
    mu = np.asarray(mu, dtype=float)
    if family.kind == BERNOULLI:
        if np.any(mu <= 0.0) or np.any(mu >= 1.0):
            raise DomainError("bernoulli mean must lie in (0, 1)")
    elif family.kind in (POISSON, NEGBIN):
        if np.any(mu <= 0.0):
            raise DomainError(f"{family.kind} mean must be positive")
    else:
        if not np.all(np.isfinite(mu)):
            raise DomainError("normal mean must be finite")
    return mu


def theta_of_mu(family: ResponseFamily, mu):
    """Canonical parameter theta with b'(theta) = mu (closed form)."""
    mu = _check_mean_domain(family, mu)
    if family.kind == BERNOULLI:
        return np.log(mu / (1.0 - mu))
    if family.kind == POISSON:
        return np.log(mu)
    if family.kind == NEGBIN:
        return np.log(mu / (mu + family.kappa))
    return mu


def b_derivs(family: ResponseFamily, theta):
    """b(theta) and its first three derivatives.

    Returns the tuple (b, b', b'', b''') with b' equal to the mean.
    """
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")
    if family.kind == BERNOULLI:
        b = np.logaddexp(0.0, theta)
        mu = special.expit(theta)
        b2 = mu * (1.0 - mu)
        return b, mu, b2, b2 * (1.0 - 2.0 * mu)
    if family.kind == POISSON:
        e = np.exp(theta)
        return e, e, e, e
    if family.kind == NEGBIN:
        if np.any(theta >= 0.0):
            raise DomainError("negbin canonical parameter must be negative")
        k = family.kappa
        e = np.exp(theta)
        om = -np.expm1(theta)  # 1 - e^theta
        b = -k * np.log(om)
        return b, k * e / om, k * e / om**2, k * e * (1.0 + e) / om**3
    return 0.5 * theta**2, theta, np.ones_like(theta), np.zeros_like(theta)


def variance_b23(family: ResponseFamily, mu):
    """(b'', b''') expressed directly in the mean, bypassing theta."""
    mu = np.asarray(mu, dtype=float)
    if family.kind == BERNOULLI:
        b2 = mu * (1.0 - mu)
        return b2, b2 * (1.0 - 2.0 * mu)
    if family.kind == POISSON:
        return mu, mu
    if family.kind == NEGBIN:
        k = family.kappa
        return mu * (1.0 + mu / k), mu * (1.0 + 2.0 * mu / k) * (1.0 + mu / k)
    return np.ones_like(mu), np.zeros_like(mu)


def dispersion(family: ResponseFamily, psi):
    """a(psi) with its first two psi derivatives."""
    if family.kind == NORMAL:
        if not psi > 0:
            raise DomainError("normal dispersion must be positive")
        return float(psi), 1.0, 0.0
    return 1.0, 0.0, 0.0


def carrier(family: ResponseFamily, y, psi):
    """d(y, psi) with its first two psi derivatives."""
    y = np.asarray(y, dtype=float)
    if family.kind == BERNOULLI:
        z = np.zeros_like(y)
        return z, z, z
    if family.kind == POISSON:
        z = np.zeros_like(y)
        return -special.gammaln(y + 1.0), z, z
    if family.kind == NEGBIN:
        k = family.kappa
        z = np.zeros_like(y)
        d = special.gammaln(y + k) - special.gammaln(k) - special.gammaln(y + 1.0)
        return d, z, z
    d = -0.5 * y**2 / psi - 0.5 * np.log(2.0 * np.pi * psi)
    d1 = 0.5 * y**2 / psi**2 - 0.5 / psi
    d2 = -(y**2) / psi**3 + 0.5 / psi**2
    return d, d1, d2


def _check_support(family, y):
    y = np.asarray(y, dtype=float)
    if family.kind == BERNOULLI:
        if np.any((y != 0.0) & (y != 1.0)):
            raise SupportError("bernoulli response must be 0 or 1")
    elif family.kind in (POISSON, NEGBIN):
        if np.any(y < 0.0) or np.any(y != np.floor(y)):
            raise SupportError(f"{family.kind} response must be a nonnegative integer")
    else:
        if not np.all(np.isfinite(y)):
            raise SupportError("normal response must be finite")
    return y


def log_pf(family: ResponseFamily, y, mu, psi: float = 1.0):
    """Log density / probability function at y."""
    y = _check_support(family, y)
    mu = _check_mean_domain(family, mu)
    if family.kind == BERNOULLI:
        return special.xlogy(y, mu) + special.xlog1py(1.0 - y, -mu)
    if family.kind == POISSON:
        return special.xlogy(y, mu) - mu - special.gammaln(y + 1.0)
    if family.kind == NEGBIN:
        k = family.kappa
        return (
            special.gammaln(y + k)
            - special.gammaln(k)
            - special.gammaln(y + 1.0)
            + k * np.log(k / (k + mu))
            + special.xlogy(y, mu / (mu + k))
        )
    if not psi > 0:
        raise DomainError("normal dispersion must be positive")
    return -0.5 * ((y - mu) ** 2 / psi + np.log(2.0 * np.pi * psi))


def mgf(family: ResponseFamily, mu, psi, t):
    """Moment generating function E[exp(t*Y)].

    Raises DomainError when t falls outside the convergence region (only
    the Negative Binomial has a finite abscissa, t < log(1 + kappa/mu)).
    """
    mu = _check_mean_domain(family, mu)
    t = np.asarray(t, dtype=float)
    if family.kind == BERNOULLI:
        return 1.0 + mu * np.expm1(t)
    if family.kind == POISSON:
        return np.exp(mu * np.expm1(t))
    if family.kind == NEGBIN:
        k = family.kappa
        if np.any(t >= np.log1p(k / mu)):
            raise DomainError("negbin mgf diverges for t >= log(1 + kappa/mu)")
        q = mu / (mu + k)
        return ((1.0 - q) / (1.0 - q * np.exp(t))) ** k
    return np.exp(mu * t + 0.5 * psi * t**2)


def pmf_logmu_derivs(family: ResponseFamily, k, mu):
    """log p_k(mu) with its first two mu derivatives, for count families.

    Drives the termwise differentiation of the truncated-series selection
    probability; k may broadcast against mu.
    """
    k = np.asarray(k, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if family.kind == POISSON:
        logp = special.xlogy(k, mu) - mu - special.gammaln(k + 1.0)
        return logp, k / mu - 1.0, -k / mu**2
    if family.kind == NEGBIN:
        kap = family.kappa
        logp = (
            special.gammaln(k + kap)
            - special.gammaln(kap)
            - special.gammaln(k + 1.0)
            + kap * np.log(kap / (kap + mu))
            + special.xlogy(k, mu / (mu + kap))
        )
        l1 = k / mu - (k + kap) / (mu + kap)
        l2 = -k / mu**2 + (k + kap) / (mu + kap) ** 2
        return logp, l1, l2
    raise DomainError(f"{family.kind} is not a count family")


def tail_mass(family: ResponseFamily, mu, K):
    """Probability mass beyond the truncation point K."""
    from scipy import stats

    mu = np.asarray(mu, dtype=float)
    K = np.asarray(K)
    if family.kind == POISSON:
        return stats.poisson.sf(K, mu)
    if family.kind == NEGBIN:
        k = family.kappa
        return stats.nbinom.sf(K, k, k / (k + mu))
    raise DomainError(f"{family.kind} is not a count family")


# --------------------------------------------------------------------------
# link functions
# --------------------------------------------------------------------------

def link_derivs(link: str, mu):
    """Link value g(mu) with its first two derivatives (g, g', g'')."""
    mu = np.asarray(mu, dtype=float)
    if link == LOGIT:
        if np.any(mu <= 0.0) or np.any(mu >= 1.0):
            raise DomainError("logit link requires mu in (0, 1)")
        v = mu * (1.0 - mu)
        return np.log(mu / (1.0 - mu)), 1.0 / v, (2.0 * mu - 1.0) / v**2
    if link == PROBIT:
        if np.any(mu <= 0.0) or np.any(mu >= 1.0):
            raise DomainError("probit link requires mu in (0, 1)")
        u = special.ndtri(mu)
        phi = _INV_SQRT_2PI * np.exp(-0.5 * u**2)
        return u, 1.0 / phi, u / phi**2
    if link == LOG:
        if np.any(mu <= 0.0):
            raise DomainError("log link requires mu > 0")
        return np.log(mu), 1.0 / mu, -1.0 / mu**2
    if link == IDENTITY:
        return mu, np.ones_like(mu), np.zeros_like(mu)
    raise ValueError(f"unknown link {link!r}")


def mean_from_eta(family: ResponseFamily, eta):
    """Inverse link applied to the linear predictor, clamped to the mean domain."""
    eta = np.asarray(eta, dtype=float)
    if family.link == LOGIT:
        mu = special.expit(eta)
    elif family.link == PROBIT:
        mu = special.ndtr(eta)
    elif family.link == LOG:
        mu = np.exp(eta)
    else:
        return eta
    if family.kind == BERNOULLI:
        return np.clip(mu, MEAN_EPS, 1.0 - MEAN_EPS)
    return np.maximum(mu, MEAN_EPS)
