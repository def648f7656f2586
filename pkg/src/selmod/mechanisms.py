"""Catalog of selection mechanisms G(y) = G0{h(y)}.

A mechanism pairs a base distribution function G0 (standard normal,
standard logistic, or unit exponential) with an index function
h(y; tau, mu, alpha).  The conditional observation probability is
G(y) = G0{h(y)}; alpha regulates the dependence on y and alpha = 0
decouples selection from the response.

Index functions:

* ``linear``            h = tau + alpha*y
* ``standardized``      h = tau + (alpha/mu)*y          (requires mu > 0)
* ``explinear``         h = exp(tau + alpha*y)          (unit exponential G0)
* ``expstandardized``   h = exp(tau + (alpha/mu)*y)     (unit exponential G0)
* ``mgflinear``         h = exp(tau) + (alpha/mu)*y     (unit exponential G0,
                        alpha >= 0 so that h stays nonnegative)

The exp-composed forms keep the argument of the unit exponential
distribution function nonnegative and make G the complement of a Gumbel
distribution function in the linear predictor.  The estimator needs the
partial derivatives of h in (mu, tau) up to second order, which
``h_eval`` returns alongside h itself.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

STDNORMAL = "stdnormal"
LOGISTIC = "logistic"
UNITEXP = "unitexp"

LINEAR = "linear"
STANDARDIZED = "standardized"
EXPLINEAR = "explinear"
EXPSTANDARDIZED = "expstandardized"
MGFLINEAR = "mgflinear"

#: string keys accepted in model-spec files
MECHANISM_KEYS = {
    "probit-linear": (STDNORMAL, LINEAR),
    "probit-std": (STDNORMAL, STANDARDIZED),
    "logit-linear": (LOGISTIC, LINEAR),
    "logit-std": (LOGISTIC, STANDARDIZED),
    "gumbel-linear": (UNITEXP, EXPLINEAR),
    "gumbel-std": (UNITEXP, EXPSTANDARDIZED),
    "expn-mgf": (UNITEXP, MGFLINEAR),
}

_NEEDS_POSITIVE_MU = (STANDARDIZED, EXPSTANDARDIZED, MGFLINEAR)
_UNITEXP_H = (EXPLINEAR, EXPSTANDARDIZED, MGFLINEAR)

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class SelectionMechanism:
    g0_kind: str
    h_kind: str
    alpha: float = 0.0

    def __post_init__(self):
        if self.g0_kind not in (STDNORMAL, LOGISTIC, UNITEXP):
            raise ValueError(f"unknown base distribution {self.g0_kind!r}")
        if self.h_kind not in (LINEAR, STANDARDIZED, EXPLINEAR, EXPSTANDARDIZED, MGFLINEAR):
            raise ValueError(f"unknown index function {self.h_kind!r}")
        if (self.g0_kind == UNITEXP) != (self.h_kind in _UNITEXP_H):
            raise ValueError(
                "the unit exponential base pairs exactly with the exp-composed "
                "or mgf index functions"
            )

    @property
    def needs_positive_mu(self) -> bool:
        return self.h_kind in _NEEDS_POSITIVE_MU

    @property
    def key(self) -> str:
        for key, (g0k, hk) in MECHANISM_KEYS.items():
            if (g0k, hk) == (self.g0_kind, self.h_kind):
                return key
        raise ValueError("mechanism is not in the catalog")

    def with_alpha(self, alpha: float) -> "SelectionMechanism":
        return dataclasses.replace(self, alpha=float(alpha))


def mechanism(key: str, alpha: float = 0.0) -> SelectionMechanism:
    """Build a catalog mechanism from its string key."""
    try:
        g0_kind, h_kind = MECHANISM_KEYS[key]
    except KeyError:
        raise ValueError(
            f"unknown mechanism {key!r}; choose one of {sorted(MECHANISM_KEYS)}"
        ) from None
    return SelectionMechanism(g0_kind, h_kind, float(alpha))


def g0_eval(mech: SelectionMechanism, t):
    """Base distribution function with density and density derivative.

    Returns (G0(t), g0(t), g0'(t)).  The unit exponential base is only
    defined for t >= 0 and raises DomainError otherwise.
    """
    t = np.asarray(t, dtype=float)
    if mech.g0_kind == STDNORMAL:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * t**2)
        return special.ndtr(t), pdf, -t * pdf
    if mech.g0_kind == LOGISTIC:
        cdf = special.expit(t)
        pdf = cdf * (1.0 - cdf)
        return cdf, pdf, pdf * (1.0 - 2.0 * cdf)
    if np.any(t < 0.0):
        raise DomainError("unit exponential base is undefined for t < 0")
    pdf = np.exp(-t)
    return -np.expm1(-t), pdf, -pdf


def g0_log_ratios(mech: SelectionMechanism, t):
    """(log G0, g0/G0, g0'/G0) computed in overflow-safe form.

    The likelihood consumes these ratios rather than raw densities so that
    deep tails (for example log Phi at very negative arguments) stay finite.
    """
    t = np.asarray(t, dtype=float)
    if mech.g0_kind == STDNORMAL:
        log_cdf = special.log_ndtr(t)
        r1 = np.exp(-0.5 * t**2 - 0.5 * np.log(2.0 * np.pi) - log_cdf)
        return log_cdf, r1, -t * r1
    if mech.g0_kind == LOGISTIC:
        log_cdf = -np.logaddexp(0.0, -t)
        r1 = special.expit(-t)
        return log_cdf, r1, r1 * (1.0 - 2.0 * special.expit(t))
    if np.any(t < 0.0):
        raise DomainError("unit exponential base is undefined for t < 0")
    # 1 - e^{-t} ~ t for small t; switch to the series to keep precision
    # (t = 0 legitimately yields log_cdf = -inf and an infinite hazard)
    small = t < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        log_cdf = np.where(small, np.log(t) - 0.5 * t, np.log(-np.expm1(-t)))
        r1 = np.where(small, 1.0 / t - 0.5, 1.0 / np.expm1(np.minimum(t, 700.0)))
    return log_cdf, r1, -r1


def h_eval(mech: SelectionMechanism, y, tau, mu=None):
    """Index function h(y) and its partial derivatives.

    Returns (h, dh/dmu, dh/dtau, d2h/dmu2, d2h/dtau2, d2h/dmu dtau); all six
    broadcast over the inputs.  ``mu`` is required (and must be positive)
    for the standardized and mgf forms.
    """
    y = np.asarray(y, dtype=float)
    tau = np.asarray(tau, dtype=float)
    alpha = mech.alpha
    shape = np.broadcast_shapes(y.shape, tau.shape)
    if mech.needs_positive_mu:
        if mu is None:
            raise DomainError(f"{mech.h_kind} index requires the response mean")
        mu = np.asarray(mu, dtype=float)
        if np.any(mu <= 0.0):
            raise DomainError(f"{mech.h_kind} index requires mu > 0")
        shape = np.broadcast_shapes(shape, mu.shape)

    zero = np.zeros(shape)
    one = np.ones(shape)
    if mech.h_kind == LINEAR:
        h = tau + alpha * y + zero
        return h, zero, one, zero, zero, zero
    if mech.h_kind == STANDARDIZED:
        h = tau + alpha * y / mu + zero
        h_mu = -alpha * y / mu**2
        return h, h_mu + zero, one, 2.0 * alpha * y / mu**3 + zero, zero, zero
    if mech.h_kind == EXPLINEAR:
        e = np.exp(tau + alpha * y) + zero
        return e, zero, e, zero, e, zero
    if mech.h_kind == EXPSTANDARDIZED:
        u_mu = -alpha * y / mu**2
        u_mu2 = 2.0 * alpha * y / mu**3
        e = np.exp(tau + alpha * y / mu) + zero
        return e, e * u_mu, e, e * (u_mu**2 + u_mu2), e, e * u_mu
    # mgflinear
    lam = np.exp(tau)
    h = lam + alpha * y / mu + zero
    h_mu = -alpha * y / mu**2
    return h, h_mu + zero, lam + zero, 2.0 * alpha * y / mu**3 + zero, lam + zero, zero


def g_eval(mech: SelectionMechanism, y, tau, mu=None):
    """Conditional observation probability G(y) = G0{h(y)}."""
    h = h_eval(mech, y, tau, mu)[0]
    return g0_eval(mech, h)[0]


def _log_cdf_pair(mech, t):
    """(log G0(t), log[1 - G0(t)]) in tail-safe form."""
    t = np.asarray(t, dtype=float)
    if mech.g0_kind == STDNORMAL:
        return special.log_ndtr(t), special.log_ndtr(-t)
    if mech.g0_kind == LOGISTIC:
        return -np.logaddexp(0.0, -t), -np.logaddexp(0.0, t)
    if np.any(t < 0.0):
        raise DomainError("unit exponential base is undefined for t < 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_cdf = np.where(t < 1e-8, np.log(t) - 0.5 * t, np.log(-np.expm1(-t)))
    return log_cdf, -t


def log_odds_lambda(mech: SelectionMechanism, tau, mu=None):
    """Log-odds association between a binary response and selection.

    Computes log{[1-G(0)] G(1)} - log{G(0) [1-G(1)]}; the result is +-inf
    when a cell probability degenerates to 0 or 1.
    """
    h0 = h_eval(mech, 0.0, tau, mu)[0]
    h1 = h_eval(mech, 1.0, tau, mu)[0]
    lg0, lc0 = _log_cdf_pair(mech, h0)
    lg1, lc1 = _log_cdf_pair(mech, h1)
    return (lc0 + lg1) - (lg0 + lc1)
