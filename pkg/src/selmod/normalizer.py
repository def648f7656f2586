"""Unconditional selection probabilities pi = Pr{D=1} with derivatives.

pi is the expectation of G0{h(Y)} under the response distribution.  Four
routes cover the family catalog:

* ``pi_binary``  exact two-point sum for a Bernoulli response
* ``pi_count``   truncated series over 0..K for Poisson / Negative Binomial
* ``pi_mgf``     closed form 1 - exp(-exp(tau)) * M(-alpha/mu) for the mgf
                 mechanism on nonnegative responses
* ``pi_normal``  panel-doubling Gauss-Legendre quadrature for a Normal
                 response on the interval mean +- 10 sd

Each route returns a :class:`PiResult` carrying pi together with all first
and second partial derivatives in (mu, tau, psi), computed analytically
(termwise, by chain rule, or under the integral sign) so the observed
information never relies on finite differences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import families as fam
from . import mechanisms as mech_mod
from ._kernels import FAM_CODES, G0_CODES, H_CODES, count_series_batch
from .errors import DomainError

#: series tail mass above which pi_count emits a warning
TAIL_WARN = 1e-10

#: absolute tolerance of the quadrature route
QUAD_TOL = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass
class PiResult:
    """Selection probability with its (mu, tau, psi) derivatives.

    Fields are arrays matching the shape of the inputs.  The psi rows are
    identically zero for families with known dispersion.
    """

    pi: np.ndarray
    dpi_dmu: np.ndarray
    dpi_dtau: np.ndarray
    dpi_dpsi: np.ndarray
    d2pi_dmu2: np.ndarray
    d2pi_dtau2: np.ndarray
    d2pi_dmudtau: np.ndarray
    d2pi_dpsidmu: np.ndarray
    d2pi_dpsidtau: np.ndarray
    d2pi_dpsi2: np.ndarray
    truncation_K: np.ndarray | None = field(default=None)


def _zero_psi_result(pi, dmu, dtau, dmu2, dtau2, dmutau, K=None):
    z = np.zeros_like(np.asarray(pi, dtype=float))
    return PiResult(pi, dmu, dtau, z.copy(), dmu2, dtau2, dmutau,
                    z.copy(), z.copy(), z.copy(), truncation_K=K)


def pi_binary(mech, mu, tau) -> PiResult:
    """Exact pi = (1-mu) G(0) + mu G(1) for a Bernoulli response."""
    mu = np.asarray(mu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(mu <= 0.0) or np.any(mu >= 1.0):
        raise DomainError("binary pi requires mu in (0, 1)")

    terms = []
    for k in (0.0, 1.0):
        h, h_mu, h_tau, h_mu2, h_tau2, h_mutau = mech_mod.h_eval(mech, k, tau, mu)
        C, c1, c2 = mech_mod.g0_eval(mech, h)
        terms.append((
            C,
            c1 * h_mu,
            c1 * h_tau,
            c2 * h_mu**2 + c1 * h_mu2,
            c2 * h_tau**2 + c1 * h_tau2,
            c2 * h_mu * h_tau + c1 * h_mutau,
        ))
    A, A_m, A_t, A_mm, A_tt, A_mt = terms[0]
    B, B_m, B_t, B_mm, B_tt, B_mt = terms[1]

    w0, w1 = 1.0 - mu, mu
    pi = w0 * A + w1 * B
    dmu = (B - A) + w0 * A_m + w1 * B_m
    dtau = w0 * A_t + w1 * B_t
    dmu2 = 2.0 * (B_m - A_m) + w0 * A_mm + w1 * B_mm
    dtau2 = w0 * A_tt + w1 * B_tt
    dmutau = (B_t - A_t) + w0 * A_mt + w1 * B_mt
    return _zero_psi_result(pi, dmu, dtau, dmu2, dtau2, dmutau)


def default_truncation(family, mu, ymax: float = 0.0):
    """Per-observation truncation point K for the series route.

    The larger of the observed response maximum, a mean-plus-ten-standard-
    deviations bound padded by 20 (family sd, so Negative Binomial
    overdispersion widens the window), and the 1e-12 survival quantile;
    the last term keeps heavy NegBin tails below the warning threshold.
    """
    from scipy import stats

    mu = np.asarray(mu, dtype=float)
    b2, _ = fam.variance_b23(family, mu)
    bound = np.ceil(mu + 10.0 * np.sqrt(b2) + 20.0)
    if family.kind == fam.NEGBIN:
        k = family.kappa
        bound = np.maximum(bound, stats.nbinom.isf(1e-12, k, k / (k + mu)))
    return np.maximum(float(ymax), bound).astype(np.int64)


def pi_count(mech, family, mu, tau, K) -> PiResult:
    """Truncated-series pi for a count response.

    ``K`` may be a scalar (common truncation) or a per-observation array.
    Warns, without failing, when the neglected tail mass exceeds 1e-10.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if mu.shape != tau.shape:
        mu, tau = np.broadcast_arrays(mu, tau)
        mu = np.ascontiguousarray(mu)
        tau = np.ascontiguousarray(tau)
    if np.any(mu <= 0.0):
        raise DomainError("count pi requires mu > 0")
    K_in = np.asarray(K, dtype=np.int64)
    K = np.empty(mu.shape, dtype=np.int64)
    K[...] = K_in
    if np.any(K < 1):
        raise DomainError("truncation point must be a positive integer")

    out = count_series_batch(
        mu, tau, K,
        FAM_CODES[family.kind], family.kappa or 0.0,
        G0_CODES[mech.g0_kind], H_CODES[mech.h_kind], mech.alpha,
    )
    tail = fam.tail_mass(family, mu, K)
    if np.any(tail > TAIL_WARN):
        warnings.warn(
            f"series truncation leaves tail mass up to {float(np.max(tail)):.2e} "
            f"(> {TAIL_WARN:.0e}); consider a larger K",
            RuntimeWarning,
            stacklevel=2,
        )
    return _zero_psi_result(out[:, 0], out[:, 1], out[:, 2],
                            out[:, 3], out[:, 4], out[:, 5], K=K)


def pi_mgf(mech, family, mu, psi, tau) -> PiResult:
    """Closed-form pi = 1 - exp(-exp(tau)) * M(-alpha/mu) for the mgf mechanism.

    Requires a nonnegative-support family and alpha >= 0 (so the mgf is
    evaluated at a nonpositive argument, always inside the convergence
    region).  Derivatives follow from differentiating the closed form.
    """
    if mech.h_kind != mech_mod.MGFLINEAR:
        raise DomainError("pi_mgf applies to the mgf-linear mechanism only")
    if mech.alpha < 0.0:
        raise DomainError("the mgf mechanism requires alpha >= 0")
    if not family.nonnegative_support:
        raise DomainError("the mgf mechanism requires a nonnegative response")
    mu, tau = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(tau, dtype=float))
    if np.any(mu <= 0.0):
        raise DomainError("pi_mgf requires mu > 0")

    alpha = mech.alpha
    E = np.exp(-alpha / mu)  # mgf argument factor exp(-eta), eta = alpha/mu
    S = mu * (E - 1.0)
    S1 = (E - 1.0) + (alpha / mu) * E
    S2 = E * alpha**2 / mu**3

    if family.kind == fam.BERNOULLI:
        if np.any(mu >= 1.0):
            raise DomainError("bernoulli mean must lie in (0, 1)")
        N, N1, N2 = 1.0 + S, S1, S2
    elif family.kind == fam.POISSON:
        N = np.exp(S)
        N1 = S1 * N
        N2 = (S2 + S1**2) * N
    elif family.kind == fam.NEGBIN:
        k = family.kappa
        u = k - S
        N = (k / u) ** k
        N1 = N * k * S1 / u
        N2 = N * k * ((k + 1.0) * S1**2 / u**2 + S2 / u)
    else:
        raise DomainError(f"no closed-form mgf route for {family.kind}")

    lam = np.exp(tau)
    EL = np.exp(-lam)
    pi = 1.0 - EL * N
    dmu = -EL * N1
    dtau = lam * EL * N
    dmu2 = -EL * N2
    dtau2 = lam * EL * N * (1.0 - lam)
    dmutau = lam * EL * N1
    return _zero_psi_result(pi, dmu, dtau, dmu2, dtau2, dmutau)


class QuadratureWarning(RuntimeWarning):
    """Quadrature failed to reach the requested tolerance."""


def _normal_mech_check(mech):
    if mech.needs_positive_mu:
        raise DomainError(
            "standardized and mgf mechanisms are undefined for a real-line response"
        )


def pi_normal(mech, mu, psi, tau, tol: float = QUAD_TOL) -> PiResult:
    """Quadrature pi for a Normal response over mean +- 10 sd.

    Composite 16-point Gauss-Legendre panels are doubled until every output
    (pi and all nine derivative integrals) moves by less than ``tol``; the
    derivatives are quadratures of the analytically differentiated
    integrand.  Non-convergence is reported with the achieved tolerance.
    """
    _normal_mech_check(mech)
    if not psi > 0:
        raise DomainError("normal dispersion must be positive")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    mu, tau = np.broadcast_arrays(mu, tau)
    sigma = np.sqrt(psi)

    prev = None
    panels = 8
    while panels <= 256:
        vals = _normal_panels(mech, mu, tau, sigma, psi, panels)
        if prev is not None:
            err = max(float(np.max(np.abs(a - b))) for a, b in zip(vals, prev))
            if err < tol:
                break
        prev = vals
        panels *= 2
    else:
        warnings.warn(
            f"quadrature reached {err:.2e} (requested {tol:.0e}) at {panels // 2} panels",
            QuadratureWarning,
            stacklevel=2,
        )
        vals = prev

    return PiResult(*vals)


def _normal_panels(mech, mu, tau, sigma, psi, panels):
    # standardized coordinate x = (y - mean)/sd on [-10, 10]; the Gaussian
    # weight and the psi/mu log-density multipliers depend on x only
    edges = np.linspace(-10.0, 10.0, panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    mids = 0.5 * (edges[:-1] + edges[1:])
    x = (mids[:, None] + half * _GL_NODES[None, :]).ravel()
    w = np.tile(half * _GL_WEIGHTS, panels)
    wphi = w * np.exp(-0.5 * x**2) / np.sqrt(2.0 * np.pi)

    lmu = x / sigma
    lpsi = (x**2 - 1.0) / (2.0 * psi)
    lmm = (x**2 - 1.0) / psi
    lpp = lpsi**2 - x**2 / psi**2 + 0.5 / psi**2
    lmp = lmu * lpsi - x / (sigma * psi)

    y = mu[:, None] + sigma * x[None, :]
    h, _, h_tau, _, h_tau2, _ = mech_mod.h_eval(mech, y, tau[:, None])
    G, g0, g0p = mech_mod.g0_eval(mech, h)
    Gt = g0 * h_tau
    Gtt = g0p * h_tau**2 + g0 * h_tau2

    def integ(mat, mult=None):
        if mult is None:
            return mat @ wphi
        return mat @ (wphi * mult)

    return (
        integ(G),
        integ(G, lmu),
        integ(Gt),
        integ(G, lpsi),
        integ(G, lmm),
        integ(Gtt),
        integ(Gt, lmu),
        integ(G, lmp),
        integ(Gt, lpsi),
        integ(G, lpp),
    )


def selection_probability(mech, family, mu, tau, psi=1.0, trunc_K=None, ymax=0.0) -> PiResult:
    """Family dispatch used by the likelihood.

    Bernoulli uses the exact two-point sum, count families the series (or
    the closed mgf form when the mechanism allows it), and the Normal family
    the quadrature route.
    """
    if family.kind == fam.BERNOULLI:
        return pi_binary(mech, mu, tau)
    if family.kind in (fam.POISSON, fam.NEGBIN):
        if mech.h_kind == mech_mod.MGFLINEAR and mech.alpha >= 0.0:
            return pi_mgf(mech, family, mu, psi, tau)
        K = trunc_K if trunc_K is not None else default_truncation(family, mu, ymax)
        return pi_count(mech, family, mu, tau, K)
    return pi_normal(mech, mu, psi, tau)
