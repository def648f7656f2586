"""Full-sample log-likelihood with analytic score and observed Hessian.

For selected rows the contribution is log f(y) + log G0{h(y)}; for censored
rows it is log(1 - pi).  The score and Hessian are assembled per observation
from the chain rule through mu = g^{-1}(x'beta) and tau = w'gamma, consuming
b'' / b''', the link derivatives, the ratios g0/G0 and g0'/G0, the partials
of h, and the derivative fields of :class:`~selmod.normalizer.PiResult`.
Analytic derivatives are the contract here; finite differences appear only
in the test suite as an independent oracle.

Infeasible parameter points (pi = 1 on a censored row, nonpositive
dispersion, overflowing predictors) yield a -inf log-likelihood sentinel
rather than an exception, so that line searches can reject them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import families as fam
from . import mechanisms as mech_mod
from .errors import DomainError
from .normalizer import selection_probability

NEG_INF = float("-inf")


@dataclass
class Dataset:
    """Observations (d_i, y_i, x_i, w_i); y_i is defined only where d_i = 1.

    X and W both carry their intercept columns explicitly.  Censored rows
    must hold NaN in ``y``.
    """

    d: np.ndarray
    y: np.ndarray
    X: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        n = self.d.shape[0]
        if self.y.shape != (n,) or self.X.shape[0] != n or self.W.shape[0] != n:
            raise ValueError("d, y, X, W must share the same number of rows")
        if self.X.ndim != 2 or self.W.ndim != 2:
            raise ValueError("X and W must be two-dimensional")
        if not np.all((self.d == 0) | (self.d == 1)):
            raise ValueError("selection indicator must be 0/1")
        sel = self.d == 1
        if not np.all(np.isfinite(self.y[sel])):
            raise ValueError("response must be present and finite where d = 1")
        if not np.all(np.isnan(self.y[~sel])):
            raise ValueError("response must be NaN where d = 0")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.W))):
            raise ValueError("covariates must be finite")
        if np.linalg.matrix_rank(self.X) < self.X.shape[1]:
            raise ValueError("X is rank deficient")
        if np.linalg.matrix_rank(self.W) < self.W.shape[1]:
            raise ValueError("W is rank deficient")

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.W.shape[1]

    @property
    def y_observed_max(self) -> float:
        sel = self.d == 1
        return float(np.max(self.y[sel])) if np.any(sel) else 0.0

    def subset(self, mask) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        return Dataset(self.d[mask], self.y[mask], self.X[mask], self.W[mask])


@dataclass
class ParamVector:
    """Model parameters (alpha; theta = (beta, gamma); psi when estimated).

    theta ordering is beta first, then gamma, with psi appended last for
    families with unknown dispersion.
    """

    alpha: float
    beta: np.ndarray
    gamma: np.ndarray
    psi: float | None = None

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))

    def theta(self) -> np.ndarray:
        parts = [self.beta, self.gamma]
        if self.psi is not None:
            parts.append([self.psi])
        return np.concatenate(parts)

    @classmethod
    def from_theta(cls, alpha, theta, p, q, has_psi) -> "ParamVector":
        theta = np.asarray(theta, dtype=float)
        psi = float(theta[p + q]) if has_psi else None
        return cls(float(alpha), theta[:p].copy(), theta[p:p + q].copy(), psi)

    def replace_alpha(self, alpha) -> "ParamVector":
        return ParamVector(float(alpha), self.beta.copy(), self.gamma.copy(), self.psi)


@dataclass
class ScoreHessian:
    loglik: float
    score: np.ndarray | None = None
    hessian: np.ndarray | None = None


def _infeasible() -> ScoreHessian:
    return ScoreHessian(NEG_INF)


def evaluate(data: Dataset, spec, params: ParamVector, order: int = 2) -> ScoreHessian:
    """Log-likelihood with optional score (order >= 1) and Hessian (order >= 2)."""
    family = spec.response_family()
    has_psi = not family.dispersion_known
    if has_psi:
        if params.psi is None or not np.isfinite(params.psi) or params.psi <= 0:
            return _infeasible()
        psi = float(params.psi)
    else:
        psi = 1.0
    if not (np.all(np.isfinite(params.beta)) and np.all(np.isfinite(params.gamma))
            and np.isfinite(params.alpha)):
        return _infeasible()
    mech = spec.mechanism_at(params.alpha)

    sel = data.d == 1
    with np.errstate(over="ignore", invalid="ignore"):
        eta = data.X @ params.beta
        tau = data.W @ params.gamma
    if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(tau))):
        return _infeasible()
    mu = fam.mean_from_eta(family, eta)
    if not np.all(np.isfinite(mu)):
        return _infeasible()

    X1, W1, y1 = data.X[sel], data.W[sel], data.y[sel]
    X0, W0 = data.X[~sel], data.W[~sel]
    mu1, tau1 = mu[sel], tau[sel]
    mu0, tau0 = mu[~sel], tau[~sel]

    try:
        logf = fam.log_pf(family, y1, mu1, psi)
        h, h_mu, h_tau, h_mu2, h_tau2, h_mutau = mech_mod.h_eval(mech, y1, tau1, mu1)
        logG0, r1, r2 = mech_mod.g0_log_ratios(mech, h)
        if mu0.size:
            pires = selection_probability(
                mech, family, mu0, tau0, psi,
                trunc_K=getattr(spec, "truncation_K", None),
                ymax=data.y_observed_max,
            )
            pi = np.minimum(pires.pi, 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                log1mpi = np.log1p(-pi)
        else:
            pires = None
            log1mpi = np.zeros(0)
    except DomainError:
        return _infeasible()

    terms_sel = logf + logG0
    if not (np.all(np.isfinite(terms_sel)) and np.all(np.isfinite(log1mpi))):
        return _infeasible()
    # compensated summation keeps repeated profile evaluations reproducible
    loglik = math.fsum(terms_sel) + math.fsum(log1mpi)
    if not np.isfinite(loglik):
        return _infeasible()
    if order == 0:
        return ScoreHessian(loglik)

    _, g1, g2 = fam.link_derivs(family.link, mu)
    g1_1, g2_1 = g1[sel], g2[sel]
    g1_0, g2_0 = g1[~sel], g2[~sel]

    b2, b3 = fam.variance_b23(family, mu1)
    a, a1, a2 = fam.dispersion(family, psi)
    V = a * b2

    u = (y1 - mu1) / V + r1 * h_mu
    dim = data.p + data.q + (1 if has_psi else 0)
    score = np.zeros(dim)
    score[:data.p] = X1.T @ (u / g1_1)
    score[data.p:data.p + data.q] = W1.T @ (r1 * h_tau)

    if has_psi:
        theta1 = fam.theta_of_mu(family, mu1)
        bval = fam.b_derivs(family, theta1)[0]
        _, d1c, d2c = fam.carrier(family, y1, psi)
        score[-1] = math.fsum((bval - y1 * theta1) * a1 / a**2 + d1c)

    if pires is not None:
        R = 1.0 / (1.0 - pi)
        v = pires.dpi_dmu * R
        score[:data.p] -= X0.T @ (v / g1_0)
        score[data.p:data.p + data.q] -= W0.T @ (pires.dpi_dtau * R)
        if has_psi:
            score[-1] -= math.fsum(pires.dpi_dpsi * R)

    if order == 1:
        return ScoreHessian(loglik, score)

    H = np.zeros((dim, dim))
    p_, q_ = data.p, data.q
    q1 = r2 - r1**2

    # selected rows: derivative of the per-row score through mu and tau
    u_prime = -1.0 / V - (y1 - mu1) * b3 / (a * b2**3) + q1 * h_mu**2 + r1 * h_mu2
    cbb = (u_prime - u * g2_1 / g1_1) / g1_1**2
    H[:p_, :p_] += X1.T @ (X1 * cbb[:, None])
    cbg = (q1 * h_mu * h_tau + r1 * h_mutau) / g1_1
    H[:p_, p_:p_ + q_] += X1.T @ (W1 * cbg[:, None])
    cgg = q1 * h_tau**2 + r1 * h_tau2
    H[p_:p_ + q_, p_:p_ + q_] += W1.T @ (W1 * cgg[:, None])
    if has_psi:
        H[:p_, -1] += X1.T @ (a1 * (mu1 - y1) / (a**2 * b2) / g1_1)
        ybt = y1 * theta1 - bval
        H[-1, -1] += math.fsum(2.0 * ybt * a1**2 / a**3 - ybt * a2 / a**2 + d2c)

    if pires is not None:
        cbb0 = (-(pires.d2pi_dmu2 * R + pires.dpi_dmu**2 * R**2) + v * g2_0 / g1_0) / g1_0**2
        H[:p_, :p_] += X0.T @ (X0 * cbb0[:, None])
        cbg0 = -(pires.d2pi_dmudtau * R + pires.dpi_dmu * pires.dpi_dtau * R**2) / g1_0
        H[:p_, p_:p_ + q_] += X0.T @ (W0 * cbg0[:, None])
        cgg0 = -(pires.d2pi_dtau2 * R + pires.dpi_dtau**2 * R**2)
        H[p_:p_ + q_, p_:p_ + q_] += W0.T @ (W0 * cgg0[:, None])
        if has_psi:
            H[:p_, -1] += X0.T @ (
                -(pires.d2pi_dpsidmu * R + pires.dpi_dpsi * pires.dpi_dmu * R**2) / g1_0
            )
            H[p_:p_ + q_, -1] += W0.T @ (
                -(pires.d2pi_dpsidtau * R + pires.dpi_dpsi * pires.dpi_dtau * R**2)
            )
            H[-1, -1] += math.fsum(
                -(pires.d2pi_dpsi2 * R + pires.dpi_dpsi**2 * R**2)
            )

    H[p_:p_ + q_, :p_] = H[:p_, p_:p_ + q_].T
    if has_psi:
        H[-1, :p_] = H[:p_, -1]
        H[-1, p_:p_ + q_] = H[p_:p_ + q_, -1]
    H = 0.5 * (H + H.T)
    return ScoreHessian(loglik, score, H)


def loglik(data: Dataset, spec, params: ParamVector) -> float:
    return evaluate(data, spec, params, order=0).loglik


def score(data: Dataset, spec, params: ParamVector) -> ScoreHessian:
    return evaluate(data, spec, params, order=1)


def hessian(data: Dataset, spec, params: ParamVector) -> ScoreHessian:
    return evaluate(data, spec, params, order=2)
