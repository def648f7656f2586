"""Profile-likelihood estimation of the selection parameter.

The selection slope alpha is profiled: for each candidate value the inner
parameters theta = (beta, gamma[, psi]) are maximized by Newton iterations
with analytic score and Hessian, warm-started from the nearest previously
solved alpha.  The profile is scanned outward from alpha = 0 (whose inner
maximizer is the pair of decoupled GLM fits), the maximizer is refined by
golden section once bracketed, the confidence set for alpha comes from the
chi-square(1) likelihood-ratio inversion, and standard errors for theta are
read off the observed information at the maximum with alpha held fixed
(which intentionally ignores the extra variability of alpha itself).

Profile log-likelihoods for the exp-mgf mechanism can be monotone; such
fits complete with a boundary diagnostic instead of an interior maximum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from . import families as fam
from . import mechanisms as mech_mod
from .errors import HessianNotPDError, NonConvergenceError
from .glm import fit_glm, fit_selection_glm
from .likelihood import Dataset, ParamVector, evaluate

INTERIOR = "interior"
MONOTONE_INCREASING = "monotone-increasing"
MONOTONE_DECREASING = "monotone-decreasing"
AT_CONSTRAINT = "at-constraint"

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

MAX_FLANK_POINTS = 40


@dataclass
class InnerResult:
    params: ParamVector
    loglik: float
    iterations: int
    converged: bool
    grad_norm: float


@dataclass
class ProfileCurve:
    """Sampled relative profile log-likelihood, shifted so its maximum is 0."""

    alphas: np.ndarray
    rel_loglik: np.ndarray
    theta_at: np.ndarray


@dataclass
class AlphaCI:
    lower: float
    upper: float
    level: float
    lower_flag: str = "interior"  # interior | unbounded | constraint
    upper_flag: str = "interior"


@dataclass
class FitReport:
    alpha_hat: float
    theta_hat: ParamVector
    std_err: np.ndarray | None
    ratio: np.ndarray | None
    loglik_max: float
    alpha_ci: AlphaCI | None
    profile: ProfileCurve
    boundary_diagnostic: str
    se_message: str | None = None
    dropped_points: int = 0


def inner_maximize(data: Dataset, spec, alpha: float, theta0: ParamVector,
                   tol: float = 1e-8, max_iter: int = 200) -> InnerResult:
    """Maximize the log-likelihood over theta at fixed alpha.

    Newton steps with backtracking line search; falls back to a scaled
    gradient step whenever the Newton direction is unavailable or fails to
    ascend.  Convergence: sup-norm of the score below ``tol`` or relative
    log-likelihood change below 1e-12.
    """
    has_psi = not spec.response_family().dispersion_known
    p, q = data.p, data.q
    th = theta0.theta().astype(float)

    def at(theta_vec, order):
        params = ParamVector.from_theta(alpha, theta_vec, p, q, has_psi)
        return evaluate(data, spec, params, order=order)

    cur = at(th, 2)
    if not np.isfinite(cur.loglik):
        raise ValueError(f"infeasible starting point at alpha={alpha}")

    converged = False
    grad_norm = float(np.max(np.abs(cur.score)))
    it = 0
    for it in range(1, max_iter + 1):
        grad_norm = float(np.max(np.abs(cur.score)))
        if grad_norm < tol:
            converged = True
            break

        newton = None
        try:
            delta = np.linalg.solve(-cur.hessian, cur.score)
            if float(delta @ cur.score) > 0.0:
                newton = delta
        except np.linalg.LinAlgError:
            pass

        new_th = None
        if newton is not None and grad_norm < 1e-5:
            # quadratic convergence zone: the Armijo test drowns in
            # floating-point noise, take the full Newton step
            cand = th + newton
            if np.isfinite(at(cand, 0).loglik):
                new_th = cand
        if new_th is None:
            directions = ([newton] if newton is not None else [])
            directions.append(cur.score / max(1.0, grad_norm))
            for delta in directions:
                slope = float(delta @ cur.score)
                t = 1.0
                for _ in range(45):
                    cand = th + t * delta
                    f_cand = at(cand, 0).loglik
                    if np.isfinite(f_cand) and f_cand >= cur.loglik + 1e-4 * t * slope:
                        new_th = cand
                        break
                    t *= 0.5
                if new_th is not None:
                    break
        if new_th is None:
            break  # stalled: no ascent step along either direction

        prev_ll = cur.loglik
        th = new_th
        cur = at(th, 2)
        grad_norm = float(np.max(np.abs(cur.score)))
        if abs(cur.loglik - prev_ll) < 1e-12 * max(1.0, abs(cur.loglik)):
            converged = True
            break

    params = ParamVector.from_theta(alpha, th, p, q, has_psi)
    return InnerResult(params, cur.loglik, it, converged, grad_norm)


class ProfileEvaluator:
    """Memoized L_p(alpha) with warm starts from the nearest solved alpha."""

    def __init__(self, data: Dataset, spec, theta0: ParamVector):
        self.data = data
        self.spec = spec
        self.theta0 = theta0
        self.cache: dict[float, InnerResult] = {}
        self.failures: set[float] = set()

    def _warm_start(self, alpha: float) -> ParamVector:
        if not self.cache:
            return self.theta0
        nearest = min(self.cache, key=lambda a: abs(a - alpha))
        return self.cache[nearest].params

    def __call__(self, alpha: float) -> InnerResult | None:
        alpha = float(alpha)
        if alpha in self.cache:
            return self.cache[alpha]
        if alpha in self.failures:
            return None
        try:
            res = inner_maximize(self.data, self.spec, alpha, self._warm_start(alpha))
        except ValueError:
            res = None
        if res is None or not res.converged:
            gn = f" (grad norm {res.grad_norm:.2e})" if res is not None else ""
            warnings.warn(f"inner maximization failed at alpha={alpha:.6g}{gn}",
                          RuntimeWarning, stacklevel=2)
            self.failures.add(alpha)
            return None
        self.cache[alpha] = res
        return res

    def best(self) -> tuple[float, InnerResult]:
        a = max(self.cache, key=lambda k: self.cache[k].loglik)
        return a, self.cache[a]


def _auto_step(spec, data, theta0: ParamVector) -> float:
    """Grid step 0.25 * scale; scale is 1 for linear index functions and
    1/mean(mu_hat) for the standardized and mgf forms."""
    _, h_kind = mech_mod.MECHANISM_KEYS[spec.mechanism]
    if h_kind in (mech_mod.LINEAR, mech_mod.EXPLINEAR):
        return 0.25
    family = spec.response_family()
    mu_hat = fam.mean_from_eta(family, data.X @ theta0.beta)
    return 0.25 / float(np.mean(mu_hat))


def _golden_section(prof: ProfileEvaluator, lo: float, hi: float,
                    tol: float = 1e-4) -> None:
    """Golden-section ascent of L_p on [lo, hi]; results land in the cache."""

    def f(a):
        r = prof(a)
        return r.loglik if r is not None else -np.inf

    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = f(x1)


def _scan_flank(prof: ProfileEvaluator, step: float, direction: int,
                max_points: int = MAX_FLANK_POINTS):
    """Evaluate alpha = direction * k * step outward until L_p drops.

    Returns (stopped_by_decrease, n_attempted).  Failed points are skipped
    (they count toward the attempt budget)."""
    last_ll = prof(0.0).loglik
    attempted = 0
    for k in range(1, max_points + 1):
        attempted += 1
        res = prof(direction * k * step)
        if res is None:
            continue
        if res.loglik < last_ll:
            return True, attempted
        last_ll = res.loglik
    return False, attempted


def standard_errors(data: Dataset, spec, alpha_hat: float,
                    theta_hat: ParamVector):
    """Observed-information standard errors for theta at fixed alpha_hat.

    Returns (std_err, ratio); raises HessianNotPDError when the negative
    Hessian is not positive definite.  alpha's own sampling variability is
    not propagated into these values.
    """
    sh = evaluate(data, spec, theta_hat.replace_alpha(alpha_hat), order=2)
    M = -sh.hessian
    try:
        c = linalg.cho_factor(M)
        cov = linalg.cho_solve(c, np.eye(M.shape[0]))
    except linalg.LinAlgError:
        raise HessianNotPDError(float(np.min(linalg.eigvalsh(M)))) from None
    diag = np.diag(cov)
    if np.any(diag <= 0.0):
        raise HessianNotPDError(float(np.min(linalg.eigvalsh(M))))
    se = np.sqrt(diag)
    return se, theta_hat.theta() / se


def alpha_confidence(prof: ProfileEvaluator, alpha_hat: float, loglik_max: float,
                     level: float, step: float, lower_bound: float | None = None,
                     skip_lower: bool = False, skip_upper: bool = False,
                     tol: float = 1e-6) -> AlphaCI:
    """Likelihood-ratio confidence interval for alpha.

    Endpoints solve 2[L_p(alpha_hat) - L_p(alpha)] = q by bisection on each
    side; a side is flagged unbounded when L_p never falls below the
    threshold within the search bracket, and flagged constraint when the
    alpha >= 0 restriction truncates it.  ``skip_*`` marks a side unbounded
    without searching (used when the profile is already known monotone).
    """
    q = float(stats.chi2.ppf(level, 1))
    target = loglik_max - 0.5 * q

    def f(a):
        r = prof(a)
        return r.loglik if r is not None else -np.inf

    def solve_side(direction: int):
        bound = lower_bound if direction < 0 else None
        inner = alpha_hat
        outer = None
        # reuse any cached points already past the threshold
        for a in sorted(prof.cache, key=lambda x: abs(x - alpha_hat)):
            if direction * (a - alpha_hat) > 0 and prof.cache[a].loglik < target:
                outer = a
                break
        if outer is None:
            width = step
            probe = alpha_hat
            for _ in range(12):
                probe = probe + direction * width
                clipped = bound is not None and probe <= bound
                if clipped:
                    probe = bound
                if f(probe) < target:
                    outer = probe
                    break
                if clipped:
                    return float(bound), "constraint"
                inner = probe
                width *= 2.0
            if outer is None:
                return float(direction * np.inf), "unbounded"
        while abs(outer - inner) > tol:
            mid = 0.5 * (inner + outer)
            if f(mid) >= target:
                inner = mid
            else:
                outer = mid
        return 0.5 * (inner + outer), "interior"

    if skip_lower:
        lo, lo_flag = -np.inf, "unbounded"
    else:
        lo, lo_flag = solve_side(-1)
    if skip_upper:
        hi, hi_flag = np.inf, "unbounded"
    else:
        hi, hi_flag = solve_side(+1)
    return AlphaCI(float(lo), float(hi), level, lo_flag, hi_flag)


def profile_maximize(data: Dataset, spec, grid=None, compute_ci: bool = True,
                     refine_tol: float = 1e-4) -> FitReport:
    """Fit the model by scanning and refining the profile log-likelihood.

    ``grid`` overrides the automatic alpha grid (an explicit iterable of
    values; a single value pins alpha).  The automatic grid expands outward
    from 0 in steps of 0.25 * scale until the profile decreases on both
    flanks, warm-starting every inner fit from its neighbor.
    """
    family = spec.response_family()
    g0_kind, h_kind = mech_mod.MECHANISM_KEYS[spec.mechanism]
    constrained = h_kind == mech_mod.MGFLINEAR
    sel = data.d == 1

    glm_y = fit_glm(data.y[sel], data.X[sel], family)
    glm_d = fit_selection_glm(data.d, data.W, g0_kind)
    if not (glm_y.converged and glm_d.converged):
        raise NonConvergenceError("baseline GLM fits did not converge")
    theta0 = ParamVector(0.0, glm_y.coef, glm_d.coef, psi=glm_y.dispersion)

    prof = ProfileEvaluator(data, spec, theta0)
    if grid is None:
        grid = spec.grid
    explicit = grid is not None

    if explicit:
        alphas = sorted(float(a) for a in grid)
        if not alphas:
            raise ValueError("explicit alpha grid is empty")
        if constrained and alphas[0] < 0.0:
            raise ValueError("the exp-mgf mechanism requires alpha >= 0")
        step = max((alphas[-1] - alphas[0]) / max(len(alphas) - 1, 1), 0.25)
        for a in sorted(alphas, key=abs):
            prof(a)
        if not prof.cache:
            raise NonConvergenceError("all grid points failed")
        boundary = None
    else:
        step = _auto_step(spec, data, theta0)
        if prof(0.0) is None:
            raise NonConvergenceError("inner maximization failed at alpha = 0")
        dec_right, n_right = _scan_flank(prof, step, +1)
        if constrained:
            dec_left, n_left = True, 0
        else:
            dec_left, n_left = _scan_flank(prof, step, -1)
        boundary = None
        if not dec_right:
            boundary = MONOTONE_INCREASING
        elif not dec_left:
            boundary = MONOTONE_DECREASING

    n_attempted = len(prof.cache) + len(prof.failures)
    if prof.failures and len(prof.failures) > 0.2 * n_attempted:
        raise NonConvergenceError(
            f"{len(prof.failures)} of {n_attempted} profile points failed"
        )

    cached = sorted(prof.cache)
    best_alpha, _ = prof.best()
    i = cached.index(best_alpha)

    if explicit:
        if len(cached) == 1:
            boundary = AT_CONSTRAINT
        elif i == 0:
            boundary = AT_CONSTRAINT if constrained and cached[0] == 0.0 else MONOTONE_DECREASING
        elif i == len(cached) - 1:
            boundary = MONOTONE_INCREASING
        else:
            boundary = None
    else:
        if boundary is None and i == 0 and constrained and cached[0] == 0.0:
            boundary = AT_CONSTRAINT

    if boundary is None:
        # interior: refine within the evaluated neighbors
        _golden_section(prof, cached[i - 1], cached[i + 1], tol=refine_tol)
        boundary = INTERIOR

    alpha_hat, res_hat = prof.best()
    theta_hat = res_hat.params
    loglik_max = res_hat.loglik

    se = ratio = None
    se_message = None
    try:
        se, ratio = standard_errors(data, spec, alpha_hat, theta_hat)
    except HessianNotPDError as exc:
        se_message = str(exc)

    ci = None
    if compute_ci and not (explicit and len(cached) == 1):
        ci = alpha_confidence(
            prof, alpha_hat, loglik_max, spec.ci_level, step,
            lower_bound=0.0 if constrained else None,
            skip_lower=boundary == MONOTONE_DECREASING,
            skip_upper=boundary == MONOTONE_INCREASING,
        )

    alphas = np.array(sorted(prof.cache))
    lls = np.array([prof.cache[a].loglik for a in alphas])
    thetas = np.array([prof.cache[a].params.theta() for a in alphas])
    profile = ProfileCurve(alphas, lls - loglik_max, thetas)

    return FitReport(
        alpha_hat=float(alpha_hat),
        theta_hat=theta_hat,
        std_err=se,
        ratio=ratio,
        loglik_max=float(loglik_max),
        alpha_ci=ci,
        profile=profile,
        boundary_diagnostic=boundary,
        se_message=se_message,
        dropped_points=len(prof.failures),
    )
