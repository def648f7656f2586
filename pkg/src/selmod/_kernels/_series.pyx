# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled truncated-series kernel for count-response selection probabilities.

Semantics match ``pure.count_series_batch``; see that module for the
formulas.  The per-term probability is evaluated through exp(log pmf) with
lgamma so that large means do not underflow the recurrence start.
"""

import numpy as np

from libc.math cimport erfc, exp, expm1, lgamma, log

COMPILED = True

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT_2PI = 0.3989422804014327

# codes mirror selmod._kernels.pure
cdef int FAM_POISSON = 0
cdef int G0_STDNORMAL = 0
cdef int G0_LOGISTIC = 1
cdef int H_LINEAR = 0
cdef int H_STANDARDIZED = 1
cdef int H_EXPLINEAR = 2
cdef int H_EXPSTANDARDIZED = 3


def count_series_batch(mu, tau, kmax, int fam_code, double kappa,
                       int g0_code, int h_code, double alpha):
    """Series pi and (mu, tau) partials; returns an (n, 6) float array."""
    cdef double[::1] mu_v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef double[::1] tau_v = np.ascontiguousarray(tau, dtype=np.float64)
    cdef long[::1] k_v = np.ascontiguousarray(kmax, dtype=np.int64)
    cdef Py_ssize_t n = mu_v.shape[0]
    out_arr = np.empty((n, 6), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    cdef Py_ssize_t i
    cdef long k, K
    cdef double m, t, kk, lgkap, lqm, lq1m
    cdef double lp, p, l1, l2
    cdef double h, h_mu, h_tau, h_mu2, h_tau2, h_mutau
    cdef double C, c1, c2, e, u_mu, lam
    cdef double C_mu, C_tau, C_mumu, C_tautau, C_mutau
    cdef double s0, s1, s2, s3, s4, s5

    lgkap = lgamma(kappa) if fam_code != FAM_POISSON else 0.0

    with nogil:
        for i in range(n):
            m = mu_v[i]
            t = tau_v[i]
            K = k_v[i]
            if fam_code != FAM_POISSON:
                lqm = log(m / (m + kappa))
                lq1m = kappa * log(kappa / (kappa + m))
            s0 = s1 = s2 = s3 = s4 = s5 = 0.0
            lam = exp(t)
            for k in range(K + 1):
                kk = <double> k
                if fam_code == FAM_POISSON:
                    lp = kk * log(m) - m - lgamma(kk + 1.0) if k > 0 else -m
                    l1 = kk / m - 1.0
                    l2 = -kk / (m * m)
                else:
                    lp = lgamma(kk + kappa) - lgkap - lgamma(kk + 1.0) + lq1m + kk * lqm
                    l1 = kk / m - (kk + kappa) / (m + kappa)
                    l2 = -kk / (m * m) + (kk + kappa) / ((m + kappa) * (m + kappa))
                p = exp(lp)

                if h_code == H_LINEAR:
                    h = t + alpha * kk
                    h_mu = 0.0; h_tau = 1.0; h_mu2 = 0.0; h_tau2 = 0.0; h_mutau = 0.0
                elif h_code == H_STANDARDIZED:
                    h = t + alpha * kk / m
                    h_mu = -alpha * kk / (m * m)
                    h_tau = 1.0
                    h_mu2 = 2.0 * alpha * kk / (m * m * m)
                    h_tau2 = 0.0; h_mutau = 0.0
                elif h_code == H_EXPLINEAR:
                    e = exp(t + alpha * kk)
                    h = e; h_mu = 0.0; h_tau = e; h_mu2 = 0.0; h_tau2 = e; h_mutau = 0.0
                elif h_code == H_EXPSTANDARDIZED:
                    u_mu = -alpha * kk / (m * m)
                    e = exp(t + alpha * kk / m)
                    h = e
                    h_mu = e * u_mu
                    h_tau = e
                    h_mu2 = e * (u_mu * u_mu + 2.0 * alpha * kk / (m * m * m))
                    h_tau2 = e
                    h_mutau = e * u_mu
                else:  # mgf linear
                    h = lam + alpha * kk / m
                    h_mu = -alpha * kk / (m * m)
                    h_tau = lam
                    h_mu2 = 2.0 * alpha * kk / (m * m * m)
                    h_tau2 = lam
                    h_mutau = 0.0

                if g0_code == G0_STDNORMAL:
                    C = 0.5 * erfc(-h * INV_SQRT2)
                    c1 = INV_SQRT_2PI * exp(-0.5 * h * h)
                    c2 = -h * c1
                elif g0_code == G0_LOGISTIC:
                    C = 1.0 / (1.0 + exp(-h))
                    c1 = C * (1.0 - C)
                    c2 = c1 * (1.0 - 2.0 * C)
                else:  # unit exponential, h >= 0 guaranteed by the catalog pairings
                    c1 = exp(-h)
                    C = -expm1(-h)
                    c2 = -c1

                C_mu = c1 * h_mu
                C_tau = c1 * h_tau
                C_mumu = c2 * h_mu * h_mu + c1 * h_mu2
                C_tautau = c2 * h_tau * h_tau + c1 * h_tau2
                C_mutau = c2 * h_mu * h_tau + c1 * h_mutau

                s0 += p * C
                s1 += p * (l1 * C + C_mu)
                s2 += p * C_tau
                s3 += p * ((l1 * l1 + l2) * C + 2.0 * l1 * C_mu + C_mumu)
                s4 += p * C_tautau
                s5 += p * (l1 * C_tau + C_mutau)

            out[i, 0] = s0
            out[i, 1] = s1
            out[i, 2] = s2
            out[i, 3] = s3
            out[i, 4] = s4
            out[i, 5] = s5

    return out_arr
