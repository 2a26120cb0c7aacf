# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: pairwise transition likelihoods, the ARMA
conditional-sum-of-squares recursion and exact path generation.

Must stay semantically identical to ``_numpy.py``.
"""
from libc.math cimport exp, log, sqrt, isfinite, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093454836


def nll_plain(double[::1] times, double[::1] values, double mu, double tau, double sigma2):
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0, e, var, resid, v0
    if tau <= 0.0 or sigma2 < 0.0:
        return INFINITY
    v0 = sigma2 / (2.0 * tau)
    for i in range(1, n):
        e = exp(-tau * (times[i] - times[i - 1]))
        var = v0 * (1.0 - e * e)
        if not (var > 0.0) or not isfinite(var):
            return INFINITY
        resid = values[i] - mu - (values[i - 1] - mu) * e
        acc += log(var) + resid * resid / var
    acc = 0.5 * acc + 0.5 * LOG_2PI * (n - 1)
    return acc if isfinite(acc) else INFINITY


def nll_noisy(double[::1] times, double[::1] values, double mu, double tau,
              double sigma2, double omega2):
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t i
    cdef double acc = 0.0, e, var, resid, den, w, pv, v0
    if tau <= 0.0 or sigma2 < 0.0 or omega2 < 0.0:
        return INFINITY
    den = sigma2 + 2.0 * tau * omega2
    if den <= 0.0:
        return INFINITY
    w = sigma2 / den
    pv = sigma2 * omega2 / den
    v0 = sigma2 / (2.0 * tau)
    for i in range(1, n):
        e = exp(-tau * (times[i] - times[i - 1]))
        var = pv * e * e + v0 * (1.0 - e * e) + omega2
        if not (var > 0.0) or not isfinite(var):
            return INFINITY
        resid = values[i] - mu - w * (values[i - 1] - mu) * e
        acc += log(var) + resid * resid / var
    acc = 0.5 * acc + 0.5 * LOG_2PI * (n - 1)
    return acc if isfinite(acc) else INFINITY


def css_sse(double[::1] values, double alpha, double phi, double theta):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t i
    cdef double e_prev = 0.0, e, sse = 0.0
    for i in range(1, n):
        e = values[i] - alpha - phi * values[i - 1] - theta * e_prev
        sse += e * e
        e_prev = e
    return sse if isfinite(sse) else INFINITY


def ou_exact_path(double[::1] times, double[::1] shocks_std, double mu,
                  double tau, double sigma2, double p0):
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t i
    cdef double e, sd, c, v0
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    out[0] = p0
    v0 = sigma2 / (2.0 * tau)
    c = p0 - mu
    for i in range(1, n):
        e = exp(-tau * (times[i] - times[i - 1]))
        sd = sqrt(v0 * (1.0 - e * e))
        c = c * e + sd * shocks_std[i - 1]
        out[i] = mu + c
    return out_arr
