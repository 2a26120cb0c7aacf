"""Parameter estimators for the (noisy) mean-reverting process.

Closed-form method-of-moments estimators (noise-sensitive and noise-robust),
discrete-time AR(1)/ARMA(1,1) reparametrization fits by conditional sum of
squares, pairwise maximum-likelihood fits for irregular spacing (noise-aware
or not), the realized-variance baseline, and the predictor of the bias that
ignoring observation noise inflicts on the moment estimators.

All fits are pure functions of their inputs; heavy inner loops live in
``_kernels``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .errors import BackTransformError, DegenerateInputError, MomentDegenerateError
from .model import NoisyOuParams, OuParams, TickSeries

__all__ = [
    "OuFit",
    "ArmaParams",
    "aggregate_previous_tick",
    "mom_fit",
    "mom_nr_fit",
    "invert_moments",
    "invert_noisy_moments",
    "predict_mom_bias",
    "ar_css_fit",
    "arma_nr_css_fit",
    "forward_arma",
    "invert_arma",
    "auto_init",
    "mle_fit",
    "plain_loglik",
    "noisy_loglik",
    "realized_variance",
    "noise_var_from_rv",
]

MINUTES_PER_DAY = 390

# method labels
MOM = "MOM"
MOM_NR = "MOM_NR"
AR_CSS = "AR_CSS"
ARMA_NR_CSS = "ARMA_NR_CSS"
MLE = "MLE"
MLE_NR = "MLE_NR"
RV = "RV"


@dataclass(frozen=True)
class OuFit:
    """Result of one estimator run."""

    params: NoisyOuParams
    method: str
    n_used: int
    converged: bool = True
    loglik: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ArmaParams:
    """Discrete-time reparametrization x_i = alpha + phi x_{i-1} + theta v_{i-1} + v_i.

    Restricted to the region that maps back to valid process parameters.
    """

    alpha: float
    phi: float
    theta: float
    gamma2: float

    def __post_init__(self) -> None:
        if not (0.0 < self.phi < 1.0):
            raise ValueError(f"phi must be in (0, 1), got {self.phi}")
        if not (-1.0 < self.theta <= 0.0):
            raise ValueError(f"theta must be in (-1, 0], got {self.theta}")
        if not (self.gamma2 > 0.0):
            raise ValueError(f"gamma2 must be > 0, got {self.gamma2}")


def _require_equidistant(ts: TickSeries, tol: float = 1e-9) -> float:
    dt = np.diff(ts.times)
    spacing = float(dt.mean())
    if spacing <= 0.0 or float(np.max(np.abs(dt - spacing))) > tol * spacing:
        raise ValueError("series is not equidistant")
    return spacing


def aggregate_previous_tick(ts: TickSeries, bins: int = MINUTES_PER_DAY) -> TickSeries:
    """Previous-tick aggregation onto bin boundaries k/bins, k = 0..bins.

    Each boundary takes the last observed value at or before it; boundaries
    before the first tick are dropped, so bins without fresh ticks carry the
    previous value.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    bounds = np.arange(bins + 1, dtype=np.float64) / bins
    idx = np.searchsorted(ts.times, bounds, side="right") - 1
    keep = idx >= 0
    if int(keep.sum()) < 2:
        raise DegenerateInputError("fewer than 2 bin boundaries carry a value")
    return TickSeries(bounds[keep], ts.values[idx[keep]])


# -- method of moments ----------------------------------------------------


def _sample_moments(x: np.ndarray, max_lag: int) -> list[float]:
    """Mean and autocovariances with divisors n+1, n, n-1, n-2 for n+1 points."""
    n = x.shape[0] - 1
    m1 = float(x.mean())
    d = x - m1
    out = [m1, float(d @ d) / n]
    for lag in range(1, max_lag + 1):
        out.append(float(d[lag:] @ d[:-lag]) / (n - lag))
    return out


def invert_moments(m1: float, m2: float, m3: float, spacing: float) -> OuParams:
    """Closed-form inversion of (mean, variance, lag-1 autocovariance)."""
    if m2 <= 0.0 or m3 <= 0.0 or m2 <= m3:
        raise MomentDegenerateError(
            f"moment inversion needs m2 > m3 > 0, got m2={m2:.6g}, m3={m3:.6g}"
        )
    ratio = math.log(m2 / m3)
    tau = ratio / spacing
    return OuParams(m1, tau, 2.0 * tau * m2)


def invert_noisy_moments(
    m1: float, m2: float, m3: float, m4: float, spacing: float
) -> tuple[NoisyOuParams, bool]:
    """Inversion of (mean, variance, lag-1, lag-2 autocovariance).

    The lag-1/lag-2 ratio isolates the latent decay, so the variance excess
    m2 - m3^2 / m4 estimates the noise; a negative excess is clamped to zero
    and flagged in the second return value.
    """
    if m3 <= 0.0 or m4 <= 0.0 or m3 <= m4:
        raise MomentDegenerateError(
            f"noise-robust inversion needs m3 > m4 > 0, got m3={m3:.6g}, m4={m4:.6g}"
        )
    ratio = math.log(m3 / m4)
    tau = ratio / spacing
    latent_var = m3 * m3 / m4
    omega2 = m2 - latent_var
    clamped = omega2 < 0.0
    return NoisyOuParams(OuParams(m1, tau, 2.0 * tau * latent_var), max(omega2, 0.0)), clamped


def mom_fit(ts: TickSeries) -> OuFit:
    """Noise-sensitive method of moments on an equidistant series."""
    spacing = _require_equidistant(ts)
    if len(ts) < 3:
        raise ValueError("method of moments needs at least 3 observations")
    m1, m2, m3 = _sample_moments(ts.values, 1)
    p = invert_moments(m1, m2, m3, spacing)
    return OuFit(NoisyOuParams(p, 0.0), MOM, len(ts))


def mom_nr_fit(ts: TickSeries) -> OuFit:
    """Noise-robust method of moments on an equidistant series."""
    spacing = _require_equidistant(ts)
    if len(ts) < 4:
        raise ValueError("noise-robust moments need at least 4 observations")
    m1, m2, m3, m4 = _sample_moments(ts.values, 2)
    p, clamped = invert_noisy_moments(m1, m2, m3, m4, spacing)
    return OuFit(p, MOM_NR, len(ts), diagnostics={"clamped_omega2": clamped})


def predict_mom_bias(p: NoisyOuParams, n: int) -> tuple[float, float]:
    """Values the noise-sensitive moment estimators converge to at n
    equidistant observations per day (population moments plugged in).

    Both diverge linearly in n once omega2 > 0.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if p.sigma2 == 0.0 and p.omega2 == 0.0:
        raise DegenerateInputError("bias undefined for sigma2 = omega2 = 0")
    log_ratio = math.log(p.sigma2 / (p.sigma2 + 2.0 * p.tau * p.omega2))
    tau_x = p.tau - n * log_ratio
    sigma2_x = (
        p.sigma2
        + 2.0 * p.tau * p.omega2
        - 2.0 * n * (p.ou.stationary_variance + p.omega2) * log_ratio
    )
    return tau_x, sigma2_x


# -- AR(1) / ARMA(1,1) reparametrization ----------------------------------


def forward_arma(p: NoisyOuParams, spacing: float) -> ArmaParams:
    """Exact discrete-time parameters of the noisy process at a fixed spacing.

    theta is the invertible root (in (-1, 0]) of the quadratic matching the
    innovation variance/autocovariance pair.
    """
    if spacing <= 0.0:
        raise ValueError("spacing must be > 0")
    phi = math.exp(-p.tau * spacing)
    alpha = p.mu * (1.0 - phi)
    sv = p.ou.stationary_variance
    vu = sv * (1.0 - phi * phi) + p.omega2 * (1.0 + phi * phi)
    cu = -p.omega2 * phi
    if cu == 0.0:
        return ArmaParams(alpha, phi, 0.0, vu)
    disc = vu * vu - 4.0 * cu * cu
    theta = (vu - math.sqrt(disc)) / (2.0 * cu)
    return ArmaParams(alpha, phi, theta, cu / theta)


def invert_arma(
    alpha: float, phi: float, theta: float, gamma2: float, spacing: float
) -> tuple[NoisyOuParams, dict]:
    """Back-transform raw discrete-time estimates to process parameters.

    The reparametrization does not respect the sign restrictions, so sigma2
    and omega2 estimates falling below zero are clamped and flagged.
    """
    if not (0.0 < phi < 1.0):
        raise BackTransformError(f"phi estimate {phi:.6g} outside (0, 1)")
    if gamma2 <= 0.0:
        raise BackTransformError(f"gamma2 estimate {gamma2:.6g} not positive")
    log_phi = math.log(phi)
    mu = alpha / (1.0 - phi)
    tau = -log_phi / spacing
    sigma2 = (
        -2.0
        / spacing
        * gamma2
        * (phi + theta * theta * phi + theta * phi * phi + theta)
        / (phi * (1.0 - phi * phi))
        * log_phi
    )
    omega2 = -theta * gamma2 / phi
    flags = {"clamped_sigma2": sigma2 < 0.0, "clamped_omega2": omega2 < 0.0}
    params = NoisyOuParams(OuParams(mu, tau, max(sigma2, 0.0)), max(omega2, 0.0))
    return params, flags


def _ar_ols(x: np.ndarray) -> tuple[float, float, np.ndarray]:
    design = np.column_stack([np.ones(x.shape[0] - 1), x[:-1]])
    coef, *_ = np.linalg.lstsq(design, x[1:], rcond=None)
    resid = x[1:] - design @ coef
    return float(coef[0]), float(coef[1]), resid


def ar_css_fit(ts: TickSeries) -> OuFit:
    """AR(1) fit by conditional sum of squares (equals least squares here)."""
    spacing = _require_equidistant(ts)
    if len(ts) < 10:
        raise ValueError("conditional sum of squares needs at least 10 observations")
    alpha, phi, resid = _ar_ols(ts.values)
    gamma2 = float(resid @ resid) / (len(ts) - 1)
    if gamma2 <= 0.0:
        raise DegenerateInputError("zero innovation variance")
    params, flags = invert_arma(alpha, phi, 0.0, gamma2, spacing)
    return OuFit(params, AR_CSS, len(ts), diagnostics=flags)


def _theta_init(resid: np.ndarray) -> float:
    if resid.shape[0] < 3:
        return -0.1
    r = resid - resid.mean()
    den = float(r @ r)
    if den <= 0.0:
        return -0.1
    rho = float(r[1:] @ r[:-1]) / den
    if rho >= 0.0:
        return -0.05
    disc = 1.0 - 4.0 * rho * rho
    if disc < 0.0:
        return -0.9
    return max((1.0 - math.sqrt(disc)) / (2.0 * rho), -0.95)


def arma_nr_css_fit(ts: TickSeries, max_iter: int = 4000) -> OuFit:
    """ARMA(1,1) fit by conditional sum of squares, then back-transform.

    The pre-sample innovation is set to zero; the first observation enters
    only through the autoregressive term.
    """
    spacing = _require_equidistant(ts)
    if len(ts) < 10:
        raise ValueError("conditional sum of squares needs at least 10 observations")
    x = ts.values
    alpha0, phi0, resid = _ar_ols(x)
    x0 = np.array([alpha0, min(max(phi0, 1e-6), 1.0 - 1e-6), _theta_init(resid)])
    sse0 = _kernels.css_sse(x, *x0)
    scale_a = max(abs(alpha0) * 0.5, float(np.std(x)) * 1e-3, 1e-12)

    def objective(v: np.ndarray) -> float:
        return _kernels.css_sse(x, float(v[0]), float(v[1]), float(v[2]))

    res = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": 1e-10,
            "fatol": max(1e-18, 1e-13 * sse0),
            "maxiter": max_iter,
            "maxfev": 2 * max_iter,
            "initial_simplex": x0
            + np.array([[0, 0, 0], [scale_a, 0, 0], [0, 0.02, 0], [0, 0, 0.1]]),
        },
    )
    alpha, phi, theta = (float(v) for v in res.x)
    gamma2 = res.fun / (len(ts) - 1)
    if gamma2 <= 0.0:
        raise DegenerateInputError("zero innovation variance")
    params, flags = invert_arma(alpha, phi, theta, gamma2, spacing)
    diag = dict(flags)
    diag.update({"iterations": int(res.nit), "theta": theta, "sse": float(res.fun)})
    return OuFit(params, ARMA_NR_CSS, len(ts), converged=bool(res.success), diagnostics=diag)


# -- maximum likelihood ----------------------------------------------------


def plain_loglik(ts: TickSeries, p: OuParams) -> float:
    """Log-likelihood of pairwise transitions ignoring observation noise."""
    return -_kernels.nll_plain(ts.times, ts.values, p.mu, p.tau, p.sigma2)


def noisy_loglik(ts: TickSeries, p: NoisyOuParams) -> float:
    """Log-likelihood of pairwise transitions of the noisy process."""
    return -_kernels.nll_noisy(ts.times, ts.values, p.mu, p.tau, p.sigma2, p.omega2)


_LOG_CLIP = 46.0  # exp(+-46) ~ 1e+-20 bounds the positive parameters
_OMEGA2_REPORT_FLOOR = 1e-18


def auto_init(ts: TickSeries) -> NoisyOuParams:
    """Moment-based starting point: noise-robust moments on a coarse grid.

    Falls back to scale-aware defaults whenever the sample moments are
    degenerate.
    """
    x = ts.values
    v = float(np.var(x))
    sub: Optional[TickSeries] = None
    if len(ts) > MINUTES_PER_DAY + 10:
        try:
            sub = aggregate_previous_tick(ts, MINUTES_PER_DAY)
        except DegenerateInputError:
            sub = None
    if sub is None:
        try:
            _require_equidistant(ts)
            sub = ts
        except ValueError:
            sub = aggregate_previous_tick(ts, min(MINUTES_PER_DAY, max(len(ts) // 2, 2)))

    try:
        f = mom_nr_fit(sub)
        mu0, tau0, s20, w20 = f.params.mu, f.params.tau, f.params.sigma2, f.params.omega2
    except (MomentDegenerateError, ValueError):
        mu0, tau0 = float(x.mean()), 10.0
        s20, w20 = 2.0 * tau0 * v, 0.0

    tau0 = float(np.clip(tau0, 1e-2, 1e5))
    s20 = float(np.clip(s20, max(v, 1e-300) * 1e-6, max(v, 1e-300) * 1e6))
    rv = realized_variance(ts)
    w2_rv = max((rv - s20) / (2.0 * (len(ts) - 1)), 0.0)
    w20 = max(w20, w2_rv, v * 1e-8, 1e-300)
    return NoisyOuParams(OuParams(mu0, tau0, s20), w20)


def mle_fit(
    ts: TickSeries,
    robust: bool,
    init: Optional[NoisyOuParams] = None,
    max_iter: int = 2000,
) -> OuFit:
    """Pairwise maximum-likelihood fit on an arbitrary strictly increasing grid.

    Each observation is conditioned on its predecessor only.  ``robust=True``
    models the observation noise (four parameters); ``robust=False`` ignores
    it (three).  Positivity is enforced by optimizing log tau, log sigma2 and
    log omega2 with a simplex search: one restart from a perturbed start on
    non-convergence, best point returned either way.
    """
    x = ts.values
    if len(ts) < 10:
        raise ValueError("maximum likelihood needs at least 10 observations")
    if float(np.ptp(x)) == 0.0:
        raise DegenerateInputError("all observations equal")
    p0 = init if init is not None else auto_init(ts)
    sd = float(np.std(x))

    times = ts.times

    if robust:

        def nll(v: np.ndarray) -> float:
            logs = np.clip(v[1:], -_LOG_CLIP, _LOG_CLIP)
            return _kernels.nll_noisy(
                times, x, float(v[0]), math.exp(logs[0]), math.exp(logs[1]), math.exp(logs[2])
            )

        start = np.array(
            [p0.mu, math.log(p0.tau), math.log(p0.sigma2), math.log(max(p0.omega2, 1e-300))]
        )
    else:

        def nll(v: np.ndarray) -> float:
            logs = np.clip(v[1:], -_LOG_CLIP, _LOG_CLIP)
            return _kernels.nll_plain(
                times, x, float(v[0]), math.exp(logs[0]), math.exp(logs[1])
            )

        start = np.array([p0.mu, math.log(p0.tau), math.log(p0.sigma2)])
    start[1:] = np.clip(start[1:], -_LOG_CLIP, _LOG_CLIP)

    def run(v0: np.ndarray):
        deltas = np.diag([max(0.2 * sd, 1e-8)] + [0.7] * (v0.shape[0] - 1))
        return minimize(
            nll,
            v0,
            method="Nelder-Mead",
            options={
                "xatol": 1e-8,
                "fatol": 1e-7,
                "maxiter": max_iter,
                "maxfev": 2 * max_iter,
                "initial_simplex": np.vstack([v0, v0 + deltas]),
            },
        )

    res = run(start)
    restarts = 0
    if not res.success:
        perturbed = res.x.copy()
        perturbed[0] += 0.3 * sd
        perturbed[1:] += 0.5
        second = run(perturbed)
        restarts = 1
        if second.fun < res.fun:
            res = second

    v = res.x
    logs = np.clip(v[1:], -_LOG_CLIP, _LOG_CLIP)
    tau, sigma2 = math.exp(logs[0]), math.exp(logs[1])
    omega2 = math.exp(logs[2]) if robust else 0.0
    clamped = robust and omega2 < _OMEGA2_REPORT_FLOOR
    if clamped:
        omega2 = 0.0
    params = NoisyOuParams(OuParams(float(v[0]), tau, sigma2), omega2)
    return OuFit(
        params,
        MLE_NR if robust else MLE,
        len(ts),
        converged=bool(res.success),
        loglik=-float(res.fun),
        diagnostics={
            "iterations": int(res.nit),
            "restarts": restarts,
            "xatol": 1e-8,
            "clamped_omega2": clamped,
        },
    )


# -- nonparametric baseline ------------------------------------------------


def realized_variance(ts: TickSeries) -> float:
    """Sum of squared increments; estimates the day's quadratic variation."""
    d = np.diff(ts.values)
    return float(d @ d)


def noise_var_from_rv(rv: float, rm: float, n: int) -> float:
    """Noise variance implied by the gap between the raw realized variance
    and a noise-robust variance estimate: (rv - rm) / (2 n), clamped at 0."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return max((rv - rm) / (2.0 * n), 0.0)
