"""Parameter containers and closed-form Gaussian moments of the mean-reverting
log-spread model.

The latent process reverts to a long-term mean ``mu`` at speed ``tau`` with
instantaneous variance ``sigma2``.  Time is measured in trading days with one
day normalized to 1.0, so ``tau`` and ``sigma2`` are per-day quantities.
Observations may carry additive i.i.d. Gaussian microstructure noise with
variance ``omega2``; the noise shifts the unconditional variance but leaves
the mean and autocovariance untouched.

All functions here are pure and never cache.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

__all__ = [
    "OuParams",
    "NoisyOuParams",
    "GaussianMoments",
    "TickSeries",
    "unconditional_moments",
    "conditional_moments",
    "noisy_unconditional_moments",
    "noisy_autocorrelation",
    "posterior_initial",
    "noisy_conditional_moments",
]


@dataclass(frozen=True)
class OuParams:
    """Latent mean-reversion parameters.

    mu      long-term mean (log-price units)
    tau     speed of reversion per trading day, > 0
    sigma2  instantaneous variance per trading day, >= 0
    """

    mu: float
    tau: float
    sigma2: float

    def __post_init__(self) -> None:
        for name in ("mu", "tau", "sigma2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.sigma2 < 0.0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")

    @property
    def stationary_variance(self) -> float:
        return self.sigma2 / (2.0 * self.tau)


@dataclass(frozen=True)
class NoisyOuParams:
    """Latent parameters plus the observation-noise variance ``omega2``."""

    ou: OuParams
    omega2: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.omega2):
            raise ValueError(f"omega2 must be finite, got {self.omega2!r}")
        if self.omega2 < 0.0:
            raise ValueError(f"omega2 must be >= 0, got {self.omega2}")

    # delegate for brevity at call sites
    @property
    def mu(self) -> float:
        return self.ou.mu

    @property
    def tau(self) -> float:
        return self.ou.tau

    @property
    def sigma2(self) -> float:
        return self.ou.sigma2


@dataclass(frozen=True)
class GaussianMoments:
    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean!r}")
        if not (self.variance >= 0.0):
            raise ValueError(f"variance must be >= 0, got {self.variance!r}")


class TickSeries:
    """Strictly increasing observation times in [0, 1] paired with values.

    Times are fractions of the trading day; values are log prices or log
    spreads.  Arrays are stored as float64 and never mutated in place.
    """

    __slots__ = ("times", "values")

    def __init__(self, times, values) -> None:
        t = np.ascontiguousarray(times, dtype=np.float64)
        v = np.ascontiguousarray(values, dtype=np.float64)
        if t.ndim != 1 or v.ndim != 1:
            raise ValueError("times and values must be one-dimensional")
        if t.shape[0] != v.shape[0]:
            raise ValueError(f"length mismatch: {t.shape[0]} times vs {v.shape[0]} values")
        if t.shape[0] < 2:
            raise ValueError("a series needs at least 2 observations")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ValueError("times and values must be finite")
        if t[0] < 0.0 or t[-1] > 1.0:
            raise ValueError("times must lie within [0, 1]")
        if not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        self.times = t
        self.values = v

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TickSeries)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"TickSeries(n={len(self)}, span=[{self.times[0]:.6g}, {self.times[-1]:.6g}])"


def unconditional_moments(p: OuParams, lag: float = 0.0) -> tuple[GaussianMoments, float]:
    """Stationary mean/variance and the autocovariance at a nonnegative lag.

    mean = mu, variance = sigma2 / (2 tau), autocov(lag) = variance * e^(-tau lag).
    """
    if lag < 0.0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    v = p.stationary_variance
    return GaussianMoments(p.mu, v), v * math.exp(-p.tau * lag)


def conditional_moments(p: OuParams, p0: float, t: float) -> GaussianMoments:
    """Moments of the latent value a horizon ``t`` after observing ``p0`` exactly.

    mean = p0 e^(-tau t) + mu (1 - e^(-tau t))
    variance = sigma2 / (2 tau) * (1 - e^(-2 tau t))
    """
    if t <= 0.0:
        raise ValueError(f"horizon t must be > 0, got {t}")
    e = math.exp(-p.tau * t)
    mean = p0 * e + p.mu * (1.0 - e)
    var = p.stationary_variance * (1.0 - e * e)
    return GaussianMoments(mean, var)


def noisy_unconditional_moments(p: NoisyOuParams, lag: float = 0.0) -> tuple[GaussianMoments, float]:
    """Stationary moments of the observed (noisy) process.

    Noise adds ``omega2`` to the variance but does not enter the
    autocovariance at positive lags.
    """
    base, autocov = unconditional_moments(p.ou, lag)
    return GaussianMoments(base.mean, base.variance + p.omega2), autocov


def noisy_autocorrelation(p: NoisyOuParams, lag: float) -> float:
    """Autocorrelation of the observed process: e^(-tau lag) sigma2 / (sigma2 + 2 tau omega2)."""
    if lag <= 0.0:
        raise ValueError(f"lag must be > 0, got {lag}")
    den = p.sigma2 + 2.0 * p.tau * p.omega2
    if den <= 0.0:
        raise DegenerateInputError("sigma2 + 2 tau omega2 must be > 0")
    return math.exp(-p.tau * lag) * p.sigma2 / den


def posterior_initial(p: NoisyOuParams, x0: float) -> GaussianMoments:
    """Gaussian posterior of the latent value given one noisy observation ``x0``.

    mean = (x0 sigma2 + 2 tau mu omega2) / (sigma2 + 2 tau omega2)
    variance = sigma2 omega2 / (sigma2 + 2 tau omega2)

    With ``omega2 = 0`` the observation is exact; with ``sigma2 = 0`` the
    latent value is pinned at ``mu``.  Both zero is degenerate.
    """
    den = p.sigma2 + 2.0 * p.tau * p.omega2
    if den <= 0.0:
        raise DegenerateInputError("posterior undefined: sigma2 and omega2 both zero")
    if p.omega2 == 0.0:  # exact observation
        return GaussianMoments(x0, 0.0)
    if p.sigma2 == 0.0:  # latent value pinned at the mean
        return GaussianMoments(p.mu, 0.0)
    mean = (x0 * p.sigma2 + 2.0 * p.tau * p.mu * p.omega2) / den
    var = p.sigma2 * p.omega2 / den
    return GaussianMoments(mean, var)


def noisy_conditional_moments(p: NoisyOuParams, x_prev: float, dt: float) -> GaussianMoments:
    """Moments of the next noisy observation given the previous one.

    The previous observation is first deconvolved into the latent-value
    posterior, propagated through the exact transition over ``dt``, and the
    fresh observation noise is added back:

    mean = posterior_mean e^(-tau dt) + mu (1 - e^(-tau dt))
    variance = posterior_var e^(-2 tau dt)
              + sigma2 / (2 tau) * (1 - e^(-2 tau dt)) + omega2
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    post = posterior_initial(p, x_prev)
    e = math.exp(-p.tau * dt)
    mean = post.mean * e + p.mu * (1.0 - e)
    var = post.variance * e * e + p.ou.stationary_variance * (1.0 - e * e) + p.omega2
    return GaussianMoments(mean, var)
