"""Time-varying daily-parameter models with rolling one-step-ahead forecasts.

Parameters are piecewise constant within a day.  Each one gets its own model
over a trailing window of ``window`` days:

* mean level: least squares on (1, previous day's level, same-day open);
  the open is observed before intraday trading, so the next-day forecast is
  issued just after the open
* reversion speed: window mean (no usable autocorrelation structure)
* variance: heterogeneous autoregression of the log variance on the previous
  day and on 5-day and 22-day lag averages

Regressor lags stay inside the window, so the variance model needs
``window >= 23``.  Rank-deficient designs (e.g. a constant level history)
are solved in the minimum-norm sense and flagged rather than rejected;
days with failed estimation should be dropped by the caller, not imputed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CollinearityError, InvalidHistoryError
from .model import OuParams

__all__ = [
    "DailyParamHistory",
    "ForecastModels",
    "ForecastScores",
    "fit_models",
    "forecast_day",
    "evaluate_forecasts",
]

_HAR_LAGS = 22
_HAR_MID = 5


@dataclass(frozen=True)
class DailyParamHistory:
    """Aligned per-day parameter estimates plus the day's opening value."""

    days: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    sigma2: np.ndarray
    open_value: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        for name in ("days", "mu", "tau", "sigma2", "open_value"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            arrays[name] = a
            object.__setattr__(self, name, a)
        n = arrays["days"].shape[0]
        if any(a.shape[0] != n for a in arrays.values()):
            raise ValueError("history columns must have equal length")
        if n and (np.any(arrays["tau"] <= 0.0) or np.any(arrays["sigma2"] <= 0.0)):
            raise InvalidHistoryError("tau and sigma2 must be strictly positive")
        if not all(np.all(np.isfinite(a)) for a in arrays.values()):
            raise InvalidHistoryError("history contains non-finite entries")

    def __len__(self) -> int:
        return int(self.days.shape[0])

    def tail(self, k: int) -> "DailyParamHistory":
        return DailyParamHistory(
            self.days[-k:], self.mu[-k:], self.tau[-k:], self.sigma2[-k:], self.open_value[-k:]
        )


@dataclass(frozen=True)
class ForecastModels:
    mu_coef: tuple[float, float, float]
    tau_mean: float
    har_coef: tuple[float, float, float, float]
    window: int
    r2_mu: float
    r2_sigma: float
    mu_collinear: bool
    har_collinear: bool


def _ols(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Minimum-norm least squares; returns (coef, in-sample R2, rank-deficient)."""
    if not (np.all(np.isfinite(design)) and np.all(np.isfinite(y))):
        raise CollinearityError("non-finite design matrix")
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    sst = float(np.sum((y - y.mean()) ** 2))
    sse = float(np.sum((y - fitted) ** 2))
    r2 = 0.0 if sst == 0.0 else 1.0 - sse / sst
    return coef, r2, rank < design.shape[1]


def _har_design(log_s2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = log_s2.shape[0]
    rows = n - _HAR_LAGS
    y = log_s2[_HAR_LAGS:]
    lag1 = log_s2[_HAR_LAGS - 1 : n - 1]
    cum = np.concatenate([[0.0], np.cumsum(log_s2)])
    mid = (cum[_HAR_LAGS:n] - cum[_HAR_LAGS - _HAR_MID : n - _HAR_MID]) / _HAR_MID
    long = (cum[_HAR_LAGS:n] - cum[: n - _HAR_LAGS]) / _HAR_LAGS
    return np.column_stack([np.ones(rows), lag1, mid, long]), y


def fit_models(hist: DailyParamHistory, window: int) -> ForecastModels:
    """Fit all three parameter models on the trailing ``window`` days."""
    if window < _HAR_LAGS + 1:
        raise ValueError(f"window must be >= {_HAR_LAGS + 1}, got {window}")
    if len(hist) < window:
        raise ValueError(f"history has {len(hist)} days, needs >= {window}")
    h = hist.tail(window)

    design_mu = np.column_stack([np.ones(window - 1), h.mu[:-1], h.open_value[1:]])
    mu_coef, r2_mu, mu_rankdef = _ols(design_mu, h.mu[1:])

    design_har, y_har = _har_design(np.log(h.sigma2))
    har_coef, r2_sigma, har_rankdef = _ols(design_har, y_har)

    return ForecastModels(
        mu_coef=tuple(float(c) for c in mu_coef),
        tau_mean=float(h.tau.mean()),
        har_coef=tuple(float(c) for c in har_coef),
        window=window,
        r2_mu=r2_mu,
        r2_sigma=r2_sigma,
        mu_collinear=mu_rankdef,
        har_collinear=har_rankdef,
    )


def forecast_day(models: ForecastModels, tail: DailyParamHistory, next_open: float) -> OuParams:
    """One-step-ahead parameter forecast given the next day's opening value."""
    if len(tail) < _HAR_LAGS:
        raise ValueError(f"need at least {_HAR_LAGS} trailing days, got {len(tail)}")
    if not math.isfinite(next_open):
        raise ValueError("next_open must be finite")
    a, b, c = models.mu_coef
    mu_hat = a + b * float(tail.mu[-1]) + c * next_open
    log_s2 = np.log(tail.sigma2[-_HAR_LAGS:])
    a2, b2, c2, d2 = models.har_coef
    log_s2_hat = (
        a2
        + b2 * float(log_s2[-1])
        + c2 * float(log_s2[-_HAR_MID:].mean())
        + d2 * float(log_s2.mean())
    )
    return OuParams(mu_hat, models.tau_mean, math.exp(log_s2_hat))


@dataclass(frozen=True)
class ForecastScores:
    """Rolling-origin evaluation: median fit R2 and median absolute errors."""

    med_r2_mu: float
    med_r2_sigma: float
    med_ae_mu: float
    med_ae_tau: float
    med_ae_sigma2: float
    n_forecasts: int


def evaluate_forecasts(hist: DailyParamHistory, window: int) -> ForecastScores:
    """Refit on each rolling window and forecast the following day."""
    if len(hist) < window + 1:
        raise ValueError("history too short for one-step evaluation")
    r2_mu, r2_s, ae_mu, ae_tau, ae_s2 = [], [], [], [], []
    for t in range(window, len(hist)):
        sub = DailyParamHistory(
            hist.days[t - window : t],
            hist.mu[t - window : t],
            hist.tau[t - window : t],
            hist.sigma2[t - window : t],
            hist.open_value[t - window : t],
        )
        models = fit_models(sub, window)
        fc = forecast_day(models, sub, float(hist.open_value[t]))
        r2_mu.append(models.r2_mu)
        r2_s.append(models.r2_sigma)
        ae_mu.append(abs(fc.mu - hist.mu[t]))
        ae_tau.append(abs(fc.tau - hist.tau[t]))
        ae_s2.append(abs(fc.sigma2 - hist.sigma2[t]))
    return ForecastScores(
        float(np.median(r2_mu)),
        float(np.median(r2_s)),
        float(np.median(ae_mu)),
        float(np.median(ae_tau)),
        float(np.median(ae_s2)),
        len(ae_mu),
    )
