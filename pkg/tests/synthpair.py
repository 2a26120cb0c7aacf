"""Synthetic two-leg pair generator for end-to-end pipeline tests.

Daily parameters follow the forecasting models' own generating processes
(level: AR with the day's open as regressor; speed: constant plus noise;
variance: heterogeneous autoregression in logs), so the forecast stage is
well specified.  Intraday, the latent spread is an exact mean-reverting
path started at the day's open; each leg is a common market factor plus or
minus half the spread plus its own microstructure noise, so the observed
log spread is the latent spread plus N(0, omega2) noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from oupairs._kernels import ou_exact_path
from oupairs.ingest import SESSION_OPEN_NS, SESSION_SPAN_NS, RawTick
from oupairs.model import NoisyOuParams, OuParams
from oupairs.sim import sample_poisson_grid

MU_COEF = (0.03, 0.55, 0.15)  # level model: intercept, lag, open
MU_NOISE_SD = 0.004
TAU_MEAN = 10.0
TAU_NOISE_SD = 3.0
TAU_RANGE = (2.0, 25.0)
HAR_COEF = (-0.92103403719761845, 0.35, 0.30, 0.25)  # centers log-variance on 1e-4
HAR_NOISE_SD = 0.55
OMEGA2 = 1e-8
OVERNIGHT_GAP_SD = 0.002
MARKET_VAR_PER_DAY = 5e-5
BASE_LOG_PRICE = math.log(100.0)


@dataclass(frozen=True)
class SynthDay:
    day: int
    params: NoisyOuParams  # true intraday parameters
    open_value: float  # latent spread at the session open
    ticks_a: list[RawTick]
    ticks_b: list[RawTick]
    spread_latent: np.ndarray
    times: np.ndarray


def _to_raw(times: np.ndarray, log_prices: np.ndarray, exchange: str) -> list[RawTick]:
    ns = SESSION_OPEN_NS + np.rint(times * SESSION_SPAN_NS).astype(np.int64)
    return [
        RawTick(int(t), float(math.exp(lp)), exchange, 0, "", "")
        for t, lp in zip(ns, log_prices)
    ]


def generate_pair(n_days: int, seed: int, ticks_per_day: int = 23400) -> list[SynthDay]:
    rng = np.random.default_rng(seed)
    days: list[SynthDay] = []

    log_s2_hist = list(rng.normal(math.log(1e-4), 0.5, size=22))
    mu_prev = 0.1
    close_prev = 0.1
    w_close_prev = BASE_LOG_PRICE

    for day in range(n_days):
        open_value = close_prev + rng.normal(0.0, OVERNIGHT_GAP_SD)
        a, b, c = MU_COEF
        mu_day = a + b * mu_prev + c * open_value + rng.normal(0.0, MU_NOISE_SD)
        tau_day = float(np.clip(TAU_MEAN + rng.normal(0.0, TAU_NOISE_SD), *TAU_RANGE))
        h = np.array(log_s2_hist)
        a2, b2, c2, d2 = HAR_COEF
        log_s2 = (
            a2
            + b2 * h[-1]
            + c2 * h[-5:].mean()
            + d2 * h[-22:].mean()
            + rng.normal(0.0, HAR_NOISE_SD)
        )
        sigma2_day = math.exp(log_s2)
        params = NoisyOuParams(OuParams(mu_day, tau_day, sigma2_day), OMEGA2)

        grid = sample_poisson_grid(ticks_per_day, seed + 7919, index=day)
        times = grid.times
        z = rng.standard_normal(len(times) - 1)
        latent = ou_exact_path(times, z, mu_day, tau_day, sigma2_day, open_value)

        w_open = w_close_prev + rng.normal(0.0, OVERNIGHT_GAP_SD)
        increments = rng.standard_normal(len(times)) * math.sqrt(MARKET_VAR_PER_DAY)
        w_path = w_open + np.cumsum(increments * np.sqrt(np.diff(np.concatenate([[0.0], times]))))
        noise_a = rng.normal(0.0, math.sqrt(OMEGA2 / 2.0), size=len(times))
        noise_b = rng.normal(0.0, math.sqrt(OMEGA2 / 2.0), size=len(times))
        log_a = w_path + latent / 2.0 + noise_a
        log_b = w_path - latent / 2.0 + noise_b

        days.append(
            SynthDay(
                day,
                params,
                float(open_value),
                _to_raw(times, log_a, "N"),
                _to_raw(times, log_b, "N"),
                latent,
                times,
            )
        )
        mu_prev = mu_day
        close_prev = float(latent[-1])
        w_close_prev = float(w_path[-1])
        log_s2_hist.append(log_s2)

    return days
