"""Exact simulation of (noisy) mean-reverting sample paths.

Paths are generated with the exact Gaussian transition between consecutive
grid times, so there is no discretization error at any sampling frequency.
Observation grids are either equidistant or event times of a homogeneous
Poisson process on [0, 1].

Randomness is fully reproducible: every draw comes from a counter-based
Philox generator keyed by ``SeedSequence(seed, spawn_key=(purpose, index,
attempt))``.  The scheme identifier ``RNG_SCHEME`` is recorded in CLI output
metadata.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .model import NoisyOuParams, TickSeries

__all__ = [
    "RNG_SCHEME",
    "SamplingGrid",
    "SimConfig",
    "equidistant_grid",
    "sample_poisson_grid",
    "simulate",
    "simulate_equidistant_batch",
]

RNG_SCHEME = "philox-seedseq-v1"

_PURPOSE_GRID = 1
_PURPOSE_INIT = 2
_PURPOSE_PATH = 3
_PURPOSE_NOISE = 4


def _rng(seed: int, purpose: int, index: int = 0, attempt: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(purpose, index, attempt))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SamplingGrid:
    """Strictly increasing observation times within [0, 1]."""

    times: np.ndarray
    kind: str  # "equidistant" | "poisson" | "custom"

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.shape[0] < 2:
            raise ValueError("grid needs at least 2 times")
        if t[0] < 0.0 or t[-1] > 1.0 or not np.all(np.diff(t) > 0.0):
            raise ValueError("grid times must be strictly increasing within [0, 1]")
        object.__setattr__(self, "times", t)

    def __len__(self) -> int:
        return int(self.times.shape[0])


@dataclass(frozen=True)
class SimConfig:
    """One simulated day: parameters, grid, seed and initial condition.

    ``init_value=None`` draws the initial latent value from the stationary
    law N(mu, sigma2 / 2 tau); a float pins it.
    """

    params: NoisyOuParams
    grid: SamplingGrid
    seed: int
    init_value: Optional[float] = None


def equidistant_grid(n: int) -> SamplingGrid:
    """n + 1 times 0, 1/n, ..., 1 (n transitions over the day)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return SamplingGrid(np.linspace(0.0, 1.0, n + 1), "equidistant")


def sample_poisson_grid(expected_count: int, seed: int, index: int = 0) -> SamplingGrid:
    """Event times of a homogeneous Poisson process with rate ``expected_count``.

    Endpoints are not forced into the grid.  Draws with fewer than 2 events
    (or coinciding float times) are rejected and resampled from the next
    attempt stream.
    """
    if expected_count < 2:
        raise ValueError(f"expected_count must be >= 2, got {expected_count}")
    attempt = 0
    while True:
        rng = _rng(seed, _PURPOSE_GRID, index, attempt)
        count = int(rng.poisson(expected_count))
        if count >= 2:
            times = np.sort(rng.random(count))
            if np.all(np.diff(times) > 0.0):
                return SamplingGrid(times, "poisson")
        attempt += 1


def simulate(cfg: SimConfig, path_index: int = 0) -> tuple[TickSeries, TickSeries]:
    """Simulate one day; returns (latent, observed) sharing the same times.

    The latent path uses the exact transition between grid times; the
    observed path adds i.i.d. N(0, omega2) noise at every time (including
    the first).  ``path_index`` selects an independent stream for studies
    running many paths under one seed.
    """
    from . import _kernels

    p = cfg.params
    times = cfg.grid.times
    if cfg.init_value is not None:
        p0 = float(cfg.init_value)
    else:
        p0 = _rng(cfg.seed, _PURPOSE_INIT, path_index).normal(
            p.mu, math.sqrt(p.ou.stationary_variance)
        )
    z = _rng(cfg.seed, _PURPOSE_PATH, path_index).standard_normal(len(times) - 1)
    latent = _kernels.ou_exact_path(times, z, p.mu, p.tau, p.sigma2, p0)
    noise = _rng(cfg.seed, _PURPOSE_NOISE, path_index).standard_normal(len(times))
    observed = latent + math.sqrt(p.omega2) * noise
    return TickSeries(times, latent), TickSeries(times, observed)


def simulate_equidistant_batch(
    params: NoisyOuParams,
    n: int,
    n_paths: int,
    seed: int,
    init_value: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized batch on the grid 0, 1/n, ..., 1.

    Returns (times, latent, observed) with paths as rows.  Row ``i`` draws
    from the same streams as ``simulate(cfg, path_index=i)``, so the batch is
    statistically interchangeable with a loop of single-path calls.
    """
    if n < 1 or n_paths < 1:
        raise ValueError("n and n_paths must be >= 1")
    times = np.linspace(0.0, 1.0, n + 1)
    mu, tau, sigma2 = params.mu, params.tau, params.sigma2
    phi = math.exp(-tau / n)
    v = params.ou.stationary_variance
    gamma = math.sqrt(v * (1.0 - phi * phi))

    if init_value is not None:
        p0 = np.full(n_paths, float(init_value))
    else:
        p0 = np.array(
            [_rng(seed, _PURPOSE_INIT, i).normal(mu, math.sqrt(v)) for i in range(n_paths)]
        )
    z = np.stack([_rng(seed, _PURPOSE_PATH, i).standard_normal(n) for i in range(n_paths)])
    noise = np.stack(
        [_rng(seed, _PURPOSE_NOISE, i).standard_normal(n + 1) for i in range(n_paths)]
    )

    inp = mu * (1.0 - phi) + gamma * z
    tail, _ = lfilter([1.0], [1.0, -phi], inp, axis=1, zi=(phi * p0)[:, None])
    latent = np.concatenate([p0[:, None], tail], axis=1)
    observed = latent + math.sqrt(params.omega2) * noise
    return times, latent, observed
