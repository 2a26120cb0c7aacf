"""Pure-numpy implementations of the hot kernels.

Semantics must match ``_core.pyx`` exactly (same guards, same +inf returns);
only rounding may differ at the last few ulps.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

_LOG_2PI = float(np.log(2.0 * np.pi))

# exp(tau * span) within one renormalization segment stays below e^30
_SEGMENT_LOG_SPAN = 30.0


def nll_plain(times: np.ndarray, values: np.ndarray, mu: float, tau: float, sigma2: float) -> float:
    """Negative log-likelihood of pairwise noise-free Gaussian transitions."""
    if tau <= 0.0 or sigma2 < 0.0:
        return np.inf
    dt = np.diff(times)
    e = np.exp(-tau * dt)
    var = sigma2 / (2.0 * tau) * (1.0 - e * e)
    if not np.all(var > 0.0) or not np.all(np.isfinite(var)):
        return np.inf
    resid = values[1:] - mu - (values[:-1] - mu) * e
    nll = 0.5 * float(np.sum(np.log(var) + resid * resid / var)) + 0.5 * _LOG_2PI * dt.shape[0]
    return nll if np.isfinite(nll) else np.inf


def nll_noisy(
    times: np.ndarray,
    values: np.ndarray,
    mu: float,
    tau: float,
    sigma2: float,
    omega2: float,
) -> float:
    """Negative log-likelihood of pairwise noisy transitions.

    Conditioning on the previous noisy observation deconvolves it into the
    latent posterior (weight w, variance pv) before propagating.
    """
    if tau <= 0.0 or sigma2 < 0.0 or omega2 < 0.0:
        return np.inf
    den = sigma2 + 2.0 * tau * omega2
    if den <= 0.0:
        return np.inf
    w = sigma2 / den
    pv = sigma2 * omega2 / den
    dt = np.diff(times)
    e = np.exp(-tau * dt)
    var = pv * e * e + sigma2 / (2.0 * tau) * (1.0 - e * e) + omega2
    if not np.all(var > 0.0) or not np.all(np.isfinite(var)):
        return np.inf
    resid = values[1:] - mu - w * (values[:-1] - mu) * e
    nll = 0.5 * float(np.sum(np.log(var) + resid * resid / var)) + 0.5 * _LOG_2PI * dt.shape[0]
    return nll if np.isfinite(nll) else np.inf


def css_sse(values: np.ndarray, alpha: float, phi: float, theta: float) -> float:
    """Conditional sum of squares of x_i = alpha + phi x_{i-1} + theta e_{i-1} + e_i.

    The pre-sample innovation e_0 is set to zero; the first observation only
    enters through the autoregressive term.
    """
    u = values[1:] - alpha - phi * values[:-1]
    e = lfilter([1.0], [1.0, theta], u)
    sse = float(np.dot(e, e))
    return sse if np.isfinite(sse) else np.inf


def ou_exact_path(
    times: np.ndarray,
    shocks_std: np.ndarray,
    mu: float,
    tau: float,
    sigma2: float,
    p0: float,
) -> np.ndarray:
    """Latent path by exact Gaussian transitions on an arbitrary grid.

    ``shocks_std`` holds one standard-normal draw per transition.  Uses the
    closed form c_i = A_i (c_0 + sum_j s_j z_j / A_j) with A_i = e^(-tau (t_i - t_0)),
    renormalized in segments so the growing 1/A_j factors stay bounded.
    """
    n = times.shape[0]
    out = np.empty(n, dtype=np.float64)
    out[0] = p0
    if n == 1:
        return out
    dt = np.diff(times)
    e = np.exp(-tau * dt)
    sd = np.sqrt(sigma2 / (2.0 * tau) * (1.0 - e * e))
    shocks = sd * shocks_std

    seg_span = _SEGMENT_LOG_SPAN / tau
    start = 0
    c = p0 - mu
    while start < n - 1:
        stop = int(np.searchsorted(times, times[start] + seg_span, side="right"))
        stop = max(stop, start + 2)
        stop = min(stop, n)
        # indices start+1 .. stop-1 relative to anchor at `start`
        rel_t = times[start + 1 : stop] - times[start]
        decay = np.exp(-tau * rel_t)
        grow = 1.0 / decay
        seg = decay * (c + np.cumsum(shocks[start : stop - 1] * grow))
        out[start + 1 : stop] = mu + seg
        c = seg[-1]
        start = stop - 1
    return out
