"""First-passage-time moments of the dimensionless mean-reverting diffusion
dY = -Y dt + sqrt(2) dW (stationary N(0, 1)).

Passage means and variances are built from two power series::

    mean_primitive(z) = 1/2 * sum_{k>=1} (sqrt(2) z)^k / k! * Gamma(k/2)
    var_primitive(z)  = 1/2 * sum_{k>=1} (sqrt(2) z)^k / k! * Gamma(k/2)
                              * (psi(k/2) - psi(1))

The mean of an upward passage from y to z (y < z) is
``mean_primitive(z) - mean_primitive(y)``; its variance is ``Q(z) - Q(y)``
with ``Q(z) = mean_primitive(z)^2 - var_primitive(z)``.  Downward passages
reduce to upward ones by the y -> -y symmetry of the process.  A trading
cycle is two independent legs (entry -> exit -> entry), so its variance is
the sum of the leg variances.  Both formulas were validated against direct
quadrature of the backward-equation recursion for the first two moments and
against Monte Carlo (see the test suite).

Series terms are generated by the exact rational recurrence
``t_{k+2} = t_k * z^2 * k / ((k+1)(k+2))`` (the Gamma-ratio folded in), which
avoids overflow of separate z^k / Gamma factors.  Summation stops when two
consecutive terms fall below 1e-15 of the running sum, capped at 400 terms.
For negative arguments the series alternates; beyond z = -5 double precision
loses the leading digits to cancellation (peak term ~ e^(z^2/2 + |z|)), so
those calls are evaluated in 50-digit arithmetic instead.  Arguments beyond
|z| = 8 are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalInconsistencyError

__all__ = [
    "SERIES_DOMAIN_MAX",
    "Levels",
    "mean_primitive",
    "var_primitive",
    "passage_mean",
    "passage_var",
    "cycle_mean",
    "cycle_var",
    "series_diagnostics",
]

SERIES_DOMAIN_MAX = 8.0

# psi(1) = -Euler-Mascheroni constant, 20 significant digits
_EULER_GAMMA = 0.57721566490153286061

_MAX_TERMS = 400
_REL_STOP = 1e-15
_HIPREC_BELOW = -5.0  # series arguments below this use 50-digit arithmetic
_HIPREC_DPS = 50

# Interleaved term order k = 1, 2, 3, ... built from two strided recurrences.
_K_ODD = np.arange(1, _MAX_TERMS, 2, dtype=np.float64)  # 1, 3, ..., 399
_K_EVEN = np.arange(2, _MAX_TERMS + 1, 2, dtype=np.float64)  # 2, 4, ..., 400
_F_ODD = _K_ODD[:-1] / ((_K_ODD[:-1] + 1.0) * (_K_ODD[:-1] + 2.0))
_F_EVEN = _K_EVEN[:-1] / ((_K_EVEN[:-1] + 1.0) * (_K_EVEN[:-1] + 2.0))
_C1 = math.sqrt(2.0 * math.pi)  # (sqrt 2)^1 Gamma(1/2) / 1!
_C2 = 1.0  # (sqrt 2)^2 Gamma(1) / 2!


def _digamma_offsets() -> tuple[np.ndarray, np.ndarray]:
    # dig[k] = psi(k/2) - psi(1) via psi(x+1) = psi(x) + 1/x
    dig = np.empty(_MAX_TERMS + 1)
    dig[1] = -2.0 * math.log(2.0)
    dig[2] = 0.0
    for k in range(1, _MAX_TERMS - 1):
        dig[k + 2] = dig[k] + 2.0 / k
    return dig[1::2].copy(), dig[2::2].copy()


_DIG_ODD, _DIG_EVEN = _digamma_offsets()


@dataclass(frozen=True)
class Levels:
    """Dimensionless entry/exit levels of a trading cycle (entry >= 0 >= ... exit)."""

    entry: float
    exit: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.entry) and math.isfinite(self.exit)):
            raise ValueError("levels must be finite")
        if self.entry < 0.0:
            raise ValueError(f"entry level must be >= 0, got {self.entry}")
        if self.exit > self.entry:
            raise ValueError(f"exit level must be <= entry, got {self.exit} > {self.entry}")


def _check_domain(z: float) -> None:
    if abs(z) > SERIES_DOMAIN_MAX:
        raise DomainError(
            f"series argument {z} outside validated domain [-{SERIES_DOMAIN_MAX}, {SERIES_DOMAIN_MAX}]"
        )


def _interleaved_terms(z: np.ndarray) -> np.ndarray:
    """Terms t_k = (sqrt2 z)^k Gamma(k/2) / k! for k = 1..400, rows per argument."""
    z = z[:, None]
    z2 = z * z
    grow_odd = np.cumprod(z2 * _F_ODD, axis=1)
    t_odd = _C1 * z * np.concatenate([np.ones_like(z), grow_odd], axis=1)
    grow_even = np.cumprod(z2 * _F_EVEN, axis=1)
    t_even = _C2 * z2 * np.concatenate([np.ones_like(z), grow_even], axis=1)
    terms = np.empty((z.shape[0], _MAX_TERMS))
    terms[:, 0::2] = t_odd
    terms[:, 1::2] = t_even
    return terms


def _stopped_sum(terms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums under the stopping rule; returns (sums, stop indices)."""
    partial = np.cumsum(terms, axis=1)
    small = np.abs(terms) <= _REL_STOP * np.abs(partial)
    # two consecutive small terms, not before k = 4 (the k = 2 digamma term
    # is exactly zero and must not trigger the rule)
    ok = small[:, 1:] & small[:, :-1]
    ok[:, :3] = False
    idx = np.argmax(ok, axis=1)
    hit = ok[np.arange(ok.shape[0]), idx]
    stop = np.where(hit, idx + 1, _MAX_TERMS - 1)
    return partial[np.arange(partial.shape[0]), stop], stop


def _phi_pair_mp(z: float) -> tuple[float, float]:
    """50-digit evaluation for cancellation-prone deep-negative arguments."""
    import mpmath as mp

    with mp.workdps(_HIPREC_DPS):
        zz = mp.sqrt(2) * mp.mpf(z)
        psi1 = mp.digamma(1)
        s1 = mp.mpf(0)
        s2 = mp.mpf(0)
        term = zz * mp.gamma(mp.mpf(1) / 2)  # k = 1
        k = 1
        while k <= 2 * _MAX_TERMS:
            s1 += term
            s2 += term * (mp.digamma(mp.mpf(k) / 2) - psi1)
            # t_{k+1} = t_k * zz / (k+1) * Gamma((k+1)/2) / Gamma(k/2)
            term = term * zz / (k + 1) * mp.gamma(mp.mpf(k + 1) / 2) / mp.gamma(mp.mpf(k) / 2)
            k += 1
            if abs(term) < mp.mpf(10) ** (-2 * _HIPREC_DPS) * (abs(s1) + 1):
                break
        return float(s1 / 2), float(s2 / 2)


def _phi_pair_batch(z_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """mean_primitive and var_primitive for an array of arguments."""
    z = np.asarray(z_values, dtype=np.float64).reshape(-1)
    for zi in z:
        _check_domain(float(zi))
    phi1 = np.empty_like(z)
    phi2 = np.empty_like(z)
    fast = z >= _HIPREC_BELOW
    if np.any(fast):
        terms = _interleaved_terms(z[fast])
        phi1[fast] = 0.5 * _stopped_sum(terms)[0]
        phi2[fast] = 0.5 * _stopped_sum(terms * _dig_interleaved())[0]
    for i in np.nonzero(~fast)[0]:
        phi1[i], phi2[i] = _phi_pair_mp(float(z[i]))
    return phi1, phi2


_DIG_ROW = None


def _dig_interleaved() -> np.ndarray:
    global _DIG_ROW
    if _DIG_ROW is None:
        row = np.empty(_MAX_TERMS)
        row[0::2] = _DIG_ODD
        row[1::2] = _DIG_EVEN
        _DIG_ROW = row
    return _DIG_ROW


def mean_primitive(z: float) -> float:
    """Primitive whose differences give upward passage means."""
    return float(_phi_pair_batch(np.array([z]))[0][0])


def var_primitive(z: float) -> float:
    """Digamma-weighted primitive entering passage variances."""
    return float(_phi_pair_batch(np.array([z]))[1][0])


def series_diagnostics(z: float) -> tuple[float, int, float]:
    """(value, terms used, |last term / partial sum|) for the mean series.

    Only defined on the double-precision branch (z >= -5).
    """
    _check_domain(z)
    if z < _HIPREC_BELOW:
        raise DomainError("diagnostics available only on the double-precision branch")
    terms = _interleaved_terms(np.array([z]))
    sums, stop = _stopped_sum(terms)
    k = int(stop[0])
    ratio = abs(terms[0, k]) / abs(sums[0]) if sums[0] != 0.0 else 0.0
    return float(0.5 * sums[0]), k + 1, float(ratio)


def passage_mean(start: float, level: float) -> float:
    """Expected first-passage time from ``start`` to ``level``."""
    if start == level:
        return 0.0
    if start < level:
        phi1, _ = _phi_pair_batch(np.array([level, start]))
        return float(phi1[0] - phi1[1])
    # downward passage == upward passage of the reflected process
    phi1, _ = _phi_pair_batch(np.array([-level, -start]))
    return float(phi1[0] - phi1[1])


def passage_var(start: float, level: float) -> float:
    """Variance of the first-passage time from ``start`` to ``level``."""
    if start == level:
        return 0.0
    if start < level:
        a, b = level, start
    else:
        a, b = -level, -start
    phi1, phi2 = _phi_pair_batch(np.array([a, b]))
    q = (phi1[0] ** 2 - phi2[0]) - (phi1[1] ** 2 - phi2[1])
    return float(q)


def _odd_sum_diff(a: float, b: float) -> float:
    """sum over odd k of t_k(a) - t_k(b); positive-term series for b <= a."""
    z = np.array([a, b])[:, None]
    z2 = z * z
    grow = np.cumprod(z2 * _F_ODD, axis=1)
    t = _C1 * z * np.concatenate([np.ones_like(z), grow], axis=1)
    diff = (t[0] - t[1])[None, :]
    return float(_stopped_sum(diff)[0][0])


def cycle_mean(levels: Levels) -> float:
    """Expected duration of the full trading cycle entry -> exit -> entry."""
    a, b = levels.entry, levels.exit
    _check_domain(a)
    _check_domain(b)
    if a == b:
        return 0.0
    return _odd_sum_diff(a, b)


def cycle_var(levels: Levels) -> float:
    """Variance of the cycle duration: the two legs are independent."""
    a, b = levels.entry, levels.exit
    _check_domain(a)
    _check_domain(b)
    if a == b:
        return 0.0
    phi1, phi2 = _phi_pair_batch(np.array([-b, -a, a, b]))
    q = phi1 * phi1 - phi2
    v = (q[0] - q[1]) + (q[2] - q[3])
    if v < -1e-12 * max(1.0, abs(q[0]) + abs(q[2])):
        raise NumericalInconsistencyError(f"negative cycle variance {v}")
    return float(max(v, 0.0))
