"""Dimensionless reparametrization, renewal-theory strategy moments and the
constrained mean-variance selection of entry/exit signals.

A policy (entry a, exit b, round-trip cost c) on a spread with parameters
(mu, tau, sigma2) maps to the dimensionless system via the scale
``s = sqrt(2 tau / sigma2)``: levels center on mu and stretch by s, costs
stretch by s, time dilates by tau.  Profit-rate moments map back with
``Z_M = sqrt(tau sigma2 / 2) * Zm_t`` and ``Z_V = sigma2 / 2 * Zv_t``; the
variance cap maps as ``eta_t = 2 eta / sigma2``.

Renewal theory gives the per-unit-time moments of the cumulative profit
``(a - b - c) N_t`` of a cycle that repeats after expected duration E[T]:

    Zm = (a - b - c) / E[T]
    Zv = (a - b - c)^2 Var[T] / E[T]^3

The optimizer maximizes Zm subject to Zv <= eta_t on entry >= 0 >= ... >=
exit - entry, using a penalized simplex search with multistart; the
symmetric structure of the optimum (exit = -entry) is verified by tests,
never imposed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateInputError, UndefinedMomentsError
from .fpt import SERIES_DOMAIN_MAX, Levels, cycle_mean, cycle_var
from .model import OuParams

__all__ = [
    "SignalPolicy",
    "StrategyMoments",
    "OptResult",
    "level_scale",
    "to_dimensionless",
    "from_dimensionless",
    "cost_to_dimensionless",
    "eta_to_dimensionless",
    "moments_to_original",
    "strategy_moments",
    "optimize_signals",
    "bias_impact",
]


@dataclass(frozen=True)
class SignalPolicy:
    """Entry level, exit level and round-trip cost in log-spread units."""

    entry: float
    exit: float
    cost: float

    def __post_init__(self) -> None:
        if self.exit > self.entry:
            raise ValueError(f"exit {self.exit} must be <= entry {self.entry}")
        if self.cost < 0.0:
            raise ValueError(f"cost must be >= 0, got {self.cost}")


@dataclass(frozen=True)
class StrategyMoments:
    """Expected profit per unit time and its variance per unit time."""

    mean_rate: float
    var_rate: float

    def __post_init__(self) -> None:
        if self.var_rate < 0.0:
            raise ValueError(f"var_rate must be >= 0, got {self.var_rate}")


@dataclass(frozen=True)
class OptResult:
    levels: Levels  # dimensionless
    mean_rate: float  # dimensionless optimum
    var_rate: float
    binding: bool  # variance cap active at the optimum
    no_trade: bool  # no policy with positive expected profit exists

    @property
    def policy_width(self) -> float:
        return self.levels.entry - self.levels.exit


def level_scale(p: OuParams) -> float:
    """sqrt(2 tau / sigma2); converts centered spread units to dimensionless ones."""
    if p.sigma2 <= 0.0:
        raise DegenerateInputError("sigma2 must be > 0 for the dimensionless system")
    return math.sqrt(2.0 * p.tau / p.sigma2)


def cost_to_dimensionless(p: OuParams, cost: float) -> float:
    return cost * level_scale(p)


def eta_to_dimensionless(p: OuParams, eta: float) -> float:
    if math.isinf(eta):
        return math.inf
    if p.sigma2 <= 0.0:
        raise DegenerateInputError("sigma2 must be > 0 for the dimensionless system")
    return 2.0 * eta / p.sigma2


def to_dimensionless(p: OuParams, policy: SignalPolicy, eta: float) -> tuple[Levels, float, float]:
    """Map a policy and variance cap into the dimensionless system."""
    s = level_scale(p)
    levels = Levels((policy.entry - p.mu) * s, (policy.exit - p.mu) * s)
    return levels, policy.cost * s, eta_to_dimensionless(p, eta)


def from_dimensionless(p: OuParams, levels: Levels, cost_t: float) -> SignalPolicy:
    """Inverse of :func:`to_dimensionless` for the policy part."""
    s = level_scale(p)
    return SignalPolicy(levels.entry / s + p.mu, levels.exit / s + p.mu, cost_t / s)


def moments_to_original(p: OuParams, m: StrategyMoments) -> StrategyMoments:
    """Zm, Zv from dimensionless to per-day log-return units."""
    return StrategyMoments(
        math.sqrt(p.tau * p.sigma2 / 2.0) * m.mean_rate,
        p.sigma2 / 2.0 * m.var_rate,
    )


def strategy_moments(levels: Levels, cost_t: float) -> StrategyMoments:
    """Dimensionless profit-rate moments of the cycle defined by ``levels``."""
    if cost_t < 0.0:
        raise ValueError(f"cost must be >= 0, got {cost_t}")
    et = cycle_mean(levels)
    if et == 0.0:
        raise UndefinedMomentsError("zero-width cycle has undefined profit rates")
    profit = levels.entry - levels.exit - cost_t
    vt = cycle_var(levels)
    return StrategyMoments(profit / et, profit * profit * vt / et**3)


# -- optimizer -----------------------------------------------------------

_BOX = SERIES_DOMAIN_MAX
_STARTS = ((0.4, 0.8), (0.8, 1.6), (1.2, 2.4), (1.8, 3.6), (2.6, 5.2))
_PENALTY_ROUNDS = (1e4, 1e8, 1e12)


def _rates(entry: float, width: float, cost_t: float) -> tuple[float, float]:
    levels = Levels(entry, entry - width)
    et = cycle_mean(levels)
    if et <= 0.0:
        return -math.inf, math.inf
    profit = entry - (entry - width) - cost_t
    vt = cycle_var(levels)
    return profit / et, profit * profit * vt / et**3


def _objective(x: np.ndarray, cost_t: float, eta_t: float, weight: float) -> float:
    entry, width = float(x[0]), float(x[1])
    pen = 0.0
    # fold infeasible proposals back into the box with a growing penalty
    if entry < 0.0:
        pen += weight * entry * entry
        entry = 0.0
    if entry > _BOX:
        pen += weight * (entry - _BOX) ** 2
        entry = _BOX
    if width < 0.0:
        pen += weight * width * width
        width = 0.0
    max_width = entry + _BOX
    if width > max_width:
        pen += weight * (width - max_width) ** 2
        width = max_width
    if width == 0.0:
        return 1e6 + pen  # zero-width cycle: undefined rates
    zm, zv = _rates(entry, width, cost_t)
    if not math.isfinite(zm):
        return 1e6 + pen
    if math.isfinite(eta_t) and zv > eta_t:
        pen += weight * (zv - eta_t) ** 2
    return -zm + pen


def optimize_signals(cost_t: float, eta_t: float) -> OptResult:
    """Maximize the dimensionless profit rate under the variance cap.

    Returns the no-trade sentinel (zero-width levels, zero rates) instead of
    raising when no policy earns a positive expected profit.
    """
    if cost_t < 0.0:
        raise ValueError(f"cost must be >= 0, got {cost_t}")
    if not eta_t > 0.0:
        raise ValueError(f"eta must be > 0, got {eta_t}")

    starts = [np.array(s) for s in _STARTS]
    # a cost-aware start: the profitable region needs width > cost
    starts.append(np.array([min(0.6 + 0.75 * cost_t, _BOX * 0.9), min(1.2 + 1.5 * cost_t, _BOX)]))

    best_x, best_f = None, math.inf
    for w_idx, weight in enumerate(_PENALTY_ROUNDS):
        seeds = starts if w_idx == 0 else [best_x]
        round_best_x, round_best_f = best_x, math.inf
        for x0 in seeds:
            res = minimize(
                _objective,
                x0,
                args=(cost_t, eta_t, weight),
                method="Nelder-Mead",
                options={"xatol": 1e-8, "fatol": 1e-14, "maxiter": 2000, "maxfev": 4000},
            )
            if res.fun < round_best_f:
                round_best_x, round_best_f = res.x, res.fun
        best_x, best_f = round_best_x, round_best_f
        if math.isinf(eta_t):
            break  # no constraint: one round suffices
    # final polish from the incumbent with a tight simplex
    polish = minimize(
        _objective,
        best_x,
        args=(cost_t, eta_t, _PENALTY_ROUNDS[-1]),
        method="Nelder-Mead",
        options={
            "xatol": 1e-10,
            "fatol": 1e-16,
            "maxiter": 2000,
            "initial_simplex": best_x + np.array([[0.0, 0.0], [1e-4, 0.0], [0.0, 1e-4]]),
        },
    )
    if polish.fun < best_f:
        best_x = polish.x

    entry = float(np.clip(best_x[0], 0.0, _BOX))
    width = float(np.clip(best_x[1], 0.0, entry + _BOX))
    if width <= 0.0:
        return OptResult(Levels(0.0, 0.0), 0.0, 0.0, False, True)
    zm, zv = _rates(entry, width, cost_t)
    if not math.isfinite(zm) or zm <= 0.0:
        return OptResult(Levels(0.0, 0.0), 0.0, 0.0, False, True)
    binding = math.isfinite(eta_t) and zv >= eta_t * (1.0 - 1e-4)
    return OptResult(Levels(entry, entry - width), zm, zv, binding, False)


def bias_impact(
    true_p: OuParams, biased_p: OuParams, cost: float, eta: float
) -> tuple[float, float]:
    """(claimed, actual) expected profit rates of the policy chosen under
    ``biased_p``.

    The optimizer runs with the biased parameters; its claimed rate is mapped
    back through the biased scales, while the actual rate re-evaluates the
    resulting policy under the true parameters.  Both are in original units.
    """
    opt = optimize_signals(cost_to_dimensionless(biased_p, cost), eta_to_dimensionless(biased_p, eta))
    if opt.no_trade:
        return 0.0, 0.0
    claimed = moments_to_original(biased_p, StrategyMoments(opt.mean_rate, opt.var_rate)).mean_rate
    policy = from_dimensionless(biased_p, opt.levels, cost_to_dimensionless(biased_p, cost))
    true_levels, true_cost_t, _ = to_dimensionless(true_p, policy, eta)
    actual_m = strategy_moments(true_levels, true_cost_t)
    actual = moments_to_original(true_p, actual_m).mean_rate
    return claimed, actual
