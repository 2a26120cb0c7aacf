"""Daily strategy loop: estimate history, forecast, optimize, decide, execute.

For every evaluation day the trailing ``history`` days of per-day parameter
fits are turned into one-step-ahead forecasts (using the evaluation day's
opening value, which is known before trading).  Signal levels are optimized
under the variance cap ``eta``; the pair trades that day only if the
expected profit rate clears the threshold ``zeta``.  Execution switches
between short-spread and long-spread at the two levels and force-closes at
the last tick.

Planning physically never sees the evaluation day's intraday data: it is a
function of (history fits, opening value) only.  Profit accounting is exact:
each round trip books entry - exit - cost at observed fill values and the
report is recomputable from the trade log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DegenerateInputError
from .forecast import DailyParamHistory, fit_models, forecast_day
from .model import OuParams, TickSeries
from .signals import (
    OptResult,
    SignalPolicy,
    StrategyMoments,
    cost_to_dimensionless,
    eta_to_dimensionless,
    from_dimensionless,
    moments_to_original,
    optimize_signals,
)

__all__ = [
    "BacktestConfig",
    "PairDay",
    "Trade",
    "TradePlan",
    "DayResult",
    "BacktestReport",
    "plan_day",
    "execute_day",
    "run_backtest",
]


@dataclass(frozen=True)
class BacktestConfig:
    cost: float = 0.0015
    eta: float = 5e-5  # max allowed profit-rate variance; math.inf disables the cap
    zeta: float = 0.0  # min required profit rate to trade
    history: int = 132

    def __post_init__(self) -> None:
        if self.cost < 0.0 or self.zeta < 0.0:
            raise ValueError("cost and zeta must be >= 0")
        if self.history < 23:
            raise ValueError(f"history must be >= 23, got {self.history}")
        if not self.eta > 0.0:
            raise ValueError("eta must be > 0 (use math.inf to disable)")


@dataclass(frozen=True)
class PairDay:
    """One trading day of one pair: spread path, daily fit, opening value."""

    day: int
    open_value: float
    params: OuParams  # that day's estimated parameters (history input)
    spread: TickSeries


@dataclass(frozen=True)
class Trade:
    entry_time: float
    exit_time: float
    side: int  # +1 short-spread (entered at the upper level), -1 long-spread
    entry_value: float
    exit_value: float
    pnl: float
    forced: bool


@dataclass(frozen=True)
class TradePlan:
    traded: bool
    reason: str
    policy: Optional[SignalPolicy]
    mean_rate: float
    var_rate: float

    @classmethod
    def skip(cls, reason: str, mean_rate: float = 0.0) -> "TradePlan":
        return cls(False, reason, None, mean_rate, 0.0)


@dataclass(frozen=True)
class DayResult:
    traded: bool
    n_trades: int
    profit: float
    forced_close_pnl: float
    trades: tuple[Trade, ...] = ()

    def __post_init__(self) -> None:
        if not self.traded and (self.n_trades or self.profit):
            raise ValueError("untraded day must have zero trades and profit")


def plan_day(forecast: OuParams, cfg: BacktestConfig) -> TradePlan:
    """Optimize levels under the forecast and gate on the profit threshold."""
    if forecast.sigma2 <= 0.0:
        return TradePlan.skip("degenerate forecast: sigma2 <= 0")
    try:
        opt: OptResult = optimize_signals(
            cost_to_dimensionless(forecast, cfg.cost), eta_to_dimensionless(forecast, cfg.eta)
        )
    except DegenerateInputError:
        return TradePlan.skip("degenerate forecast")
    if opt.no_trade:
        return TradePlan.skip("no policy with positive expected profit")
    m = moments_to_original(forecast, StrategyMoments(opt.mean_rate, opt.var_rate))
    policy = from_dimensionless(forecast, opt.levels, cost_to_dimensionless(forecast, cfg.cost))
    if m.mean_rate < cfg.zeta:
        return TradePlan.skip(f"mean rate {m.mean_rate:.3g} below threshold", m.mean_rate)
    return TradePlan(True, "", policy, m.mean_rate, m.var_rate)


def execute_day(plan: TradePlan, spread: TickSeries) -> DayResult:
    """Event-driven scan of the day's spread under a two-sided switching policy.

    Entering happens at whichever level is hit first; at the opposite level
    the position is switched (close + reopen at the observed value); any open
    position is force-closed at the last tick.  Every close pays the full
    round-trip cost.
    """
    if not plan.traded or plan.policy is None:
        return DayResult(False, 0, 0.0, 0.0)
    upper, lower, cost = plan.policy.entry, plan.policy.exit, plan.policy.cost
    t, v = spread.times, spread.values
    n = t.shape[0]
    trades: list[Trade] = []
    pos = 0
    entry_i = -1
    i = 0
    while i < n:
        if pos == 0:
            hit = np.flatnonzero((v[i:] >= upper) | (v[i:] <= lower))
            if hit.shape[0] == 0:
                break
            i += int(hit[0])
            pos = 1 if v[i] >= upper else -1
            entry_i = i
        elif pos == 1:
            hit = np.flatnonzero(v[i:] <= lower)
            if hit.shape[0] == 0:
                break
            i += int(hit[0])
            pnl = v[entry_i] - v[i] - cost
            trades.append(Trade(t[entry_i], t[i], 1, v[entry_i], v[i], pnl, False))
            pos, entry_i = -1, i
        else:
            hit = np.flatnonzero(v[i:] >= upper)
            if hit.shape[0] == 0:
                break
            i += int(hit[0])
            pnl = v[i] - v[entry_i] - cost
            trades.append(Trade(t[entry_i], t[i], -1, v[entry_i], v[i], pnl, False))
            pos, entry_i = 1, i

    forced_pnl = 0.0
    if pos != 0:
        last = n - 1
        pnl = (v[entry_i] - v[last] if pos == 1 else v[last] - v[entry_i]) - cost
        trades.append(Trade(t[entry_i], t[last], pos, v[entry_i], v[last], pnl, True))
        forced_pnl = pnl

    profit = float(sum(tr.pnl for tr in trades))
    return DayResult(True, len(trades), profit, forced_pnl, tuple(trades))


@dataclass(frozen=True)
class DayLogEntry:
    pair: str
    day: int
    eta: float
    planned: bool
    reason: str
    entry: float
    exit: float
    mean_rate: float
    n_trades: int
    profit: float


@dataclass(frozen=True)
class ReportRow:
    pair: str
    zeta: float
    eta: float
    n_days: int
    avg_daily_profit: float
    avg_daily_trades: float


@dataclass
class BacktestReport:
    rows: list[ReportRow] = field(default_factory=list)
    day_log: list[DayLogEntry] = field(default_factory=list)
    trades: list[tuple[str, int, float, Trade]] = field(default_factory=list)  # pair, day, eta


def _forecast_for_day(history: Sequence[PairDay], next_open: float, window: int) -> OuParams:
    """Forecast from past days and the evaluation day's open; nothing else."""
    hist = DailyParamHistory(
        np.array([d.day for d in history], dtype=float),
        np.array([d.params.mu for d in history]),
        np.array([d.params.tau for d in history]),
        np.array([d.params.sigma2 for d in history]),
        np.array([d.open_value for d in history]),
    )
    models = fit_models(hist, window)
    return forecast_day(models, hist, next_open)


def run_backtest(
    data: Mapping[str, Sequence[PairDay]],
    cfg: BacktestConfig,
    zeta_grid: Optional[Sequence[float]] = None,
    eta_list: Optional[Sequence[float]] = None,
) -> BacktestReport:
    """Evaluate every pair-day after the warm-up history; sweep zeta and eta.

    The optimization depends on eta only, so each (day, eta) plan and its
    execution are shared across the zeta grid; zeta merely gates whether the
    day's result counts.  Aggregation is per (pair, zeta, eta): average daily
    profit and average daily number of trades over all evaluated days.
    """
    zetas = list(zeta_grid) if zeta_grid is not None else [cfg.zeta]
    etas = list(eta_list) if eta_list is not None else [cfg.eta]
    report = BacktestReport()

    for pair in sorted(data):
        days = sorted(data[pair], key=lambda d: d.day)
        if len(days) <= cfg.history:
            raise ValueError(
                f"pair {pair}: {len(days)} days of data cannot cover history={cfg.history}"
            )
        acc = {(z, e): [0.0, 0.0, 0] for z in zetas for e in etas}
        for i in range(cfg.history, len(days)):
            today = days[i]
            forecast = _forecast_for_day(days[i - cfg.history : i], today.open_value, cfg.history)
            for eta in etas:
                day_cfg = BacktestConfig(cfg.cost, eta, 0.0, cfg.history)
                plan = plan_day(forecast, day_cfg)
                result = execute_day(plan, today.spread)
                report.day_log.append(
                    DayLogEntry(
                        pair,
                        today.day,
                        eta,
                        plan.traded,
                        plan.reason,
                        plan.policy.entry if plan.policy else math.nan,
                        plan.policy.exit if plan.policy else math.nan,
                        plan.mean_rate,
                        result.n_trades,
                        result.profit,
                    )
                )
                for tr in result.trades:
                    report.trades.append((pair, today.day, eta, tr))
                for zeta in zetas:
                    cell = acc[(zeta, eta)]
                    cell[2] += 1
                    if plan.traded and plan.mean_rate >= zeta:
                        cell[0] += result.profit
                        cell[1] += result.n_trades
        for zeta in zetas:
            for eta in etas:
                profit, n_trades, n_days = acc[(zeta, eta)]
                report.rows.append(
                    ReportRow(pair, zeta, eta, n_days, profit / n_days, n_trades / n_days)
                )
    return report
