import math

import numpy as np
import pytest

from oupairs.backtest import (
    BacktestConfig,
    PairDay,
    TradePlan,
    execute_day,
    plan_day,
    run_backtest,
)
from oupairs.fpt import Levels, cycle_mean, cycle_var
from oupairs.model import NoisyOuParams, OuParams, TickSeries
from oupairs.signals import SignalPolicy
from oupairs.sim import SimConfig, equidistant_grid, simulate

BASE = OuParams(0.1, 10.0, 1e-4)
NOISY = NoisyOuParams(BASE, 1e-8)


def _plan(entry, exit_, cost=0.0015, mean_rate=0.01):
    return TradePlan(True, "", SignalPolicy(entry, exit_, cost), mean_rate, 0.0)


def _sawtooth(levels, n=50):
    # climbs over the upper level, falls under the lower one, ends flat
    upper, lower = levels
    t = np.linspace(0.0, 1.0, n)
    v = np.concatenate(
        [
            np.linspace(0.0, upper + 0.001, n // 3),
            np.linspace(upper, lower - 0.001, n // 3),
            np.full(n - 2 * (n // 3), (upper + lower) / 2),
        ]
    )
    return TickSeries(t, v[:n])


class TestPlanDay:
    def test_infinite_threshold_skips(self):
        cfg = BacktestConfig(cost=0.0015, eta=5e-5, zeta=math.inf, history=132)
        plan = plan_day(BASE, cfg)
        assert not plan.traded and "threshold" in plan.reason

    def test_zero_threshold_small_cost_trades(self):
        cfg = BacktestConfig(cost=1e-5, eta=math.inf, zeta=0.0, history=132)
        plan = plan_day(BASE, cfg)
        assert plan.traded
        assert plan.policy.exit < BASE.mu < plan.policy.entry

    def test_decision_matches_grid_search_chain(self):
        # independent route: dimensionless transform by hand + grid search
        cost, eta, zeta = 0.0015, 5e-5, 0.009
        cfg = BacktestConfig(cost=cost, eta=eta, zeta=zeta, history=132)
        plan = plan_day(BASE, cfg)

        scale = math.sqrt(2 * BASE.tau / BASE.sigma2)
        cost_t, eta_t = cost * scale, 2 * eta / BASE.sigma2
        best = 0.0
        for a in np.arange(0.05, 3.0, 0.01):
            for b in np.arange(-3.0, a - 1e-12, 0.01):
                lv = Levels(a, b)
                et = cycle_mean(lv)
                if et <= 0:
                    continue
                profit = a - b - cost_t
                if profit * profit * cycle_var(lv) / et**3 > eta_t:
                    continue
                best = max(best, profit / et)
        z_m_grid = math.sqrt(BASE.tau * BASE.sigma2 / 2) * best
        assert plan.traded == (z_m_grid >= zeta)
        if plan.traded:
            assert plan.mean_rate == pytest.approx(z_m_grid, rel=0.02)

    def test_degenerate_forecast_skips(self):
        cfg = BacktestConfig()
        plan = plan_day(OuParams(0.1, 10.0, 1e-30), cfg)
        # optimizer may find nothing tradable at an absurd dimensionless cost
        assert not plan.traded


class TestExecuteDay:
    def test_no_crossing_no_trades(self):
        plan = _plan(0.02, -0.02)
        spread = TickSeries(np.linspace(0, 1, 20), np.zeros(20))
        result = execute_day(plan, spread)
        assert result.n_trades == 0 and result.profit == 0.0

    def test_sawtooth_round_trip(self):
        # entry at the observed crossing, exit at the lower level; the fills
        # land exactly on the planned levels here
        upper, lower = 0.005, -0.005
        times = np.linspace(0, 1, 7)
        values = np.array([0.0, upper, 0.0, lower, 0.0, 0.0, 0.0])
        plan = _plan(upper, lower, cost=0.0015)
        result = execute_day(plan, TickSeries(times, values))
        assert result.n_trades >= 1
        first = result.trades[0]
        assert not first.forced
        assert first.pnl == pytest.approx(upper - lower - 0.0015, rel=1e-12)
        assert first.pnl == pytest.approx(0.0085, rel=1e-12)

    def test_switching_and_forced_close(self):
        upper, lower = 0.01, -0.01
        times = np.linspace(0, 1, 9)
        values = np.array([0.0, 0.012, -0.011, 0.013, -0.012, 0.0, 0.0, 0.0, 0.0])
        plan = _plan(upper, lower, cost=0.001)
        result = execute_day(plan, TickSeries(times, values))
        # short at 0.012, switch at -0.011, switch at 0.013, switch at -0.012,
        # forced close of the long position at 0.0
        assert result.n_trades == 4
        assert result.trades[-1].forced
        assert result.forced_close_pnl == pytest.approx(0.0 - (-0.012) - 0.001, rel=1e-12)
        expected = (
            (0.012 - (-0.011) - 0.001)
            + (0.013 - (-0.011) - 0.001)
            + (0.013 - (-0.012) - 0.001)
            + (0.0 - (-0.012) - 0.001)
        )
        assert result.profit == pytest.approx(expected, rel=1e-12)

    def test_accounting_identity(self):
        plan = _plan(0.003, -0.003, cost=0.0005)
        _, observed = simulate(SimConfig(NOISY, equidistant_grid(5000), 17))
        shifted = TickSeries(observed.times, observed.values - BASE.mu)
        result = execute_day(plan, shifted)
        assert result.profit == pytest.approx(sum(t.pnl for t in result.trades), abs=1e-15)
        recomputed = sum(
            (t.entry_value - t.exit_value if t.side == 1 else t.exit_value - t.entry_value)
            - plan.policy.cost
            for t in result.trades
        )
        assert result.profit == pytest.approx(recomputed, abs=1e-15)

    def test_untraded_plan(self):
        result = execute_day(TradePlan.skip("x"), _sawtooth((0.01, -0.01)))
        assert result.n_trades == 0 and result.profit == 0.0 and not result.traded

    def test_realized_profit_tracks_renewal_rate(self):
        # optimal plan under the true parameters; the switching execution
        # earns one round trip per half cycle, so the renewal prediction for
        # the executed strategy is twice the one-sided cycle rate
        cfg = BacktestConfig(cost=0.0015, eta=5e-5, zeta=0.0, history=132)
        plan = plan_day(BASE, cfg)
        assert plan.traded
        profits = []
        for rep in range(200):
            _, observed = simulate(
                SimConfig(NOISY, equidistant_grid(23400), 23), path_index=rep
            )
            profits.append(execute_day(plan, observed).profit)
        assert np.mean(profits) == pytest.approx(2.0 * plan.mean_rate, rel=0.15)


def _make_days(n_days, seed, params=NOISY, n_ticks=780):
    rng = np.random.default_rng(seed)
    days = []
    open_value = params.mu
    for day in range(n_days):
        latent, observed = simulate(
            SimConfig(params, equidistant_grid(n_ticks), seed, init_value=open_value),
            path_index=day,
        )
        days.append(PairDay(day, float(observed.values[0]), params.ou, observed))
        open_value = float(latent.values[-1]) + rng.normal(0, 0.001)
    return days


class TestRunBacktest:
    def test_insufficient_history_rejected(self):
        days = _make_days(30, 5)
        with pytest.raises(ValueError):
            run_backtest({"P": days}, BacktestConfig(history=40))

    def test_deterministic(self):
        days = _make_days(30, 7)
        cfg = BacktestConfig(cost=0.0015, eta=5e-5, zeta=0.0, history=23)
        r1 = run_backtest({"P": days}, cfg, zeta_grid=[0.0, 0.01])
        r2 = run_backtest({"P": days}, cfg, zeta_grid=[0.0, 0.01])
        assert [(r.zeta, r.avg_daily_profit, r.avg_daily_trades) for r in r1.rows] == [
            (r.zeta, r.avg_daily_profit, r.avg_daily_trades) for r in r2.rows
        ]

    def test_zeta_monotone_trading_activity(self):
        days = _make_days(40, 11)
        cfg = BacktestConfig(cost=0.0005, eta=math.inf, zeta=0.0, history=23)
        zetas = [0.0, 0.001, 0.005, 0.02, 0.1, 1.0]
        report = run_backtest({"P": days}, cfg, zeta_grid=zetas)
        trades = [r.avg_daily_trades for r in sorted(report.rows, key=lambda r: r.zeta)]
        assert all(a >= b for a, b in zip(trades, trades[1:]))
        assert trades[-1] == 0.0  # large threshold kills all activity

    def test_no_lookahead_day_spread_never_enters_planning(self):
        days = _make_days(30, 13)
        cfg = BacktestConfig(cost=0.0015, eta=5e-5, zeta=0.0, history=23)
        base = run_backtest({"P": days}, cfg)

        probe = int(days[25].day)
        mutated = list(days)
        distorted = TickSeries(
            days[25].spread.times, days[25].spread.values * 3.0 + 0.05
        )
        mutated[25] = PairDay(probe, days[25].open_value, days[25].params, distorted)
        changed = run_backtest({"P": mutated}, cfg)

        plan_base = [e for e in base.day_log if e.day == probe][0]
        plan_changed = [e for e in changed.day_log if e.day == probe][0]
        # identical planning; execution on the mutated day may differ
        assert plan_base.entry == plan_changed.entry
        assert plan_base.exit == plan_changed.exit
        assert plan_base.mean_rate == plan_changed.mean_rate
        # later days unaffected (their planning inputs are fits and opens)
        later_base = [(e.entry, e.profit) for e in base.day_log if e.day > probe]
        later_changed = [(e.entry, e.profit) for e in changed.day_log if e.day > probe]
        assert later_base == later_changed
