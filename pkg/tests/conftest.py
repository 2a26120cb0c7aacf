from __future__ import annotations

import time

import numpy as np
import pytest

from oupairs.model import NoisyOuParams, OuParams

BASE_PARAMS = OuParams(1.0, 10.0, 1e-4)
NOISY_PARAMS = NoisyOuParams(BASE_PARAMS, 1e-8)

CYCLE_PAIRS = ((1.0, -1.0), (2.0, 0.0), (0.5, -2.0))


@pytest.fixture(scope="session")
def base_params() -> OuParams:
    return BASE_PARAMS


@pytest.fixture(scope="session")
def noisy_params() -> NoisyOuParams:
    return NOISY_PARAMS


@pytest.fixture(scope="session")
def mc_cycles():
    """Monte Carlo leg durations for the three reference level pairs.

    1e5 Euler paths at step 1e-4 per leg; several minutes of compute, shared
    by the first-passage tests and the acceptance suite.
    """
    from oracles import mc_cycle_legs

    out = {}
    t0 = time.monotonic()
    for i, (a, b) in enumerate(CYCLE_PAIRS):
        out[(a, b)] = mc_cycle_legs(a, b, n_paths=100_000, dt=1e-4, seed=773_000 + i)
    out["elapsed"] = time.monotonic() - t0
    return out


@pytest.fixture(scope="session")
def simstudy_cells():
    """50-replication estimator study at the reference parameters."""
    from oupairs.study import simulation_study

    t0 = time.monotonic()
    cells = simulation_study(
        NOISY_PARAMS,
        reps=50,
        expected_count=23400,
        seed=20240901,
        methods=(
            "1MIN-MOM",
            "1MIN-MOM-NR",
            "1MIN-AR",
            "1MIN-ARMA-NR",
            "TICK-MLE",
            "TICK-MLE-NR",
        ),
    )
    table = {(c.method, c.param): c.mae for c in cells}
    table["elapsed"] = time.monotonic() - t0
    return table


@pytest.fixture(scope="session")
def synth_backtest():
    """Full pipeline on 300 synthetic days: clean -> jump filter -> fits by
    both likelihood variants -> forecast -> optimize -> execute."""
    from synthpair import generate_pair

    from oupairs.backtest import BacktestConfig, PairDay, run_backtest
    from oupairs.estimate import mle_fit, auto_init
    from oupairs.ingest import build_spread, clean, remove_jump_outliers

    t0 = time.monotonic()
    days = generate_pair(300, seed=2025, ticks_per_day=11700)
    pair_nr, pair_mle = [], []
    truths = []
    for d in days:
        series_a, _ = clean(d.ticks_a, "N")
        series_b, _ = clean(d.ticks_b, "N")
        spread = build_spread(series_a, series_b)
        init = auto_init(spread)
        filtered, _ = remove_jump_outliers(spread, init, 0.01)
        fit_nr = mle_fit(filtered, robust=True, init=init)
        fit_plain = mle_fit(filtered, robust=False, init=init)
        open_value = float(spread.values[0])
        pair_nr.append(PairDay(d.day, open_value, fit_nr.params.ou, spread))
        pair_mle.append(PairDay(d.day, open_value, fit_plain.params.ou, spread))
        truths.append(d.params)
    estimation_elapsed = time.monotonic() - t0

    cfg = BacktestConfig(cost=0.0015, eta=5e-5, zeta=0.0, history=132)
    zetas = [0.0, 0.003, 0.009, 0.02, 0.05, 0.1, 0.3, 0.7]
    report_nr = run_backtest({"PAIR": pair_nr}, cfg, zeta_grid=zetas, eta_list=[5e-5])
    report_mle = run_backtest({"PAIR": pair_mle}, cfg, zeta_grid=zetas, eta_list=[5e-5])
    return {
        "zetas": zetas,
        "report_nr": report_nr,
        "report_mle": report_mle,
        "days_nr": pair_nr,
        "days_mle": pair_mle,
        "truths": truths,
        "estimation_elapsed": estimation_elapsed,
        "elapsed": time.monotonic() - t0,
    }
