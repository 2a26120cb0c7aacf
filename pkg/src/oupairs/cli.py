"""Command-line orchestration of the pipeline stages.

Every output file starts with a metadata comment line carrying the package
version, the RNG scheme, the seed and a hash of the effective configuration,
so identical invocations produce byte-identical files.  Stages are pipeable:
each consumes the documented CSV/JSON of the previous one.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, estimate, study
from .backtest import BacktestConfig, PairDay, run_backtest
from .ingest import build_spread, clean, read_raw_csv, remove_jump_outliers
from .model import NoisyOuParams, OuParams, TickSeries
from .sim import RNG_SCHEME, SimConfig, equidistant_grid, sample_poisson_grid, simulate
from .signals import (
    StrategyMoments,
    cost_to_dimensionless,
    eta_to_dimensionless,
    from_dimensionless,
    moments_to_original,
    optimize_signals,
)

_FLOAT_FMT = "{:.17g}"


def _g(x: float) -> str:
    return _FLOAT_FMT.format(float(x))


def _config_hash(args: argparse.Namespace) -> str:
    payload = {k: str(v) for k, v in sorted(vars(args).items()) if k != "func"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]


def _meta_line(args: argparse.Namespace) -> str:
    seed = getattr(args, "seed", "-")
    return f"# oupairs={__version__} rng={RNG_SCHEME} seed={seed} config={_config_hash(args)}"


def _write_table(path, args, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(_meta_line(args) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_g(c) if isinstance(c, float) else str(c) for c in row) + "\n")


def _read_series_csv(path) -> TickSeries:
    times, values = [], []
    with open(path) as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line.lower().replace(" ", "") != "time,value":
                    raise ValueError(f"{path}: expected header 'time,value', got {line!r}")
                header_seen = True
                continue
            a, b = line.split(",")
            times.append(float(a))
            values.append(float(b))
    return TickSeries(np.array(times), np.array(values))


def _fit_record(fit: estimate.OuFit, args, series: TickSeries) -> dict:
    p = fit.params
    return {
        "meta": {"oupairs": __version__, "config": _config_hash(args)},
        "method": fit.method,
        "params": {"mu": p.mu, "tau": p.tau, "sigma2": p.sigma2, "omega2": p.omega2},
        "loglik": fit.loglik,
        "n_used": fit.n_used,
        "converged": fit.converged,
        "diagnostics": fit.diagnostics,
        "day": args.day,
        "open": float(series.values[0]),
    }


# -- subcommands -----------------------------------------------------------


def _cmd_simulate(args) -> int:
    params = NoisyOuParams(OuParams(args.mu, args.tau, args.sigma2), args.omega2)
    if args.grid == "poisson":
        grid = sample_poisson_grid(args.n, args.seed, index=args.path_index)
    else:
        grid = equidistant_grid(args.n)
    init = None if args.init == "stationary" else float(args.init)
    latent, observed = simulate(SimConfig(params, grid, args.seed, init), args.path_index)
    _write_table(args.output, args, ["time", "value"], zip(observed.times, observed.values))
    if args.latent_output:
        _write_table(args.latent_output, args, ["time", "value"], zip(latent.times, latent.values))
    return 0


def _cmd_clean(args) -> int:
    ticks = read_raw_csv(args.input)
    series, report = clean(ticks, args.exchange)
    _write_table(args.output, args, ["time", "value"], zip(series.times, series.values))
    with open(args.report, "w") as fh:
        json.dump(
            {
                "meta": {"oupairs": __version__, "config": _config_hash(args)},
                "input_count": report.input_count,
                "deleted_per_rule": list(report.deleted),
                "retained": report.retained,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return 0


_METHOD_MAP = {
    "mom": lambda ts: estimate.mom_fit(ts),
    "mom-nr": lambda ts: estimate.mom_nr_fit(ts),
    "ar": lambda ts: estimate.ar_css_fit(ts),
    "arma-nr": lambda ts: estimate.arma_nr_css_fit(ts),
    "mle": lambda ts: estimate.mle_fit(ts, robust=False),
    "mle-nr": lambda ts: estimate.mle_fit(ts, robust=True),
}


def _cmd_estimate(args) -> int:
    series = _read_series_csv(args.input)
    used = series if args.grid == "tick" else estimate.aggregate_previous_tick(series)
    if args.jump_filter > 0.0:
        init = estimate.auto_init(used)
        used, _ = remove_jump_outliers(used, init, args.jump_filter)
    if args.method == "rv":
        rv = estimate.realized_variance(used)
        record = {
            "meta": {"oupairs": __version__, "config": _config_hash(args)},
            "method": "RV",
            "params": {"mu": None, "tau": None, "sigma2": rv, "omega2": None},
            "loglik": None,
            "n_used": len(used),
            "converged": True,
            "diagnostics": {},
            "day": args.day,
            "open": float(series.values[0]),
        }
    else:
        record = _fit_record(_METHOD_MAP[args.method](used), args, series)
    out = json.dumps(record, sort_keys=True)
    if args.output:
        with open(args.output, "a" if args.append else "w") as fh:
            fh.write(out + "\n")
    else:
        print(out)
    return 0


def _read_fit_records(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _history_from_records(records: list[dict]):
    from .forecast import DailyParamHistory

    rows = sorted(
        (r for r in records if r.get("params", {}).get("tau") is not None),
        key=lambda r: r["day"],
    )
    return DailyParamHistory(
        np.array([r["day"] for r in rows], dtype=float),
        np.array([r["params"]["mu"] for r in rows]),
        np.array([r["params"]["tau"] for r in rows]),
        np.array([r["params"]["sigma2"] for r in rows]),
        np.array([r["open"] for r in rows]),
    )


def _cmd_forecast(args) -> int:
    from .forecast import DailyParamHistory, fit_models, forecast_day

    hist = _history_from_records(_read_fit_records(args.fits))
    rows = []
    for t in range(args.window, len(hist)):
        window_hist = DailyParamHistory(
            hist.days[t - args.window : t],
            hist.mu[t - args.window : t],
            hist.tau[t - args.window : t],
            hist.sigma2[t - args.window : t],
            hist.open_value[t - args.window : t],
        )
        models = fit_models(window_hist, args.window)
        fc = forecast_day(models, window_hist, float(hist.open_value[t]))
        rows.append((int(hist.days[t]), fc.mu, fc.tau, fc.sigma2))
    _write_table(args.output, args, ["day", "mu", "tau", "sigma2"], rows)
    return 0


def _cmd_optimize(args) -> int:
    p = OuParams(args.mu, args.tau, args.sigma2)
    cost_t = cost_to_dimensionless(p, args.cost)
    eta_t = eta_to_dimensionless(p, args.eta)
    opt = optimize_signals(cost_t, eta_t)
    policy = from_dimensionless(p, opt.levels, cost_t)
    m = moments_to_original(p, StrategyMoments(opt.mean_rate, opt.var_rate))
    out = {
        "meta": {"oupairs": __version__, "config": _config_hash(args)},
        "dimensionless": {
            "entry": opt.levels.entry,
            "exit": opt.levels.exit,
            "cost": cost_t,
            "eta": None if math.isinf(eta_t) else eta_t,
            "mean_rate": opt.mean_rate,
            "var_rate": opt.var_rate,
        },
        "original": {
            "entry": policy.entry,
            "exit": policy.exit,
            "cost": args.cost,
            "eta": None if math.isinf(args.eta) else args.eta,
            "mean_rate": m.mean_rate,
            "var_rate": m.var_rate,
        },
        "binding": opt.binding,
        "no_trade": opt.no_trade,
    }
    print(json.dumps(out, sort_keys=True))
    return 0


def _cmd_frontier(args) -> int:
    p = OuParams(args.mu, args.tau, args.sigma2)
    cost_t = cost_to_dimensionless(p, args.cost)
    etas = [float(e) for e in args.eta_grid.split(",")]
    rows = []
    for eta in etas:
        opt = optimize_signals(cost_t, eta_to_dimensionless(p, eta))
        policy = from_dimensionless(p, opt.levels, cost_t)
        m = moments_to_original(p, StrategyMoments(opt.mean_rate, opt.var_rate))
        rows.append((eta, m.mean_rate, policy.entry, policy.exit))
    _write_table(args.output, args, ["eta", "z_m_star", "a_star", "b_star"], rows)
    return 0


def _parse_float_list(text: str) -> list[float]:
    return [math.inf if tok.strip().lower() in ("inf", "infinity") else float(tok) for tok in text.split(",")]


def _read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _cmd_backtest(args) -> int:
    conf = _read_config_file(args.config)
    data_dir = Path(conf["data"])
    pairs = [p.strip() for p in conf["pairs"].split(",")]
    cost = float(conf.get("cost", "0.0015"))
    etas = _parse_float_list(conf.get("eta", "5e-5"))
    zetas = _parse_float_list(conf.get("zeta", "0"))
    history = int(conf.get("history", "132"))
    out_dir = Path(conf.get("out", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    data = {}
    for pair in pairs:
        records = _read_fit_records(data_dir / pair / "fits.jsonl")
        days = []
        for r in sorted(records, key=lambda r: r["day"]):
            spread = _read_series_csv(data_dir / pair / f"spread_{r['day']}.csv")
            days.append(
                PairDay(
                    int(r["day"]),
                    float(r["open"]),
                    OuParams(r["params"]["mu"], r["params"]["tau"], r["params"]["sigma2"]),
                    spread,
                )
            )
        data[pair] = days

    cfg = BacktestConfig(cost=cost, eta=etas[0], zeta=zetas[0], history=history)
    report = run_backtest(data, cfg, zeta_grid=zetas, eta_list=etas)
    _write_table(
        out_dir / "report.csv",
        args,
        ["pair", "zeta", "eta", "avg_daily_profit", "avg_daily_trades"],
        [(r.pair, r.zeta, r.eta, r.avg_daily_profit, r.avg_daily_trades) for r in report.rows],
    )
    _write_table(
        out_dir / "trades.csv",
        args,
        ["pair", "day", "eta", "entry_time", "exit_time", "side", "entry_value", "exit_value", "pnl", "forced"],
        [
            (pair, day, eta, tr.entry_time, tr.exit_time, tr.side, tr.entry_value, tr.exit_value, tr.pnl, int(tr.forced))
            for pair, day, eta, tr in report.trades
        ],
    )
    return 0


def _cmd_simstudy(args) -> int:
    params = NoisyOuParams(OuParams(args.mu, args.tau, args.sigma2), args.omega2)
    methods = study.STUDY_METHODS if args.methods == "all" else tuple(args.methods.split(","))
    cells = study.simulation_study(
        params, args.reps, expected_count=args.n, seed=args.seed, methods=methods, jobs=args.jobs
    )
    _write_table(
        args.output, args, ["method", "param", "mae"], [(c.method, c.param, c.mae) for c in cells]
    )
    return 0


def _cmd_biasplot(args) -> int:
    base = NoisyOuParams(OuParams(args.mu, args.tau, args.sigma2), 0.0)
    omega2s = [float(w) for w in args.omega2_list.split(",")]
    ns = [int(n) for n in args.n_list.split(",")]
    rows = study.bias_table(base, omega2s, ns)
    _write_table(args.output, args, ["n", "omega2", "tau_x", "sigma2_x"], rows)
    return 0


def _cmd_signature(args) -> int:
    series = _read_series_csv(args.input)
    ks = [int(k) for k in args.k_list.split(",")]
    rows = study.signature_table(series, ks)
    _write_table(args.output, args, ["k", "n_used", "sigma2_mle", "sigma2_mle_nr"], rows)
    return 0


# -- parser ----------------------------------------------------------------


def _add_params(p: argparse.ArgumentParser, noise: bool = True) -> None:
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    if noise:
        p.add_argument("--omega2", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(prog="oupairs", description=__doc__)
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one noisy day and write time,value CSV")
    _add_params(p)
    p.add_argument("--n", type=int, default=23400, help="expected tick count (grid size)")
    p.add_argument("--grid", choices=["poisson", "equidistant"], default="poisson")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--init", default="stationary", help="'stationary' or a fixed start value")
    p.add_argument("--output", required=True)
    p.add_argument("--latent-output", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("clean", help="apply the 8 cleaning rules to raw ticks")
    p.add_argument("--input", required=True)
    p.add_argument("--exchange", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_clean)

    p = sub.add_parser("estimate", help="fit one series, print/append a JSON record")
    p.add_argument("--method", choices=sorted([*list(_METHOD_MAP), "rv"]), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--grid", choices=["tick", "1min"], default="tick")
    p.add_argument("--day", type=int, default=0)
    p.add_argument("--jump-filter", type=float, default=0.0, help="fraction of low-likelihood ticks to drop")
    p.add_argument("--output", default=None)
    p.add_argument("--append", action="store_true")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("forecast", help="rolling one-day-ahead parameter forecasts")
    p.add_argument("--fits", required=True, help="JSONL of estimate records with day and open")
    p.add_argument("--window", type=int, default=132)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("optimize", help="optimal entry/exit levels for given parameters")
    _add_params(p, noise=False)
    p.add_argument("--cost", type=float, required=True)
    p.add_argument("--eta", type=float, default=math.inf)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("frontier", help="sweep the variance cap, write the efficient frontier")
    _add_params(p, noise=False)
    p.add_argument("--cost", type=float, required=True)
    p.add_argument("--eta-grid", required=True, help="comma-separated variance caps")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_frontier)

    p = sub.add_parser("backtest", help="run the daily strategy loop from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_backtest)

    p = sub.add_parser("simstudy", help="estimator comparison on simulated days")
    _add_params(p)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--n", type=int, default=23400)
    p.add_argument("--seed", type=int, default=20240901)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--methods", default="all")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_simstudy)

    p = sub.add_parser("biasplot", help="moment-estimator bias versus n and noise level")
    _add_params(p, noise=False)
    p.add_argument("--omega2-list", required=True)
    p.add_argument("--n-list", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_biasplot)

    p = sub.add_parser("signature", help="variance estimates versus subsampling interval")
    p.add_argument("--input", required=True)
    p.add_argument("--k-list", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_signature)

    return root


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
