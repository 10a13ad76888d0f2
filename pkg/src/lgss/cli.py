"""Command-line entry point: filter | smooth | fit | backtest.

All inputs come from a single JSON config document (see CONFIG_KEYS);
``--seed`` and ``--output`` override the config. Outputs are CSV/JSON
files under the output directory. Exit codes: 0 success, 1 I/O or data
error, 2 usage error or unsupported combination.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import backtest as bt
from . import estimation, kalman, smoother
from .gaussian_core import Gaussian
from .lgssm import ModelParams, build_model, unconditional_cov_seq

CONFIG_KEYS = """\
config keys (JSON, all optional unless noted):
  data_path                   path to the bars CSV (required); header
                              date,open,high,low,close with ISO dates
  output_dir                  directory for all outputs (default "out")
  split_fraction              train fraction for chronological split (0.5)
  model.model_id              0 scalar | 1..4 two-state layouts (default 1)
  model.p                     parameter vector, length per model_id
                              (4, 5, 6, 11 or 15)
  model.dt                    time step for models 1-2 (default 1.0)
  strategy.signal_offset      dead-zone half-width in price units (1.0)
  strategy.profit_target_ticks  bracket target in ticks (30)
  strategy.stop_loss_ticks    bracket stop in ticks (30)
  strategy.literal_short      legacy one-sided short rule
                              (default false = symmetric dead zone)
  strategy.exit_on_opposite   exit at next open on an opposite signal
                              (default false)
  ma.short_period             short SMA period for the crossover baseline (5)
  ma.long_period              long SMA period (20)
  ma.offset                   crossover dead-zone offset in price units (0.5)
  ma.profit_target_ticks      bracket target in ticks (30)
  ma.stop_loss_ticks          bracket stop in ticks (30)
  ma.literal_short            one-sided short rule for the baseline (false)
  instrument.tick_size        price units per tick (0.25)
  instrument.tick_value       currency per tick per contract (12.5)
  instrument.commission       currency per trade side (1.55)
  cmaes.seed                  random seed for calibration (0)
  cmaes.lambda                population size (null = 4 + floor(3 ln n))
  cmaes.max_iter              iteration cap (60)
  cmaes.sigma                 initial step size (1.0)
  cmaes.penalty_weight        L1 weight on model parameters (0.001)
  em.max_iter                 EM iteration cap (200)
  em.tol                      EM |delta loglik| stop tolerance (1e-7)
"""

_DEFAULTS = {
    "model": {"model_id": 1, "p": [0.5, 0.1, 0.5, 1.0, 10.0], "dt": 1.0},
    "strategy": {"signal_offset": 1.0, "profit_target_ticks": 30,
                 "stop_loss_ticks": 30, "literal_short": False,
                 "exit_on_opposite": False},
    "ma": {"short_period": 5, "long_period": 20, "offset": 0.5,
           "profit_target_ticks": 30, "stop_loss_ticks": 30,
           "literal_short": False},
    "instrument": {"tick_size": 0.25, "tick_value": 12.5, "commission": 1.55},
    "split_fraction": 0.5,
    "cmaes": {"seed": 0, "lambda": None, "max_iter": 60, "sigma": 1.0,
              "penalty_weight": 1e-3},
    "em": {"max_iter": 200, "tol": 1e-7},
    "output_dir": "out",
}


class ConfigError(ValueError):
    """The config document is missing or malformed (usage error, exit 2)."""


@dataclasses.dataclass(frozen=True)
class Config:
    """Validated run configuration assembled from the JSON document."""

    data_path: str
    output_dir: Path
    split_fraction: float
    model: ModelParams
    strategy: dict
    ma: dict
    instrument: bt.InstrumentSpec
    cmaes: dict
    em: dict


def load_config(path: str, seed_override=None, output_override=None) -> Config:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if "data_path" not in raw:
        raise ConfigError("config is missing the required key 'data_path'")

    def section(name):
        merged = dict(_DEFAULTS[name])
        merged.update(raw.get(name, {}))
        return merged

    model_cfg = section("model")
    cmaes_cfg = section("cmaes")
    if seed_override is not None:
        cmaes_cfg["seed"] = seed_override
    out_dir = Path(output_override if output_override is not None
                   else raw.get("output_dir", _DEFAULTS["output_dir"]))
    try:
        model = ModelParams(p=tuple(model_cfg["p"]),
                            model_id=int(model_cfg["model_id"]),
                            dt=float(model_cfg["dt"]))
        inst_cfg = section("instrument")
        instrument = bt.InstrumentSpec(
            tick_size=float(inst_cfg["tick_size"]),
            tick_value=float(inst_cfg["tick_value"]),
            commission=float(inst_cfg["commission"]))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return Config(
        data_path=str(raw["data_path"]), output_dir=out_dir,
        split_fraction=float(raw.get("split_fraction",
                                     _DEFAULTS["split_fraction"])),
        model=model, strategy=section("strategy"), ma=section("ma"),
        instrument=instrument, cmaes=cmaes_cfg, em=section("em"))


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def _write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _warm_spec(config: Config, closes):
    spec = build_model(config.model)
    warm = bt._warm_start_mean(spec, float(closes[0]))
    return dataclasses.replace(spec, init=Gaussian(warm, spec.init.cov))


def _load_closes(config: Config):
    bars = bt.load_bars(config.data_path)
    if not bars:
        raise bt.DataError(f"no bars in {config.data_path}")
    return bars, np.array([b.close for b in bars])


def cmd_filter(config: Config) -> int:
    bars, closes = _load_closes(config)
    spec = _warm_spec(config, closes)
    result = kalman.kalman_filter(spec, closes)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    n = spec.state_dim
    header = (["t"] + [f"x_pred_{i}" for i in range(n)]
              + [f"x_post_{i}" for i in range(n)] + ["innovation"]
              + ["loglik_increment"])
    rows = [[s.t, *s.x_pred, *s.x_post, s.innovation[0], s.loglik_increment]
            for s in result.steps]
    _write_csv(config.output_dir / "filter.csv", header, rows)
    _write_json(config.output_dir / "filter_summary.json",
                {"total_loglik": result.total_loglik,
                 "n_steps": len(result.steps)})
    print(f"filtered {len(result.steps)} steps, "
          f"total loglik {result.total_loglik:.6f}")
    return 0


def cmd_smooth(config: Config, compare: bool = False) -> int:
    bars, closes = _load_closes(config)
    spec = _warm_spec(config, closes)
    result = kalman.kalman_filter(spec, closes)
    smooth = smoother.rts_smooth(result, spec)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    n = spec.state_dim
    header = (["t"] + [f"x_smooth_{i}" for i in range(n)]
              + [f"p_smooth_{i}{i}" for i in range(n)])
    rows = [[s.t, *s.x_smooth, *np.diag(s.p_smooth)] for s in smooth]
    _write_csv(config.output_dir / "smooth.csv", header, rows)
    summary = {"n_steps": len(smooth), "total_loglik": result.total_loglik}
    if compare:
        sig_seq = unconditional_cov_seq(spec, len(closes))
        mu_seq = _unconditional_means(spec, len(closes))
        back = smoother.mbf_smooth(spec, closes, p_uncond_seq=sig_seq)
        dev = 0.0
        for i, (fwd, bwd) in enumerate(zip(result.steps, back)):
            fused = smoother.fuse_posterior(fwd, bwd, sig_seq[i],
                                            mu_uncond=mu_seq[i])
            dev = max(dev, float(np.max(np.abs(fused.mean - smooth[i].x_smooth))))
        summary["rts_vs_fusion_max_abs_dev"] = dev
        print(f"rts_vs_fusion_max_abs_dev={dev:.3e}")
    _write_json(config.output_dir / "smooth_summary.json", summary)
    print(f"smoothed {len(smooth)} steps")
    return 0


def _unconditional_means(spec, horizon):
    mu = [np.asarray(spec.init.mean, dtype=float)]
    for t in range(2, horizon + 1):
        mu.append(spec.f_at(t) @ mu[-1]
                  + spec.b_at(t) @ np.ones(spec.control_dim) + spec.c_at(t))
    return mu


def cmd_fit(config: Config, method: str) -> int:
    bars, closes = _load_closes(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    if method == "em":
        if config.model.model_id != 0:
            print(f"error: EM fitting needs the scalar model (model_id 0); "
                  f"config has model_id {config.model.model_id}",
                  file=sys.stderr)
            return 2
        state = estimation.em_fit(closes, max_iter=int(config.em["max_iter"]),
                                  tol=float(config.em["tol"]))
        hist = state.loglik_history
        monotone = all(b >= a - 1e-9 for a, b in zip(hist, hist[1:]))
        _write_json(config.output_dir / "fitted_params.json",
                    {"sigma_v_sq": state.sigma_v_sq,
                     "sigma_w_sq": state.sigma_w_sq, "f": state.f,
                     "iterations": state.iteration,
                     "converged": state.converged,
                     "flags": list(state.flags)})
        _write_csv(config.output_dir / "em_trace.csv",
                   ["iteration", "loglik"],
                   [[i + 1, ll] for i, ll in enumerate(hist)])
        print(f"loglik trace non-decreasing: {str(monotone).lower()}")
        print(f"fitted f={state.f:.6f} sigma_w_sq={state.sigma_w_sq:.6f} "
              f"sigma_v_sq={state.sigma_v_sq:.6f}")
        return 0
    # CMA-ES calibration of the filter strategy on the training window
    train, _test = bt.split_train_test(bars, config.split_fraction)
    params = bt.calibrate(
        train, "kf", config.instrument,
        penalty_weight=float(config.cmaes["penalty_weight"]),
        cmaes_opts={"lambda": config.cmaes["lambda"],
                    "max_iter": int(config.cmaes["max_iter"]),
                    "sigma": float(config.cmaes["sigma"])},
        model_id=config.model.model_id or 1, dt=config.model.dt,
        seed=int(config.cmaes["seed"]),
        literal_short=bool(config.strategy["literal_short"]),
        exit_on_opposite=bool(config.strategy["exit_on_opposite"]))
    _write_json(config.output_dir / "calibrated_params.json",
                {"model_id": params.model.model_id,
                 "p": list(params.model.p), "dt": params.model.dt,
                 "signal_offset": params.signal_offset,
                 "profit_target_ticks": params.profit_target_ticks,
                 "stop_loss_ticks": params.stop_loss_ticks})
    print(f"calibrated {len(params.model.p)}-parameter model; "
          f"offset {params.signal_offset:.4f}, "
          f"target {params.profit_target_ticks}, "
          f"stop {params.stop_loss_ticks}")
    return 0


def _emit_backtest(config: Config, name: str, period: str, bars, params) -> bt.BacktestReport:
    if name == "kf":
        signals = bt.kf_trend_signals(
            bars, params, literal_short=bool(config.strategy["literal_short"]))
        target, stop = params.profit_target_ticks, params.stop_loss_ticks
        exit_opp = bool(config.strategy["exit_on_opposite"])
    else:
        signals = bt.ma_crossover_signals(
            bars, params.short_period, params.long_period, params.offset,
            literal_short=bool(config.ma["literal_short"]))
        target, stop = params.profit_target_ticks, params.stop_loss_ticks
        exit_opp = False
    report = bt.run_backtest(bars, signals, config.instrument, target, stop,
                             exit_on_opposite=exit_opp)
    tag = f"{name}_{period}"
    _write_json(config.output_dir / f"report_{tag}.json",
                bt.report_as_dict(report, jsonable=True))
    _write_csv(config.output_dir / f"blotter_{tag}.csv",
               ["entry_time", "exit_time", "direction", "entry_price",
                "exit_price", "exit_reason", "pnl"],
               [[t.entry_time.isoformat(), t.exit_time.isoformat(),
                 t.direction, t.entry_price, t.exit_price, t.exit_reason,
                 t.pnl] for t in report.trades])
    _write_csv(config.output_dir / f"equity_{tag}.csv",
               ["date", "equity"],
               [[b.timestamp.isoformat(), e]
                for b, e in zip(bars, report.equity_curve)])
    return report


def cmd_backtest(config: Config, compare: bool = False) -> int:
    bars, _closes = _load_closes(config)
    train, test = bt.split_train_test(bars, config.split_fraction)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    strat = config.strategy
    kf_params = bt.StrategyParams(
        model=config.model, signal_offset=float(strat["signal_offset"]),
        profit_target_ticks=int(strat["profit_target_ticks"]),
        stop_loss_ticks=int(strat["stop_loss_ticks"]))
    reports = {}
    for period, window in (("train", train), ("test", test)):
        reports[("kf", period)] = _emit_backtest(config, "kf", period, window,
                                                 kf_params)
    if compare:
        ma_cfg = config.ma
        ma_params = bt.MaParams(
            short_period=int(ma_cfg["short_period"]),
            long_period=int(ma_cfg["long_period"]),
            offset=float(ma_cfg["offset"]),
            profit_target_ticks=int(ma_cfg["profit_target_ticks"]),
            stop_loss_ticks=int(ma_cfg["stop_loss_ticks"]))
        for period, window in (("train", train), ("test", test)):
            reports[("ma", period)] = _emit_backtest(config, "ma", period,
                                                     window, ma_params)
        header = ["strategy"]
        for period in ("train", "test"):
            header += [f"{period}_{f}" for f in bt._SCALAR_FIELDS]
        rows = []
        for name in ("kf", "ma"):
            row = [name]
            for period in ("train", "test"):
                d = bt.report_as_dict(reports[(name, period)], jsonable=True)
                row += [d[f] for f in bt._SCALAR_FIELDS]
            rows.append(row)
        _write_csv(config.output_dir / "comparison.csv", header, rows)
    for (name, period), rep in reports.items():
        print(f"{name} {period}: net {rep.net_profit:.2f} "
              f"({rep.n_trades} trades, sharpe {rep.sharpe:.3f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lgss",
        description=("Linear-Gaussian state-space toolkit: filtering, "
                     "smoothing, parameter fitting and trend-following "
                     "backtests."),
        epilog=CONFIG_KEYS,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "filter": "run the forward filter over the close series",
        "smooth": "run the forward filter plus the backward smoother",
        "fit": "fit parameters (EM for the scalar model, CMA-ES calibration)",
        "backtest": "run the trading backtest on a train/test split",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text, epilog=CONFIG_KEYS,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--seed", type=int, default=None,
                       help="override cmaes.seed from the config")
        p.add_argument("--output", default=None,
                       help="override output_dir from the config")
        if name == "fit":
            p.add_argument("--method", choices=("em", "cmaes"), default="em",
                           help="fitting method (default em)")
        if name in ("smooth", "backtest"):
            p.add_argument("--compare", action="store_true",
                           help=("backtest: add the MA baseline and a "
                                 "comparison table; smooth: cross-check the "
                                 "RTS result against two-filter fusion"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed_override=args.seed,
                             output_override=args.output)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        if args.command == "filter":
            return cmd_filter(config)
        if args.command == "smooth":
            return cmd_smooth(config, compare=args.compare)
        if args.command == "fit":
            return cmd_fit(config, method=args.method)
        return cmd_backtest(config, compare=args.compare)
    except estimation.UnsupportedModel as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
