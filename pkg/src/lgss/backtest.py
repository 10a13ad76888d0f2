"""Market-data ingestion, trend-following signal rules, trade simulation
with profit target / stop loss, performance statistics, and CMA-ES
calibration of the combined strategy parameter vector.

Signal conventions: +1 long, 0 flat, -1 short, one value per bar; the
engine enters at the next bar's open, holds one contract, and ignores
signals while a position is open. Dead zones are symmetric by default
(short below the reference minus the offset); the one-sided variants
printed in the original trading rules are available via ``literal_short``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from datetime import date

import numpy as np

from . import _kernels
from .estimation import Objective, cmaes_minimize
from .lgssm import (MODEL_ARITY, LgssmSpec, ModelAssemblyWarning, ModelParams,
                    build_model)

LONG = "long"
SHORT = "short"

#: trade-exit reason strings indexed by the kernel's reason codes
EXIT_REASONS = ("target", "stop", "signal_flip", "end_of_data")

#: trading days per year used for all annualization
TRADING_DAYS = 252

#: notional account size used for percentage and return statistics
DEFAULT_CAPITAL = 100_000.0


class ParseError(ValueError):
    """A CSV row could not be parsed; the message carries the line number."""


class DataError(ValueError):
    """Parsed data violates an OHLC or timestamp invariant."""


class SplitError(ValueError):
    """A train/test split produced an empty side."""


@dataclass(frozen=True)
class Bar:
    """One daily OHLC bar."""

    timestamp: date
    open: float
    high: float
    low: float
    close: float

    def __post_init__(self):
        for name in ("open", "high", "low", "close"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} is not finite")
            object.__setattr__(self, name, v)
        if self.low > min(self.open, self.close):
            raise ValueError(
                f"low {self.low} above min(open, close) "
                f"{min(self.open, self.close)}")
        if self.high < max(self.open, self.close):
            raise ValueError(
                f"high {self.high} below max(open, close) "
                f"{max(self.open, self.close)}")


@dataclass(frozen=True)
class InstrumentSpec:
    """Contract economics: price increment, currency per increment per
    contract, and commission charged per trade side."""

    tick_size: float
    tick_value: float
    commission: float = 1.55

    def __post_init__(self):
        if self.tick_size <= 0 or self.tick_value <= 0 or self.commission < 0:
            raise ValueError("tick_size/tick_value must be positive, "
                             "commission non-negative")


@dataclass(frozen=True)
class Trade:
    """One executed round trip; ``pnl`` is net of both commission sides."""

    direction: str
    entry_time: date
    exit_time: date
    entry_price: float
    exit_price: float
    exit_reason: str
    pnl: float
    bars_held: int


@dataclass(frozen=True)
class StrategyParams:
    """Filter-strategy parameters: the model vector plus the signal dead
    zone (price units) and the bracket sizes (ticks)."""

    model: ModelParams
    signal_offset: float
    profit_target_ticks: int
    stop_loss_ticks: int

    def __post_init__(self):
        if self.signal_offset < 0:
            raise ValueError("signal_offset must be non-negative")
        if self.profit_target_ticks <= 0 or self.stop_loss_ticks <= 0:
            raise ValueError("target/stop ticks must be positive")


@dataclass(frozen=True)
class MaParams:
    """Moving-average-strategy parameters: crossover periods, dead-zone
    offset (price units) and bracket sizes (ticks)."""

    short_period: int
    long_period: int
    offset: float
    profit_target_ticks: int
    stop_loss_ticks: int

    def __post_init__(self):
        if not 1 <= self.short_period < self.long_period:
            raise ValueError("need long_period > short_period >= 1")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")
        if self.profit_target_ticks <= 0 or self.stop_loss_ticks <= 0:
            raise ValueError("target/stop ticks must be positive")


@dataclass(frozen=True)
class BacktestReport:
    """Performance statistics over one backtest run.

    Percentages and return-based statistics are relative to a notional
    account of ``DEFAULT_CAPITAL`` (overridable in :func:`run_backtest`);
    ``annualized_vol`` is the annualized standard deviation of daily
    equity returns in percent. ``profit_factor``, ``recovery_factor``,
    ``sortino`` and ``avg_win_over_avg_loss`` report +inf when their
    denominator is zero but the numerator is favorable. Winners and
    losers are classified by pre-commission trade P&L (zero counts as a
    loser), which makes
    net_profit = gross_profit + gross_loss - commission_total an identity.
    """

    net_profit: float
    gross_profit: float
    gross_loss: float
    n_trades: int
    avg_trade: float
    total_net_pct: float
    annualized_net_pct: float
    annualized_vol: float
    sharpe: float
    sortino: float
    max_drawdown: float
    recovery_factor: float
    percent_profitable: float
    profit_factor: float
    n_winners: int
    avg_winner: float
    largest_winner: float
    max_consec_winners: int
    n_losers: int
    avg_loser: float
    largest_loser: float
    max_consec_losers: int
    avg_win_over_avg_loss: float
    trades_per_day: float
    avg_bars_in_trade: float
    commission_total: float
    time_to_recover_days: int
    equity_curve: tuple
    trades: tuple = ()
    flags: tuple = ()


# ---------------------------------------------------------------------------
# data loading and splitting
# ---------------------------------------------------------------------------

_HEADER = "date,open,high,low,close"


def load_bars(source, fmt: str = "csv") -> tuple:
    """Read bars from a CSV path or open text stream.

    The header must be exactly ``date,open,high,low,close`` with ISO
    dates. Rows are validated (OHLC envelope, finite prices), sorted by
    timestamp, and duplicate timestamps rejected.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported format {fmt!r}")
    if hasattr(source, "read"):
        return _parse_bars(source)
    with open(source, newline="") as fh:
        return _parse_bars(fh)


def _parse_bars(fh) -> tuple:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("line 1: missing header row") from None
    if [c.strip() for c in header] != _HEADER.split(","):
        raise ParseError(f"line 1: header must be '{_HEADER}', "
                         f"got {','.join(header)!r}")
    bars = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise ParseError(f"line {lineno}: expected 5 fields, got {len(row)}")
        try:
            ts = date.fromisoformat(row[0].strip())
            o, h, l, c = (float(v) for v in row[1:])
        except ValueError as e:
            raise ParseError(f"line {lineno}: {e}") from None
        try:
            bars.append(Bar(timestamp=ts, open=o, high=h, low=l, close=c))
        except ValueError as e:
            raise DataError(f"line {lineno}: {e}") from None
    bars.sort(key=lambda b: b.timestamp)
    for prev, cur in zip(bars, bars[1:]):
        if cur.timestamp == prev.timestamp:
            raise DataError(f"duplicate timestamp {cur.timestamp}")
    return tuple(bars)


def split_train_test(bars, fraction: float) -> tuple:
    """Chronological split with ``floor(len(bars) * fraction)`` train bars."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be strictly between 0 and 1")
    bars = tuple(bars)
    n_train = int(math.floor(len(bars) * fraction))
    train, test = bars[:n_train], bars[n_train:]
    if not train or not test:
        raise SplitError(
            f"split of {len(bars)} bars at fraction {fraction} leaves an "
            "empty side")
    return train, test


def _bar_arrays(bars) -> tuple:
    opens = np.array([b.open for b in bars])
    highs = np.array([b.high for b in bars])
    lows = np.array([b.low for b in bars])
    closes = np.array([b.close for b in bars])
    stamps = [b.timestamp for b in bars]
    return opens, highs, lows, closes, stamps


# ---------------------------------------------------------------------------
# signal rules
# ---------------------------------------------------------------------------

def _warm_start_mean(spec: LgssmSpec, first_close: float) -> np.ndarray:
    """Initial state mean anchoring the predicted measurement at the first
    close: the minimum-norm solution of H x = close (=[close, 0, ...] for
    an H = [1, 0, ...] row)."""
    h = spec.h_at(1)
    return (np.linalg.pinv(h) @ np.array([first_close])).ravel()


def _predicted_measurements(spec: LgssmSpec, closes: np.ndarray) -> np.ndarray:
    if spec.obs_dim != 1:
        raise ValueError("trend signals need a scalar-measurement model")
    from .lgssm import GainFeedbackOffset
    c = spec.c_offset
    if isinstance(c, GainFeedbackOffset):
        scale, center, gf = c.scale, c.center, True
    else:
        n = spec.state_dim
        scale, center, gf = np.zeros(n), np.zeros(n), False
        if np.any(np.asarray(spec.c_at(2)) != 0.0):
            raise ValueError(
                "trend signals support zero or gain-feedback state offsets")
    return _kernels.kf_pred_meas(
        closes, spec.f_at(2), spec.h_at(1)[0], spec.q_at(2),
        float(spec.r_at(1)[0, 0]),
        _warm_start_mean(spec, float(closes[0])), spec.init.cov,
        scale, center, gf) + float(spec.d_at(1)[0])


def kf_trend_signals(bars, params: StrategyParams,
                     literal_short: bool = False) -> np.ndarray:
    """Per-bar desired direction from the filter's one-step-ahead forecast.

    After observing each close, the signal is +1 when the predicted next
    measurement is at least close + offset, -1 when it is at most
    close - offset (or close + offset under ``literal_short``, the
    legacy one-sided rule), else 0. The filter is
    warm-started so its first prediction sits at the first close.
    """
    if len(bars) < 2:
        raise ValueError("need at least 2 bars")
    closes = np.array([b.close for b in bars])
    spec = build_model(params.model)
    preds = _predicted_measurements(spec, closes)
    return _threshold_signals(preds, closes, params.signal_offset, literal_short)


def _threshold_signals(preds, closes, offset, literal_short) -> np.ndarray:
    long_cond = preds >= closes + offset
    if literal_short:
        short_cond = preds <= closes + offset
    else:
        short_cond = preds <= closes - offset
    return np.where(long_cond, 1, np.where(short_cond, -1, 0)).astype(np.int64)


def ma_crossover_signals(bars, short_period: int, long_period: int,
                         offset: float,
                         literal_short: bool = False) -> np.ndarray:
    """Moving-average crossover: +1 when SMA(short) > SMA(long) + offset,
    -1 when SMA(short) < SMA(long) - offset (or < SMA(long) + offset under
    ``literal_short``), 0 otherwise and before the long window fills.
    Equal periods are accepted and can never cross: with the symmetric
    dead zone the stream is all flat.
    """
    if not 1 <= short_period <= long_period:
        raise ValueError("need long_period >= short_period >= 1")
    closes = np.array([b.close for b in bars])
    n = closes.shape[0]
    sig = np.zeros(n, dtype=np.int64)
    if n < long_period:
        return sig
    sma_s = _sma(closes, short_period)
    sma_l = _sma(closes, long_period)
    start = long_period - 1
    s_al = sma_s[start - (short_period - 1):]
    l_al = sma_l
    long_cond = s_al > l_al + offset
    if literal_short:
        short_cond = s_al < l_al + offset
    else:
        short_cond = s_al < l_al - offset
    sig[start:] = np.where(long_cond, 1, np.where(short_cond, -1, 0))
    return sig


def _sma(x: np.ndarray, period: int) -> np.ndarray:
    c = np.cumsum(np.concatenate(([0.0], x)))
    return (c[period:] - c[:-period]) / period


# ---------------------------------------------------------------------------
# trade simulation and statistics
# ---------------------------------------------------------------------------

def run_backtest(bars, signals, instrument: InstrumentSpec, target_ticks,
                 stop_ticks, exit_on_opposite: bool = False,
                 capital: float = DEFAULT_CAPITAL) -> BacktestReport:
    """Simulate the signal stream bar by bar and compute the full report.

    Entries fill at the next bar's open; from the entry bar on, the stop
    is checked before the target inside each bar (conservative fill);
    one contract, one position at a time; an open position at the end of
    the data is closed at the last close.
    """
    bars = tuple(bars)
    signals = np.asarray(signals)
    if signals.shape[0] != len(bars):
        raise ValueError(
            f"{signals.shape[0]} signals for {len(bars)} bars")
    if target_ticks <= 0 or stop_ticks <= 0:
        raise ValueError("target/stop ticks must be positive")
    opens, highs, lows, closes, stamps = _bar_arrays(bars)
    (entry_idx, exit_idx, dirs, entry_px, exit_px, reasons, pnls,
     equity) = _kernels.simulate_trades(
        opens, highs, lows, closes, signals, instrument.tick_size,
        instrument.tick_value, instrument.commission, float(target_ticks),
        float(stop_ticks), exit_on_opposite)
    trades = tuple(
        Trade(direction=LONG if dirs[i] > 0 else SHORT,
              entry_time=stamps[entry_idx[i]], exit_time=stamps[exit_idx[i]],
              entry_price=float(entry_px[i]), exit_price=float(exit_px[i]),
              exit_reason=EXIT_REASONS[reasons[i]], pnl=float(pnls[i]),
              bars_held=int(exit_idx[i] - entry_idx[i]))
        for i in range(len(pnls)))
    return compute_stats(trades, equity, stamps,
                         commission_per_side=instrument.commission,
                         capital=capital)


def _consecutive(outcomes, target) -> int:
    best = run = 0
    for o in outcomes:
        run = run + 1 if o == target else 0
        best = max(best, run)
    return best


def _time_to_recover_days(equity, stamps) -> int:
    peak_val, peak_i, dipped = equity[0], 0, False
    longest = 0
    for i in range(1, len(equity)):
        if equity[i] < peak_val:
            dipped = True
        else:
            if dipped:
                longest = max(longest, (stamps[i] - stamps[peak_i]).days)
            peak_val, peak_i, dipped = equity[i], i, False
    if dipped:
        longest = max(longest, (stamps[-1] - stamps[peak_i]).days)
    return longest


def compute_stats(trades, equity_curve, stamps, commission_per_side: float,
                  capital: float = DEFAULT_CAPITAL) -> BacktestReport:
    """Aggregate a trade list and equity curve into a report.

    Sharpe and Sortino use daily equity changes over the notional
    ``capital`` with zero risk-free rate, annualized by sqrt(252);
    max_drawdown is the worst equity decline from a running peak.
    """
    equity = np.asarray(equity_curve, dtype=float)
    n_bars = equity.shape[0]
    if n_bars == 0 or len(stamps) != n_bars:
        raise ValueError("equity curve and calendar must align and be non-empty")
    trades = tuple(trades)
    n_trades = len(trades)
    flags: list[str] = []

    if n_trades == 0:
        return BacktestReport(
            net_profit=0.0, gross_profit=0.0, gross_loss=0.0, n_trades=0,
            avg_trade=0.0, total_net_pct=0.0, annualized_net_pct=0.0,
            annualized_vol=0.0, sharpe=0.0, sortino=0.0, max_drawdown=0.0,
            recovery_factor=0.0, percent_profitable=0.0, profit_factor=0.0,
            n_winners=0, avg_winner=0.0, largest_winner=0.0,
            max_consec_winners=0, n_losers=0, avg_loser=0.0,
            largest_loser=0.0, max_consec_losers=0,
            avg_win_over_avg_loss=0.0, trades_per_day=0.0,
            avg_bars_in_trade=0.0, commission_total=0.0,
            time_to_recover_days=0,
            equity_curve=tuple(float(v) for v in equity),
            trades=(), flags=("no_trades",))

    pnls = np.array([t.pnl for t in trades])
    gross = pnls + 2.0 * commission_per_side
    net_profit = float(pnls.sum())
    gross_profit = float(gross[gross > 0].sum())
    gross_loss = float(gross[gross < 0].sum())
    commission_total = 2.0 * commission_per_side * n_trades

    wins = gross > 0
    n_winners = int(wins.sum())
    n_losers = n_trades - n_winners          # zero-P&L trades count as losers
    avg_winner = gross_profit / n_winners if n_winners else 0.0
    avg_loser = gross_loss / n_losers if n_losers else 0.0
    largest_winner = float(gross.max()) if n_winners else 0.0
    largest_loser = float(gross.min()) if n_losers else 0.0
    if avg_loser != 0.0:
        win_loss = avg_winner / abs(avg_loser)
    else:
        win_loss = math.inf if avg_winner > 0 else 0.0
        if avg_winner > 0:
            flags.append("no_losing_trades")
    if gross_loss != 0.0:
        profit_factor = gross_profit / abs(gross_loss)
    else:
        profit_factor = math.inf if gross_profit > 0 else 0.0

    returns = np.diff(equity, prepend=0.0) / capital
    std = float(returns.std(ddof=1)) if n_bars > 1 else 0.0
    mean_r = float(returns.mean())
    if std > 0.0:
        sharpe = mean_r / std * math.sqrt(TRADING_DAYS)
    else:
        sharpe = 0.0
        flags.append("zero_variance_returns")
    downside = float(np.sqrt(np.mean(np.minimum(returns, 0.0) ** 2)))
    if downside > 0.0:
        sortino = mean_r / downside * math.sqrt(TRADING_DAYS)
    else:
        sortino = math.inf if mean_r > 0 else 0.0
        if mean_r > 0:
            flags.append("no_downside_returns")

    peaks = np.maximum.accumulate(equity)
    max_drawdown = float((equity - peaks).min())
    if max_drawdown != 0.0:
        recovery_factor = net_profit / abs(max_drawdown)
    else:
        recovery_factor = math.inf if net_profit > 0 else 0.0
        if net_profit > 0:
            flags.append("no_drawdown")

    total_net_pct = net_profit / capital * 100.0
    outcomes = ["w" if w else "l" for w in wins]
    return BacktestReport(
        net_profit=net_profit, gross_profit=gross_profit,
        gross_loss=gross_loss, n_trades=n_trades,
        avg_trade=net_profit / n_trades,
        total_net_pct=total_net_pct,
        annualized_net_pct=total_net_pct * TRADING_DAYS / n_bars,
        annualized_vol=std * math.sqrt(TRADING_DAYS) * 100.0,
        sharpe=sharpe, sortino=sortino, max_drawdown=max_drawdown,
        recovery_factor=recovery_factor,
        percent_profitable=100.0 * n_winners / n_trades,
        profit_factor=profit_factor, n_winners=n_winners,
        avg_winner=avg_winner, largest_winner=largest_winner,
        max_consec_winners=_consecutive(outcomes, "w"),
        n_losers=n_losers, avg_loser=avg_loser, largest_loser=largest_loser,
        max_consec_losers=_consecutive(outcomes, "l"),
        avg_win_over_avg_loss=win_loss,
        trades_per_day=n_trades / n_bars,
        avg_bars_in_trade=float(np.mean([t.bars_held for t in trades])),
        commission_total=commission_total,
        time_to_recover_days=_time_to_recover_days(equity, stamps),
        equity_curve=tuple(float(v) for v in equity),
        trades=trades, flags=tuple(flags))


_SCALAR_FIELDS = (
    "net_profit", "gross_profit", "gross_loss", "n_trades", "avg_trade",
    "total_net_pct", "annualized_net_pct", "annualized_vol", "sharpe",
    "sortino", "max_drawdown", "recovery_factor", "percent_profitable",
    "profit_factor", "n_winners", "avg_winner", "largest_winner",
    "max_consec_winners", "n_losers", "avg_loser", "largest_loser",
    "max_consec_losers", "avg_win_over_avg_loss", "trades_per_day",
    "avg_bars_in_trade", "commission_total", "time_to_recover_days")


def report_as_dict(report: BacktestReport, jsonable: bool = False) -> dict:
    """Flatten a report; with ``jsonable`` non-finite floats become strings
    and the equity curve a plain list (trade objects are omitted)."""
    out = {name: getattr(report, name) for name in _SCALAR_FIELDS}
    out["flags"] = list(report.flags)
    out["equity_curve"] = list(report.equity_curve)
    if jsonable:
        for key, val in out.items():
            if isinstance(val, float) and not math.isfinite(val):
                out[key] = str(val)
    else:
        out["trades"] = report.trades
    return out


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def _sharpe_from_equity(equity: np.ndarray, capital: float) -> float:
    if equity.shape[0] < 2:
        return 0.0
    returns = np.diff(equity, prepend=0.0) / capital
    std = float(returns.std(ddof=1))
    if std <= 0.0:
        return 0.0
    return float(returns.mean()) / std * math.sqrt(TRADING_DAYS)


def _decode_ticks(raw_t, raw_s) -> tuple:
    return max(1.0, abs(float(raw_t))), max(1.0, abs(float(raw_s)))


def calibrate(bars_train, strategy: str, instrument: InstrumentSpec,
              penalty_weight: float = 1e-3, cmaes_opts: dict | None = None,
              model_id: int = 4, dt: float = 1.0, seed: int = 0,
              literal_short: bool = False, exit_on_opposite: bool = False,
              capital: float = DEFAULT_CAPITAL):
    """Fit the combined parameter vector to the training window.

    Minimizes -Sharpe(train) plus an L1 penalty on the model parameters
    (filter strategy only) over model parameters + signal offset + target
    + stop ("kf", dimension arity+3) or periods + offset + target + stop
    ("ma", dimension 5). Candidates that trade never or fail numerically
    score +inf. Ticks are rounded to integers after optimization.
    Deterministic for a fixed seed. Returns :class:`StrategyParams` or
    :class:`MaParams`.
    """
    bars_train = tuple(bars_train)
    if not bars_train:
        raise ValueError("training window is empty")
    if strategy not in ("kf", "ma"):
        raise ValueError(f"unknown strategy {strategy!r}")
    opts = dict(cmaes_opts or {})
    sigma = float(opts.pop("sigma", 1.0))
    max_iter = int(opts.pop("max_iter", 60))
    lam = opts.pop("lambda", None)
    init_mean = opts.pop("init_mean", None)
    tol_mean = float(opts.pop("tol_mean", 1e-10))
    if opts:
        raise ValueError(f"unknown cmaes options: {sorted(opts)}")

    opens, highs, lows, closes, _ = _bar_arrays(bars_train)

    def run_candidate(signals, target, stop):
        res = _kernels.simulate_trades(
            opens, highs, lows, closes, signals, instrument.tick_size,
            instrument.tick_value, instrument.commission, target, stop,
            exit_on_opposite)
        pnls, equity = res[6], res[7]
        if pnls.shape[0] == 0:
            return math.inf
        sharpe = _sharpe_from_equity(equity, capital)
        if sharpe == 0.0 or not math.isfinite(sharpe):
            return math.inf
        return -sharpe

    if strategy == "kf":
        arity = MODEL_ARITY[model_id]
        dim = arity + 3

        def evaluate(raw):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ModelAssemblyWarning)
                try:
                    model = ModelParams(p=tuple(raw[:arity]),
                                        model_id=model_id, dt=dt)
                    spec = build_model(model)
                    preds = _predicted_measurements(spec, closes)
                except (ValueError, FloatingPointError):
                    return math.inf
            if not np.all(np.isfinite(preds)):
                return math.inf
            signals = _threshold_signals(preds, closes, abs(float(raw[arity])),
                                         literal_short)
            target, stop = _decode_ticks(raw[arity + 1], raw[arity + 2])
            base = run_candidate(signals, target, stop)
            if not math.isfinite(base):
                return base
            return base + penalty_weight * float(np.abs(raw[:arity]).sum())

        if init_mean is None:
            init_mean = np.concatenate([np.full(arity, 0.5), [1.0, 30.0, 30.0]])
    else:
        dim = 5

        def evaluate(raw):
            sp = max(1, int(round(abs(float(raw[0])))))
            lp = max(sp + 1, int(round(abs(float(raw[1])))))
            signals = ma_crossover_signals(bars_train, sp, lp,
                                           abs(float(raw[2])), literal_short)
            target, stop = _decode_ticks(raw[3], raw[4])
            return run_candidate(signals, target, stop)

        if init_mean is None:
            init_mean = np.array([5.0, 20.0, 1.0, 30.0, 30.0])

    best_x, _best_f, _trace = cmaes_minimize(
        Objective(eval=evaluate, dim=dim), init_mean, sigma, seed=seed,
        max_iter=max_iter, lam=lam, tol_mean=tol_mean)

    if strategy == "kf":
        arity = MODEL_ARITY[model_id]
        target, stop = _decode_ticks(best_x[arity + 1], best_x[arity + 2])
        return StrategyParams(
            model=ModelParams(p=tuple(best_x[:arity]), model_id=model_id, dt=dt),
            signal_offset=abs(float(best_x[arity])),
            profit_target_ticks=int(round(target)),
            stop_loss_ticks=int(round(stop)))
    sp = max(1, int(round(abs(float(best_x[0])))))
    lp = max(sp + 1, int(round(abs(float(best_x[1])))))
    target, stop = _decode_ticks(best_x[3], best_x[4])
    return MaParams(short_period=sp, long_period=lp,
                    offset=abs(float(best_x[2])),
                    profit_target_ticks=int(round(target)),
                    stop_loss_ticks=int(round(stop)))
