"""Pure-Python fallback for the compiled kernels.

Replays the compiled backend's scalar arithmetic in the identical order,
so the two backends produce bit-identical outputs; only the speed
differs. Used automatically when the compiled extension is unavailable.
"""

from __future__ import annotations

import numpy as np


def kf_pred_meas(closes, f, h, q, r, x0, p0, c_scale, c_center,
                 gain_feedback):
    """See the compiled kernel: one-step-ahead predicted measurements."""
    closes = [float(v) for v in closes]
    f = [[float(v) for v in row] for row in np.asarray(f)]
    h = [float(v) for v in np.asarray(h)]
    q = [[float(v) for v in row] for row in np.asarray(q)]
    r = float(r)
    xp = [float(v) for v in np.asarray(x0)]
    pp = [[float(v) for v in row] for row in np.asarray(p0)]
    c_scale = [float(v) for v in np.asarray(c_scale)]
    c_center = [float(v) for v in np.asarray(c_center)]
    gain_feedback = bool(gain_feedback)

    t_len = len(closes)
    n = len(f)
    out = [0.0] * t_len
    ph = [0.0] * n
    kg = [0.0] * n
    xq = [0.0] * n
    a = [[0.0] * n for _ in range(n)]
    tmp = [[0.0] * n for _ in range(n)]
    po = [[0.0] * n for _ in range(n)]

    for i in range(t_len):
        for j in range(n):
            acc = 0.0
            for l in range(n):
                acc += pp[j][l] * h[l]
            ph[j] = acc
        s = r
        for j in range(n):
            s += h[j] * ph[j]
        y = closes[i]
        for j in range(n):
            y -= h[j] * xp[j]
        for j in range(n):
            kg[j] = ph[j] / s
        for j in range(n):
            xq[j] = xp[j] + kg[j] * y
        for j in range(n):
            for l in range(n):
                a[j][l] = (1.0 if j == l else 0.0) - kg[j] * h[l]
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += a[j][m] * pp[m][l]
                tmp[j][l] = acc
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += tmp[j][m] * a[l][m]
                po[j][l] = acc + r * kg[j] * kg[l]
        for j in range(n):
            if gain_feedback:
                cj = c_scale[j] * (c_center[j] - kg[j])
            else:
                cj = 0.0
            acc = cj
            for l in range(n):
                acc += f[j][l] * xq[l]
            xp[j] = acc
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += f[j][m] * po[m][l]
                tmp[j][l] = acc
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += tmp[j][m] * f[l][m]
                pp[j][l] = acc + q[j][l]
        acc = 0.0
        for j in range(n):
            acc += h[j] * xp[j]
        out[i] = acc
    return np.array(out, dtype=np.float64)


def simulate_trades(opens, highs, lows, closes, signals, tick_size,
                    tick_value, commission, target_ticks, stop_ticks,
                    exit_on_opposite):
    """See the compiled kernel: single-contract trade simulation."""
    opens = [float(v) for v in opens]
    highs = [float(v) for v in highs]
    lows = [float(v) for v in lows]
    closes = [float(v) for v in closes]
    signals = [int(v) for v in signals]
    tick_size = float(tick_size)
    tick_value = float(tick_value)
    commission = float(commission)
    target_ticks = float(target_ticks)
    stop_ticks = float(stop_ticks)
    exit_on_opposite = bool(exit_on_opposite)

    t_len = len(opens)
    entry_idx = []
    exit_idx = []
    dirs = []
    entry_pxs = []
    exit_pxs = []
    reasons = []
    pnls = []
    equity = [0.0] * t_len

    pos = 0
    pending = 0
    flip_pending = False
    ent_i = 0
    ent_px = 0.0
    tgt = 0.0
    stp = 0.0
    realized = 0.0

    for i in range(t_len):
        if pos != 0 and flip_pending:
            px = opens[i]
            gross = pos * (px - ent_px) / tick_size * tick_value
            realized += gross - 2.0 * commission
            entry_idx.append(ent_i)
            exit_idx.append(i)
            dirs.append(pos)
            entry_pxs.append(ent_px)
            exit_pxs.append(px)
            reasons.append(2)
            pnls.append(gross - 2.0 * commission)
            pos = 0
            flip_pending = False
        if pending != 0 and pos == 0:
            pos = pending
            pending = 0
            ent_i = i
            ent_px = opens[i]
            if pos > 0:
                tgt = ent_px + target_ticks * tick_size
                stp = ent_px - stop_ticks * tick_size
            else:
                tgt = ent_px - target_ticks * tick_size
                stp = ent_px + stop_ticks * tick_size
        if pos != 0:
            exited = False
            reason = 0
            px = 0.0
            if pos > 0:
                if lows[i] <= stp:
                    exited = True
                    px = stp
                    reason = 1
                elif highs[i] >= tgt:
                    exited = True
                    px = tgt
                    reason = 0
            else:
                if highs[i] >= stp:
                    exited = True
                    px = stp
                    reason = 1
                elif lows[i] <= tgt:
                    exited = True
                    px = tgt
                    reason = 0
            if (not exited) and i == t_len - 1:
                exited = True
                px = closes[i]
                reason = 3
            if exited:
                gross = pos * (px - ent_px) / tick_size * tick_value
                realized += gross - 2.0 * commission
                entry_idx.append(ent_i)
                exit_idx.append(i)
                dirs.append(pos)
                entry_pxs.append(ent_px)
                exit_pxs.append(px)
                reasons.append(reason)
                pnls.append(gross - 2.0 * commission)
                pos = 0
                flip_pending = False
            elif exit_on_opposite and signals[i] == -pos:
                flip_pending = True
        if pos == 0 and signals[i] != 0:
            pending = signals[i]
        if pos != 0:
            equity[i] = realized + pos * (closes[i] - ent_px) / tick_size * tick_value
        else:
            equity[i] = realized

    return (np.array(entry_idx, dtype=np.int64),
            np.array(exit_idx, dtype=np.int64),
            np.array(dirs, dtype=np.int64),
            np.array(entry_pxs, dtype=np.float64),
            np.array(exit_pxs, dtype=np.float64),
            np.array(reasons, dtype=np.int64),
            np.array(pnls, dtype=np.float64),
            np.array(equity, dtype=np.float64))
