# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot-path kernels: the per-bar filter prediction loop used by the
trend-following signal generator, and the trade-simulation loop.

The arithmetic is written as explicit scalar loops in a fixed order; the
pure-Python fallback (`_speedup_py`) replays the identical order so both
backends produce bit-identical results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def kf_pred_meas(const double[::1] closes, const double[:, ::1] f,
                 const double[::1] h, const double[:, ::1] q, double r,
                 const double[::1] x0, const double[:, ::1] p0,
                 const double[::1] c_scale, const double[::1] c_center,
                 bint gain_feedback):
    """One-step-ahead predicted measurements over a close series.

    Runs the scalar-measurement Kalman filter (Joseph covariance update)
    with ``(x0, p0)`` as the step-1 predictive moments. Entry ``i`` of the
    returned array is H x̂_{i+2|i+1}, the predicted measurement for the
    *next* bar after observing closes[0..i]. With ``gain_feedback`` the
    state offset c = c_scale·(c_center − K_prev) is rebuilt each step
    from the gain just computed.
    """
    cdef Py_ssize_t t_len = closes.shape[0]
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t i, j, l, m

    out_arr = np.empty(t_len, dtype=np.float64)
    cdef double[::1] out = out_arr

    xp_arr = np.empty(n, dtype=np.float64)
    xq_arr = np.empty(n, dtype=np.float64)
    ph_arr = np.empty(n, dtype=np.float64)
    k_arr = np.empty(n, dtype=np.float64)
    pp_arr = np.empty((n, n), dtype=np.float64)
    po_arr = np.empty((n, n), dtype=np.float64)
    a_arr = np.empty((n, n), dtype=np.float64)
    tmp_arr = np.empty((n, n), dtype=np.float64)
    cdef double[::1] xp = xp_arr
    cdef double[::1] xq = xq_arr
    cdef double[::1] ph = ph_arr
    cdef double[::1] kg = k_arr
    cdef double[:, ::1] pp = pp_arr
    cdef double[:, ::1] po = po_arr
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] tmp = tmp_arr

    cdef double s, y, acc, cj

    for j in range(n):
        xp[j] = x0[j]
        for l in range(n):
            pp[j, l] = p0[j, l]

    for i in range(t_len):
        # measurement update
        for j in range(n):
            acc = 0.0
            for l in range(n):
                acc += pp[j, l] * h[l]
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
                a[j, l] = (1.0 if j == l else 0.0) - kg[j] * h[l]
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += a[j, m] * pp[m, l]
                tmp[j, l] = acc
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += tmp[j, m] * a[l, m]
                po[j, l] = acc + r * kg[j] * kg[l]
        # time update to the next bar's predictive moments
        for j in range(n):
            if gain_feedback:
                cj = c_scale[j] * (c_center[j] - kg[j])
            else:
                cj = 0.0
            acc = cj
            for l in range(n):
                acc += f[j, l] * xq[l]
            xp[j] = acc
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += f[j, m] * po[m, l]
                tmp[j, l] = acc
        for j in range(n):
            for l in range(n):
                acc = 0.0
                for m in range(n):
                    acc += tmp[j, m] * f[l, m]
                pp[j, l] = acc + q[j, l]
        acc = 0.0
        for j in range(n):
            acc += h[j] * xp[j]
        out[i] = acc
    return out_arr


def simulate_trades(const double[::1] opens, const double[::1] highs,
                    const double[::1] lows, const double[::1] closes,
                    const cnp.int64_t[::1] signals,
                    double tick_size, double tick_value, double commission,
                    double target_ticks, double stop_ticks,
                    bint exit_on_opposite):
    """Single-contract trade simulation over aligned OHLC bars and signals.

    A nonzero signal while flat queues an entry at the next bar's open.
    From the entry bar onward, the stop is checked before the target
    inside each bar; with ``exit_on_opposite`` an opposite signal exits
    at the following open. A position still open after the last bar is
    closed at the final close. Returns
    (entry_idx, exit_idx, direction, entry_px, exit_px, reason, pnl,
    equity) with reason codes 0=target 1=stop 2=signal_flip 3=end_of_data;
    pnl is net of two commission sides, equity is the cumulative net
    curve marked to market at each close.
    """
    cdef Py_ssize_t t_len = opens.shape[0]
    cdef Py_ssize_t i, n_tr = 0

    entry_idx_arr = np.empty(t_len, dtype=np.int64)
    exit_idx_arr = np.empty(t_len, dtype=np.int64)
    dir_arr = np.empty(t_len, dtype=np.int64)
    reason_arr = np.empty(t_len, dtype=np.int64)
    entry_px_arr = np.empty(t_len, dtype=np.float64)
    exit_px_arr = np.empty(t_len, dtype=np.float64)
    pnl_arr = np.empty(t_len, dtype=np.float64)
    equity_arr = np.empty(t_len, dtype=np.float64)
    cdef cnp.int64_t[::1] entry_idx = entry_idx_arr
    cdef cnp.int64_t[::1] exit_idx = exit_idx_arr
    cdef cnp.int64_t[::1] dirs = dir_arr
    cdef cnp.int64_t[::1] reasons = reason_arr
    cdef double[::1] entry_px = entry_px_arr
    cdef double[::1] exit_px = exit_px_arr
    cdef double[::1] pnls = pnl_arr
    cdef double[::1] equity = equity_arr

    cdef cnp.int64_t pos = 0, pending = 0
    cdef bint flip_pending = 0
    cdef Py_ssize_t ent_i = 0
    cdef double ent_px = 0.0, tgt = 0.0, stp = 0.0
    cdef double realized = 0.0, px = 0.0, gross
    cdef cnp.int64_t reason
    cdef bint exited

    for i in range(t_len):
        if pos != 0 and flip_pending:
            px = opens[i]
            gross = pos * (px - ent_px) / tick_size * tick_value
            realized += gross - 2.0 * commission
            entry_idx[n_tr] = ent_i
            exit_idx[n_tr] = i
            dirs[n_tr] = pos
            entry_px[n_tr] = ent_px
            exit_px[n_tr] = px
            reasons[n_tr] = 2
            pnls[n_tr] = gross - 2.0 * commission
            n_tr += 1
            pos = 0
            flip_pending = 0
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
            exited = 0
            reason = 0
            px = 0.0
            if pos > 0:
                if lows[i] <= stp:
                    exited = 1
                    px = stp
                    reason = 1
                elif highs[i] >= tgt:
                    exited = 1
                    px = tgt
                    reason = 0
            else:
                if highs[i] >= stp:
                    exited = 1
                    px = stp
                    reason = 1
                elif lows[i] <= tgt:
                    exited = 1
                    px = tgt
                    reason = 0
            if (not exited) and i == t_len - 1:
                exited = 1
                px = closes[i]
                reason = 3
            if exited:
                gross = pos * (px - ent_px) / tick_size * tick_value
                realized += gross - 2.0 * commission
                entry_idx[n_tr] = ent_i
                exit_idx[n_tr] = i
                dirs[n_tr] = pos
                entry_px[n_tr] = ent_px
                exit_px[n_tr] = px
                reasons[n_tr] = reason
                pnls[n_tr] = gross - 2.0 * commission
                n_tr += 1
                pos = 0
                flip_pending = 0
            elif exit_on_opposite and signals[i] == -pos:
                flip_pending = 1
        if pos == 0 and signals[i] != 0:
            pending = signals[i]
        if pos != 0:
            equity[i] = realized + pos * (closes[i] - ent_px) / tick_size * tick_value
        else:
            equity[i] = realized

    return (entry_idx_arr[:n_tr].copy(), exit_idx_arr[:n_tr].copy(),
            dir_arr[:n_tr].copy(), entry_px_arr[:n_tr].copy(),
            exit_px_arr[:n_tr].copy(), reason_arr[:n_tr].copy(),
            pnl_arr[:n_tr].copy(), equity_arr)
