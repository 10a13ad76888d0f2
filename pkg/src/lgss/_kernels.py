"""Backend selection for the hot-path kernels.

Prefers the compiled extension; falls back to the pure-Python mirror when
the build is unavailable. ``BACKEND`` reports which one is active; both
produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

try:
    from . import _speedup as _impl
    BACKEND = "compiled"
except ImportError:                                    # pragma: no cover
    from . import _speedup_py as _impl
    BACKEND = "python"

from . import _speedup_py as python_backend

active_backend = _impl


def kf_pred_meas(closes, f, h, q, r, x0, p0, c_scale, c_center,
                 gain_feedback):
    """One-step-ahead predicted measurement series (active backend)."""
    return _impl.kf_pred_meas(
        np.ascontiguousarray(closes, dtype=np.float64),
        np.ascontiguousarray(f, dtype=np.float64),
        np.ascontiguousarray(h, dtype=np.float64).ravel(),
        np.ascontiguousarray(q, dtype=np.float64),
        float(r),
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(p0, dtype=np.float64),
        np.ascontiguousarray(c_scale, dtype=np.float64),
        np.ascontiguousarray(c_center, dtype=np.float64),
        bool(gain_feedback),
    )


def simulate_trades(opens, highs, lows, closes, signals, tick_size,
                    tick_value, commission, target_ticks, stop_ticks,
                    exit_on_opposite):
    """Trade-simulation loop (active backend)."""
    return _impl.simulate_trades(
        np.ascontiguousarray(opens, dtype=np.float64),
        np.ascontiguousarray(highs, dtype=np.float64),
        np.ascontiguousarray(lows, dtype=np.float64),
        np.ascontiguousarray(closes, dtype=np.float64),
        np.ascontiguousarray(signals, dtype=np.int64),
        float(tick_size), float(tick_value), float(commission),
        float(target_ticks), float(stop_ticks), bool(exit_on_opposite),
    )
