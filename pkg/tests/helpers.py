"""Shared test utilities.

The centerpiece is a brute-force joint-Gaussian oracle: it builds the
full stacked distribution of (x_1..x_T, z_1..z_T) for a linear-Gaussian
chain with plain numpy (no package code) and answers filtering,
prediction and smoothing queries by partitioned conditioning. Slow and
simple on purpose — every formula is the textbook block identity.
"""

from __future__ import annotations

import datetime

import numpy as np

from lgss.lgssm import LgssmSpec


# ---------------------------------------------------------------------------
# joint-Gaussian machinery


def condition_mvn(mean, cov, obs_idx, obs_vals):
    """Condition N(mean, cov) on entries ``obs_idx`` being ``obs_vals``."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    all_idx = np.arange(mean.size)
    keep = np.setdiff1d(all_idx, obs_idx)
    saa = cov[np.ix_(keep, keep)]
    sab = cov[np.ix_(keep, obs_idx)]
    sbb = cov[np.ix_(obs_idx, obs_idx)]
    gain = sab @ np.linalg.inv(sbb)
    mu = mean[keep] + gain @ (np.asarray(obs_vals, float) - mean[obs_idx])
    sig = saa - gain @ sab.T
    return keep, mu, 0.5 * (sig + sig.T)


def mvn_logpdf(x, mean, cov):
    x = np.asarray(x, float) - np.asarray(mean, float)
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0, "oracle covariance must be positive definite"
    quad = x @ np.linalg.solve(cov, x)
    return -0.5 * (x.size * np.log(2.0 * np.pi) + logdet + quad)


def stacked_joint(spec: LgssmSpec, horizon: int, controls=None):
    """Joint of the stacked vector (x_1..x_T, z_1..z_T).

    Returns (mean, cov, n, k): states occupy the first T·n entries in
    time order, measurements the remaining T·k.
    """
    n = spec.state_dim
    k = spec.obs_dim
    mean = np.array(spec.init.mean, dtype=float)
    cov = np.array(spec.init.cov, dtype=float)
    for t in range(2, horizon + 1):
        f = spec.f_at(t)
        u = (np.ones(spec.control_dim) if controls is None
             else np.asarray(controls[t - 2], float))
        const = spec.b_at(t) @ u + spec.c_at(t)
        q = spec.q_at(t)
        top = mean.size
        last = slice(top - n, top)
        new_mean = np.concatenate([mean, f @ mean[last] + const])
        new_cov = np.zeros((top + n, top + n))
        new_cov[:top, :top] = cov
        cross = cov[:, last] @ f.T
        new_cov[:top, top:] = cross
        new_cov[top:, :top] = cross.T
        new_cov[top:, top:] = f @ cov[last, last] @ f.T + q
        mean, cov = new_mean, new_cov
    # append measurements z_t = H_t x_t + d_t + v_t
    sx = horizon * n
    big_h = np.zeros((horizon * k, sx))
    big_d = np.zeros(horizon * k)
    big_r = np.zeros((horizon * k, horizon * k))
    for t in range(1, horizon + 1):
        rows = slice((t - 1) * k, t * k)
        cols = slice((t - 1) * n, t * n)
        big_h[rows, cols] = spec.h_at(t)
        big_d[rows] = spec.d_at(t)
        big_r[rows, rows] = spec.r_at(t)
    full_mean = np.concatenate([mean, big_h @ mean + big_d])
    full_cov = np.zeros((sx + horizon * k, sx + horizon * k))
    full_cov[:sx, :sx] = cov
    cross = cov @ big_h.T
    full_cov[:sx, sx:] = cross
    full_cov[sx:, :sx] = cross.T
    full_cov[sx:, sx:] = big_h @ cov @ big_h.T + big_r
    return full_mean, 0.5 * (full_cov + full_cov.T), n, k


class JointOracle:
    """Answers filter/smoother queries from the stacked joint."""

    def __init__(self, spec: LgssmSpec, observations, controls=None):
        obs = np.asarray(observations, dtype=float)
        if obs.ndim == 1:
            obs = obs[:, None]
        self.obs = obs
        self.horizon = obs.shape[0]
        self.mean, self.cov, self.n, self.k = stacked_joint(
            spec, self.horizon, controls)

    def _z_idx(self, upto):
        sx = self.horizon * self.n
        return sx + np.arange(upto * self.k)

    def _x_block(self, t):
        return np.arange((t - 1) * self.n, t * self.n)

    def _conditioned_state(self, t, n_obs):
        """Moments of x_t given z_1..z_{n_obs}."""
        if n_obs == 0:
            blk = self._x_block(t)
            return self.mean[blk], self.cov[np.ix_(blk, blk)]
        keep, mu, sig = condition_mvn(
            self.mean, self.cov, self._z_idx(n_obs),
            self.obs[:n_obs].ravel())
        pos = np.searchsorted(keep, self._x_block(t))
        return mu[pos], sig[np.ix_(pos, pos)]

    def filtered(self, t):
        return self._conditioned_state(t, t)

    def predicted(self, t):
        return self._conditioned_state(t, t - 1)

    def smoothed(self, t):
        return self._conditioned_state(t, self.horizon)

    def future_only(self, t, include_current=False):
        """Moments of x_t given z_{t+1}..z_T (or z_t..z_T)."""
        first = t - 1 if include_current else t
        if first >= self.horizon:
            blk = self._x_block(t)
            return self.mean[blk], self.cov[np.ix_(blk, blk)]
        sx = self.horizon * self.n
        idx = sx + np.arange(first * self.k, self.horizon * self.k)
        keep, mu, sig = condition_mvn(self.mean, self.cov, idx,
                                      self.obs[first:].ravel())
        pos = np.searchsorted(keep, self._x_block(t))
        return mu[pos], sig[np.ix_(pos, pos)]

    def loglik_increments(self):
        """log p(z_t | z_1..z_{t-1}) for each t."""
        sx = self.horizon * self.n
        z_mean = self.mean[sx:]
        z_cov = self.cov[sx:, sx:]
        z = self.obs.ravel()
        out = []
        for t in range(1, self.horizon + 1):
            rows = np.arange((t - 1) * self.k, t * self.k)
            if t == 1:
                mu, sig = z_mean[rows], z_cov[np.ix_(rows, rows)]
            else:
                past = np.arange((t - 1) * self.k)
                keep, mu_all, sig_all = condition_mvn(
                    z_mean, z_cov, past, z[past])
                pos = np.searchsorted(keep, rows)
                mu, sig = mu_all[pos], sig_all[np.ix_(pos, pos)]
            out.append(mvn_logpdf(z[rows], mu, sig))
        return np.array(out)


# ---------------------------------------------------------------------------
# gain replay for the feedback-offset model


def replay_gain_offsets(spec: LgssmSpec, horizon: int):
    """Per-step state offsets c_2..c_T produced by the gain feedback rule.

    The Kalman gain sequence is data-independent, so the feedback offsets
    can be precomputed by running the covariance recursion alone. Uses
    straight numpy; the only package interaction is reading the spec's
    matrices and the offset rule's scale/center.
    """
    rule = spec.c_offset
    scale = np.asarray(rule.scale, dtype=float)
    center = np.asarray(rule.center, dtype=float)
    n = spec.state_dim
    p = np.array(spec.init.cov, dtype=float)
    eye = np.eye(n)
    offsets = []
    gain = None
    for t in range(1, horizon + 1):
        if t >= 2:
            k_prev = np.zeros(n) if gain is None else gain
            offsets.append(scale * (center - k_prev))
            f = spec.f_at(t)
            p = f @ p_post @ f.T + spec.q_at(t)
        h = spec.h_at(t)
        r = spec.r_at(t)
        s = h @ p @ h.T + r
        gain_mat = p @ h.T @ np.linalg.inv(s)
        a = eye - gain_mat @ h
        p_post = a @ p @ a.T + gain_mat @ r @ gain_mat.T
        gain = gain_mat.ravel()
    return np.array(offsets)


def explicit_offset_spec(spec: LgssmSpec, horizon: int) -> LgssmSpec:
    """Clone a gain-feedback spec with the offsets replayed explicitly."""
    import dataclasses

    offsets = replay_gain_offsets(spec, horizon)

    def c_at(t):
        return offsets[t - 2]

    return dataclasses.replace(spec, c_offset=c_at)


# ---------------------------------------------------------------------------
# random model generators (respecting positive-definiteness constraints)


def random_spd(rng, n, scale=1.0, min_eig=0.1):
    a = rng.normal(size=(n, n))
    return scale * (a @ a.T + min_eig * np.eye(n))


def random_params(rng, model_id):
    """Random parameter tuple for a canned model with Q ≻ 0 and R ≻ 0."""
    if model_id == 0:
        return (rng.uniform(-0.95, 0.95), rng.uniform(0.2, 1.5),
                rng.uniform(0.2, 1.5), rng.uniform(0.5, 4.0))
    if model_id in (1, 2):
        p1 = rng.uniform(0.3, 1.5) * rng.choice([-1.0, 1.0])
        p3 = rng.uniform(0.3, 1.5)
        p2 = rng.uniform(-0.9, 0.9) * p3          # |p2| < |p3| keeps Q PD
        p4 = rng.uniform(0.3, 2.0)
        p5 = rng.uniform(0.5, 4.0)
        if model_id == 1:
            return (p1, p2, p3, p4, p5)
        return (p1, p2, p3, p4, p5, rng.uniform(0.5, 4.0))
    core = (
        rng.uniform(-0.95, 0.95),                  # f11
        rng.uniform(-0.5, 0.5),                    # f12
        rng.uniform(-0.95, 0.95),                  # f22
        rng.uniform(0.5, 1.5),                     # h1
        rng.uniform(-0.8, 0.8),                    # h2
    )
    p6 = rng.uniform(0.3, 1.2) * rng.choice([-1.0, 1.0])
    p8 = rng.uniform(0.3, 1.2)
    p7 = rng.uniform(-0.9, 0.9) * p8              # |p7| < |p8| keeps Q PD
    tail = (p6, p7, p8, rng.uniform(0.3, 2.0),
            rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0))
    if model_id == 3:
        return core + tail
    feedback = (rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3),
                rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3))
    return core + tail + feedback


def random_chain(rng, n=2, k=1, stable=True):
    """Random fully-general LgssmSpec pieces as plain arrays."""
    f = rng.normal(scale=0.6, size=(n, n))
    if stable:
        eigs = np.abs(np.linalg.eigvals(f)).max()
        if eigs > 0.95:
            f *= 0.9 / eigs
    h = rng.normal(size=(k, n))
    q = random_spd(rng, n, scale=0.5)
    r = random_spd(rng, k, scale=0.5)
    b = rng.normal(scale=0.3, size=(n, 1))
    return f, b, h, q, r


# ---------------------------------------------------------------------------
# synthetic market data


def make_bars(n=300, seed=0, drift=0.05, vol=1.0, start=100.0,
              wick=0.6, start_date=datetime.date(2020, 1, 1)):
    """Synthetic daily OHLC bars from a drifting random walk on closes."""
    from lgss.backtest import Bar

    rng = np.random.default_rng(seed)
    closes = start + np.cumsum(rng.normal(drift, vol, n))
    opens = np.concatenate([[start], closes[:-1]])
    highs = np.maximum(opens, closes) + rng.uniform(0.0, wick, n)
    lows = np.minimum(opens, closes) - rng.uniform(0.0, wick, n)
    return tuple(
        Bar(timestamp=start_date + datetime.timedelta(days=i),
            open=float(opens[i]), high=float(highs[i]),
            low=float(lows[i]), close=float(closes[i]))
        for i in range(n))


def bars_to_csv(path, bars):
    with open(path, "w") as fh:
        fh.write("date,open,high,low,close\n")
        for b in bars:
            fh.write(f"{b.timestamp.isoformat()},{b.open:.6f},{b.high:.6f},"
                     f"{b.low:.6f},{b.close:.6f}\n")
    return path
